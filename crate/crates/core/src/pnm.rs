//! Binary portable pixmaps (PGM `P5`, PPM `P6`) for masks, occupancy
//! images, potential fields and replay overlays.

use std::io::Write;

use crate::camera::DrivableMask;
use crate::error::{Error, Result};
use crate::field::PotentialField;
use crate::grid::Grid;
use crate::world::OccupancyImage;

pub fn encode_pgm(img: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.cells());
    out
}

pub fn encode_ppm(img: &Grid<[u8; 3]>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for px in img.cells() {
        out.extend_from_slice(px);
    }
    out
}

pub fn write(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

/// Splits the header off a `P5`/`P6` file: magic, width, height, payload.
fn parse_header(bytes: &[u8]) -> Result<(&str, usize, usize, &[u8])> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(Error::Image("truncated header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| Error::Image("header is not ASCII".into()))?);
    }
    i += 1;
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Image(format!("bad header number {s:?}")));
    let (w, h, max) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if max != 255 {
        return Err(Error::Image(format!("unsupported maxval {max}")));
    }
    Ok((fields[0], w, h, bytes.get(i..).unwrap_or(&[])))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<u8>> {
    let (magic, w, h, data) = parse_header(bytes)?;
    if magic != "P5" {
        return Err(Error::Image(format!("expected P5, found {magic}")));
    }
    if data.len() != w * h {
        return Err(Error::Image(format!("expected {} bytes of pixels, found {}", w * h, data.len())));
    }
    Ok(Grid::from_vec(w, h, data.to_vec()))
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Grid<[u8; 3]>> {
    let (magic, w, h, data) = parse_header(bytes)?;
    if magic != "P6" {
        return Err(Error::Image(format!("expected P6, found {magic}")));
    }
    if data.len() != 3 * w * h {
        return Err(Error::Image(format!("expected {} bytes of pixels, found {}", 3 * w * h, data.len())));
    }
    Ok(Grid::from_vec(w, h, data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()))
}

pub fn occupancy_image(img: &OccupancyImage) -> Grid<u8> {
    img.free.map(|&f| if f { 255 } else { 0 })
}

pub fn mask_image(mask: &DrivableMask) -> Grid<u8> {
    mask.cells().map(|&d| if d { 255 } else { 0 })
}

/// Any nonzero pixel is drivable.
pub fn mask_from_image(img: &Grid<u8>) -> Result<DrivableMask> {
    DrivableMask::new(img.map(|&p| p > 0))
}

/// Blue (low) to red (high) over the finite range; obstacles black; the
/// goal pixel white.
pub fn field_image(field: &PotentialField) -> Grid<[u8; 3]> {
    let finite = || field.grid().cells().iter().copied().filter(|u| u.is_finite());
    let lo = finite().fold(f64::INFINITY, f64::min);
    let hi = finite().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let goal = field.goal();
    Grid::from_fn(field.width(), field.height(), |u, v| {
        let x = *field.grid().get(u, v);
        if (u, v) == (goal.0, goal.1) {
            [255, 255, 255]
        } else if !x.is_finite() {
            [0, 0, 0]
        } else {
            let t = ((x - lo) / span).sqrt();
            let r = (255.0 * t).round() as u8;
            [r, (80.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8, 255 - r]
        }
    })
}

/// Gray background from a mask, with colored dots stamped on top.
pub fn overlay(mask: &DrivableMask, dots: impl IntoIterator<Item = ((usize, usize), [u8; 3])>) -> Grid<[u8; 3]> {
    let mut img = mask.cells().map(|&d| if d { [200, 200, 200] } else { [40, 40, 40] });
    for ((u, v), c) in dots {
        if u < img.width() && v < img.height() {
            *img.get_mut(u, v) = c;
        }
    }
    img
}
