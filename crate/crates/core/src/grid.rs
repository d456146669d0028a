use serde::{Deserialize, Serialize};

/// Integer pixel `(u, v)`; `u` grows rightward, `v` downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel(pub usize, pub usize);

impl Pixel {
    pub fn u(self) -> usize {
        self.0
    }

    pub fn v(self) -> usize {
        self.1
    }

    pub fn to_subpixel(self) -> SubPixel {
        SubPixel(self.0 as f64, self.1 as f64)
    }

    pub fn distance(self, other: Pixel) -> f64 {
        self.to_subpixel().distance(other.to_subpixel())
    }
}

/// Continuous image position. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubPixel(pub f64, pub f64);

impl SubPixel {
    pub fn distance(self, other: SubPixel) -> f64 {
        (self.0 - other.0).hypot(self.1 - other.1)
    }

    /// Nearest pixel, or `None` when it falls outside a `width x height` image.
    pub fn nearest(self, width: usize, height: usize) -> Option<Pixel> {
        let u = (self.0 + 0.5).floor();
        let v = (self.1 + 0.5).floor();
        if u < 0.0 || v < 0.0 || u >= width as f64 || v >= height as f64 {
            return None;
        }
        Some(Pixel(u as usize, v as usize))
    }
}

/// Row-major 2D raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    cells: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            cells: vec![fill; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Panics if `cells.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, cells: Vec<T>) -> Self {
        assert_eq!(cells.len(), width * height, "grid size mismatch");
        Self {
            width,
            height,
            cells,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut cells = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                cells.push(f(u, v));
            }
        }
        Self {
            width,
            height,
            cells,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, u: isize, v: isize) -> bool {
        u >= 0 && v >= 0 && (u as usize) < self.width && (v as usize) < self.height
    }

    pub fn get(&self, u: usize, v: usize) -> &T {
        &self.cells[v * self.width + u]
    }

    pub fn get_mut(&mut self, u: usize, v: usize) -> &mut T {
        &mut self.cells[v * self.width + u]
    }

    pub fn at(&self, p: Pixel) -> &T {
        self.get(p.0, p.1)
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    /// Iterates `(pixel, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (Pixel, &T)> {
        let w = self.width;
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, c)| (Pixel(i % w, i / w), c))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(f).collect(),
        }
    }

    /// 4-connected neighbours of `p` that lie inside the grid.
    pub fn neighbours4(&self, p: Pixel) -> impl Iterator<Item = Pixel> {
        let (w, h) = (self.width, self.height);
        let Pixel(u, v) = p;
        [
            (u.wrapping_sub(1), v),
            (u + 1, v),
            (u, v.wrapping_sub(1)),
            (u, v + 1),
        ]
        .into_iter()
        .filter(move |&(a, b)| a < w && b < h)
        .map(|(a, b)| Pixel(a, b))
    }
}
