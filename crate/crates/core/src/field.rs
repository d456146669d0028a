//! Per-camera numerical core: exact Euclidean distance transform of the
//! drivable mask and the image-space potential field the robot descends.

use serde::{Deserialize, Serialize};

use crate::camera::DrivableMask;
use crate::error::{Error, Result};
use crate::grid::{Grid, Pixel, SubPixel};

/// Distance (pixels) from each pixel center to the nearest non-drivable
/// pixel center. Zero on non-drivable pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    d: Grid<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.d.width()
    }

    pub fn height(&self) -> usize {
        self.d.height()
    }

    pub fn at(&self, p: Pixel) -> f64 {
        *self.d.at(p)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.d
    }
}

/// Exact EDT (Meijster, Roerdink and Hesselink), integer arithmetic
/// throughout so the result is the brute-force minimum bit for bit.
/// A mask without any non-drivable pixel yields `+inf` everywhere.
pub fn distance_transform(mask: &DrivableMask) -> DistanceField {
    let cells = mask.cells();
    let (w, h) = (cells.width(), cells.height());
    let inf = (w + h) as i64;

    // Column pass: vertical distance to the nearest obstacle in the column.
    let mut g = vec![0i64; w * h];
    for x in 0..w {
        g[x] = if *cells.get(x, 0) { inf } else { 0 };
        for y in 1..h {
            g[y * w + x] = if *cells.get(x, y) {
                g[(y - 1) * w + x] + 1
            } else {
                0
            };
        }
        for y in (0..h.saturating_sub(1)).rev() {
            let below = g[(y + 1) * w + x];
            if below < g[y * w + x] {
                g[y * w + x] = below + 1;
            }
        }
    }

    // Row pass: lower envelope of parabolas (x - i)^2 + g(i)^2.
    let mut out = vec![0.0f64; w * h];
    let mut s = vec![0usize; w];
    let mut t = vec![0i64; w];
    let limit = inf * inf;
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |x: i64, i: usize| (x - i as i64).pow(2) + row[i].pow(2);
        let sep = |i: usize, u: usize| {
            let (i64i, i64u) = (i as i64, u as i64);
            (i64u * i64u - i64i * i64i + row[u].pow(2) - row[i].pow(2)).div_euclid(2 * (i64u - i64i))
        };
        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..w {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wv = 1 + sep(s[q as usize], u);
                if wv < w as i64 {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wv;
                }
            }
        }
        for u in (0..w).rev() {
            let sq = f(u as i64, s[q as usize]);
            out[y * w + u] = if sq >= limit {
                f64::INFINITY
            } else {
                (sq as f64).sqrt()
            };
            if u as i64 == t[q as usize] {
                q -= 1;
            }
        }
    }
    DistanceField {
        d: Grid::from_vec(w, h, out),
    }
}

/// Weights of the attractive and repulsive terms and the repulsive cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub w_att: f64,
    pub w_rep: f64,
    /// Region of influence of an obstacle, pixels.
    pub d0: f64,
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_att >= 0.0 && self.w_rep >= 0.0 && self.d0 > 0.0) {
            return Err(Error::Config(format!(
                "potential params need w_att >= 0, w_rep >= 0, d0 > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Repulsive term for clearance `d > 0`; continuous at the cutoff.
    pub fn repulsive(&self, d: f64) -> f64 {
        if d <= self.d0 {
            self.w_rep * (1.0 / d - 1.0 / self.d0)
        } else {
            0.0
        }
    }

    pub fn attractive(&self, r: f64) -> f64 {
        self.w_att * r.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    u: Grid<f64>,
    goal: Pixel,
    params: PotentialParams,
}

impl PotentialField {
    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn goal(&self) -> Pixel {
        self.goal
    }

    pub fn params(&self) -> &PotentialParams {
        &self.params
    }

    pub fn at(&self, p: Pixel) -> f64 {
        *self.u.at(p)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.u
    }
}

/// `U(p) = w_att * sqrt(|p - g|) + R(d(p))` on drivable pixels with positive
/// clearance, `+inf` elsewhere.
pub fn compute_potential(
    mask: &DrivableMask,
    dist: &DistanceField,
    goal: Pixel,
    params: PotentialParams,
) -> Result<PotentialField> {
    params.validate()?;
    if !mask.is_drivable(goal) {
        return Err(Error::GoalNotDrivable { u: goal.0, v: goal.1 });
    }
    let u = Grid::from_fn(mask.width(), mask.height(), |i, j| {
        let p = Pixel(i, j);
        let d = dist.at(p);
        if !mask.is_drivable(p) || d <= 0.0 {
            return f64::INFINITY;
        }
        params.attractive(p.distance(goal)) + params.repulsive(d)
    });
    Ok(PotentialField { u, goal, params })
}

fn central_difference(field: &PotentialField, i: usize, j: usize) -> Option<[f64; 2]> {
    if i == 0 || j == 0 || i + 1 >= field.width() || j + 1 >= field.height() {
        return None;
    }
    let u = |a, b| field.at(Pixel(a, b));
    let g = [
        (u(i + 1, j) - u(i - 1, j)) / 2.0,
        (u(i, j + 1) - u(i, j - 1)) / 2.0,
    ];
    (g[0].is_finite() && g[1].is_finite() && u(i, j).is_finite()).then_some(g)
}

/// Bilinear interpolation of central-difference gradients at the (up to)
/// four pixels surrounding `pos`. Corners with zero weight are skipped.
pub fn sample_gradient(field: &PotentialField, pos: SubPixel) -> Result<[f64; 2]> {
    let undefined = || Error::GradientUndefined { u: pos.0, v: pos.1 };
    if !(pos.0.is_finite() && pos.1.is_finite()) || pos.0 < 0.0 || pos.1 < 0.0 {
        return Err(undefined());
    }
    let (i0, j0) = (pos.0.floor(), pos.1.floor());
    let (fu, fv) = (pos.0 - i0, pos.1 - j0);
    let (i0, j0) = (i0 as usize, j0 as usize);
    let mut acc = [0.0, 0.0];
    for (di, wu) in [(0, 1.0 - fu), (1, fu)] {
        for (dj, wv) in [(0, 1.0 - fv), (1, fv)] {
            let wgt = wu * wv;
            if wgt == 0.0 {
                continue;
            }
            let g = central_difference(field, i0 + di, j0 + dj).ok_or_else(undefined)?;
            acc[0] += wgt * g[0];
            acc[1] += wgt * g[1];
        }
    }
    Ok(acc)
}
