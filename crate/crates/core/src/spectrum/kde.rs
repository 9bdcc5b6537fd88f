use serde::{Deserialize, Serialize};

use super::contour::marching_squares;
use super::{in_triangle, SimplexPoint, SQRT3_2};
use crate::error::{Error, Result};

/// Enclosed probability mass of the three contour lines, innermost first.
pub const CONTOUR_MASSES: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Scott's rule per axis: `std · n_eff^(-1/6)`.
    Scott,
    /// The same kernel std on both axes.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourLevel {
    /// Probability mass enclosed by the contour.
    pub mass: f64,
    /// Density threshold: the region is every cell with density `>= density`.
    pub density: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Density on a `resolution × resolution` grid of cells over the triangle's
/// bounding box. Cells whose centre is outside the triangle are masked and
/// hold 0; the rest integrate to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub resolution: usize,
    /// Kernel std along x and y.
    pub bandwidth: [f64; 2],
    /// Row-major, row 0 at y = 0.
    pub values: Vec<f64>,
    pub inside: Vec<bool>,
    pub levels: Vec<ContourLevel>,
}

impl DensityGrid {
    pub fn cell_size(&self) -> [f64; 2] {
        cell_size(self.resolution)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let [dx, dy] = self.cell_size();
        [(col as f64 + 0.5) * dx, (row as f64 + 0.5) * dy]
    }

    /// Grid cell containing `xy`, if it falls in the bounding box.
    pub fn cell_of(&self, xy: [f64; 2]) -> Option<(usize, usize)> {
        let [dx, dy] = self.cell_size();
        let (c, r) = ((xy[0] / dx).floor(), (xy[1] / dy).floor());
        let n = self.resolution as f64;
        if !(0.0..n).contains(&c) || !(0.0..n).contains(&r) {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    pub fn is_inside(&self, row: usize, col: usize) -> bool {
        self.inside[row * self.resolution + col]
    }

    /// Density of the cell containing `xy`; 0 outside the grid or the triangle.
    pub fn density_at(&self, xy: [f64; 2]) -> f64 {
        match self.cell_of(xy) {
            Some((r, c)) if self.is_inside(r, c) => self.value(r, c),
            _ => 0.0,
        }
    }

    /// Mass of the cells with density at least `level`.
    pub fn enclosed_mass(&self, level: f64) -> f64 {
        let [dx, dy] = self.cell_size();
        self.values
            .iter()
            .zip(&self.inside)
            .filter(|(v, inside)| **inside && **v >= level)
            .map(|(v, _)| v * dx * dy)
            .sum()
    }
}

fn cell_size(resolution: usize) -> [f64; 2] {
    [1.0 / resolution as f64, SQRT3_2 / resolution as f64]
}

/// Weighted Gaussian product-kernel density of `points`.
///
/// Kernel widths never fall below one cell, so a point set concentrated
/// on one location still yields a resolvable peak.
pub fn kde2d(points: &[SimplexPoint], weights: Option<&[f64]>, bandwidth: Bandwidth, resolution: usize) -> Result<DensityGrid> {
    if points.len() < 2 {
        return Err(Error::insufficient(format!("density needs at least 2 points, got {}", points.len())));
    }
    if resolution < 2 {
        return Err(Error::invalid("grid resolution must be at least 2"));
    }
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() != points.len() => return Err(Error::invalid("one weight per point required")),
        Some(w) => w.to_vec(),
        None => vec![1.0; points.len()],
    };
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::invalid("weights must be finite, nonnegative and not all zero"));
    }
    if points.iter().any(|p| !in_triangle(p.xy, 1e-9)) {
        return Err(Error::invalid("point outside the triangle"));
    }

    let cell = cell_size(resolution);
    let h = match bandwidth {
        Bandwidth::Fixed(h) if h.is_finite() && h > 0.0 => [h, h],
        Bandwidth::Fixed(h) => return Err(Error::invalid(format!("bandwidth {h} must be positive"))),
        Bandwidth::Scott => scott(points, &weights),
    };
    let h = [h[0].max(cell[0]), h[1].max(cell[1])];

    // density[r][c] = Σ_i w_i · ky[i][r] · kx[i][c]
    let n = resolution;
    let kernel = |axis: usize, i: usize| -> Vec<f64> {
        let centre = points[i].xy[axis];
        (0..n)
            .map(|k| {
                let z = ((k as f64 + 0.5) * cell[axis] - centre) / h[axis];
                (-0.5 * z * z).exp()
            })
            .collect()
    };
    let mut values = vec![0.0; n * n];
    for i in 0..points.len() {
        if weights[i] == 0.0 {
            continue;
        }
        let kx = kernel(0, i);
        let ky = kernel(1, i);
        for (r, &y) in ky.iter().enumerate() {
            let wy = weights[i] * y;
            if wy == 0.0 {
                continue;
            }
            for (v, &x) in values[r * n..(r + 1) * n].iter_mut().zip(&kx) {
                *v += wy * x;
            }
        }
    }

    let inside: Vec<bool> = (0..n * n)
        .map(|k| in_triangle([((k % n) as f64 + 0.5) * cell[0], ((k / n) as f64 + 0.5) * cell[1]], 0.0))
        .collect();
    let total: f64 = values.iter().zip(&inside).filter(|(_, i)| **i).map(|(v, _)| v).sum();
    if !(total > 0.0) {
        return Err(Error::insufficient("density vanishes on every cell inside the triangle"));
    }
    let scale = 1.0 / (total * cell[0] * cell[1]);
    for (v, &i) in values.iter_mut().zip(&inside) {
        *v = if i { *v * scale } else { 0.0 };
    }

    let mut grid = DensityGrid {
        resolution,
        bandwidth: h,
        values,
        inside,
        levels: Vec::new(),
    };
    grid.levels = hdr_levels(&grid)
        .into_iter()
        .zip(CONTOUR_MASSES)
        .map(|(density, mass)| ContourLevel {
            mass,
            density,
            polylines: marching_squares(&grid, density),
        })
        .collect();
    Ok(grid)
}

/// Per-axis Scott bandwidth with the weighted effective sample size.
fn scott(points: &[SimplexPoint], weights: &[f64]) -> [f64; 2] {
    let sw: f64 = weights.iter().sum();
    let sw2: f64 = weights.iter().map(|w| w * w).sum();
    let neff = sw * sw / sw2;
    let mut h = [0.0; 2];
    for (axis, h) in h.iter_mut().enumerate() {
        let mean = points.iter().zip(weights).map(|(p, w)| w * p.xy[axis]).sum::<f64>() / sw;
        let ss = points.iter().zip(weights).map(|(p, w)| w * (p.xy[axis] - mean).powi(2)).sum::<f64>() / sw;
        let correction = 1.0 - sw2 / (sw * sw);
        let var = if correction > 0.0 { ss / correction } else { 0.0 };
        *h = var.sqrt() * neff.powf(-1.0 / 6.0);
    }
    h
}

/// Density thresholds whose super-level sets hold each of [`CONTOUR_MASSES`].
fn hdr_levels(grid: &DensityGrid) -> Vec<f64> {
    let [dx, dy] = grid.cell_size();
    let mut sorted: Vec<f64> = grid
        .values
        .iter()
        .zip(&grid.inside)
        .filter(|(_, i)| **i)
        .map(|(v, _)| *v)
        .collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut out = Vec::with_capacity(CONTOUR_MASSES.len());
    let mut cum = 0.0;
    let mut k = 0;
    for mass in CONTOUR_MASSES {
        while k < sorted.len() {
            cum += sorted[k] * dx * dy;
            k += 1;
            if cum >= mass {
                break;
            }
        }
        out.push(sorted[k.saturating_sub(1)]);
    }
    out
}
