//! Simplex spectrum plots: 3-component probability or proportion vectors
//! drawn inside an equilateral triangle, with a kernel density estimate and
//! highest-density contours at 25, 50 and 75% enclosed mass.

mod contour;
mod kde;
mod plot;

use serde::{Deserialize, Serialize};

pub use crate::tasks::true_proportions;
pub use kde::{kde2d, Bandwidth, ContourLevel, DensityGrid, CONTOUR_MASSES};
pub use plot::{emit_plot, read_plot_csv, PlotCsv, PlotFiles, PlotSpec};

use crate::error::{Error, Result};

pub const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Triangle vertices V1, V2, V3.
pub const VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3_2]];

/// Tolerance on the sum of a probability vector before it is rejected.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    pub probs: [f64; 3],
    pub xy: [f64; 2],
}

/// Barycentric image of `probs` on the fixed triangle.
///
/// ```
/// use moodsig::spectrum::simplex_project;
/// let p = simplex_project([0.1, 0.5, 0.4]).unwrap();
/// assert!((p.xy[0] - 0.7).abs() < 1e-12);
/// assert!((p.xy[1] - 0.2 * 3f64.sqrt()).abs() < 1e-12);
/// ```
pub fn simplex_project(probs: [f64; 3]) -> Result<SimplexPoint> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid(format!("probability vector {probs:?} has a negative or non-finite entry")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::invalid(format!("probability vector {probs:?} sums to {sum}")));
    }
    let probs = if sum == 1.0 { probs } else { probs.map(|p| p / sum) };
    let mut xy = [0.0; 2];
    for (p, v) in probs.iter().zip(&VERTICES) {
        xy[0] += p * v[0];
        xy[1] += p * v[1];
    }
    Ok(SimplexPoint { probs, xy })
}

/// Whether `xy` lies inside or on the triangle, with slack `eps`.
pub fn in_triangle(xy: [f64; 2], eps: f64) -> bool {
    let [x, y] = xy;
    let s3 = 2.0 * SQRT3_2;
    y >= -eps && y <= s3 * x + eps && y <= s3 * (1.0 - x) + eps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        assert_eq!(simplex_project([1.0, 0.0, 0.0]).unwrap().xy, [0.0, 0.0]);
        assert_eq!(simplex_project([0.0, 1.0, 0.0]).unwrap().xy, [1.0, 0.0]);
        let c = simplex_project([1.0 / 3.0; 3]).unwrap().xy;
        assert!((c[0] - 0.5).abs() < 1e-15);
        assert!((c[1] - 3f64.sqrt() / 6.0).abs() < 1e-15);
        assert!((SQRT3_2 - 3f64.sqrt() / 2.0).abs() < 1e-16);
    }

    #[test]
    fn projection_errors_and_renormalisation() {
        assert!(simplex_project([-0.1, 0.6, 0.5]).is_err());
        assert!(simplex_project([0.3, 0.3, 0.3]).is_err());
        let p = simplex_project([0.5, 0.5, 5e-7]).unwrap();
        assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_membership() {
        assert!(in_triangle([0.5, 0.1], 0.0));
        assert!(in_triangle(VERTICES[2], 1e-12));
        assert!(!in_triangle([0.1, 0.5], 0.0));
        assert!(!in_triangle([0.5, -0.01], 0.0));
    }
}
