//! Reference implementations shared by the integration tests and the
//! acceptance runner. None of them call into the library's numerics.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random path of `n` points in `d` dimensions, coordinates in [-1, 1].
pub fn random_path(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect()
}

/// Iterated integrals of the piecewise-linear path through `points`, levels
/// 0..=p, each level flattened row-major over multi-indices.
///
/// Every segment is cut into `m` steps; level k is accumulated as a
/// trapezoid sum of level k-1 against the increments, then two step sizes
/// are combined by Richardson extrapolation.
pub fn riemann_signature(points: &[Vec<f64>], level: usize, m: usize) -> Vec<Vec<f64>> {
    let coarse = trapezoid_signature(points, level, m);
    let fine = trapezoid_signature(points, level, 2 * m);
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| c.iter().zip(f).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
        .collect()
}

fn trapezoid_signature(points: &[Vec<f64>], level: usize, m: usize) -> Vec<Vec<f64>> {
    let d = points[0].len();
    let mut s: Vec<Vec<f64>> = (0..=level).map(|k| vec![0.0; d.pow(k as u32)]).collect();
    s[0][0] = 1.0;
    for pair in points.windows(2) {
        let dx: Vec<f64> = (0..d).map(|i| (pair[1][i] - pair[0][i]) / m as f64).collect();
        for _ in 0..m {
            // s_new[k] = s[k] + ((s[k-1] + s_new[k-1]) / 2) ⊗ dx, levels ascending.
            let mut prev_old = s[0].clone();
            for k in 1..=level {
                let old_k = s[k].clone();
                let (lower, upper) = s.split_at_mut(k);
                for (a, (po, pn)) in prev_old.iter().zip(&lower[k - 1]).enumerate() {
                    let mid = 0.5 * (po + pn);
                    for (i, dxi) in dx.iter().enumerate() {
                        upper[0][a * d + i] += mid * dxi;
                    }
                }
                prev_old = old_k;
            }
        }
    }
    s
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Plain-arithmetic barycentric projection onto (0,0), (1,0), (1/2, √3/2).
pub fn barycentric(p: [f64; 3]) -> [f64; 2] {
    [p[1] + 0.5 * p[2], p[2] * 3f64.sqrt() / 2.0]
}

/// Uniform draw from the probability simplex.
pub fn random_simplex(rng: &mut impl Rng) -> [f64; 3] {
    let mut u = [rng.random::<f64>(), rng.random::<f64>()];
    u.sort_by(f64::total_cmp);
    [u[0], u[1] - u[0], 1.0 - u[1]]
}

/// Fraction of draws from the kernel mixture (truncated to the triangle)
/// landing in grid cells with density at least each contour's threshold.
pub fn sampled_contour_mass(
    grid: &moodsig::spectrum::DensityGrid,
    centres: &[[f64; 2]],
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rng(seed);
    let [hx, hy] = grid.bandwidth;
    let mut hits = vec![0usize; grid.levels.len()];
    let mut kept = 0;
    while kept < samples {
        let c = centres[rng.random_range(0..centres.len())];
        let zx: f64 = StandardNormal.sample(&mut rng);
        let zy: f64 = StandardNormal.sample(&mut rng);
        let xy = [c[0] + hx * zx, c[1] + hy * zy];
        if !inside(xy) {
            continue;
        }
        kept += 1;
        let d = grid.density_at(xy);
        for (h, l) in hits.iter_mut().zip(&grid.levels) {
            if d >= l.density {
                *h += 1;
            }
        }
    }
    hits.iter().map(|&h| h as f64 / samples as f64).collect()
}

/// Inside the closed triangle (0,0), (1,0), (1/2, √3/2).
pub fn inside(xy: [f64; 2]) -> bool {
    let s3 = 3f64.sqrt();
    xy[1] >= 0.0 && xy[1] <= s3 * xy[0] && xy[1] <= s3 * (1.0 - xy[0])
}
