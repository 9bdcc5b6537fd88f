mod common;

use common::{barycentric, random_simplex};
use moodsig::spectrum::{emit_plot, kde2d, read_plot_csv, simplex_project, Bandwidth, PlotSpec, CONTOUR_MASSES};
use proptest::prelude::*;

fn simplex() -> impl Strategy<Value = [f64; 3]> {
    (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        [lo, hi - lo, 1.0 - hi]
    })
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
const V: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.866_025_403_784_438_6]];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn projection_is_affine(p in simplex(), q in simplex(), lambda in 0.0f64..=1.0) {
        let mix: [f64; 3] = std::array::from_fn(|i| lambda * p[i] + (1.0 - lambda) * q[i]);
        let a = simplex_project(mix).unwrap().xy;
        let (bp, bq) = (simplex_project(p).unwrap().xy, simplex_project(q).unwrap().xy);
        for k in 0..2 {
            prop_assert!((a[k] - (lambda * bp[k] + (1.0 - lambda) * bq[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_components_relabels_vertices(p in simplex(), which in 0usize..6) {
        let s = PERMS[which];
        let permuted = [p[s[0]], p[s[1]], p[s[2]]];
        let got = simplex_project(permuted).unwrap().xy;
        // Component j of the original now weighs vertex i where s[i] = j.
        let mut want = [0.0; 2];
        for i in 0..3 {
            for k in 0..2 {
                want[k] += p[s[i]] * V[i][k];
            }
        }
        prop_assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        let plain = barycentric(permuted);
        prop_assert!((got[0] - plain[0]).abs() < 1e-12 && (got[1] - plain[1]).abs() < 1e-12);
    }

    #[test]
    fn projection_lands_in_the_triangle(p in simplex()) {
        let xy = simplex_project(p).unwrap().xy;
        prop_assert!(xy[1] >= -1e-15 && xy[1] <= 3f64.sqrt() * xy[0] + 1e-12 && xy[1] <= 3f64.sqrt() * (1.0 - xy[0]) + 1e-12);
    }
}

#[test]
fn worked_projection() {
    let xy = simplex_project([0.1, 0.5, 0.4]).unwrap().xy;
    assert!((xy[0] - 0.7).abs() < 1e-12);
    assert!((xy[1] - 0.2 * 3f64.sqrt()).abs() < 1e-12);
}

#[test]
fn off_simplex_inputs_are_rejected() {
    assert!(simplex_project([0.5, 0.6, 0.0]).is_err());
    assert!(simplex_project([-0.1, 0.6, 0.5]).is_err());
    let nearly = simplex_project([0.3, 0.3, 0.4 + 5e-7]).unwrap();
    assert!((nearly.probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

fn uniform_points(n: usize, seed: u64) -> Vec<moodsig::spectrum::SimplexPoint> {
    let mut rng = common::rng(seed);
    (0..n).map(|_| simplex_project(random_simplex(&mut rng)).unwrap()).collect()
}

#[test]
fn contours_enclose_their_share_of_uniform_points() {
    let pts = uniform_points(500, 21);
    let grid = kde2d(&pts, None, Bandwidth::Scott, 200).unwrap();
    for l in &grid.levels {
        let inside = pts.iter().filter(|p| grid.density_at(p.xy) >= l.density).count() as f64 / 500.0;
        assert!((inside - l.mass).abs() <= 0.10, "mass {}: {inside}", l.mass);
    }
}

#[test]
fn sampled_kernel_mass_matches_contour_levels() {
    let pts = uniform_points(1000, 8);
    let grid = kde2d(&pts, None, Bandwidth::Scott, 400).unwrap();
    let centres: Vec<[f64; 2]> = pts.iter().map(|p| p.xy).collect();
    let got = common::sampled_contour_mass(&grid, &centres, 100_000, 3);
    for (g, m) in got.iter().zip(CONTOUR_MASSES) {
        assert!((g - m).abs() <= 0.02, "{g} vs {m}");
    }
}

#[test]
fn duplicating_points_under_a_fixed_bandwidth_changes_nothing() {
    let pts = uniform_points(40, 5);
    let doubled: Vec<_> = pts.iter().chain(&pts).cloned().collect();
    let a = kde2d(&pts, None, Bandwidth::Fixed(0.05), 80).unwrap();
    let b = kde2d(&doubled, None, Bandwidth::Fixed(0.05), 80).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
    for (la, lb) in a.levels.iter().zip(&b.levels) {
        assert!((la.density - lb.density).abs() <= 1e-12 * la.density);
        assert_eq!(la.polylines.len(), lb.polylines.len());
    }
}

#[test]
fn contour_lines_are_closed_and_nested() {
    let pts = uniform_points(300, 9);
    let grid = kde2d(&pts, None, Bandwidth::Scott, 120).unwrap();
    let mut prev = f64::INFINITY;
    for l in &grid.levels {
        assert!(l.density < prev);
        prev = l.density;
        for line in &l.polylines {
            assert_eq!(line.first(), line.last());
        }
    }
}

#[test]
fn plot_files_round_trip_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let pts = uniform_points(60, 1);
    let grid = kde2d(&pts, None, Bandwidth::Scott, 50).unwrap();
    let spec = PlotSpec {
        title: "t".into(),
        vertex_labels: ["BD".into(), "HC".into(), "BPD".into()],
        comments: vec!["config_hash: 0".into()],
    };
    let a = emit_plot(&grid, &pts, &spec, &dir.path().join("a")).unwrap();
    let b = emit_plot(&grid, &pts, &spec, &dir.path().join("b")).unwrap();
    assert_eq!(std::fs::read(&a.svg).unwrap(), std::fs::read(&b.svg).unwrap());
    assert_eq!(std::fs::read(&a.csv).unwrap(), std::fs::read(&b.csv).unwrap());
    let parsed = read_plot_csv(&a.csv).unwrap();
    assert_eq!(parsed.values, grid.values);
    assert_eq!(parsed.points.len(), 60);
}
