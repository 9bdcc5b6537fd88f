mod common;

use common::{close, riemann_signature};
use moodsig::sigcore::{stream_signature, TruncatedSignature};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn levels(s: &TruncatedSignature) -> Vec<Vec<f64>> {
    (0..=s.level()).map(|k| s.level_coeffs(k).to_vec()).collect()
}

/// Largest magnitude per level over `sigs`, at least 1.
fn scale(sigs: &[&TruncatedSignature]) -> Vec<f64> {
    let p = sigs[0].level();
    (0..=p)
        .map(|k| {
            sigs.iter()
                .flat_map(|s| s.level_coeffs(k).iter())
                .fold(1.0f64, |m, v| m.max(v.abs()))
        })
        .collect()
}

fn assert_close(a: &TruncatedSignature, b: &TruncatedSignature, scale: &[f64]) -> Result<(), TestCaseError> {
    for k in 0..=a.level() {
        for (x, y) in a.level_coeffs(k).iter().zip(b.level_coeffs(k)) {
            prop_assert!((x - y).abs() <= TOL * scale[k], "level {k}: {x} vs {y}");
        }
    }
    Ok(())
}

fn path() -> impl Strategy<Value = (Vec<Vec<f64>>, usize)> {
    (1usize..=4, 2usize..=20, 1usize..=3).prop_flat_map(|(d, n, p)| {
        (prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), n), Just(p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chen_identity_at_every_split((pts, p) in path(), cut in any::<prop::sample::Index>()) {
        prop_assume!(pts.len() >= 3);
        let k = 1 + cut.index(pts.len() - 2);
        let whole = stream_signature(&pts, p).unwrap();
        let left = stream_signature(&pts[..=k], p).unwrap();
        let right = stream_signature(&pts[k..], p).unwrap();
        let joined = left.chen_product(&right).unwrap();
        assert_close(&whole, &joined, &scale(&[&whole, &left, &right]))?;
    }

    #[test]
    fn level_two_shuffle((pts, _) in path()) {
        let s = stream_signature(&pts, 2).unwrap();
        let d = s.dim();
        let sc = scale(&[&s]);
        for i in 0..d {
            for j in 0..d {
                let lhs = s.coeff(&[i, j]) + s.coeff(&[j, i]);
                let rhs = s.coeff(&[i]) * s.coeff(&[j]);
                prop_assert!((lhs - rhs).abs() <= TOL * sc[2].max(sc[1] * sc[1]));
            }
        }
    }

    #[test]
    fn refinement_leaves_signature_unchanged((pts, p) in path(), at in any::<prop::sample::Index>(), t in 0.0f64..1.0) {
        let k = at.index(pts.len() - 1);
        let mid: Vec<f64> = pts[k].iter().zip(&pts[k + 1]).map(|(a, b)| a + t * (b - a)).collect();
        let mut refined = pts.clone();
        refined.insert(k + 1, mid);
        let a = stream_signature(&pts, p).unwrap();
        let b = stream_signature(&refined, p).unwrap();
        assert_close(&a, &b, &scale(&[&a, &b]))?;
    }

    #[test]
    fn reversed_path_is_the_inverse((pts, p) in path()) {
        let rev: Vec<Vec<f64>> = pts.iter().rev().cloned().collect();
        let s = stream_signature(&pts, p).unwrap();
        let r = stream_signature(&rev, p).unwrap();
        let id = TruncatedSignature::identity(s.dim(), p).unwrap();
        let sc = scale(&[&s, &r]);
        // Products of two level-scaled blocks bound the cancellation error.
        let sc: Vec<f64> = (0..=p).map(|k| (0..=k).map(|j| sc[j] * sc[k - j]).fold(0.0, f64::max)).collect();
        assert_close(&s.chen_product(&r).unwrap(), &id, &sc)?;
        assert_close(&r.chen_product(&s).unwrap(), &id, &sc)?;
    }

    #[test]
    fn translation_invariance((pts, p) in path(), shift in -5.0f64..5.0) {
        let moved: Vec<Vec<f64>> = pts.iter().map(|q| q.iter().map(|v| v + shift).collect()).collect();
        let a = stream_signature(&pts, p).unwrap();
        let b = stream_signature(&moved, p).unwrap();
        assert_close(&a, &b, &scale(&[&a, &b]))?;
    }
}

#[test]
fn matches_nested_riemann_sums() {
    let mut rng = common::rng(7);
    for _ in 0..50 {
        use rand::Rng;
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=6);
        let p = rng.random_range(1..=3);
        let pts = common::random_path(&mut rng, n, d);
        let oracle = riemann_signature(&pts, p, 64);
        let got = levels(&stream_signature(&pts, p).unwrap());
        for (k, (o, g)) in oracle.iter().zip(&got).enumerate() {
            for (x, y) in o.iter().zip(g) {
                assert!(close(*x, *y, 1e-6), "level {k}: oracle {x}, got {y}");
            }
        }
    }
}

#[test]
fn level_three_entry_of_a_segment_by_quadrature() {
    let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, -1.0, 0.5]];
    let oracle = riemann_signature(&pts, 3, 200);
    // (i, j, k) = (0, 1, 2) in row-major order over d = 3.
    let entry = oracle[3][3 + 2];
    assert!((entry + 1.0 / 12.0).abs() < 1e-9);
    let s = stream_signature(&pts, 3).unwrap();
    assert!((s.coeff(&[0, 1, 2]) - entry).abs() < 1e-9);
}

#[test]
fn l_shape_by_quadrature() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let oracle = riemann_signature(&pts, 2, 16);
    for (x, y) in oracle[2].iter().zip([0.5, 1.0, 0.0, 0.5]) {
        assert!((x - y).abs() < 1e-12);
    }
}
