//! Truncated tensor-algebra arithmetic and signatures of piecewise-linear paths.
//!
//! A [`TruncatedSignature`] of dimension `d` truncated at level `p` stores one
//! dense block per level `k = 0..=p`, block `k` holding the `d^k` coefficients
//! of the multi-indices `(i1, .., ik)` in lexicographic order (first index
//! most significant). Level 0 is the scalar `1`.
//!
//! For a straight segment with increment `Δ` the level-`k` block is
//! `Δ^{⊗k} / k!`; a polyline is the ordered tensor product of its segments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSignature {
    dim: usize,
    level: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedSignature {
    /// The group identity `(1, 0, 0, ..)`.
    pub fn identity(dim: usize, level: usize) -> Result<Self> {
        check_shape(dim, level)?;
        let levels = (0..=level)
            .map(|k| {
                let mut block = vec![0.0; dim.pow(k as u32)];
                if k == 0 {
                    block[0] = 1.0;
                }
                block
            })
            .collect();
        Ok(Self { dim, level, levels })
    }

    /// Truncated tensor exponential of one linear segment.
    pub fn segment(increment: &[f64], level: usize) -> Result<Self> {
        let dim = increment.len();
        check_shape(dim, level)?;
        if increment.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("segment increment has non-finite entries"));
        }
        let mut levels = Vec::with_capacity(level + 1);
        levels.push(vec![1.0]);
        for k in 1..=level {
            let prev = &levels[k - 1];
            let scale = 1.0 / k as f64;
            let mut block = Vec::with_capacity(prev.len() * dim);
            for &a in prev.iter() {
                block.extend(increment.iter().map(|&x| a * x * scale));
            }
            levels.push(block);
        }
        Ok(Self { dim, level, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Coefficient block of level `k`.
    pub fn level_coeffs(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    /// Coefficient for a zero-based multi-index; the empty index is level 0.
    pub fn coeff(&self, index: &[usize]) -> f64 {
        assert!(index.len() <= self.level, "multi-index longer than truncation level");
        let flat = index.iter().fold(0usize, |acc, &i| {
            assert!(i < self.dim, "multi-index entry out of range");
            acc * self.dim + i
        });
        self.levels[index.len()][flat]
    }

    /// Total coefficient count, `Σ_{k=0..p} d^k`.
    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Levels `1..=p` concatenated, dropping the constant level-0 term.
    pub fn to_features(&self) -> Vec<f64> {
        self.levels[1..].iter().flatten().copied().collect()
    }

    /// All levels concatenated, including level 0.
    pub fn to_flat(&self) -> Vec<f64> {
        self.levels.iter().flatten().copied().collect()
    }

    /// Truncated tensor product `self ⊗ rhs` (Chen concatenation).
    pub fn chen_product(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim || self.level != rhs.level {
            return Err(Error::invalid(format!(
                "signature shape mismatch: (d={}, p={}) vs (d={}, p={})",
                self.dim, self.level, rhs.dim, rhs.level
            )));
        }
        let levels = (0..=self.level)
            .map(|k| {
                let mut block = vec![0.0; self.dim.pow(k as u32)];
                for split in 0..=k {
                    let left = &self.levels[split];
                    let right = &rhs.levels[k - split];
                    let stride = right.len();
                    for (i, &a) in left.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let out = &mut block[i * stride..(i + 1) * stride];
                        for (o, &b) in out.iter_mut().zip(right) {
                            *o += a * b;
                        }
                    }
                }
                block
            })
            .collect();
        Ok(Self {
            dim: self.dim,
            level: self.level,
            levels,
        })
    }

    /// In-place right multiplication by a segment exponential.
    ///
    /// Updates from the top level down so each level reads the old lower ones.
    fn extend_by_increment(&mut self, increment: &[f64]) {
        let seg = segment_powers(increment, self.level);
        for k in (1..=self.level).rev() {
            let mut block = std::mem::take(&mut self.levels[k]);
            for split in 0..k {
                let left = &self.levels[split];
                let right = &seg[k - split];
                let stride = right.len();
                for (i, &a) in left.iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (o, &b) in block[i * stride..(i + 1) * stride].iter_mut().zip(right) {
                        *o += a * b;
                    }
                }
            }
            self.levels[k] = block;
        }
    }
}

fn segment_powers(increment: &[f64], level: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(level + 1);
    out.push(vec![1.0]);
    for k in 1..=level {
        let scale = 1.0 / k as f64;
        let block = out[k - 1]
            .iter()
            .flat_map(|&a| increment.iter().map(move |&x| a * x * scale))
            .collect();
        out.push(block);
    }
    out
}

fn check_shape(dim: usize, level: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("signature dimension must be positive"));
    }
    if level == 0 {
        return Err(Error::invalid("truncation level must be positive"));
    }
    Ok(())
}

/// Signature of the piecewise-linear interpolation of `points`.
pub fn stream_signature<P: AsRef<[f64]>>(points: &[P], level: usize) -> Result<TruncatedSignature> {
    if points.len() < 2 {
        return Err(Error::insufficient(format!(
            "a stream needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].as_ref().len();
    let mut sig = TruncatedSignature::identity(dim, level)?;
    let mut increment = vec![0.0; dim];
    for pair in points.windows(2) {
        let (a, b) = (pair[0].as_ref(), pair[1].as_ref());
        if a.len() != dim || b.len() != dim {
            return Err(Error::invalid("stream points have inconsistent dimension"));
        }
        for ((dx, &x0), &x1) in increment.iter_mut().zip(a).zip(b) {
            *dx = x1 - x0;
        }
        if increment.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("stream contains non-finite coordinates"));
        }
        sig.extend_by_increment(&increment);
    }
    Ok(sig)
}
