use std::collections::BTreeMap;

use super::kde::DensityGrid;

/// A crossing point on the segment between two neighbouring cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    /// Between (r, c) and (r, c + 1).
    H(i64, i64),
    /// Between (r, c) and (r + 1, c).
    V(i64, i64),
}

/// Iso-lines of `grid` at `level`, traced over cell centres.
///
/// The grid is padded with a ring of zeros and masked cells count as zero,
/// so every line is closed.
pub(crate) fn marching_squares(grid: &DensityGrid, level: f64) -> Vec<Vec<[f64; 2]>> {
    let n = grid.resolution as i64;
    let [dx, dy] = grid.cell_size();
    let value = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= n || c >= n {
            0.0
        } else {
            grid.value(r as usize, c as usize)
        }
    };
    let centre = |r: i64, c: i64| [(c as f64 + 0.5) * dx, (r as f64 + 0.5) * dy];
    let mut points: BTreeMap<Edge, [f64; 2]> = BTreeMap::new();
    let mut crossing = |e: Edge| -> Edge {
        points.entry(e).or_insert_with(|| {
            let (a, b) = match e {
                Edge::H(r, c) => ((r, c), (r, c + 1)),
                Edge::V(r, c) => ((r, c), (r + 1, c)),
            };
            let (va, vb) = (value(a.0, a.1), value(b.0, b.1));
            let t = if va == vb { 0.5 } else { ((level - va) / (vb - va)).clamp(0.0, 1.0) };
            let (pa, pb) = (centre(a.0, a.1), centre(b.0, b.1));
            [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
        });
        e
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for r in -1..n {
        for c in -1..n {
            let v = [value(r, c), value(r, c + 1), value(r + 1, c + 1), value(r + 1, c)];
            let case = v
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &x)| acc | (u8::from(x >= level) << i));
            let bottom = Edge::H(r, c);
            let right = Edge::V(r, c + 1);
            let top = Edge::H(r + 1, c);
            let left = Edge::V(r, c);
            let centre_in = v.iter().sum::<f64>() / 4.0 >= level;
            let pairs: &[(Edge, Edge)] = match case {
                0 | 15 => &[],
                1 | 14 => &[(left, bottom)],
                2 | 13 => &[(bottom, right)],
                3 | 12 => &[(left, right)],
                4 | 11 => &[(right, top)],
                6 | 9 => &[(bottom, top)],
                7 | 8 => &[(left, top)],
                5 if centre_in => &[(bottom, right), (left, top)],
                5 => &[(left, bottom), (right, top)],
                10 if centre_in => &[(left, bottom), (right, top)],
                10 => &[(bottom, right), (left, top)],
                _ => unreachable!("four-bit case"),
            };
            for &(a, b) in pairs {
                segments.push((crossing(a), crossing(b)));
            }
        }
    }
    chain(&segments)
        .into_iter()
        .map(|line| line.into_iter().map(|e| points[&e]).collect())
        .collect()
}

/// Joins segments sharing an edge crossing into polylines. Closed lines
/// repeat their first point at the end.
fn chain(segments: &[(Edge, Edge)]) -> Vec<Vec<Edge>> {
    let mut at: BTreeMap<Edge, Vec<usize>> = BTreeMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        at.entry(a).or_default().push(i);
        at.entry(b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let next = |from: Edge, used: &[bool]| -> Option<usize> { at[&from].iter().copied().find(|&s| !used[s]) };
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut forward = vec![a, b];
        let mut tip = b;
        while let Some(s) = next(tip, &used) {
            used[s] = true;
            let (p, q) = segments[s];
            tip = if p == tip { q } else { p };
            forward.push(tip);
        }
        if tip != a {
            let mut back = Vec::new();
            let mut tail = a;
            while let Some(s) = next(tail, &used) {
                used[s] = true;
                let (p, q) = segments[s];
                tail = if p == tail { q } else { p };
                back.push(tail);
            }
            back.reverse();
            back.extend(forward);
            forward = back;
        }
        lines.push(forward);
    }
    lines
}
