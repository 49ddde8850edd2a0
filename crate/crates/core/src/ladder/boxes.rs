//! Dyadic decomposition of `R^d` into the cell `D_0` and the boxes of `D_k`, `k >= 1`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, Result};

/// Cell of the dyadic decomposition containing a normalized point `w = (z - y0) / κ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "cell", rename_all = "snake_case")]
pub enum BoxIndex {
    /// `D_0 = {some |w^i| < 1} ∪ (-2, 2)^d`.
    Origin,
    /// `Π_i signs[i] · [2^{gamma[i]}, 2^{gamma[i]+1})` with `k = Σ gamma[i] >= 1`.
    Box { k: u32, gamma: Vec<u32>, signs: Vec<i8> },
}

impl BoxIndex {
    /// Shell index `k`; `D_0` has index 0.
    pub fn k(&self) -> u32 {
        match self {
            BoxIndex::Origin => 0,
            BoxIndex::Box { k, .. } => *k,
        }
    }

    /// Whether the normalized point lies in this cell.
    pub fn contains(&self, w: &[f64]) -> bool {
        match self {
            BoxIndex::Origin => in_origin(w),
            BoxIndex::Box { gamma, signs, .. } => {
                gamma.len() == w.len()
                    && w.iter().zip(gamma).zip(signs).all(|((&x, &g), &s)| {
                        let v = f64::from(s) * x;
                        let lo = (g as f64).exp2();
                        v >= lo && v < 2.0 * lo
                    })
            }
        }
    }
}

fn in_origin(w: &[f64]) -> bool {
    w.iter().any(|x| x.abs() < 1.0) || w.iter().all(|x| x.abs() < 2.0)
}

/// Exact `floor(log2(v))` for finite `v >= 1`.
fn floor_log2(v: f64) -> u32 {
    let mut g = v.log2().floor().max(0.0) as u32;
    while (g as f64).exp2() > v {
        g -= 1;
    }
    while ((g + 1) as f64).exp2() <= v {
        g += 1;
    }
    g
}

/// Classifies `z` relative to the shifted and scaled decomposition `y0 + κ D_k`.
pub fn box_index(z: &[f64], y0: &[f64], kappa: f64) -> Result<BoxIndex> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(domain(format!("kappa must be positive, got {kappa}")));
    }
    if z.len() != y0.len() || z.is_empty() {
        return Err(domain(format!("point dimension {} differs from center dimension {}", z.len(), y0.len())));
    }
    let w: Vec<f64> = z.iter().zip(y0).map(|(a, b)| (a - b) / kappa).collect();
    if w.iter().any(|x| !x.is_finite()) {
        return Err(domain("point has non-finite coordinates"));
    }
    if in_origin(&w) {
        return Ok(BoxIndex::Origin);
    }
    let gamma: Vec<u32> = w.iter().map(|x| floor_log2(x.abs())).collect();
    let signs = w.iter().map(|&x| if x > 0.0 { 1 } else { -1 }).collect();
    Ok(BoxIndex::Box { k: gamma.iter().sum(), gamma, signs })
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Number of boxes in `D_k`: `2^d · C(d + k - 1, d - 1)`.
pub fn box_count(k: u32, d: usize) -> Result<u128> {
    if k == 0 {
        return Err(domain("box count applies to k >= 1; D_0 is a single cell"));
    }
    if d == 0 || d > 64 {
        return Err(domain(format!("dimension must lie in 1..=64, got {d}")));
    }
    let d64 = d as u64;
    Ok((1u128 << d) * binomial(d64 + u64::from(k) - 1, d64 - 1))
}

/// All boxes of `D_k` in lexicographic order of `(gamma, signs)`.
pub fn enumerate_boxes(k: u32, d: usize) -> Result<Vec<BoxIndex>> {
    box_count(k, d)?;
    let mut compositions = Vec::new();
    let mut current = vec![0u32; d];
    compose(k, 0, &mut current, &mut compositions);
    let mut out = Vec::new();
    for gamma in compositions {
        for mask in 0..(1u64 << d) {
            let signs = (0..d).map(|i| if mask >> (d - 1 - i) & 1 == 1 { 1 } else { -1 }).collect();
            out.push(BoxIndex::Box { k, gamma: gamma.clone(), signs });
        }
    }
    Ok(out)
}

fn compose(remaining: u32, axis: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for g in 0..=remaining {
        current[axis] = g;
        compose(remaining - g, axis + 1, current, out);
    }
}

/// Outcome of [`box_partition_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCheckReport {
    pub d: usize,
    pub points: u64,
    pub origin_points: u64,
    /// Points whose own cell does not contain them.
    pub containment_failures: u64,
    /// Points also contained in a neighbouring cell.
    pub overlap_failures: u64,
    pub k_max: u32,
    /// `(k, enumerated, formula)` for `k = 1..=k_max`.
    pub counts: Vec<(u32, u128, u128)>,
    pub count_failures: u64,
    pub holds: bool,
}

/// Cells that share a face or corner with `cell`, plus `D_0`.
fn neighbours(cell: &BoxIndex, d: usize) -> Vec<BoxIndex> {
    let BoxIndex::Box { gamma, signs, .. } = cell else {
        return Vec::new();
    };
    let mut out = vec![BoxIndex::Origin];
    for m in 0..3usize.pow(d as u32) {
        let g: Option<Vec<u32>> = gamma
            .iter()
            .enumerate()
            .map(|(i, &g)| u32::try_from(i64::from(g) + (m / 3usize.pow(i as u32) % 3) as i64 - 1).ok())
            .collect();
        let Some(g) = g else { continue };
        let k: u32 = g.iter().sum();
        if k == 0 {
            continue;
        }
        for flip in 0..(1u64 << d) {
            let s: Vec<i8> = signs.iter().enumerate().map(|(i, &s)| if flip >> i & 1 == 1 { -s } else { s }).collect();
            let candidate = BoxIndex::Box { k, gamma: g.clone(), signs: s };
            if &candidate != cell {
                out.push(candidate);
            }
        }
    }
    out
}

/// Classifies `points` random points (log-uniform magnitudes, random signs, some exactly on
/// dyadic edges) and checks containment, disjointness against neighbouring cells and the
/// box counts for `k = 1..=k_max`.
pub fn box_partition_check(d: usize, k_max: u32, points: u64, seed: u64) -> Result<BoxCheckReport> {
    if d == 0 || d > 8 {
        return Err(domain(format!("box check supports dimensions 1..=8, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = vec![0.0; d];
    let mut report = BoxCheckReport {
        d,
        points,
        origin_points: 0,
        containment_failures: 0,
        overlap_failures: 0,
        k_max,
        counts: Vec::new(),
        count_failures: 0,
        holds: true,
    };
    for _ in 0..points {
        let w: Vec<f64> = (0..d)
            .map(|_| {
                let magnitude = if rng.random_bool(0.1) {
                    f64::from(rng.random_range(-2i32..6)).exp2()
                } else {
                    rng.random_range(-3.0f64..6.0).exp2()
                };
                if rng.random_bool(0.5) { magnitude } else { -magnitude }
            })
            .collect();
        let cell = box_index(&w, &center, 1.0)?;
        if cell == BoxIndex::Origin {
            report.origin_points += 1;
        }
        if !cell.contains(&w) {
            report.containment_failures += 1;
        }
        if neighbours(&cell, d).iter().any(|other| other.contains(&w)) {
            report.overlap_failures += 1;
        }
    }
    for k in 1..=k_max {
        let boxes = enumerate_boxes(k, d)?;
        let distinct: HashSet<&BoxIndex> = boxes.iter().collect();
        let formula = box_count(k, d)?;
        if distinct.len() != boxes.len() || boxes.len() as u128 != formula {
            report.count_failures += 1;
        }
        report.counts.push((k, distinct.len() as u128, formula));
    }
    report.holds = report.containment_failures == 0 && report.overlap_failures == 0 && report.count_failures == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_examples() {
        let b = box_index(&[3.0, -5.0], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(b, BoxIndex::Box { k: 3, gamma: vec![1, 2], signs: vec![1, -1] });
        assert_eq!(box_index(&[0.5, 7.0], &[0.0, 0.0], 1.0).unwrap(), BoxIndex::Origin);
        let edge = box_index(&[2.0, 2.0], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(edge, BoxIndex::Box { k: 2, gamma: vec![1, 1], signs: vec![1, 1] });
    }

    #[test]
    fn inner_square_belongs_to_origin() {
        // All |w^i| in [1, 2): not covered by the axis strips, only by (-2, 2)^d.
        assert_eq!(box_index(&[1.5, -1.5], &[0.0, 0.0], 1.0).unwrap(), BoxIndex::Origin);
    }

    #[test]
    fn counts_match_formula() {
        assert_eq!(box_count(3, 2).unwrap(), 16);
        assert_eq!(box_count(7, 1).unwrap(), 2);
        assert_eq!(box_count(2, 3).unwrap(), 48);
        assert!(box_count(0, 2).is_err());
        for d in 1..=3 {
            for k in 1..=5 {
                assert_eq!(enumerate_boxes(k, d).unwrap().len() as u128, box_count(k, d).unwrap());
            }
        }
    }

    #[test]
    fn partition_check_small() {
        for d in 1..=3 {
            let r = box_partition_check(d, 4, 500, 9).unwrap();
            assert!(r.holds, "{r:?}");
            assert!(r.origin_points > 0 && r.origin_points < 500);
        }
    }

    #[test]
    fn scaling_and_shift() {
        let b = box_index(&[10.0 + 6.0, 10.0 - 10.0], &[10.0, 10.0], 2.0).unwrap();
        assert_eq!(b, BoxIndex::Box { k: 3, gamma: vec![1, 2], signs: vec![1, -1] });
        assert!(box_index(&[1.0], &[0.0], 0.0).is_err());
    }
}
