//! Axis-aligned histograms of terminal positions.

use serde::Serialize;

use crate::error::{config, Result};
use crate::scaling::ScalingFunction;

/// Uniform bins per axis: `bins[i]` cells of width `width[i]` starting at `lower[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub width: Vec<f64>,
    pub bins: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, width: Vec<f64>, bins: Vec<usize>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || width.len() != d || bins.len() != d {
            return Err(config("grid lower corner, widths and bin counts must share a positive dimension"));
        }
        if width.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || bins.iter().any(|&b| b == 0) {
            return Err(config("grid needs positive finite bin widths and at least one bin per axis"));
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(config("grid corner must be finite"));
        }
        Ok(Self { lower, width, bins })
    }

    /// Bins of width `φ⁻¹(t)/4` over a box of half-width `16 φ⁻¹(t)` centred at `start`.
    pub fn around(start: &[f64], t: f64, phi: &ScalingFunction) -> Result<Self> {
        let scale = phi.inverse(t)?;
        Self::centered(start, scale / 4.0, 16.0 * scale)
    }

    /// Cubic box of half-width `half_width` centred at `center` with bins of width `width`.
    pub fn centered(center: &[f64], width: f64, half_width: f64) -> Result<Self> {
        let per_axis = (2.0 * half_width / width).round().max(1.0) as usize;
        let extent = per_axis as f64 * width;
        Self::new(
            center.iter().map(|c| c - 0.5 * extent).collect(),
            vec![width; center.len()],
            vec![per_axis; center.len()],
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn n_cells(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.width.iter().product()
    }

    /// Flat cell index of `point`, or `None` outside the box.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        let mut flat = 0usize;
        for axis in 0..self.dim() {
            let s = ((point[axis] - self.lower[axis]) / self.width[axis]).floor();
            if !(s >= 0.0 && s < self.bins[axis] as f64) {
                return None;
            }
            flat = flat * self.bins[axis] + s as usize;
        }
        Some(flat)
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let mut center = vec![0.0; self.dim()];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let k = rem % self.bins[axis];
            rem /= self.bins[axis];
            center[axis] = self.lower[axis] + (k as f64 + 0.5) * self.width[axis];
        }
        center
    }
}

/// Counts of samples per cell plus the mass that fell outside the box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityHistogram {
    pub grid: GridSpec,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub n_paths: u64,
}

impl DensityHistogram {
    /// Factor turning a count into a density.
    pub fn density_factor(&self) -> f64 {
        1.0 / (self.n_paths as f64 * self.grid.cell_volume())
    }

    pub fn density(&self, flat: usize) -> f64 {
        self.counts[flat] as f64 * self.density_factor()
    }

    /// Integral of the histogram density over the box.
    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.n_paths as f64
    }
}

/// Histogram of `samples` on `grid`; samples outside the box go to the overflow count.
pub fn empirical_density<P: AsRef<[f64]>>(samples: &[P], grid: &GridSpec) -> Result<DensityHistogram> {
    if samples.is_empty() {
        return Err(config("histogram needs at least one sample"));
    }
    let mut counts = vec![0u64; grid.n_cells()];
    let mut overflow = 0u64;
    for s in samples {
        let s = s.as_ref();
        if s.len() != grid.dim() {
            return Err(config(format!("sample of dimension {} on a {}-dimensional grid", s.len(), grid.dim())));
        }
        match grid.locate(s) {
            Some(flat) => counts[flat] += 1,
            None => overflow += 1,
        }
    }
    Ok(DensityHistogram { grid: grid.clone(), counts, overflow, n_paths: samples.len() as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_in_one_bin() {
        let grid = GridSpec::new(vec![-0.5], vec![1.0], vec![1]).unwrap();
        let h = empirical_density(&vec![vec![0.0]; 10], &grid).unwrap();
        assert_eq!(h.density(0), 1.0);
        assert_eq!(h.total_mass(), 1.0);
    }

    #[test]
    fn overflow_and_degenerate_grids() {
        let grid = GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![2, 2]).unwrap();
        let h = empirical_density(&[vec![0.5, 1.5], vec![3.0, 0.0]], &grid).unwrap();
        assert_eq!(h.overflow, 1);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts.iter().sum::<u64>() + h.overflow, h.n_paths);
        assert!(GridSpec::new(vec![0.0], vec![0.0], vec![3]).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0], vec![0]).is_err());
    }

    #[test]
    fn centers_round_trip() {
        let grid = GridSpec::centered(&[1.0, -2.0], 0.25, 4.0).unwrap();
        assert_eq!(grid.bins, vec![32, 32]);
        for flat in [0, 5, 100, 1023] {
            assert_eq!(grid.locate(&grid.cell_center(flat)), Some(flat));
        }
    }
}
