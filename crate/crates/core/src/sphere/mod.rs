//! Hyperspherical harmonics on S³: mode bookkeeping, spectral fields,
//! quadrature grids and the synthesis/analysis transforms.

mod basis;
mod grid;
mod norms;
mod transform;

pub use basis::{gegenbauer, normalized_legendre, trig_factor, ReferenceBasis, SpherePoint};
pub use grid::{GridValues, SphereGrid};
pub use norms::{lp_norm, projection_kernel_diag, sobolev_norm, zonal_field, Lp};
pub use transform::{HarmonicTransform, RadialOrder};

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Volume of the unit three-sphere, `2π²`.
pub const VOLUME: f64 = 2.0 * PI * PI;

/// `(n, k)` label of a reference harmonic: `n ≥ 1` is the eigenvalue label of
/// `1 − Δ` (eigenvalue `n²`), `k ∈ [1, n²]` enumerates the pairs `(l, m)` with
/// `0 ≤ l < n`, `|m| ≤ l` as `k − 1 = l² + l + m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub n: usize,
    pub k: usize,
}

impl HarmonicIndex {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n * n {
            return Err(invalid(format!("harmonic index (n={n}, k={k}) out of range")));
        }
        Ok(Self { n, k })
    }

    pub fn from_lm(n: usize, l: usize, m: i64) -> Result<Self> {
        if l >= n || m.unsigned_abs() as usize > l {
            return Err(invalid(format!("(l={l}, m={m}) not admissible for n={n}")));
        }
        Ok(Self { n, k: ((l * l + l) as i64 + m + 1) as usize })
    }

    /// Degree `l` of the S² factor.
    pub fn l(&self) -> usize {
        ((self.k - 1) as f64).sqrt() as usize
    }

    pub fn m(&self) -> i64 {
        let l = self.l();
        (self.k - 1) as i64 - (l * l + l) as i64
    }

    /// Eigenvalue of `1 − Δ_{S³}`.
    pub fn eigenvalue(&self) -> f64 {
        (self.n * self.n) as f64
    }

    pub fn flat(&self) -> usize {
        degree_offset(self.n) + self.k - 1
    }
}

/// Number of modes with degree label below `n`.
pub fn degree_offset(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (n - 1) * n * (2 * n - 1) / 6
    }
}

/// Number of modes with `n ≤ n_max`.
pub fn mode_count(n_max: usize) -> usize {
    degree_offset(n_max + 1)
}

/// Index of the S² harmonic `(l, m)` in blocks laid out as `l² + l + m`.
#[inline]
pub(crate) fn s2_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Real spectral coefficients of a band-limited function on S³ in the
/// reference basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereField {
    n_max: usize,
    coeffs: Vec<f64>,
}

impl SphereField {
    pub fn zeros(n_max: usize) -> Self {
        Self { n_max, coeffs: vec![0.0; mode_count(n_max)] }
    }

    pub fn from_coeffs(n_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mode_count(n_max) {
            return Err(Error::DimensionMismatch { expected: mode_count(n_max), found: coeffs.len() });
        }
        Ok(Self { n_max, coeffs })
    }

    /// A single unit-coefficient mode scaled by `value`.
    pub fn single(n_max: usize, index: HarmonicIndex, value: f64) -> Self {
        let mut f = Self::zeros(n_max);
        f.set(index, value);
        f
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, index: HarmonicIndex) -> f64 {
        if index.n > self.n_max {
            0.0
        } else {
            self.coeffs[index.flat()]
        }
    }

    pub fn set(&mut self, index: HarmonicIndex, value: f64) {
        assert!(index.n <= self.n_max, "mode n={} above n_max={}", index.n, self.n_max);
        self.coeffs[index.flat()] = value;
    }

    /// Coefficients of the degree-`n` eigenspace `E_n`, length `n²`.
    pub fn block(&self, n: usize) -> &[f64] {
        &self.coeffs[degree_offset(n)..degree_offset(n + 1)]
    }

    pub fn block_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.coeffs[degree_offset(n)..degree_offset(n + 1)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (HarmonicIndex, f64)> + '_ {
        (1..=self.n_max)
            .flat_map(move |n| self.block(n).iter().enumerate().map(move |(i, &c)| (HarmonicIndex { n, k: i + 1 }, c)))
    }

    /// Squared `L²` norm equals the sum of squared coefficients (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut f = self.clone();
        f.scale(factor);
        f
    }

    /// `self += factor · other`; `other` may be truncated at a lower degree.
    pub fn add_scaled(&mut self, other: &SphereField, factor: f64) {
        let n = other.n_max.min(self.n_max);
        let len = mode_count(n);
        self.coeffs[..len].iter_mut().zip(&other.coeffs[..len]).for_each(|(a, b)| *a += factor * b);
    }

    pub fn sub(&self, other: &SphereField) -> Self {
        let mut f = self.clone();
        f.add_scaled(other, -1.0);
        f
    }

    /// Copy truncated or zero-padded to a new `n_max`.
    pub fn resized(&self, n_max: usize) -> Self {
        let mut f = Self::zeros(n_max);
        let len = mode_count(n_max.min(self.n_max));
        f.coeffs[..len].copy_from_slice(&self.coeffs[..len]);
        f
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Write as CSV rows `n,k,coeff`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "k", "coeff"])?;
        for (idx, c) in self.iter() {
            w.write_record([idx.n.to_string(), idx.k.to_string(), format!("{c:e}")])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    /// Read CSV rows `n,k,coeff`; `n_max` is the largest `n` present.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            n: usize,
            k: usize,
            coeff: f64,
        }
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(reader).deserialize() {
            let row: Row = rec?;
            rows.push((HarmonicIndex::new(row.n, row.k)?, row.coeff));
        }
        let n_max = rows.iter().map(|(i, _)| i.n).max().unwrap_or(1);
        let mut f = Self::zeros(n_max);
        for (i, c) in rows {
            f.set(i, c);
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_enumeration_covers_eigenspace() {
        for n in 1..8 {
            let mut seen = vec![false; n * n];
            for l in 0..n {
                for m in -(l as i64)..=(l as i64) {
                    let idx = HarmonicIndex::from_lm(n, l, m).unwrap();
                    assert_eq!(idx.l(), l);
                    assert_eq!(idx.m(), m);
                    seen[idx.k - 1] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
        assert!(HarmonicIndex::new(3, 10).is_err());
        assert!(HarmonicIndex::new(0, 1).is_err());
    }

    #[test]
    fn mode_counts() {
        assert_eq!(mode_count(1), 1);
        assert_eq!(mode_count(2), 5);
        assert_eq!(mode_count(8), 204);
        assert_eq!(degree_offset(3), 5);
    }

    #[test]
    fn csv_round_trip() {
        let mut f = SphereField::zeros(3);
        f.set(HarmonicIndex::new(2, 3).unwrap(), 0.25);
        f.set(HarmonicIndex::new(3, 9).unwrap(), -1.5e-3);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = SphereField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }
}
