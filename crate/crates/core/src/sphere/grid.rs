use std::f64::consts::PI;

use super::basis::SpherePoint;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gauss_sin2};

/// Tensor-product quadrature on S³: Chebyshev-U in `χ`, Gauss–Legendre in
/// `cos θ`, uniform in `φ`. Exact for polynomials on ℝ⁴ of degree up to
/// `exactness` restricted to S³.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    exactness: usize,
    chi: Vec<f64>,
    chi_weights: Vec<f64>,
    theta: Vec<f64>,
    theta_weights: Vec<f64>,
    phi: Vec<f64>,
    phi_weight: f64,
}

impl SphereGrid {
    pub fn new(exactness: usize) -> Self {
        let m = exactness / 2 + 1;
        let (chi, chi_weights) = gauss_sin2(m);
        let (x, theta_weights) = gauss_legendre(m);
        // Ascending θ: nodes in cos θ come ascending, so reverse.
        let theta: Vec<f64> = x.iter().rev().map(|c| c.acos()).collect();
        let theta_weights: Vec<f64> = theta_weights.into_iter().rev().collect();
        let n_phi = exactness + 1;
        let phi = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        Self { exactness, chi, chi_weights, theta, theta_weights, phi, phi_weight: 2.0 * PI / n_phi as f64 }
    }

    /// Grid resolving products of two fields with `n ≤ n_max`.
    pub fn for_products(n_max: usize) -> Self {
        Self::new(2 * (n_max - 1))
    }

    /// Grid that dealiases the projection of a cubic nonlinearity.
    pub fn for_cubic(n_max: usize) -> Self {
        Self::new(4 * (n_max - 1))
    }

    /// Grid exact for `|u|^p` when `p` is an even integer and `u` has `n ≤ n_max`.
    pub fn for_power(n_max: usize, p: f64) -> Self {
        Self::new((p.ceil() as usize * (n_max - 1)).max(2 * (n_max - 1)))
    }

    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn chi_weights(&self) -> &[f64] {
        &self.chi_weights
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_weight(&self) -> f64 {
        self.phi_weight
    }

    /// `(n_χ, n_θ, n_φ)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.chi.len(), self.theta.len(), self.phi.len())
    }

    pub fn len(&self) -> usize {
        self.chi.len() * self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of nodes on each χ-slice.
    pub fn s2_len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    /// Node `(i, j, k)` lives at flat index `(i·n_θ + j)·n_φ + k`.
    pub fn node(&self, flat: usize) -> SpherePoint {
        let (_, nt, np) = self.dims();
        let (i, rest) = (flat / (nt * np), flat % (nt * np));
        SpherePoint::new(self.chi[i], self.theta[rest / np], self.phi[rest % np])
    }

    pub fn weight(&self, flat: usize) -> f64 {
        let (_, nt, np) = self.dims();
        let (i, rest) = (flat / (nt * np), flat % (nt * np));
        self.chi_weights[i] * self.theta_weights[rest / np] * self.phi_weight
    }

    /// All weights in flat node order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for &wc in &self.chi_weights {
            for &wt in &self.theta_weights {
                let v = wc * wt * self.phi_weight;
                w.extend(std::iter::repeat_n(v, self.phi.len()));
            }
        }
        w
    }

    pub fn total_weight(&self) -> f64 {
        self.chi_weights.iter().sum::<f64>() * self.theta_weights.iter().sum::<f64>() * 2.0 * PI
    }

    pub fn zeros(&self) -> GridValues {
        GridValues { dims: self.dims(), values: vec![0.0; self.len()] }
    }

    /// Sample a function at every node.
    pub fn sample(&self, f: impl Fn(SpherePoint) -> f64) -> GridValues {
        GridValues { dims: self.dims(), values: (0..self.len()).map(|i| f(self.node(i))).collect() }
    }

    pub fn integrate(&self, values: &GridValues) -> Result<f64> {
        values.check(self)?;
        let w = self.weights();
        Ok(crate::stats::pairwise_sum(&values.values.iter().zip(&w).map(|(v, w)| v * w).collect::<Vec<_>>()))
    }
}

/// Real values at the nodes of a [`SphereGrid`], in flat node order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl GridValues {
    pub fn from_values(grid: &SphereGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { dims: grid.dims(), values })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dims: self.dims, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check(&self, grid: &SphereGrid) -> Result<()> {
        if self.dims != grid.dims() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: self.values.len() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::VOLUME;

    #[test]
    fn total_weight_is_volume() {
        for d in [0, 1, 4, 12, 44] {
            let g = SphereGrid::new(d);
            assert!((g.total_weight() - VOLUME).abs() < 1e-12, "exactness {d}");
        }
    }

    #[test]
    fn integrates_even_monomials() {
        // ∫_{S³} x₁² x₄² = 2π² / (4·6) · 1, from E[x_i² x_j²] = 1/(N(N+2)) with N = 4.
        let g = SphereGrid::new(4);
        let v = g.sample(|p| {
            let x = p.to_cartesian();
            x[0] * x[0] * x[3] * x[3]
        });
        assert!((g.integrate(&v).unwrap() - VOLUME / 24.0).abs() < 1e-13);
        // E[x₂⁴] = 3/(N(N+2)).
        let v = g.sample(|p| p.to_cartesian()[1].powi(4));
        assert!((g.integrate(&v).unwrap() - VOLUME * 3.0 / 24.0).abs() < 1e-13);
    }
}
