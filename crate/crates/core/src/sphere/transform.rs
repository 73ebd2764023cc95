use super::basis::{normalized_legendre, pair, tri, trig_factor, ReferenceBasis};
use super::grid::{GridValues, SphereGrid};
use super::{degree_offset, s2_index, SphereField};
use crate::error::{Error, Result};

/// Separable synthesis/analysis between [`SphereField`] coefficients and
/// values on a [`SphereGrid`]. Work is `O(n_χ·n⁴ + n_χ n_θ n (n + n_φ))`
/// instead of the `O(n³ · nodes)` of term-by-term summation.
#[derive(Debug, Clone)]
pub struct HarmonicTransform {
    n_max: usize,
    basis: ReferenceBasis,
    grid: SphereGrid,
    npairs: usize,
    /// Radial factor and its χ-derivatives, `[i·npairs + pair(n, l)]`.
    radial: [Vec<f64>; 3],
    /// `P̄_l^m` at each θ node, `[j·ntri + tri(l, m)]`.
    legendre: Vec<f64>,
    ntri: usize,
    /// `T_m(φ_k)` at `[(m + L)·n_φ + k]`.
    trig: Vec<f64>,
}

/// Which radial table to use in synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialOrder {
    Value,
    FirstDerivative,
    SecondDerivative,
}

impl HarmonicTransform {
    pub fn new(n_max: usize, grid: SphereGrid) -> Result<Self> {
        let basis = ReferenceBasis::new(n_max)?;
        Self::with_basis(basis, grid)
    }

    pub fn with_basis(basis: ReferenceBasis, grid: SphereGrid) -> Result<Self> {
        let n_max = basis.n_max();
        let required = 2 * (n_max - 1);
        if grid.exactness() < required {
            return Err(Error::Resolution { required, available: grid.exactness() });
        }
        let npairs = basis.pair_count();
        let mut radial = [Vec::new(), Vec::new(), Vec::new()];
        for &chi in grid.chi() {
            let tables = basis.radial_derivatives_all(chi);
            for (dst, src) in radial.iter_mut().zip(tables) {
                dst.extend(src);
            }
        }
        let l_max = n_max - 1;
        let ntri = tri(l_max, l_max) + 1;
        let legendre = grid.theta().iter().flat_map(|&t| normalized_legendre(l_max, t)).collect();
        let lm = l_max as i64;
        let trig = (-lm..=lm).flat_map(|m| grid.phi().iter().map(move |&p| trig_factor(m, p))).collect();
        Ok(Self { n_max, basis, grid, npairs, radial, legendre, ntri, trig })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    fn check_field(&self, field: &SphereField) -> Result<()> {
        if field.n_max() > self.n_max {
            let required = 2 * (field.n_max() - 1);
            return Err(Error::Resolution { required, available: self.grid.exactness().min(2 * (self.n_max - 1)) });
        }
        Ok(())
    }

    /// Pointwise values of `Σ c_{n,k} f_{n,k}` at every node.
    pub fn synthesize(&self, field: &SphereField) -> Result<GridValues> {
        self.synthesize_with(field, RadialOrder::Value, |_| 1.0)
    }

    /// Synthesis with a chosen radial table and an `l`-dependent multiplier;
    /// gives `∂_χ u`, `∂²_χ u` and `Δ_{S²} u` (multiplier `−l(l+1)`).
    pub fn synthesize_with(
        &self,
        field: &SphereField,
        order: RadialOrder,
        lfactor: impl Fn(usize) -> f64,
    ) -> Result<GridValues> {
        self.check_field(field)?;
        let table = &self.radial[order as usize];
        let (nc, _, _) = self.grid.dims();
        let mut out = Vec::with_capacity(self.grid.len());
        for i in 0..nc {
            let a = self.radial_contract(field, &table[i * self.npairs..(i + 1) * self.npairs], &lfactor);
            self.angular_synthesis(&a, &mut out);
        }
        GridValues::from_values(&self.grid, out)
    }

    /// Values on the S² nodes of the grid at an arbitrary polar angle `χ`.
    pub fn synthesize_s2(&self, field: &SphereField, chi: f64) -> Result<Vec<f64>> {
        self.check_field(field)?;
        let radial = self.basis.radial_all(chi);
        let a = self.radial_contract(field, &radial, &|_| 1.0);
        let mut out = Vec::with_capacity(self.grid.s2_len());
        self.angular_synthesis(&a, &mut out);
        Ok(out)
    }

    /// `a[l² + l + m] = Σ_n c_{n,(l,m)} · R_{n,l}`.
    fn radial_contract(&self, field: &SphereField, radial: &[f64], lfactor: &impl Fn(usize) -> f64) -> Vec<f64> {
        let nf = field.n_max();
        let mut a = vec![0.0; self.n_max * self.n_max];
        let c = field.coeffs();
        for n in 1..=nf {
            let off = degree_offset(n);
            for l in 0..n {
                let r = radial[pair(n, l)] * lfactor(l);
                if r == 0.0 {
                    continue;
                }
                let base = l * l;
                for j in 0..(2 * l + 1) {
                    a[base + j] += c[off + base + j] * r;
                }
            }
        }
        a
    }

    fn angular_synthesis(&self, a: &[f64], out: &mut Vec<f64>) {
        let l_max = self.n_max - 1;
        let lm = l_max as i64;
        let nphi = self.grid.phi().len();
        let mut b = vec![0.0; 2 * l_max + 1];
        for j in 0..self.grid.theta().len() {
            let leg = &self.legendre[j * self.ntri..(j + 1) * self.ntri];
            for m in -lm..=lm {
                let am = m.unsigned_abs() as usize;
                let mut acc = 0.0;
                for l in am..=l_max {
                    acc += a[s2_index(l, m)] * leg[tri(l, am)];
                }
                b[(m + lm) as usize] = acc;
            }
            let start = out.len();
            out.resize(start + nphi, 0.0);
            let row = &mut out[start..];
            for (mi, &bm) in b.iter().enumerate() {
                if bm == 0.0 {
                    continue;
                }
                let t = &self.trig[mi * nphi..(mi + 1) * nphi];
                for (o, &tk) in row.iter_mut().zip(t) {
                    *o += bm * tk;
                }
            }
        }
    }

    /// Quadrature projection onto `f_{n,k}` for `n ≤ n_out`.
    pub fn analyze(&self, values: &GridValues, n_out: usize) -> Result<SphereField> {
        values.check(&self.grid)?;
        if n_out > self.n_max || n_out == 0 {
            return Err(Error::Resolution { required: 2 * n_out.saturating_sub(1), available: 2 * (self.n_max - 1) });
        }
        let l_max = self.n_max - 1;
        let lm = l_max as i64;
        let (nc, nt, nphi) = self.grid.dims();
        let v = values.values();
        let wphi = self.grid.phi_weight();
        let mut field = SphereField::zeros(n_out);
        let mut b = vec![0.0; 2 * l_max + 1];
        let mut a = vec![0.0; self.n_max * self.n_max];
        for i in 0..nc {
            a.iter_mut().for_each(|x| *x = 0.0);
            for j in 0..nt {
                let row = &v[(i * nt + j) * nphi..(i * nt + j + 1) * nphi];
                for (mi, bm) in b.iter_mut().enumerate() {
                    let t = &self.trig[mi * nphi..(mi + 1) * nphi];
                    *bm = row.iter().zip(t).map(|(x, y)| x * y).sum::<f64>() * wphi;
                }
                let wt = self.grid.theta_weights()[j];
                let leg = &self.legendre[j * self.ntri..(j + 1) * self.ntri];
                for m in -lm..=lm {
                    let am = m.unsigned_abs() as usize;
                    let bm = b[(m + lm) as usize] * wt;
                    for l in am..=l_max {
                        a[s2_index(l, m)] += bm * leg[tri(l, am)];
                    }
                }
            }
            let wc = self.grid.chi_weights()[i];
            let radial = &self.radial[0][i * self.npairs..(i + 1) * self.npairs];
            let c = field.coeffs_mut();
            for n in 1..=n_out {
                let off = degree_offset(n);
                for l in 0..n {
                    let r = radial[pair(n, l)] * wc;
                    let base = l * l;
                    for jj in 0..(2 * l + 1) {
                        c[off + base + jj] += a[base + jj] * r;
                    }
                }
            }
        }
        Ok(field)
    }

    /// `Π(u³)` projected back to `n ≤ n_out`, given samples of `u`.
    pub fn project_power(&self, values: &GridValues, power: i32, n_out: usize) -> Result<SphereField> {
        self.analyze(&values.map(|x| x.powi(power)), n_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{mode_count, VOLUME};
    use rand::{Rng, SeedableRng};

    fn random_field(n_max: usize, seed: u64) -> SphereField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SphereField::from_coeffs(n_max, (0..mode_count(n_max)).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matches_brute_force_summation() {
        let n_max = 6;
        let tr = HarmonicTransform::new(n_max, SphereGrid::for_products(n_max)).unwrap();
        let f = random_field(n_max, 3);
        let v = tr.synthesize(&f).unwrap();
        let grid = tr.grid();
        for idx in (0..grid.len()).step_by(7) {
            let vals = tr.basis().eval_all(grid.node(idx));
            let direct: f64 = vals.iter().zip(f.coeffs()).map(|(a, b)| a * b).sum();
            assert!((direct - v.values()[idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let n_max = 9;
        let tr = HarmonicTransform::new(n_max, SphereGrid::for_products(n_max)).unwrap();
        let f = random_field(n_max, 11);
        let g = tr.analyze(&tr.synthesize(&f).unwrap(), n_max).unwrap();
        let err = f.sub(&g).max_abs();
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn constant_values_project_to_first_mode() {
        let tr = HarmonicTransform::new(5, SphereGrid::for_products(5)).unwrap();
        let ones = tr.grid().sample(|_| 1.0);
        let f = tr.analyze(&ones, 5).unwrap();
        assert!((f.coeffs()[0] - VOLUME.sqrt()).abs() < 1e-12);
        assert!(f.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        assert!(matches!(HarmonicTransform::new(6, SphereGrid::new(9)), Err(Error::Resolution { .. })));
    }

    #[test]
    fn s2_slice_agrees_with_point_evaluation() {
        let n_max = 5;
        let tr = HarmonicTransform::new(n_max, SphereGrid::for_products(n_max)).unwrap();
        let f = random_field(n_max, 5);
        let chi = 0.937;
        let slice = tr.synthesize_s2(&f, chi).unwrap();
        let np = tr.grid().phi().len();
        for (s, &val) in slice.iter().enumerate() {
            let p = crate::sphere::SpherePoint::new(chi, tr.grid().theta()[s / np], tr.grid().phi()[s % np]);
            let direct: f64 = tr.basis().eval_all(p).iter().zip(f.coeffs()).map(|(a, b)| a * b).sum();
            assert!((direct - val).abs() < 1e-12);
        }
    }
}
