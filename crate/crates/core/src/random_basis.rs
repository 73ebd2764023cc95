//! Haar-random orthonormal bases of the eigenspaces `E_n` and Monte Carlo
//! estimates of the concentration statements about their `L^q` norms.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::StreamFactory;
use crate::sphere::{degree_offset, zonal_field, GridValues, HarmonicTransform, Lp, SphereField, SphereGrid, VOLUME};
use crate::stats::{bootstrap_median_ci, linear_fit, median, wilson_interval, LinearFit};

/// Largest quadrature grid a Monte Carlo norm evaluation may allocate.
pub const MAX_GRID_NODES: usize = 4_000_000;

/// Orthogonal `n² × n²` matrix defining `e_{n,k} = Σ_j Q_{jk} f_{n,j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisRotation {
    n: usize,
    q: DMatrix<f64>,
    seed: u64,
    draw: u64,
}

impl BasisRotation {
    pub fn identity(n: usize) -> Self {
        Self { n, q: DMatrix::identity(n * n, n * n), seed: 0, draw: 0 }
    }

    pub fn from_matrix(n: usize, q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() != n * n || q.ncols() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: q.nrows().max(q.ncols()) });
        }
        Ok(Self { n, q, seed: 0, draw: 0 })
    }

    /// Haar draw for degree `n` from the stream `(seed, draw)` of `factory`.
    pub fn sample(n: usize, factory: &StreamFactory, draw: u64) -> Result<Self> {
        let q = sample_haar(n * n, &mut factory.draw(draw))?;
        Ok(Self { n, q, seed: factory.seed(), draw })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn provenance(&self) -> (u64, u64) {
        (self.seed, self.draw)
    }

    /// `max |QᵀQ − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.q)
    }

    pub fn determinant(&self) -> f64 {
        self.q.determinant()
    }

    /// Reference coefficients of `Σ_k a_k e_{n,k}`, i.e. `Q a`.
    pub fn to_reference(&self, e_coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (k, &a) in e_coeffs.iter().enumerate() {
            if a != 0.0 {
                for (o, q) in out.iter_mut().zip(self.q.column(k).iter()) {
                    *o += q * a;
                }
            }
        }
        out
    }

    /// `e`-basis coefficients of a reference block, `Qᵀ b`.
    pub fn from_reference(&self, ref_coeffs: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|k| self.q.column(k).iter().zip(ref_coeffs).map(|(q, b)| q * b).sum()).collect()
    }

    /// CSV: a header line `n,seed,draw`, its values, then the rows of `Q`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["n", "seed", "draw"])?;
        w.write_record([self.n.to_string(), self.seed.to_string(), self.draw.to_string()])?;
        for i in 0..self.dim() {
            w.write_record(self.q.row(i).iter().map(|v| format!("{v:e}")))?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let mut records = r.records();
        let head = records.next().ok_or_else(|| invalid("rotation CSV is empty"))??;
        let parse = |s: &str| s.trim().parse::<u64>().map_err(|e| invalid(format!("bad header value {s}: {e}")));
        let n = parse(&head[0])? as usize;
        let (seed, draw) = (parse(&head[1])?, parse(&head[2])?);
        let mut data = Vec::with_capacity(n.pow(4));
        for rec in records {
            for v in rec?.iter() {
                data.push(v.trim().parse::<f64>().map_err(|e| invalid(format!("bad matrix entry {v}: {e}")))?);
            }
        }
        if data.len() != n.pow(4) {
            return Err(Error::DimensionMismatch { expected: n.pow(4), found: data.len() });
        }
        Ok(Self { n, q: DMatrix::from_row_slice(n * n, n * n, &data), seed, draw })
    }
}

pub fn orthogonality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut err: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            err = err.max((g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    err
}

/// Haar-distributed orthogonal `dim × dim` matrix: QR of a standard normal
/// matrix with the columns of `Q` flipped so that `R` has a positive diagonal.
pub fn sample_haar<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if dim < 1 {
        return Err(invalid("Haar sampling needs dimension >= 1"));
    }
    let data: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    let a = DMatrix::from_column_slice(dim, dim, &data);
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Uniform point on the unit sphere of `ℝ^dim`.
pub fn uniform_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A rotation per degree: the randomized basis `(e_{n,k})` of every `E_n`.
#[derive(Debug, Clone, Default)]
pub struct RotatedBasis {
    rotations: BTreeMap<usize, BasisRotation>,
}

impl RotatedBasis {
    pub fn identity(n_max: usize) -> Self {
        Self { rotations: (1..=n_max).map(|n| (n, BasisRotation::identity(n))).collect() }
    }

    pub fn sample(n_max: usize, factory: &StreamFactory) -> Result<Self> {
        let rotations =
            (1..=n_max).map(|n| BasisRotation::sample(n, factory, n as u64).map(|r| (n, r))).collect::<Result<_>>()?;
        Ok(Self { rotations })
    }

    pub fn insert(&mut self, rotation: BasisRotation) {
        self.rotations.insert(rotation.n(), rotation);
    }

    pub fn get(&self, n: usize) -> Result<&BasisRotation> {
        self.rotations.get(&n).ok_or(Error::MissingRotation(n))
    }

    pub fn rotations(&self) -> impl Iterator<Item = &BasisRotation> {
        self.rotations.values()
    }

    /// Map `e`-basis coefficients to reference coefficients block by block.
    pub fn to_reference(&self, e_field: &SphereField) -> Result<SphereField> {
        let mut out = SphereField::zeros(e_field.n_max());
        for n in 1..=e_field.n_max() {
            let block = self.get(n)?.to_reference(e_field.block(n));
            out.block_mut(n).copy_from_slice(&block);
        }
        Ok(out)
    }

    /// Reference coefficients of the single element `e_{n,k}`.
    pub fn element(&self, n: usize, k: usize) -> Result<SphereField> {
        let rot = self.get(n)?;
        let mut f = SphereField::zeros(n);
        f.block_mut(n).copy_from_slice(rot.matrix().column(k - 1).as_slice());
        Ok(f)
    }
}

/// The rotated basis of a single block: `e_{n,k}` as reference fields.
pub fn rotate_degree_block(n_max: usize, rotation: &BasisRotation) -> Result<Vec<SphereField>> {
    let n = rotation.n();
    if n > n_max {
        return Err(Error::DimensionMismatch { expected: n_max * n_max, found: rotation.dim() });
    }
    Ok((0..rotation.dim())
        .map(|k| {
            let mut f = SphereField::zeros(n_max);
            let off = degree_offset(n);
            f.coeffs_mut()[off..off + rotation.dim()].copy_from_slice(rotation.matrix().column(k).as_slice());
            f
        })
        .collect())
}

/// Evaluates `L^q` norms of functions in a single eigenspace `E_n`.
#[derive(Debug, Clone)]
pub struct BlockNorms {
    n: usize,
    transform: HarmonicTransform,
    weights: Vec<f64>,
}

impl BlockNorms {
    /// Grid exact for `|u|^q` when `q` is an even integer.
    pub fn new(n: usize, q: f64) -> Result<Self> {
        if n < 1 {
            return Err(invalid("degree must be >= 1"));
        }
        let exactness = if q.is_finite() { (q.ceil() as usize).max(2) * (n - 1) } else { 4 * (n - 1) };
        let grid = SphereGrid::new(exactness);
        if grid.len() > MAX_GRID_NODES {
            return Err(Error::Resolution { required: exactness, available: max_exactness() });
        }
        let weights = grid.weights();
        Ok(Self { n, transform: HarmonicTransform::new(n, grid)?, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn transform(&self) -> &HarmonicTransform {
        &self.transform
    }

    pub fn values(&self, block: &[f64]) -> Result<GridValues> {
        let mut f = SphereField::zeros(self.n);
        f.block_mut(self.n).copy_from_slice(block);
        self.transform.synthesize(&f)
    }

    pub fn norm(&self, block: &[f64], q: f64) -> Result<f64> {
        let v = self.values(block)?;
        self.norm_of_values(&v, q)
    }

    pub fn norm_of_values(&self, v: &GridValues, q: f64) -> Result<f64> {
        match Lp::new(q)? {
            Lp::Infinity => Ok(v.max_abs()),
            Lp::Finite(q) => {
                let s: f64 = v.values().iter().zip(&self.weights).map(|(x, w)| w * x.abs().powf(q)).sum();
                Ok(s.powf(1.0 / q))
            }
        }
    }
}

fn max_exactness() -> usize {
    let mut d = 0;
    while SphereGrid::new(d + 1).len() <= MAX_GRID_NODES {
        d += 1;
    }
    d
}

/// `(2π²)^{1/q − 1/2}`: the `L^q` norm of a unit vector of `E₁`.
pub fn constant_mode_norm(q: f64) -> f64 {
    VOLUME.powf(1.0 / q - 0.5)
}

/// `‖u‖_{L^q}` for `n_samples` uniform unit vectors `u` of `E_n`.
pub fn sample_lq_norms(n: usize, q: f64, n_samples: usize, factory: &StreamFactory) -> Result<Vec<f64>> {
    let norms = BlockNorms::new(n, q)?;
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| norms.norm(&uniform_unit_vector(n * n, &mut factory.draw(i)), q))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianEstimate {
    pub n: usize,
    pub q: f64,
    pub median: f64,
    pub n_samples: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Sample median of `‖u‖_{L^q}` over the unit sphere of `E_n`, with a
/// percentile bootstrap 95% interval.
pub fn estimate_median_lq(n: usize, q: f64, n_samples: usize, factory: &StreamFactory) -> Result<MedianEstimate> {
    if q < 2.0 {
        return Err(invalid(format!("q must be >= 2, got {q}")));
    }
    if n_samples < 100 {
        return Err(invalid(format!("need at least 100 samples, got {n_samples}")));
    }
    let xs = sample_lq_norms(n, q, n_samples, factory)?;
    let m = median(&xs);
    let (lo, hi) = bootstrap_median_ci(&xs, 1000, 0.95, &mut factory.child(u64::MAX).draw(0));
    Ok(MedianEstimate { n, q, median: m, n_samples, ci_low: lo.min(m), ci_high: hi.max(m) })
}

/// Empirical `(E‖u‖_q^q)^{1/q}` over uniform unit vectors of `E_n`.
pub fn lq_moment(n: usize, q: f64, n_samples: usize, factory: &StreamFactory) -> Result<f64> {
    if q < 2.0 {
        return Err(invalid(format!("q must be >= 2, got {q}")));
    }
    let xs = sample_lq_norms(n, q, n_samples, factory)?;
    let powered: Vec<f64> = xs.iter().map(|x| x.powf(q)).collect();
    Ok(crate::stats::mean(&powered).powf(1.0 / q))
}

/// Empirical survival function with Wilson intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub levels: Vec<f64>,
    pub survival: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub n_samples: usize,
}

impl TailEstimate {
    /// `P(x > level)` for each level, with Wilson intervals at `confidence`.
    pub fn from_samples(samples: &[f64], levels: &[f64], confidence: f64) -> Self {
        let n = samples.len();
        let mut survival = Vec::with_capacity(levels.len());
        let (mut ci_low, mut ci_high) = (Vec::new(), Vec::new());
        for &lev in levels {
            let hits = samples.iter().filter(|&&x| x > lev).count();
            let (lo, hi) = wilson_interval(hits, n, confidence);
            survival.push(if n == 0 { 0.0 } else { hits as f64 / n as f64 });
            ci_low.push(lo);
            ci_high.push(hi);
        }
        Self { levels: levels.to_vec(), survival, ci_low, ci_high, n_samples: n }
    }

    /// Least-squares fit of `log survival` against `transform(level)` over
    /// the levels whose survival lies in `[lo, hi]`.
    pub fn fit_log_survival(&self, transform: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<LinearFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .levels
            .iter()
            .zip(&self.survival)
            .filter(|(_, &s)| s >= lo && s <= hi && s > 0.0)
            .map(|(&l, &s)| (transform(l), s.ln()))
            .unzip();
        linear_fit(&xs, &ys)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["level", "survival", "ci_low", "ci_high"])?;
        for i in 0..self.levels.len() {
            w.write_record([
                self.levels[i].to_string(),
                self.survival[i].to_string(),
                self.ci_low[i].to_string(),
                self.ci_high[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// Survival of `|‖u‖_{L^q} − M̂_{n,q}|` over uniform unit vectors of `E_n`.
pub fn empirical_tail(
    n: usize,
    q: f64,
    levels: &[f64],
    n_samples: usize,
    factory: &StreamFactory,
) -> Result<TailEstimate> {
    if levels.iter().any(|&l| l < 0.0) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("levels must be non-negative and strictly increasing"));
    }
    let xs = sample_lq_norms(n, q, n_samples, factory)?;
    let m = median(&xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    Ok(TailEstimate::from_samples(&dev, levels, 0.99))
}

/// Concentration rate `c` in `P(|‖u‖_q − M| > r) ≈ A e^{−c r²}`, fitted over
/// the levels where the survival lies in `[1e−3, 0.5]`.
pub fn fitted_tail_rate(tail: &TailEstimate) -> Option<f64> {
    tail.fit_log_survival(|r| r * r, 1e-3, 0.5).map(|f| -f.slope)
}

/// Evenly spaced deviation levels up to the sample maximum, suitable for
/// [`empirical_tail`].
pub fn deviation_levels(n: usize, q: f64, n_samples: usize, factory: &StreamFactory, count: usize) -> Result<Vec<f64>> {
    let xs = sample_lq_norms(n, q, n_samples.min(500), factory)?;
    let m = median(&xs);
    let top = xs.iter().map(|x| (x - m).abs()).fold(0.0, f64::max).max(1e-12);
    Ok((0..count).map(|i| top * i as f64 / (count - 1) as f64).collect())
}

/// `max ‖u‖_q / ‖u‖₂` over sampled unit vectors and the zonal witness,
/// divided by `n^{1 − 2/q}`.
pub fn bernstein_ratio(n: usize, q: f64, n_samples: usize, factory: &StreamFactory) -> Result<f64> {
    let exponent = if q.is_finite() { 1.0 - 2.0 / q } else { 1.0 };
    let norms = BlockNorms::new(n, q)?;
    let sampled = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| norms.norm(&uniform_unit_vector(n * n, &mut factory.draw(i)), q))
        .collect::<Result<Vec<f64>>>()?;
    let witness = zonal_ratio(&norms, q)?;
    let best = sampled.into_iter().fold(witness, f64::max);
    Ok(best / (n as f64).powf(exponent))
}

/// `‖Z_n‖_q / ‖Z_n‖₂` for the zonal kernel centred at a grid node.
fn zonal_ratio(norms: &BlockNorms, q: f64) -> Result<f64> {
    let tr = norms.transform();
    let x0 = tr.grid().node((tr.grid().len() / 2 + 1).min(tr.grid().len() - 1));
    let z = zonal_field(tr, norms.n(), x0)?;
    let zn = z.block(norms.n()).to_vec();
    let l2 = zn.iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(norms.norm(&zn, q)? / l2)
}

/// `‖Z_n‖_∞ / ‖Z_n‖₂`, which equals `K_n = n/√(2π²)`.
pub fn zonal_sup_ratio(n: usize) -> Result<f64> {
    zonal_ratio(&BlockNorms::new(n, f64::INFINITY)?, f64::INFINITY)
}

/// `2 e^{−(N−1)t²/2}`.
pub fn coordinate_envelope(dim: usize, t: f64) -> f64 {
    2.0 * (-(dim as f64 - 1.0) * t * t / 2.0).exp()
}

/// Survival of `|x₁|` for `x` uniform on `S^{N−1}` (99% Wilson intervals).
pub fn coordinate_tail_check(
    dim: usize,
    levels: &[f64],
    n_samples: usize,
    factory: &StreamFactory,
) -> Result<TailEstimate> {
    if dim < 2 {
        return Err(invalid("coordinate tail needs N >= 2"));
    }
    let xs: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| uniform_unit_vector(dim, &mut factory.draw(i))[0].abs())
        .collect();
    Ok(TailEstimate::from_samples(&xs, levels, 0.99))
}

/// Outcome of the rejection search for a uniformly bounded basis.
#[derive(Debug, Clone)]
pub struct UniformBasisSearch {
    pub basis: RotatedBasis,
    /// Per degree: attempts used and the largest `‖e_{n,k}‖_q / √q` found.
    pub attempts: Vec<(usize, usize, f64)>,
}

impl UniformBasisSearch {
    pub fn acceptance_rate(&self) -> f64 {
        let total: usize = self.attempts.iter().map(|a| a.1).sum();
        self.attempts.len() as f64 / total as f64
    }
}

/// Draw Haar bases degree by degree until `‖e_{n,k}‖_{L^q} ≤ C√q` for every
/// `k` and every `q` in `q_list`.
pub fn search_uniform_basis(
    n_max: usize,
    q_list: &[f64],
    bound: f64,
    max_attempts: usize,
    factory: &StreamFactory,
) -> Result<UniformBasisSearch> {
    if q_list.is_empty() || q_list.iter().any(|&q| q < 1.0) {
        return Err(invalid("q_list must be non-empty with q >= 1"));
    }
    let q_top = q_list.iter().cloned().fold(2.0, f64::max);
    let mut basis = RotatedBasis::default();
    let mut attempts = Vec::new();
    for n in 1..=n_max {
        let norms = BlockNorms::new(n, q_top)?;
        let stream = factory.child(n as u64);
        let mut accepted = None;
        for attempt in 0..max_attempts {
            let rot = BasisRotation::sample(n, &stream, attempt as u64)?;
            let worst = (0..rot.dim())
                .into_par_iter()
                .map(|k| -> Result<f64> {
                    let v = norms.values(rot.matrix().column(k).as_slice())?;
                    let mut w: f64 = 0.0;
                    for &q in q_list {
                        w = w.max(norms.norm_of_values(&v, q)? / q.sqrt());
                    }
                    Ok(w)
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            if worst <= bound {
                accepted = Some((rot, attempt + 1, worst));
                break;
            }
        }
        let (rot, used, worst) = accepted.ok_or(Error::ExhaustedAttempts { n, attempts: max_attempts })?;
        attempts.push((n, used, worst));
        basis.insert(rot);
    }
    Ok(UniformBasisSearch { basis, attempts })
}

/// `D`, the Kolmogorov–Smirnov distance between first coordinates of the
/// first columns of `Q` and `R Q` over independent Haar draws.
pub fn left_invariance_ks(dim: usize, rotation: &DMatrix<f64>, draws: usize, factory: &StreamFactory) -> Result<f64> {
    let a = factory.child(0);
    let b = factory.child(1);
    let xs = (0..draws as u64).into_par_iter().map(|i| sample_haar(dim, &mut a.draw(i)).map(|q| q[(0, 0)]));
    let xs = xs.collect::<Result<Vec<f64>>>()?;
    let ys = (0..draws as u64)
        .into_par_iter()
        .map(|i| sample_haar(dim, &mut b.draw(i)).map(|q| (rotation * q)[(0, 0)]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(crate::stats::ks_statistic(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::lp_norm;

    #[test]
    fn one_dimensional_haar_is_a_sign() {
        let f = StreamFactory::new(1, "haar1");
        for i in 0..20 {
            let q = sample_haar(1, &mut f.draw(i)).unwrap();
            assert_eq!(q[(0, 0)].abs(), 1.0);
        }
        assert!(sample_haar(0, &mut f.draw(0)).is_err());
    }

    #[test]
    fn haar_is_orthogonal() {
        let f = StreamFactory::new(2, "haar");
        for dim in [2, 9, 64] {
            let q = sample_haar(dim, &mut f.draw(dim as u64)).unwrap();
            assert!(orthogonality_error(&q) < 1e-12);
            assert!((q.determinant().abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rotation_csv_round_trip() {
        let f = StreamFactory::new(3, "csv");
        let rot = BasisRotation::sample(2, &f, 5).unwrap();
        let mut buf = Vec::new();
        rot.write_csv(&mut buf).unwrap();
        let back = BasisRotation::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.provenance(), rot.provenance());
        assert!((back.matrix() - rot.matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn degree_one_is_deterministic() {
        let f = StreamFactory::new(4, "e1");
        let m = estimate_median_lq(1, 6.0, 100, &f).unwrap();
        assert!((m.median - constant_mode_norm(6.0)).abs() < 1e-12);
        let t = empirical_tail(1, 4.0, &[0.0, 0.1], 100, &f).unwrap();
        assert_eq!(t.survival[1], 0.0);
    }

    #[test]
    fn l2_median_is_one() {
        let m = estimate_median_lq(4, 2.0, 100, &StreamFactory::new(5, "l2")).unwrap();
        assert!((m.median - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zonal_sup_ratio_is_kernel_constant() {
        for n in [2, 5] {
            let r = zonal_sup_ratio(n).unwrap();
            assert!((r - n as f64 / VOLUME.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn rotated_block_is_orthonormal() {
        let n = 3;
        let rot = BasisRotation::sample(n, &StreamFactory::new(6, "rot"), 0).unwrap();
        let elems = rotate_degree_block(n, &rot).unwrap();
        let tr = HarmonicTransform::new(n, SphereGrid::for_products(n)).unwrap();
        let vals: Vec<GridValues> = elems.iter().map(|e| tr.synthesize(e).unwrap()).collect();
        let w = tr.grid().weights();
        for a in 0..vals.len() {
            for b in 0..vals.len() {
                let ip: f64 = vals[a].values().iter().zip(vals[b].values()).zip(&w).map(|((x, y), w)| x * y * w).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10);
            }
        }
        assert!((lp_norm(&vals[0], 2.0, tr.grid()).unwrap() - 1.0).abs() < 1e-10);
    }
}
