//! The Penrose chart `ℝ × ℝ³ → [−π, π] × S³`, the trace of the transform at
//! `t = 0`, the radial operators `H₀`, `H₁`, weighted Euclidean norms, the
//! `L^q` change of variables and the decay of `f(t) − L(t)(g₀, g₁)`.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nlw::Trajectory;
use crate::quadrature::gauss_legendre_on;
use crate::random_data::StatePair;
use crate::sphere::{GridValues, HarmonicTransform, RadialOrder, SphereField, SphereGrid};
use crate::stats::{linear_fit, LinearFit};

/// Conformal coordinates of a point `(t, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub t: f64,
    pub r: f64,
    pub omega: f64,
}

/// `(T, R, Ω)` with `T = atan(t+r) + atan(t−r)`, `R = atan(t+r) − atan(t−r)`.
pub fn chart_forward(t: f64, r: f64) -> Result<ChartPoint> {
    if r.is_nan() || r < 0.0 || !t.is_finite() || !r.is_finite() {
        return Err(invalid(format!("chart needs finite t and r >= 0, got ({t}, {r})")));
    }
    let (a, b) = ((t + r).atan(), (t - r).atan());
    let omega = 2.0 / ((1.0 + (t + r).powi(2)) * (1.0 + (t - r).powi(2))).sqrt();
    Ok(ChartPoint { t: a + b, r: a - b, omega })
}

/// `t = sin T / (cos T + cos R)`, `r = sin R / (cos T + cos R)`, evaluated as
/// `t ± r = tan((T ± R)/2)` to avoid the cancellation in `cos T + cos R`.
pub fn chart_inverse(t_conf: f64, r_conf: f64) -> Result<(f64, f64)> {
    if !(0.0..=PI).contains(&r_conf) || t_conf.abs() + r_conf >= PI {
        return Err(Error::OutOfImage { t: t_conf, r: r_conf });
    }
    let (p, m) = (((t_conf + r_conf) / 2.0).tan(), ((t_conf - r_conf) / 2.0).tan());
    Ok(((p + m) / 2.0, (p - m) / 2.0))
}

/// `Ω₀(r) = 2/(1 + r²)`.
pub fn omega0(r: f64) -> f64 {
    2.0 / (1.0 + r * r)
}

/// Nodes of a [`SphereGrid`] read as points of ℝ³ through `r = tan(χ/2)`.
/// `∫_{ℝ³} F r² dr dω = Σ w_i ((1+r_i²)/2)³ F_i` with `w_i` the sphere weights.
#[derive(Debug, Clone)]
pub struct EuclideanRadialGrid {
    transform: HarmonicTransform,
    r: Vec<f64>,
    radial_weights: Vec<f64>,
}

impl EuclideanRadialGrid {
    pub fn new(n_max: usize, grid: SphereGrid) -> Result<Self> {
        let transform = HarmonicTransform::new(n_max, grid)?;
        let g = transform.grid();
        let r: Vec<f64> = g.chi().iter().map(|c| (c / 2.0).tan()).collect();
        let radial_weights = g.chi_weights().iter().zip(&r).map(|(w, r)| w * (0.5 * (1.0 + r * r)).powi(3)).collect();
        Ok(Self { transform, r, radial_weights })
    }

    /// Grid for fields with `n ≤ n_max` and integrands of degree `p` in them.
    pub fn for_power(n_max: usize, p: f64) -> Result<Self> {
        Self::new(n_max, SphereGrid::for_power(n_max, p.max(2.0)))
    }

    pub fn transform(&self) -> &HarmonicTransform {
        &self.transform
    }

    pub fn grid(&self) -> &SphereGrid {
        self.transform.grid()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// Weights for `∫_0^∞ f(r) r² dr`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    /// `r` at every node in flat order.
    pub fn node_radii(&self) -> Vec<f64> {
        let s2 = self.grid().s2_len();
        self.r.iter().flat_map(|&r| std::iter::repeat_n(r, s2)).collect()
    }

    /// Weights for `∫_{ℝ³} F dx` in flat order.
    pub fn weights(&self) -> Vec<f64> {
        let g = self.grid();
        let mut w = Vec::with_capacity(g.len());
        for &wr in &self.radial_weights {
            for &wt in g.theta_weights() {
                w.extend(std::iter::repeat_n(wr * wt * g.phi_weight(), g.phi().len()));
            }
        }
        w
    }

    pub fn integrate(&self, values: &GridValues) -> Result<f64> {
        if values.dims() != self.grid().dims() {
            let (a, b, c) = self.grid().dims();
            return Err(Error::DimensionMismatch { expected: a * b * c, found: values.values().len() });
        }
        Ok(values.values().iter().zip(self.weights()).map(|(v, w)| v * w).sum())
    }

    fn scale_by_radius(&self, values: &mut GridValues, f: impl Fn(f64) -> f64) {
        let s2 = self.grid().s2_len();
        for (i, &r) in self.r.iter().enumerate() {
            let c = f(r);
            values.values_mut()[i * s2..(i + 1) * s2].iter_mut().for_each(|x| *x *= c);
        }
    }
}

/// `(g₀, g₁) = PT₀^{−1}(v₀, v₁)` on the nodes of a Euclidean grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanPair {
    pub g0: GridValues,
    pub g1: GridValues,
}

/// `g₀ = Ω₀ v₀(2 atan r, ω)`, `g₁ = Ω₀² v₁(2 atan r, ω)`.
pub fn pt0_inverse(state: &StatePair, grid: &EuclideanRadialGrid) -> Result<EuclideanPair> {
    Ok(EuclideanPair {
        g0: pullback(RadialOperator::H0, &state.pos, grid)?,
        g1: pullback(RadialOperator::H1, &state.vel, grid)?,
    })
}

/// The conjugates of `Δ_{S³}` acting on positions (`H₀`) and velocities (`H₁`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialOperator {
    H0,
    H1,
}

impl RadialOperator {
    /// Power of `Ω₀` in the trace: `g = Ω₀^k Ψ(v)`.
    pub fn conformal_power(&self) -> i32 {
        match self {
            RadialOperator::H0 => 1,
            RadialOperator::H1 => 2,
        }
    }

    /// Exponent `e` of `(2/(1+r²))^e` in the matching `L²` isometry.
    pub fn isometry_weight(&self) -> f64 {
        match self {
            RadialOperator::H0 => 0.5,
            RadialOperator::H1 => -0.5,
        }
    }
}

/// `Ω₀^k Ψ(w)` on the grid nodes, `k` from [`RadialOperator::conformal_power`].
pub fn pullback(op: RadialOperator, w: &SphereField, grid: &EuclideanRadialGrid) -> Result<GridValues> {
    let mut v = grid.transform().synthesize(w)?;
    let k = op.conformal_power();
    grid.scale_by_radius(&mut v, |r| omega0(r).powi(k));
    Ok(v)
}

/// `H g` for `g = Ω₀^k Ψ(w)` from the Euclidean expressions
/// `H₀ = A²Δ + A r∂_r + (3 + r²)/2` and `H₁ = A²Δ + 3A r∂_r + 6A`,
/// `A = (1 + r²)/2`. Radial derivatives come from exact `χ`-derivatives of
/// `w` through the chain rule.
pub fn apply_radial_operator(op: RadialOperator, w: &SphereField, grid: &EuclideanRadialGrid) -> Result<GridValues> {
    let tr = grid.transform();
    let v0 = tr.synthesize(w)?;
    let v1 = tr.synthesize_with(w, RadialOrder::FirstDerivative, |_| 1.0)?;
    let v2 = tr.synthesize_with(w, RadialOrder::SecondDerivative, |_| 1.0)?;
    let ang = tr.synthesize_with(w, RadialOrder::Value, |l| -((l * (l + 1)) as f64))?;
    let k = op.conformal_power();
    let kf = k as f64;
    let s2 = grid.grid().s2_len();
    let mut out = grid.grid().zeros();
    for (i, &r) in grid.r().iter().enumerate() {
        let q = 1.0 + r * r;
        let a = q / 2.0;
        let (dr, ddr) = (2.0 / q, -4.0 * r / (q * q));
        let om = omega0(r);
        let (om1, om2) = (-4.0 * r / (q * q), (12.0 * r * r - 4.0) / (q * q * q));
        let c0 = om.powi(k);
        let c1 = kf * om.powi(k - 1) * om1;
        let c2 = kf * (kf - 1.0) * om.powi(k - 2) * om1 * om1 + kf * om.powi(k - 1) * om2;
        for j in i * s2..(i + 1) * s2 {
            let (f, fr, frr) = (v0.values()[j], v1.values()[j], v2.values()[j]);
            let wr = fr * dr;
            let wrr = frr * dr * dr + fr * ddr;
            let g = c0 * f;
            let gr = c1 * f + c0 * wr;
            let grr = c2 * f + 2.0 * c1 * wr + c0 * wrr;
            let lap = grr + 2.0 / r * gr + c0 * ang.values()[j] / (r * r);
            out.values_mut()[j] = match op {
                RadialOperator::H0 => a * a * lap + a * r * gr + 0.5 * (3.0 + r * r) * g,
                RadialOperator::H1 => a * a * lap + 3.0 * a * r * gr + 6.0 * a * g,
            };
        }
    }
    Ok(out)
}

/// `‖(2/(1+r²))^e g‖_{L²(ℝ³)}`.
fn weighted_l2(g: &GridValues, grid: &EuclideanRadialGrid, e: f64) -> Result<f64> {
    let mut h = g.map(|x| x * x);
    grid.scale_by_radius(&mut h, |r| omega0(r).powf(2.0 * e));
    Ok(grid.integrate(&h)?.sqrt())
}

/// `‖H g − (1 − n²) g‖ / ‖g‖` in `𝓛²` for `g = Ω₀^k Ψ(w)`, `w ∈ E_n`.
pub fn radial_eigen_residual(op: RadialOperator, w: &SphereField, n: usize, grid: &EuclideanRadialGrid) -> Result<f64> {
    let g = pullback(op, w, grid)?;
    let hg = apply_radial_operator(op, w, grid)?;
    let lambda = 1.0 - (n * n) as f64;
    let res = GridValues::from_values(
        grid.grid(),
        hg.values().iter().zip(g.values()).map(|(a, b)| a - lambda * b).collect(),
    )?;
    Ok(weighted_l2(&res, grid, 0.5)? / weighted_l2(&g, grid, 0.5)?)
}

/// Relative tolerance on re-synthesis when expanding a Euclidean field in
/// the images of the `e_{n,k}`.
pub const REPRESENTATION_TOLERANCE: f64 = 1e-8;

/// Coefficients of `Ψ^{−1}(Ω₀^{−k} g)` for `n ≤ n_out`.
pub fn sphere_coefficients(
    op: RadialOperator,
    g: &GridValues,
    grid: &EuclideanRadialGrid,
    n_out: usize,
) -> Result<SphereField> {
    let mut w = g.clone();
    let k = op.conformal_power();
    grid.scale_by_radius(&mut w, |r| omega0(r).powi(-k));
    let field = grid.transform().analyze(&w, n_out)?;
    let back = grid.transform().synthesize(&field)?;
    let scale = w.max_abs().max(f64::MIN_POSITIVE);
    let residual = back.values().iter().zip(w.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    if residual > REPRESENTATION_TOLERANCE {
        return Err(Error::Representation { residual, tolerance: REPRESENTATION_TOLERANCE });
    }
    Ok(field)
}

/// `‖(2/(1+r²))^e (1 − H)^{s/2} g‖_{L²(ℝ³)}`; `(1 − H)^{s/2}` acts by `n^s`
/// on the eigenfunctions. With `power = None` this is the plain weighted norm.
pub fn euclid_weighted_norm(
    g: &GridValues,
    grid: &EuclideanRadialGrid,
    weight_exponent: f64,
    power: Option<(RadialOperator, f64)>,
) -> Result<f64> {
    match power {
        None => weighted_l2(g, grid, weight_exponent),
        Some((op, s)) => {
            let mut c = sphere_coefficients(op, g, grid, grid.transform().n_max())?;
            for n in 1..=c.n_max() {
                let f = (n as f64).powf(s);
                c.block_mut(n).iter_mut().for_each(|x| *x *= f);
            }
            weighted_l2(&pullback(op, &c, grid)?, grid, weight_exponent)
        }
    }
}

/// Both sides of `∫_{ℝ×ℝ³}|h|^q = ∫_{Ω>0} Ω^{q−4}|w|^q sin²R dR dT dω`
/// for `h = PT^{−1} w`, plus `∫_{[−π,π]×S³}|w|^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqTransfer {
    pub q: f64,
    pub euclid: f64,
    pub sphere: f64,
    pub cylinder: f64,
}

impl LqTransfer {
    pub fn relative_gap(&self) -> f64 {
        (self.euclid - self.sphere).abs() / self.sphere.abs().max(f64::MIN_POSITIVE)
    }

    /// `‖h‖_{L^q} / (2^{(q−4)/q} ‖w‖_{L^q})`, at most 1 since `Ω ≤ 2`.
    pub fn bound_ratio(&self) -> f64 {
        if self.cylinder == 0.0 {
            return 0.0;
        }
        (self.euclid / self.cylinder).powf(1.0 / self.q) / 2f64.powf((self.q - 4.0) / self.q)
    }
}

fn angular_weights(grid: &SphereGrid) -> Vec<f64> {
    grid.theta_weights().iter().flat_map(|&wt| std::iter::repeat_n(wt * grid.phi_weight(), grid.phi().len())).collect()
}

/// `∫_{S²}|w(T, R, ·)|^q dω`.
fn shell_power(tr: &HarmonicTransform, aw: &[f64], field: &SphereField, r_conf: f64, q: f64) -> Result<f64> {
    let v = tr.synthesize_s2(field, r_conf)?;
    Ok(v.iter().zip(aw).map(|(x, w)| w * x.abs().powf(q)).sum())
}

/// The `L^q` change of variables with `nodes` Gauss points per direction.
/// Euclidean side: null coordinates `α = atan(t+r) > β = atan(t−r)`, with
/// `(t, r)` mapped through [`chart_forward`]; sphere side: `(R, T)` over the
/// region `|T| + R < π`.
pub fn lq_transfer<F>(w: F, n_max: usize, q: f64, nodes: usize) -> Result<LqTransfer>
where
    F: Fn(f64) -> Result<SphereField> + Sync,
{
    if q.is_nan() || q < 4.0 {
        return Err(invalid(format!("L^q transfer needs q >= 4, got {q}")));
    }
    let tr = HarmonicTransform::new(n_max, SphereGrid::for_power(n_max, q))?;
    let aw = angular_weights(tr.grid());
    let (alpha, wa) = gauss_legendre_on(nodes, -FRAC_PI_2, FRAC_PI_2);
    let euclid: f64 = alpha
        .par_iter()
        .zip(&wa)
        .map(|(&a, &wa)| {
            let (beta, wb) = gauss_legendre_on(nodes, -FRAC_PI_2, a);
            let mut acc = 0.0;
            for (&b, &wb) in beta.iter().zip(&wb) {
                let (tp, tm) = (a.tan(), b.tan());
                let (t, r) = ((tp + tm) / 2.0, (tp - tm) / 2.0);
                let c = chart_forward(t, r)?;
                let jac = 0.5 / (a.cos() * b.cos()).powi(2);
                let s = shell_power(&tr, &aw, &w(c.t)?, c.r, q)?;
                acc += wb * c.omega.powf(q) * s * r * r * jac;
            }
            Ok(wa * acc)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let (rr, wr) = gauss_legendre_on(nodes, 0.0, PI);
    let sphere: f64 = rr
        .par_iter()
        .zip(&wr)
        .map(|(&r, &wr)| {
            let (tt, wt) = gauss_legendre_on(nodes, r - PI, PI - r);
            let mut acc = 0.0;
            for (&t, &wt) in tt.iter().zip(&wt) {
                let om = t.cos() + r.cos();
                acc += wt * om.powf(q - 4.0) * shell_power(&tr, &aw, &w(t)?, r, q)?;
            }
            Ok(wr * acc * r.sin().powi(2))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let (tt, wt) = gauss_legendre_on(nodes, -PI, PI);
    let grid_w = tr.grid().weights();
    let cylinder: f64 = tt
        .par_iter()
        .zip(&wt)
        .map(|(&t, &wt)| {
            let v = tr.synthesize(&w(t)?)?;
            Ok(wt * v.values().iter().zip(&grid_w).map(|(x, g)| g * x.abs().powf(q)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(LqTransfer { q, euclid, sphere, cylinder })
}

/// [`lq_transfer`] for the position field of a trajectory covering `[−π, π]`.
pub fn lq_transfer_trajectory(traj: &Trajectory, q: f64, nodes: usize) -> Result<LqTransfer> {
    let (lo, hi) = time_range(traj);
    if lo > -PI + 1e-9 || hi < PI - 1e-9 {
        return Err(invalid(format!("trajectory covers [{lo}, {hi}], need [-π, π]")));
    }
    lq_transfer(|t| Ok(traj.interpolate(t.clamp(lo, hi))?.pos), traj.n_max(), q, nodes)
}

fn time_range(traj: &Trajectory) -> (f64, f64) {
    let (a, b) = (traj.times[0], *traj.times.last().expect("non-empty"));
    (a.min(b), a.max(b))
}

/// One point of the scattering curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringPoint {
    pub t: f64,
    /// `‖f(t) − L(t)(g₀, g₁)‖_{L^q(ℝ³)}`.
    pub norm: f64,
    /// Change of the norm when the radial rule is halved.
    pub quadrature_error: f64,
    /// Largest interpolation error estimate relative to the sup of the field.
    pub interpolation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringFit {
    pub q: f64,
    pub points: Vec<ScatteringPoint>,
    /// Fit of `log norm` against `log t`; the decay exponent is `−slope`.
    pub fit: Option<LinearFit>,
}

impl ScatteringFit {
    pub fn beta(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| -f.slope)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "norm", "quadrature_error", "interpolation_error"])?;
        for p in &self.points {
            w.write_record([p.t, p.norm, p.quadrature_error, p.interpolation_error].map(|x| format!("{x:e}")))?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

/// Largest tolerated interpolation error, relative to the field size.
pub const INTERPOLATION_TOLERANCE: f64 = 1e-4;

/// Default radial Gauss rule of the scattering norms.
pub const SCATTERING_NODES: usize = 96;

/// `d(T)` on the sphere with an interpolation error estimate relative to the
/// largest snapshot of the trajectories.
pub type DifferenceAt<'a> = dyn Fn(f64) -> Result<(SphereField, f64)> + Sync + 'a;

/// `u − U(T)(v₀, v₁)` from a trajectory: the state itself in perturbation
/// mode, or the difference to a linear reference trajectory.
pub fn trajectory_difference<'a>(u: &'a Trajectory, lin: Option<&'a Trajectory>) -> Box<DifferenceAt<'a>> {
    let size = |tr: &Trajectory| tr.states.iter().map(StatePair::max_abs).fold(0.0, f64::max);
    let scale = size(u).max(lin.map_or(0.0, size)).max(f64::MIN_POSITIVE);
    Box::new(move |t| {
        let (su, eu) = u.interpolate_with_error(t)?;
        match lin {
            None => Ok((su.pos, eu / scale)),
            Some(l) => {
                let (sl, el) = l.interpolate_with_error(t)?;
                let gu = u.forcing.as_ref().map(|g| crate::linear_flow::linear_position(g, t));
                let gl = l.forcing.as_ref().map(|g| crate::linear_flow::linear_position(g, t));
                let mut d = su.pos.sub(&sl.pos);
                if let Some(g) = gu {
                    d.add_scaled(&g, 1.0);
                }
                if let Some(g) = gl {
                    d.add_scaled(&g, -1.0);
                }
                Ok((d, (eu + el) / scale))
            }
        }
    })
}

/// `‖Ω d(T(t,r), R(t,r), ·)‖_{L^q(ℝ³)}` at fixed `t ≥ 0` with the substitution
/// `β = atan(t − r)` and a `nodes`-point Gauss rule.
fn scattering_norm(
    diff: &DifferenceAt<'_>,
    tr: &HarmonicTransform,
    aw: &[f64],
    t: f64,
    q: f64,
    nodes: usize,
) -> Result<(f64, f64)> {
    let (beta, wb) = gauss_legendre_on(nodes, -FRAC_PI_2, t.atan());
    let mut acc = 0.0;
    let mut interp: f64 = 0.0;
    for (&b, &w) in beta.iter().zip(&wb) {
        let r = t - b.tan();
        let c = chart_forward(t, r.max(0.0))?;
        let (d, err) = diff(c.t)?;
        interp = interp.max(err);
        let s = shell_power(tr, aw, &d, c.r, q)?;
        acc += w * c.omega.powf(q) * s * r * r / b.cos().powi(2);
    }
    Ok((acc.powf(1.0 / q), interp))
}

/// Scattering norms at each `t` and the exponent `β` in `norm ∼ t^{−β}`.
pub fn scattering_decay(
    diff: &DifferenceAt<'_>,
    n_max: usize,
    q: f64,
    t_list: &[f64],
    nodes: usize,
) -> Result<ScatteringFit> {
    if q.is_nan() || q <= 18.0 / 5.0 || q > 6.0 {
        return Err(invalid(format!("scattering exponent q must lie in (18/5, 6], got {q}")));
    }
    if t_list.iter().any(|&t| t.is_nan() || t < 0.0) {
        return Err(invalid("scattering times must be non-negative"));
    }
    let tr = HarmonicTransform::new(n_max, SphereGrid::for_power(n_max, q))?;
    let aw = angular_weights(tr.grid());
    let points = t_list
        .par_iter()
        .map(|&t| {
            let (norm, interp) = scattering_norm(diff, &tr, &aw, t, q, nodes)?;
            let (half, _) = scattering_norm(diff, &tr, &aw, t, q, nodes / 2)?;
            if interp > INTERPOLATION_TOLERANCE {
                return Err(Error::RefineDt { estimate: interp, tolerance: INTERPOLATION_TOLERANCE });
            }
            Ok(ScatteringPoint { t, norm, quadrature_error: (norm - half).abs(), interpolation_error: interp })
        })
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<_> = points.iter().filter(|p| p.norm > 0.0 && p.t > 0.0).collect();
    let fit = linear_fit(
        &usable.iter().map(|p| p.t.ln()).collect::<Vec<_>>(),
        &usable.iter().map(|p| p.norm.ln()).collect::<Vec<_>>(),
    );
    Ok(ScatteringFit { q, points, fit })
}

/// `count` logarithmically spaced times in `[t_min, t_max]`.
pub fn log_spaced(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{HarmonicIndex, VOLUME};

    #[test]
    fn chart_examples() {
        let c = chart_forward(0.0, 0.0).unwrap();
        assert_eq!((c.t, c.r, c.omega), (0.0, 0.0, 2.0));
        let c = chart_forward(0.0, 1.0).unwrap();
        assert!(c.t.abs() < 1e-15 && (c.r - FRAC_PI_2).abs() < 1e-15 && (c.omega - 1.0).abs() < 1e-15);
        let c = chart_forward(1.0, 1.0).unwrap();
        assert!((c.t - 2f64.atan()).abs() < 1e-15 && (c.r - 2f64.atan()).abs() < 1e-15);
        assert!((c.omega - 2.0 / 5f64.sqrt()).abs() < 1e-15);
        assert!((c.omega - (c.t.cos() + c.r.cos())).abs() < 1e-15);
        let (t, r) = chart_inverse(PI / 3.0, PI / 3.0).unwrap();
        assert!((t - 0.75f64.sqrt()).abs() < 1e-15 && (r - 0.75f64.sqrt()).abs() < 1e-15);
        let (t, r) = chart_inverse(0.0, FRAC_PI_2).unwrap();
        assert!(t.abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
        assert!(matches!(chart_inverse(2.0, 1.5), Err(Error::OutOfImage { .. })));
        assert!(chart_forward(0.0, -1.0).is_err());
    }

    #[test]
    fn constant_trace() {
        let grid = EuclideanRadialGrid::for_power(2, 2.0).unwrap();
        let c = 0.7;
        let v0 = SphereField::single(2, HarmonicIndex::new(1, 1).unwrap(), c * VOLUME.sqrt());
        let pair = pt0_inverse(&StatePair::new(v0, SphereField::zeros(2)).unwrap(), &grid).unwrap();
        for (x, r) in pair.g0.values().iter().zip(grid.node_radii()) {
            assert!((x - c * omega0(r)).abs() < 1e-14);
        }
        assert!(pair.g1.max_abs() == 0.0);
    }

    #[test]
    fn euclidean_volume() {
        let grid = EuclideanRadialGrid::for_power(3, 2.0).unwrap();
        let ones = grid.grid().sample(|_| 1.0);
        let mut f = ones.clone();
        grid.scale_by_radius(&mut f, |r| omega0(r).powi(3));
        assert!((grid.integrate(&f).unwrap() - VOLUME).abs() < 1e-12);
    }

    #[test]
    fn q_below_four_is_rejected() {
        assert!(lq_transfer(|_| Ok(SphereField::zeros(1)), 1, 3.5, 8).is_err());
    }
}
