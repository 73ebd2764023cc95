//! The cubic equation `∂_T² u + (1 − Δ)u + κu³ = 0` on S³ and its forced
//! perturbation form `∂_T² v + (1 − Δ)v + κ(g + v)³ = 0` with `g = U(T)(v₀, v₁)`.

mod energy;
mod picard;

pub use energy::{
    check_globalization_budget, energy_e, gronwall_envelope_case1, uniqueness_energy, BudgetNorms, BudgetReport,
    ForcingNorms, GlobalizationBudget,
};
pub use picard::{
    calibrate_picard_constant, duhamel_map, local_hypotheses, picard_local, picard_time, PicardConfig, PicardReport,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linear_flow::{evolve_linear, linear_position};
use crate::random_data::StatePair;
use crate::sphere::{mode_count, HarmonicTransform, SphereField, SphereGrid};

/// Coefficient magnitude treated as runaway.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Perturbation,
}

/// Lawson fourth-order integrator: exact mode-wise propagation of the linear
/// part, cubic term evaluated on a grid that dealiases `Π(u³)`.
#[derive(Debug, Clone)]
pub struct Solver {
    n_max: usize,
    kappa: f64,
    transform: HarmonicTransform,
    weights: Vec<f64>,
}

impl Solver {
    pub fn new(n_max: usize, kappa: f64) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("n_max must be >= 1"));
        }
        let transform = HarmonicTransform::new(n_max, SphereGrid::for_cubic(n_max))?;
        let weights = transform.grid().weights();
        Ok(Self { n_max, kappa, transform, weights })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn transform(&self) -> &HarmonicTransform {
        &self.transform
    }

    /// `Π((g + v)³)` for position fields `v` and optional `g`.
    pub fn cube(&self, pos: &SphereField, forcing: Option<&SphereField>) -> Result<SphereField> {
        let mut u = pos.resized(self.n_max);
        if let Some(g) = forcing {
            u.add_scaled(g, 1.0);
        }
        let v = self.transform.synthesize(&u)?;
        self.transform.project_power(&v, 3, self.n_max)
    }

    /// `∫ u⁴`.
    pub fn quartic_integral(&self, pos: &SphereField) -> Result<f64> {
        let v = self.transform.synthesize(&pos.resized(self.n_max))?;
        Ok(v.values().iter().zip(&self.weights).map(|(x, w)| w * x.powi(4)).sum())
    }

    /// `‖u‖_{L^4}`.
    pub fn l4_norm(&self, pos: &SphereField) -> Result<f64> {
        Ok(self.quartic_integral(pos)?.powf(0.25))
    }

    /// `𝓗 = ½‖∂_T u‖² + ½⟨u, (1−Δ)u⟩ + (κ/4)∫u⁴`.
    pub fn hamiltonian(&self, state: &StatePair) -> Result<f64> {
        Ok(0.5 * state.linear_energy() + 0.25 * self.kappa * self.quartic_integral(&state.pos)?)
    }

    /// `𝓔 = (‖∂_T v‖² + ⟨v, (1−Δ)v⟩ + ½∫v⁴)^{1/2}`.
    pub fn energy_e(&self, state: &StatePair) -> Result<f64> {
        Ok((state.linear_energy() + 0.5 * self.quartic_integral(&state.pos)?).sqrt())
    }

    fn forcing_at(forcing: Option<&StatePair>, t: f64) -> Option<SphereField> {
        forcing.map(|g| linear_position(g, t))
    }

    /// Nonlinear part of the vector field: `(0, −κ Π((g + v)³))`.
    fn rhs(&self, t: f64, y: &StatePair, forcing: Option<&StatePair>) -> Result<StatePair> {
        let mut out = StatePair::zeros(self.n_max);
        if self.kappa != 0.0 {
            let g = Self::forcing_at(forcing, t);
            out.vel = self.cube(&y.pos, g.as_ref())?;
            out.vel.scale(-self.kappa);
        }
        Ok(out)
    }

    /// One Lawson RK4 step of size `h` from time `t`.
    pub fn step(&self, t: f64, y: &StatePair, h: f64, forcing: Option<&StatePair>) -> Result<StatePair> {
        let half = 0.5 * h;
        let k1 = self.rhs(t, y, forcing)?;
        let e_half_y = evolve_linear(y, half);
        let mut ya = y.clone();
        ya.add_scaled(&k1, half);
        let ya = evolve_linear(&ya, half);
        let k2 = self.rhs(t + half, &ya, forcing)?;
        let mut yb = e_half_y.clone();
        yb.add_scaled(&k2, half);
        let k3 = self.rhs(t + half, &yb, forcing)?;
        let e_full_y = evolve_linear(y, h);
        let mut yc = e_full_y.clone();
        yc.add_scaled(&evolve_linear(&k3, half), h);
        let k4 = self.rhs(t + h, &yc, forcing)?;
        let mut mid = k2;
        mid.add_scaled(&k3, 1.0);
        let mut out = e_full_y;
        out.add_scaled(&evolve_linear(&k1, h), h / 6.0);
        out.add_scaled(&evolve_linear(&mid, half), h / 3.0);
        out.add_scaled(&k4, h / 6.0);
        Ok(out)
    }

    /// Integrate from `t0` to `t_end` (either direction) with step `|dt|`,
    /// keeping every `snapshot_every`-th state. A runaway solution truncates
    /// the trajectory and is recorded in [`Trajectory::blow_up`].
    pub fn solve(
        &self,
        initial: &StatePair,
        forcing: Option<&StatePair>,
        t0: f64,
        t_end: f64,
        dt: f64,
        snapshot_every: usize,
    ) -> Result<Trajectory> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let every = snapshot_every.max(1);
        let span = t_end - t0;
        let steps = ((span.abs() / dt).round() as usize).max(1);
        let steps = steps.div_ceil(every) * every;
        let h = span / steps as f64;
        let y0 = StatePair { pos: initial.pos.resized(self.n_max), vel: initial.vel.resized(self.n_max) };
        let forcing = forcing.map(|g| StatePair { pos: g.pos.resized(self.n_max), vel: g.vel.resized(self.n_max) });
        let mut times = vec![t0];
        let mut states = vec![y0.clone()];
        let mut y = y0;
        let mut blow_up = None;
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            let next = self.step(t, &y, h, forcing.as_ref())?;
            if !next.is_finite() || next.max_abs() > BLOW_UP_THRESHOLD {
                blow_up = Some(t);
                break;
            }
            y = next;
            if (i + 1) % every == 0 {
                times.push(t0 + (i + 1) as f64 * h);
                states.push(y.clone());
            }
        }
        let mode = if forcing.is_some() { Mode::Perturbation } else { Mode::Full };
        Ok(Trajectory { times, states, mode, forcing, dt: h.abs(), kappa: self.kappa, blow_up })
    }
}

/// Snapshots of a solution on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StatePair>,
    pub mode: Mode,
    /// Linear data generating `g(T) = U(T)(v₀, v₁)` in perturbation mode.
    pub forcing: Option<StatePair>,
    pub dt: f64,
    pub kappa: f64,
    /// Last valid time when the solution ran away.
    pub blow_up: Option<f64>,
}

impl Trajectory {
    pub fn n_max(&self) -> usize {
        self.states[0].n_max()
    }

    pub fn last(&self) -> &StatePair {
        self.states.last().expect("trajectory has at least one snapshot")
    }

    /// Error if the solution ran away.
    pub fn complete(self) -> Result<Self> {
        match self.blow_up {
            Some(t) => Err(Error::BlowUp { last_time: t }),
            None => Ok(self),
        }
    }

    fn spacing(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    fn stencil_value(&self, t: f64, start: usize) -> StatePair {
        let mut acc = StatePair::zeros(self.n_max());
        for a in start..start + 4 {
            let mut l = 1.0;
            for b in start..start + 4 {
                if a != b {
                    l *= (t - self.times[b]) / (self.times[a] - self.times[b]);
                }
            }
            acc.add_scaled(&evolve_linear(&self.states[a], -self.times[a]), l);
        }
        evolve_linear(&acc, t)
    }

    /// Cubic interpolation in the interaction picture `w = U(−T) y`, together
    /// with the difference to the neighbouring stencil as an error estimate.
    pub fn interpolate_with_error(&self, t: f64) -> Result<(StatePair, f64)> {
        let n = self.times.len();
        let h = self.spacing();
        if n < 4 {
            return Err(invalid("interpolation needs at least four snapshots"));
        }
        let x = (t - self.times[0]) / h;
        let tol = 1e-9 * (n as f64);
        if x < -tol || x > (n - 1) as f64 + tol {
            return Err(invalid(format!("time {t} outside trajectory")));
        }
        let i = (x.floor().max(0.0) as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n - 4);
        let value = self.stencil_value(t, start);
        let alt = if start + 4 < n { start + 1 } else { start.saturating_sub(1) };
        let other = if alt != start { self.stencil_value(t, alt) } else { value.clone() };
        let err = value.sub(&other).max_abs();
        Ok((value, err))
    }

    pub fn interpolate(&self, t: f64) -> Result<StatePair> {
        Ok(self.interpolate_with_error(t)?.0)
    }

    /// `u = g + v` in perturbation mode, `v` otherwise.
    pub fn total_state(&self, index: usize) -> StatePair {
        let mut s = self.states[index].clone();
        if let Some(g) = &self.forcing {
            s.add_scaled(&evolve_linear(g, self.times[index]), 1.0);
        }
        s
    }

    /// CSV: `T` followed by position then velocity coefficients in flat order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n_max = self.n_max();
        let mut header = vec!["T".to_string()];
        for part in ["pos", "vel"] {
            for n in 1..=n_max {
                for k in 1..=n * n {
                    header.push(format!("{part}_{n}_{k}"));
                }
            }
        }
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(1 + 2 * mode_count(n_max));
            row.push(format!("{t:e}"));
            row.extend(s.pos.coeffs().iter().chain(s.vel.coeffs()).map(|c| format!("{c:e}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{HarmonicIndex, VOLUME};

    fn constant_mode(c: f64, n_max: usize) -> StatePair {
        let e = SphereField::single(n_max, HarmonicIndex::new(1, 1).unwrap(), c);
        StatePair::new(e, SphereField::zeros(n_max)).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let s = Solver::new(4, 1.0).unwrap();
        let tr = s.solve(&StatePair::zeros(4), None, 0.0, 1.0, 0.05, 1).unwrap();
        assert!(tr.states.iter().all(|x| x.max_abs() == 0.0));
    }

    #[test]
    fn cube_of_constant_mode() {
        let s = Solver::new(3, 1.0).unwrap();
        let c = 0.7;
        let cube = s.cube(&constant_mode(c, 3).pos, None).unwrap();
        assert!((cube.coeffs()[0] - c.powi(3) / VOLUME).abs() < 1e-14);
        assert!(cube.coeffs()[1..].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn linear_control_matches_propagator() {
        let s = Solver::new(3, 0.0).unwrap();
        let mut y = constant_mode(0.3, 3);
        y.vel.set(HarmonicIndex::new(3, 4).unwrap(), 0.2);
        let tr = s.solve(&y, None, 0.0, 2.0, 0.1, 1).unwrap();
        assert!(tr.last().sub(&evolve_linear(&y, 2.0)).max_abs() < 1e-14);
    }

    #[test]
    fn backward_solve_and_interpolation() {
        let s = Solver::new(3, 1.0).unwrap();
        let mut y = constant_mode(1.0, 3);
        y.pos.set(HarmonicIndex::new(2, 2).unwrap(), 0.4);
        let fine = s.solve(&y, None, 0.0, -1.0, 0.001, 1).unwrap();
        let coarse = s.solve(&y, None, 0.0, -1.0, 0.001, 50).unwrap();
        assert!(coarse.times.windows(2).all(|w| w[1] < w[0]));
        let (interp, err) = coarse.interpolate_with_error(fine.times[333]).unwrap();
        assert!(interp.sub(&fine.states[333]).max_abs() < 1e-6);
        assert!(err < 1e-5);
    }
}
