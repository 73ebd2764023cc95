use std::collections::BTreeMap;

use serde::Serialize;

use super::experiments as ex;
use super::manifest::Params;
use super::Ctx;
use crate::error::{Error, Result};

pub type Runner = fn(&mut Ctx, &Params) -> Result<()>;

#[derive(Clone, Copy)]
pub enum Kind {
    Single(Runner),
    /// Runs the listed experiments in order and aggregates their checks.
    Composite(&'static [&'static str]),
}

/// One catalog entry.
#[derive(Clone, Copy)]
pub struct Experiment {
    pub id: &'static str,
    /// Tag of the statement being checked.
    pub statement: &'static str,
    /// The library operation the experiment drives.
    pub op: &'static str,
    pub summary: &'static str,
    pub kind: Kind,
    pub defaults: fn() -> Params,
}

/// Serializable view of a catalog entry.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogRow {
    pub id: &'static str,
    pub statement: &'static str,
    pub op: &'static str,
    pub summary: &'static str,
    pub components: Vec<&'static str>,
}

impl Experiment {
    pub fn row(&self) -> CatalogRow {
        let components = match self.kind {
            Kind::Single(_) => Vec::new(),
            Kind::Composite(parts) => parts.to_vec(),
        };
        CatalogRow { id: self.id, statement: self.statement, op: self.op, summary: self.summary, components }
    }
}

fn tol(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn none() -> Params {
    Params::default()
}

fn parseval() -> Params {
    Params { n_max: Some(12), tolerances: tol(&[("parseval", 1e-10)]), ..none() }
}

fn kernel_constancy() -> Params {
    Params {
        n_max: Some(12),
        tolerances: tol(&[("kernel-constancy", 1e-9), ("kernel-mean", 1e-9), ("zonal-witness", 1e-6)]),
        ..none()
    }
}

fn haar_orthogonality() -> Params {
    Params {
        dims: Some(vec![1, 2, 3, 5, 9, 10, 50, 100, 200, 400]),
        draws: Some(10_000),
        tolerances: tol(&[
            ("haar-orthogonality", 1e-12),
            ("haar-left-invariance", 0.01),
            ("haar-coordinate-mean", 3.0),
        ]),
        ..none()
    }
}

fn median_sqrtq() -> Params {
    Params {
        n_list: Some((2..=10).collect()),
        q_list: Some(vec![4.0, 8.0, 16.0]),
        draws: Some(400),
        tolerances: tol(&[("median-sqrtq", 2.0)]),
        ..none()
    }
}

fn tail_shape() -> Params {
    Params {
        n_list: Some(vec![3, 6, 9, 12]),
        q: Some(4.0),
        draws: Some(20_000),
        points: Some(60),
        tolerances: tol(&[("tail-rate-increasing", 1.0)]),
        ..none()
    }
}

fn bernstein() -> Params {
    Params {
        n_list: Some((2..=12).collect()),
        q: Some(6.0),
        draws: Some(200),
        tolerances: tol(&[("bernstein-spread", 2.0), ("bernstein-l2", 1e-10), ("bernstein-zonal", 1e-6)]),
        ..none()
    }
}

fn coordinate_tail() -> Params {
    Params {
        dims: Some(vec![10, 50]),
        draws: Some(100_000),
        points: Some(51),
        tolerances: tol(&[("coordinate-tail", 1.0)]),
        ..none()
    }
}

fn linear_periodicity() -> Params {
    Params { n_max: Some(8), tolerances: tol(&[("group-law", 1e-12), ("periodicity", 1e-12)]), ..none() }
}

fn proba(regime: u8, draws: usize, tolerances: &[(&str, f64)]) -> Params {
    Params {
        n_max: Some(8),
        sigma: Some(0.0),
        alpha: Some(2.5),
        scale: Some(1.0),
        regime: Some(regime),
        q: Some(6.0),
        cutoff: Some(4),
        cutoffs: Some(vec![2, 4]),
        draws: Some(draws),
        points: Some(40),
        tolerances: tol(tolerances),
        ..none()
    }
}

fn proba_1() -> Params {
    proba(1, 1000, &[("proba-1-dominance", 0.0), ("proba-1-decay", 0.0)])
}

fn proba_2() -> Params {
    proba(2, 10_000, &[("proba-2-r2", 0.9), ("proba-2-decay", 0.0)])
}

fn proba_3() -> Params {
    proba(3, 1000, &[("proba-3-decay", 0.0)])
}

fn tail_experiment() -> Params {
    Params { tolerances: tol(&[("tail-decay", 0.0)]), ..proba(2, 2000, &[]) }
}

fn picard() -> Params {
    Params {
        n_max: Some(4),
        sigma: Some(0.2),
        alpha: Some(2.5),
        scale: Some(0.3),
        t0: Some(0.5),
        lambda: Some(2.0),
        c: Some(1.0),
        iterations: Some(12),
        fresh_draws: Some(5),
        dt: Some(1e-3),
        tolerances: tol(&[("picard-contraction", 1.0), ("picard-limit", 1e-6)]),
        ..none()
    }
}

fn duffing() -> Params {
    Params {
        n_max: Some(3),
        scale: Some(3.0),
        dt: Some(1e-3),
        t_max: Some(20.0),
        points: Some(400_000),
        tolerances: tol(&[("duffing", 1e-6)]),
        ..none()
    }
}

fn hamiltonian() -> Params {
    Params {
        n_max: Some(8),
        sigma: Some(0.2),
        alpha: Some(2.5),
        scale: Some(1.0),
        dt: Some(1e-3),
        dt_coarse: Some(0.02),
        t_max: Some(std::f64::consts::TAU),
        tolerances: tol(&[("hamiltonian-drift", 1e-6), ("hamiltonian-order", 3.5)]),
        ..none()
    }
}

fn gronwall() -> Params {
    Params {
        n_max: Some(6),
        sigma: Some(0.2),
        alpha: Some(2.5),
        scale: Some(0.5),
        t_max: Some(4.0),
        dt: Some(5e-3),
        calibration_draws: Some(10),
        fresh_draws: Some(20),
        tolerances: tol(&[("gronwall-envelope", 1.0)]),
        ..none()
    }
}

fn budget() -> Params {
    Params {
        n_max: Some(6),
        sigma: Some(0.2),
        alpha: Some(2.5),
        scale: Some(0.05),
        theta: Some(0.5),
        t0: Some(4.0),
        cutoff: Some(3),
        dt: Some(5e-3),
        calibration_draws: Some(5),
        fresh_draws: Some(20),
        max_attempts: Some(200),
        amplification: Some(1000.0),
        tolerances: tol(&[("budget-energy", 1.0), ("budget-bound", 1.0), ("budget-f-first", 1.0)]),
        ..none()
    }
}

fn chart() -> Params {
    Params {
        n_max: Some(5),
        draws: Some(10_000),
        tolerances: tol(&[("chart-roundtrip", 1e-12), ("chart-examples", 1e-12), ("measure-pullback", 1e-8)]),
        ..none()
    }
}

fn eigen() -> Params {
    Params {
        n_max: Some(8),
        tolerances: tol(&[("h0-h1-eigen", 1e-5), ("isometry-l2", 1e-8), ("isometry-h-1", 1e-6)]),
        ..none()
    }
}

fn lq() -> Params {
    Params {
        n_max: Some(3),
        sigma: Some(0.0),
        alpha: Some(2.0),
        scale: Some(1.0),
        q_list: Some(vec![4.0, 5.0, 6.0]),
        nodes: Some(96),
        tolerances: tol(&[("lq-constant", 1e-5), ("lq-transfer", 1e-5)]),
        ..none()
    }
}

fn scattering() -> Params {
    Params {
        n_max: Some(8),
        sigma: Some(0.0),
        alpha: Some(2.0),
        scale: Some(0.1),
        q: Some(6.0),
        t_min: Some(2.0),
        t_max: Some(40.0),
        points: Some(12),
        dt: Some(5e-3),
        nodes: Some(crate::penrose::SCATTERING_NODES),
        tolerances: tol(&[("scattering-control", 1e-8), ("scattering-beta-min", 0.30), ("scattering-beta-max", 0.40)]),
        ..none()
    }
}

fn uniqueness() -> Params {
    Params {
        n_max: Some(6),
        sigma: Some(0.2),
        alpha: Some(2.5),
        scale: Some(1.0),
        dt: Some(2e-3),
        t_max: Some(std::f64::consts::TAU),
        tolerances: tol(&[("uniqueness-H", 1e-6)]),
        ..none()
    }
}

fn simulate() -> Params {
    Params {
        n_max: Some(6),
        sigma: Some(0.2),
        alpha: Some(2.5),
        scale: Some(1.0),
        kappa: Some(1.0),
        dt: Some(5e-3),
        t_min: Some(0.0),
        t_max: Some(std::f64::consts::TAU),
        points: Some(10),
        tolerances: tol(&[("finite", 1.0 - 1e-9)]),
        ..none()
    }
}

const ACCEPTANCE: [&[&str]; 8] = [
    &["parseval", "kernel-constancy"],
    &["haar-orthogonality", "coordinate-tail", "median-sqrtq", "tail-shape"],
    &["linear-periodicity", "prop-proba-2"],
    &["duffing-oracle", "hamiltonian-drift", "picard-contraction"],
    &["budget-case2", "gronwall-case1"],
    &["chart-roundtrip", "h0-h1-eigen", "lq-transfer"],
    &["scattering-fit"],
    &["uniqueness-H"],
];

const ALL_ACCEPTANCE: &[&str] = &[
    "acceptance-1",
    "acceptance-2",
    "acceptance-3",
    "acceptance-4",
    "acceptance-5",
    "acceptance-6",
    "acceptance-7",
    "acceptance-8",
];

macro_rules! single {
    ($id:expr, $stmt:expr, $op:expr, $summary:expr, $run:path, $defaults:path) => {
        Experiment {
            id: $id,
            statement: $stmt,
            op: $op,
            summary: $summary,
            kind: Kind::Single($run),
            defaults: $defaults,
        }
    };
}

macro_rules! composite {
    ($id:expr, $stmt:expr, $summary:expr, $parts:expr) => {
        Experiment {
            id: $id,
            statement: $stmt,
            op: "harness::run_experiment",
            summary: $summary,
            kind: Kind::Composite($parts),
            defaults: none,
        }
    };
}

static CATALOG: [Experiment; 32] = [
    single!(
        "parseval",
        "harmonic-orthonormality",
        "sphere::HarmonicTransform::analyze",
        "synthesis/analysis round trip at n_max",
        ex::parseval,
        parseval
    ),
    single!(
        "kernel-constancy",
        "kernel-addition-theorem",
        "sphere::projection_kernel_diag",
        "K_n(x)^2 constant in x with mean n^2/(2pi^2); zonal sup ratio n/sqrt(2pi^2)",
        ex::kernel_constancy,
        kernel_constancy
    ),
    single!(
        "haar-orthogonality",
        "haar-rotation",
        "random_basis::sample_haar",
        "orthogonality, left invariance and coordinate second moment of Haar draws",
        ex::haar_orthogonality,
        haar_orthogonality
    ),
    single!(
        "median-sqrtq",
        "median-lq-bound",
        "random_basis::estimate_median_lq",
        "median L^q norm of a random unit vector of E_n over sqrt(q)",
        ex::median_sqrtq,
        median_sqrtq
    ),
    single!(
        "tail-shape",
        "lq-concentration",
        "random_basis::empirical_tail",
        "Gaussian tail of |norm - median| with rate growing in n",
        ex::tail_shape,
        tail_shape
    ),
    single!(
        "bernstein",
        "bernstein-inequality",
        "random_basis::bernstein_ratio",
        "L^q/L^2 ratio over n^(1-2/q) bounded in n",
        ex::bernstein,
        bernstein
    ),
    single!(
        "coordinate-tail",
        "sphere-coordinate-concentration",
        "random_basis::coordinate_tail_check",
        "P(|x_1| > t) <= 2 exp(-(N-1) t^2 / 2)",
        ex::coordinate_tail,
        coordinate_tail
    ),
    single!(
        "linear-periodicity",
        "linear-group-law",
        "linear_flow::evolve_linear",
        "U(s)U(t) = U(s+t) and U(2pi) = I",
        ex::linear_periodicity,
        linear_periodicity
    ),
    single!(
        "prop-proba-1",
        "prop-proba-regime-1",
        "linear_flow::tail_experiment",
        "high-frequency L^p tail shifts left as the cutoff grows",
        ex::prop_proba_1,
        proba_1
    ),
    single!(
        "prop-proba-2",
        "prop-proba-regime-2",
        "linear_flow::tail_experiment",
        "weighted L^3 L^6 tail is Gaussian in lambda",
        ex::prop_proba_2,
        proba_2
    ),
    single!(
        "prop-proba-3",
        "prop-proba-regime-3",
        "linear_flow::tail_experiment",
        "low-frequency L^1 L^inf tail decays",
        ex::prop_proba_3,
        proba_3
    ),
    single!(
        "picard-contraction",
        "local-well-posedness",
        "nlw::picard_local",
        "Picard iterates contract on [T0 - T1, T0 + T1] with calibrated C",
        ex::picard_contraction,
        picard
    ),
    single!(
        "duffing-oracle",
        "constant-mode-reduction",
        "nlw::Solver::solve",
        "constant mode follows y'' + y + y^3/(2pi^2) = 0",
        ex::duffing_oracle,
        duffing
    ),
    single!(
        "hamiltonian-drift",
        "energy-conservation",
        "nlw::Solver::hamiltonian",
        "Hamiltonian drift and fourth-order convergence",
        ex::hamiltonian_drift,
        hamiltonian
    ),
    single!(
        "gronwall-case1",
        "energy-gronwall-case-1",
        "nlw::gronwall_envelope_case1",
        "Gronwall envelope dominates the energy of the forced equation",
        ex::gronwall_case1,
        gronwall
    ),
    single!(
        "budget-case2",
        "globalization-case-2",
        "nlw::check_globalization_budget",
        "energy stays below e^(p/6) on draws in J_theta",
        ex::budget_case2,
        budget
    ),
    single!(
        "chart-roundtrip",
        "penrose-chart",
        "penrose::chart_inverse",
        "chart round trip and measure pullback",
        ex::chart_roundtrip,
        chart
    ),
    single!(
        "h0-h1-eigen",
        "penrose-eigenfunctions",
        "penrose::apply_radial_operator",
        "H0/H1 eigen-residuals and weighted isometries",
        ex::h0_h1_eigen,
        eigen
    ),
    single!(
        "lq-transfer",
        "penrose-lq-transfer",
        "penrose::lq_transfer",
        "L^q space-time norms agree across the conformal map",
        ex::lq_transfer,
        lq
    ),
    single!(
        "scattering-fit",
        "scattering-decay",
        "penrose::scattering_decay",
        "decay exponent of ||u(t) - L(t)||_{L^q(R^3)}",
        ex::scattering_fit,
        scattering
    ),
    single!(
        "uniqueness-H",
        "uniqueness-energy",
        "nlw::uniqueness_energy",
        "H(t) between dt and dt/2 solves",
        ex::uniqueness_h,
        uniqueness
    ),
    single!(
        "simulate",
        "simulation",
        "nlw::Solver::solve",
        "solve one random data set and write the trajectory",
        ex::simulate,
        simulate
    ),
    single!(
        "tail-experiment",
        "prop-proba",
        "linear_flow::tail_experiment",
        "survival curve of one weighted norm regime",
        ex::tail_experiment,
        tail_experiment
    ),
    composite!("acceptance-1", "acceptance-spectral-core", "spectral core", ACCEPTANCE[0]),
    composite!("acceptance-2", "acceptance-haar-concentration", "Haar sampling and concentration", ACCEPTANCE[1]),
    composite!("acceptance-3", "acceptance-linear-flow", "linear flow and regime-2 tail", ACCEPTANCE[2]),
    composite!("acceptance-4", "acceptance-nonlinear-solver", "nonlinear solver", ACCEPTANCE[3]),
    composite!("acceptance-5", "acceptance-globalization", "globalization", ACCEPTANCE[4]),
    composite!("acceptance-6", "acceptance-penrose", "Penrose transform", ACCEPTANCE[5]),
    composite!("acceptance-7", "acceptance-scattering", "scattering", ACCEPTANCE[6]),
    composite!("acceptance-8", "acceptance-uniqueness", "uniqueness proxy", ACCEPTANCE[7]),
    composite!("all-acceptance", "acceptance-suite", "every acceptance criterion", ALL_ACCEPTANCE),
];

/// The stable experiment catalog.
pub fn list_experiments() -> &'static [Experiment] {
    &CATALOG
}

pub fn lookup(id: &str) -> Result<&'static Experiment> {
    CATALOG.iter().find(|e| e.id == id).ok_or_else(|| Error::UnknownExperiment(id.to_string()))
}

/// Single experiments reached from `id`, composites expanded in order.
pub fn leaf_components(id: &str) -> Result<Vec<&'static str>> {
    let entry = lookup(id)?;
    match entry.kind {
        Kind::Single(_) => Ok(vec![entry.id]),
        Kind::Composite(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(leaf_components(p)?);
            }
            Ok(out)
        }
    }
}
