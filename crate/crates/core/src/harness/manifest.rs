use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::catalog::{leaf_components, lookup, Kind};
use crate::error::{Error, Result};

/// Numeric parameters of one experiment. Unset fields take the catalog
/// defaults when the manifest is resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Overall amplitude of the coefficient profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Coarse step of an order measurement (halved once).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_coarse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<Vec<usize>>,
    /// 1, 2 or 3 for the high-frequency, cubic and low-frequency sup tails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fresh_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<usize>,
    /// Number of levels, times or snapshots, depending on the experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Quadrature nodes per direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplification: Option<f64>,
    /// Thresholds keyed by check id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

macro_rules! merge_fields {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Params {
    /// Fill every unset field from `defaults`.
    pub fn merged_with(&self, defaults: &Params) -> Params {
        let mut out = self.clone();
        merge_fields!(
            out,
            defaults,
            n_max,
            sigma,
            alpha,
            scale,
            kappa,
            dt,
            dt_coarse,
            theta,
            t0,
            t_min,
            t_max,
            q,
            q_list,
            n_list,
            dims,
            cutoff,
            cutoffs,
            regime,
            lambda,
            c,
            iterations,
            draws,
            calibration_draws,
            fresh_draws,
            max_attempts,
            points,
            nodes,
            amplification
        );
        for (k, v) in &defaults.tolerances {
            out.tolerances.entry(k.clone()).or_insert(*v);
        }
        out
    }

    /// Every violated range, as `path.field: reason`.
    pub fn problems(&self, path: &str, known_tolerances: &[&str]) -> Vec<String> {
        let mut bad = Vec::new();
        let mut flag = |field: &str, ok: bool, why: &str| {
            if !ok {
                bad.push(format!("{path}{field}: {why}"));
            }
        };
        let finite = |x: f64| x.is_finite();
        if let Some(s) = self.sigma {
            flag("sigma", (0.0..0.5).contains(&s), "must lie in [0, 1/2)");
        }
        if let Some(a) = self.alpha {
            let s = self.sigma.unwrap_or(0.0);
            flag("alpha", finite(a) && a > 1.5 + s, "must exceed 3/2 + sigma for a finite profile sum");
        }
        if let Some(n) = self.n_max {
            flag("n_max", (1..=64).contains(&n), "must lie in 1..=64");
        }
        if let Some(x) = self.scale {
            flag("scale", finite(x) && x >= 0.0, "must be finite and non-negative");
        }
        if let Some(x) = self.kappa {
            flag("kappa", finite(x), "must be finite");
        }
        for (name, v) in [("dt", self.dt), ("dt_coarse", self.dt_coarse)] {
            if let Some(x) = v {
                flag(name, finite(x) && x > 0.0 && x <= 1.0, "must lie in (0, 1]");
            }
        }
        if let Some(x) = self.theta {
            flag("theta", x > 0.0 && x <= 1.0, "must lie in (0, 1]");
        }
        if let Some(x) = self.t0 {
            flag("t0", finite(x) && x > 0.0, "must be positive");
        }
        if let Some(x) = self.t_min {
            flag("t_min", finite(x) && x >= 0.0, "must be finite and non-negative");
        }
        if let Some(x) = self.t_max {
            flag("t_max", finite(x) && x > self.t_min.unwrap_or(0.0), "must exceed t_min");
        }
        if let Some(x) = self.q {
            flag("q", x >= 1.0, "must be >= 1");
        }
        if let Some(v) = &self.q_list {
            flag("q_list", !v.is_empty() && v.iter().all(|&q| q >= 1.0), "must be non-empty with entries >= 1");
        }
        for (name, v) in [("n_list", &self.n_list), ("dims", &self.dims), ("cutoffs", &self.cutoffs)] {
            if let Some(v) = v {
                flag(
                    name,
                    !v.is_empty() && v.iter().all(|&n| (1..=1000).contains(&n)),
                    "must be non-empty with entries in 1..=1000",
                );
            }
        }
        if let Some(r) = self.regime {
            flag("regime", (1..=3).contains(&r), "must be 1, 2 or 3");
        }
        for (name, v) in [("lambda", self.lambda), ("c", self.c), ("amplification", self.amplification)] {
            if let Some(x) = v {
                flag(name, finite(x) && x > 0.0, "must be positive");
            }
        }
        for (name, v, min) in [
            ("iterations", self.iterations, 1),
            ("draws", self.draws, 1),
            ("calibration_draws", self.calibration_draws, 1),
            ("fresh_draws", self.fresh_draws, 1),
            ("max_attempts", self.max_attempts, 1),
            ("points", self.points, 2),
            ("nodes", self.nodes, 4),
        ] {
            if let Some(x) = v {
                flag(name, x >= min, &format!("must be >= {min}"));
            }
        }
        for (k, &v) in &self.tolerances {
            if !known_tolerances.contains(&k.as_str()) {
                bad.push(format!("{path}tolerances.{k}: no such check"));
            } else if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{path}tolerances.{k}: must be finite and non-negative"));
            }
        }
        bad
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    /// Code version the outputs were produced with.
    #[serde(default = "version_tag")]
    pub version: String,
    /// The statement the experiment checks; filled from the catalog.
    #[serde(default)]
    pub statement: String,
    #[serde(default)]
    pub params: Params,
    /// Per-component parameters of composite experiments.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<String, Params>,
}

pub fn version_tag() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

impl RunManifest {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            version: version_tag(),
            statement: String::new(),
            params: Params::default(),
            components: BTreeMap::new(),
        }
    }

    /// Parse a JSON manifest. Unknown keys are reported together rather than
    /// one at a time.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let mut bad = Vec::new();
        let top = ["experiment", "seed", "version", "statement", "params", "components"];
        if let Value::Object(map) = &value {
            for k in map.keys() {
                if !top.contains(&k.as_str()) {
                    bad.push(format!("{k}: unknown field"));
                }
            }
            if let Some(Value::Object(p)) = map.get("params") {
                bad.extend(unknown_param_keys(p, "params."));
            }
            if let Some(Value::Object(c)) = map.get("components") {
                for (name, p) in c {
                    if let Value::Object(p) = p {
                        bad.extend(unknown_param_keys(p, &format!("components.{name}.")));
                    }
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        serde_json::from_value(value).map_err(|e| Error::Validation(vec![e.to_string()]))
    }

    /// Catalog defaults filled in and every field checked; the result is
    /// what gets hashed and persisted.
    pub fn resolve(&self) -> Result<RunManifest> {
        let entry = lookup(&self.experiment)?;
        let mut out = self.clone();
        out.statement = entry.statement.to_string();
        let mut bad = Vec::new();
        match entry.kind {
            Kind::Single(_) => {
                if !self.components.is_empty() {
                    bad.push("components: only composite experiments take component parameters".to_string());
                }
                let defaults = (entry.defaults)();
                out.params = self.params.merged_with(&defaults);
                bad.extend(out.params.problems("params.", &tolerance_keys(&defaults)));
            }
            Kind::Composite(_) => {
                let parts = leaf_components(&self.experiment)?;
                if self.params != Params::default() {
                    bad.push("params: composite experiments take parameters per component".to_string());
                }
                for name in self.components.keys() {
                    if !parts.contains(&name.as_str()) {
                        bad.push(format!("components.{name}: not part of {}", self.experiment));
                    }
                }
                let mut comps = BTreeMap::new();
                for &part in &parts {
                    let defaults = (lookup(part)?.defaults)();
                    let given = self.components.get(part).cloned().unwrap_or_default();
                    let p = given.merged_with(&defaults);
                    bad.extend(p.problems(&format!("components.{part}."), &tolerance_keys(&defaults)));
                    comps.insert(part.to_string(), p);
                }
                out.components = comps;
            }
        }
        if bad.is_empty() {
            Ok(out)
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    /// `<experiment>-<first 16 hex digits of the content hash>`.
    pub fn run_dir_name(&self) -> Result<String> {
        Ok(format!("{}-{}", self.experiment, &self.content_hash()?[..16]))
    }
}

fn tolerance_keys(defaults: &Params) -> Vec<&str> {
    defaults.tolerances.keys().map(String::as_str).collect()
}

fn unknown_param_keys(map: &serde_json::Map<String, Value>, path: &str) -> Vec<String> {
    let known = serde_json::to_value(Params {
        n_max: Some(0),
        sigma: Some(0.0),
        alpha: Some(0.0),
        scale: Some(0.0),
        kappa: Some(0.0),
        dt: Some(0.0),
        dt_coarse: Some(0.0),
        theta: Some(0.0),
        t0: Some(0.0),
        t_min: Some(0.0),
        t_max: Some(0.0),
        q: Some(0.0),
        q_list: Some(vec![]),
        n_list: Some(vec![]),
        dims: Some(vec![]),
        cutoff: Some(0),
        cutoffs: Some(vec![]),
        regime: Some(0),
        lambda: Some(0.0),
        c: Some(0.0),
        iterations: Some(0),
        draws: Some(0),
        calibration_draws: Some(0),
        fresh_draws: Some(0),
        max_attempts: Some(0),
        points: Some(0),
        nodes: Some(0),
        amplification: Some(0.0),
        tolerances: BTreeMap::from([(String::new(), 0.0)]),
    })
    .expect("params serialize");
    let known = known.as_object().expect("params are an object");
    map.keys().filter(|k| !known.contains_key(*k)).map(|k| format!("{path}{k}: unknown field")).collect()
}
