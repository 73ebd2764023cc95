//! Run manifests, the experiment catalog and the orchestration that turns a
//! manifest into a run directory of CSV tables and pass/fail checks.

mod catalog;
mod experiments;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use catalog::{leaf_components, list_experiments, lookup, CatalogRow, Experiment, Kind, Runner};
pub use manifest::{version_tag, Params, RunManifest};

use crate::error::{Error, Result};
use crate::rng::StreamFactory;

/// One pass/fail check against pinned bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Identifier of the invariant being checked.
    pub id: String,
    pub component: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Strict inequalities at both bounds.
    pub strict: bool,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// `value` against the bounds; non-finite values fail.
    pub fn evaluate(value: f64, lower: Option<f64>, upper: Option<f64>, strict: bool) -> bool {
        let lo = lower.is_none_or(|l| if strict { value > l } else { value >= l });
        let hi = upper.is_none_or(|u| if strict { value < u } else { value <= u });
        value.is_finite() && lo && hi
    }

    /// `PASS|FAIL id value relation bound`.
    pub fn line(&self) -> String {
        let (lt, gt) = if self.strict { ("<", ">") } else { ("<=", ">=") };
        let rel = match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("in [{l:e}, {u:e}]"),
            (Some(l), None) => format!("{gt} {l:e}"),
            (None, Some(u)) => format!("{lt} {u:e}"),
            (None, None) => String::new(),
        };
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {}/{} = {:.6e} {rel} ({})", self.component, self.id, self.value, self.detail)
    }
}

/// A fitted or calibrated constant with an optional confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub name: String,
    pub component: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Pass/fail of one part of a composite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub id: String,
    pub passed: bool,
    /// `component/check` ids that failed.
    pub failed: Vec<String>,
    /// Wall-clock time of the part.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub statement: String,
    pub manifest_hash: String,
    /// Name of the run directory under the output root.
    pub run_dir: String,
    /// CSV payloads relative to the run directory.
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub constants: Vec<FittedConstant>,
    pub groups: Vec<GroupOutcome>,
    pub passed: bool,
}

impl ExperimentResult {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// State handed to an experiment runner: seeding, tolerances, output files
/// and the checks collected so far.
pub struct Ctx {
    root: PathBuf,
    component: &'static str,
    seed: u64,
    tolerances: BTreeMap<String, f64>,
    checks: Vec<Check>,
    constants: Vec<FittedConstant>,
    files: Vec<String>,
}

impl Ctx {
    fn new(root: &Path, component: &'static str, seed: u64, params: &Params) -> Self {
        Self {
            root: root.to_path_buf(),
            component,
            seed,
            tolerances: params.tolerances.clone(),
            checks: Vec::new(),
            constants: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Random streams keyed by `(seed, component/task)`, so a component sees
    /// the same numbers alone or inside a composite run.
    pub fn factory(&self, task: &str) -> StreamFactory {
        StreamFactory::new(self.seed, &format!("{}/{task}", self.component))
    }

    pub fn tol(&self, id: &str) -> Result<f64> {
        self.tolerances
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(vec![format!("tolerances.{id}: missing for {}", self.component)]))
    }

    pub fn record(
        &mut self,
        id: &str,
        value: f64,
        lower: Option<f64>,
        upper: Option<f64>,
        strict: bool,
        detail: String,
    ) {
        self.checks.push(Check {
            id: id.to_string(),
            component: self.component.to_string(),
            value,
            lower,
            upper,
            strict,
            passed: Check::evaluate(value, lower, upper, strict),
            detail,
        });
    }

    /// `value < tol(id)`.
    pub fn below(&mut self, id: &str, value: f64, detail: String) -> Result<()> {
        let t = self.tol(id)?;
        self.record(id, value, None, Some(t), true, detail);
        Ok(())
    }

    /// `value <= tol(id)`.
    pub fn at_most(&mut self, id: &str, value: f64, detail: String) -> Result<()> {
        let t = self.tol(id)?;
        self.record(id, value, None, Some(t), false, detail);
        Ok(())
    }

    /// `value > tol(id)`.
    pub fn above(&mut self, id: &str, value: f64, detail: String) -> Result<()> {
        let t = self.tol(id)?;
        self.record(id, value, Some(t), None, true, detail);
        Ok(())
    }

    /// `value >= tol(id)`.
    pub fn at_least(&mut self, id: &str, value: f64, detail: String) -> Result<()> {
        let t = self.tol(id)?;
        self.record(id, value, Some(t), None, false, detail);
        Ok(())
    }

    pub fn constant(&mut self, name: &str, value: f64, ci: Option<(f64, f64)>) {
        self.constants.push(FittedConstant {
            name: name.to_string(),
            component: self.component.to_string(),
            value,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
        });
    }

    fn open(&mut self, name: &str) -> Result<fs::File> {
        let dir = self.root.join(self.component);
        fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        let path = dir.join(format!("{name}.csv"));
        self.files.push(format!("{}/{name}.csv", self.component));
        fs::File::create(&path).map_err(|e| Error::Io { path, source: e })
    }

    /// Write a table to `<component>/<name>.csv`.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::Io { path: self.root.join(name), source: e })
    }

    /// Hand a fresh `<component>/<name>.csv` to a library writer.
    pub fn csv_with(&mut self, name: &str, write: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        write(self.open(name)?)
    }
}

/// Float cell in shortest round-trip exponent form.
pub(crate) fn cell(x: f64) -> String {
    format!("{x:e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// Validate, run and persist one experiment under `out/<id>-<hash>/`.
///
/// A single experiment propagates module errors. Inside a composite run a
/// component error becomes a failed `error` check, so the remaining
/// components still report.
pub fn run_experiment(manifest: &RunManifest, out: &Path) -> Result<ExperimentResult> {
    let resolved = manifest.resolve()?;
    let entry = lookup(&resolved.experiment)?;
    let run_dir = resolved.run_dir_name()?;
    let root = out.join(&run_dir);
    fs::create_dir_all(&root).map_err(|e| Error::Io { path: root.clone(), source: e })?;
    write_json(&root.join("manifest.json"), &resolved)?;

    let mut checks = Vec::new();
    let mut constants = Vec::new();
    let mut files = Vec::new();
    let mut groups = Vec::new();
    match entry.kind {
        Kind::Single(run) => {
            let mut ctx = Ctx::new(&root, entry.id, resolved.seed, &resolved.params);
            run(&mut ctx, &resolved.params).map_err(|e| e.context(format!("experiment {}", entry.id)))?;
            checks = ctx.checks;
            constants = ctx.constants;
            files = ctx.files;
        }
        Kind::Composite(parts) => {
            for &part in parts {
                let leaves = leaf_components(part)?;
                let start = checks.len();
                let clock = Instant::now();
                for leaf in leaves {
                    let e = lookup(leaf)?;
                    let Kind::Single(run) = e.kind else { unreachable!("leaves are single experiments") };
                    let params = &resolved.components[leaf];
                    let mut ctx = Ctx::new(&root, e.id, resolved.seed, params);
                    if let Err(err) = run(&mut ctx, params) {
                        ctx.record("error", f64::NAN, None, None, false, err.to_string());
                    }
                    checks.extend(ctx.checks);
                    constants.extend(ctx.constants);
                    files.extend(ctx.files);
                }
                let failed: Vec<String> =
                    checks[start..].iter().filter(|c| !c.passed).map(|c| format!("{}/{}", c.component, c.id)).collect();
                groups.push(GroupOutcome {
                    id: part.to_string(),
                    passed: failed.is_empty(),
                    failed,
                    seconds: clock.elapsed().as_secs_f64(),
                });
            }
        }
    }
    let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
    let result = ExperimentResult {
        experiment: resolved.experiment.clone(),
        statement: resolved.statement.clone(),
        manifest_hash: resolved.content_hash()?,
        run_dir,
        files,
        checks,
        constants,
        groups,
        passed,
    };
    write_json(&root.join("result.json"), &result)?;
    Ok(result)
}
