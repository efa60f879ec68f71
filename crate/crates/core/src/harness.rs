//! Experiment execution: oracle, step-size check, selected algorithms,
//! CSV traces and a JSON report.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{consensus_spread, normalized_error, CertificateContext, Reference, RunTrace, TraceSettings};
use crate::error::{Error, Result};
use crate::objectives::LipschitzSampling;
use crate::oracle::{attach_dual, solve_centralized, OracleMethod, OracleSolution, Provenance};
use crate::scenario::Scenario;
use crate::solver::{dgd_run, is_feasible, pd_run, validate_step_size, PdConfig, PdState, Problem, StepSchedule, StepSizeReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pd,
    #[value(name = "dgd_const")]
    DgdConst,
    #[value(name = "dgd_075")]
    #[serde(rename = "dgd_075")]
    Dgd075,
    #[value(name = "dgd_04")]
    #[serde(rename = "dgd_04")]
    Dgd04,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Pd, Algorithm::DgdConst, Algorithm::Dgd075, Algorithm::Dgd04];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pd => "pd",
            Algorithm::DgdConst => "dgd_const",
            Algorithm::Dgd075 => "dgd_075",
            Algorithm::Dgd04 => "dgd_04",
        }
    }

    pub fn schedule(self) -> Option<StepSchedule> {
        match self {
            Algorithm::Pd => None,
            Algorithm::DgdConst => Some(StepSchedule::Constant),
            Algorithm::Dgd075 => Some(StepSchedule::Diminishing(0.75)),
            Algorithm::Dgd04 => Some(StepSchedule::Diminishing(0.4)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmSelector {
    Pd,
    #[value(name = "dgd_const")]
    DgdConst,
    #[value(name = "dgd_075")]
    #[serde(rename = "dgd_075")]
    Dgd075,
    #[value(name = "dgd_04")]
    #[serde(rename = "dgd_04")]
    Dgd04,
    All,
}

impl AlgorithmSelector {
    pub fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgorithmSelector::Pd => vec![Algorithm::Pd],
            AlgorithmSelector::DgdConst => vec![Algorithm::DgdConst],
            AlgorithmSelector::Dgd075 => vec![Algorithm::Dgd075],
            AlgorithmSelector::Dgd04 => vec![Algorithm::Dgd04],
            AlgorithmSelector::All => Algorithm::ALL.to_vec(),
        }
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub max_iters: Option<usize>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(k) = self.max_iters {
            s.max_iters = k;
        }
        if let Some(a) = self.alpha {
            s.alpha = a;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub provenance: Provenance,
    pub cross_check: Option<f64>,
}

impl From<&OracleSolution> for OracleSummary {
    fn from(s: &OracleSolution) -> Self {
        Self { x_star: s.x_star.clone(), f_star: s.f_star, provenance: s.provenance, cross_check: s.cross_check }
    }
}

/// Snapshot diagnostics of one primal iterate against the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub consensus_spread: f64,
    /// `max_i |x_i - x*|`.
    pub max_agent_error: f64,
    /// `f̃(X) - f*`.
    pub f_gap: f64,
    pub e: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmReport {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub converged: bool,
    pub terminal_x: Vec<Vec<f64>>,
    pub terminal: Snapshot,
    pub terminal_r_norm: Option<f64>,
    /// `f̃(X̄_K) - f*` for the last recorded time average.
    pub avg_gap: Option<f64>,
    pub sup_scaled_gap: Option<f64>,
    pub trace_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub algorithm: Algorithm,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub kappa_n: f64,
    pub step_size: Option<StepSizeReport>,
    /// Why the step-size report is missing, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size_note: Option<String>,
    pub oracle: OracleSummary,
    pub initial: Snapshot,
    pub runs: Vec<AlgorithmReport>,
    pub skipped: Vec<Skipped>,
}

/// A scenario with its problem, oracle solution and certificate context.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub problem: Problem,
    pub init: PdState,
    pub oracle: OracleSolution,
    pub ctx: Option<CertificateContext>,
    pub step_size: std::result::Result<StepSizeReport, String>,
}

impl Prepared {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let problem = scenario.build()?;
        let init = scenario.initial_state(problem.dim());
        let oracle = oracle_for(&problem)?;
        let mut prepared =
            Self { scenario: scenario.clone(), problem, init, oracle, ctx: None, step_size: Err(String::new()) };
        prepared.certify()?;
        Ok(prepared)
    }

    fn certify(&mut self) -> Result<()> {
        let alpha = self.scenario.alpha;
        match attach_dual(&mut self.oracle, &self.problem, alpha) {
            Ok(()) => {}
            Err(e) if e.category() == crate::error::ErrorCategory::Input => return Err(e),
            Err(e) => {
                self.step_size = Err(e.to_string());
                return Ok(());
            }
        }
        let sampling = LipschitzSampling { seed: self.scenario.seed, ..Default::default() };
        let (report, ctx) = validate_step_size(&self.problem, alpha, &self.init, &self.oracle, sampling)?;
        self.step_size = Ok(report);
        self.ctx = Some(ctx);
        Ok(())
    }

    pub fn reference(&self) -> Reference {
        Reference { x_star: self.oracle.x_star.clone(), f_star: self.oracle.f_star }
    }

    pub fn settings(&self) -> TraceSettings {
        TraceSettings { ctx: self.ctx.clone(), reference: Some(self.reference()) }
    }

    pub fn snapshot(&self, x: &DVector<f64>) -> Result<Snapshot> {
        let m = self.problem.dim();
        let x_star = &self.oracle.x_star;
        let max_agent_error = (0..self.problem.n())
            .map(|i| x.rows(i * m, m).iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Snapshot {
            consensus_spread: consensus_spread(x, m),
            max_agent_error,
            f_gap: self.problem.objective.value(x)? - self.oracle.f_star,
            e: normalized_error(x, &self.init.x, x_star).ok(),
            feasible: is_feasible(&self.problem, x),
        })
    }

    /// Runs one algorithm from the shared initial state.
    pub fn run_algorithm(&self, algorithm: Algorithm) -> Result<RunTrace> {
        let s = &self.scenario;
        let settings = self.settings();
        match algorithm.schedule() {
            None => {
                let cfg = PdConfig::new(s.alpha, s.max_iters, s.stop_tol)?;
                pd_run(&self.problem, &cfg, &self.init, &settings)
            }
            Some(schedule) => {
                dgd_run(&self.problem, s.dgd_alpha(), schedule, s.max_iters, &self.init.x, algorithm.name(), &settings)
            }
        }
    }
}

/// Analytic solution when available, otherwise projected gradient with a
/// grid cross-check in low dimension.
pub fn oracle_for(problem: &Problem) -> Result<OracleSolution> {
    solve_centralized(&problem.objective, &problem.sets, OracleMethod::Auto)
}

fn is_unsupported(e: &Error) -> bool {
    matches!(e, Error::UnsupportedConstraint(_) | Error::NegativeMixing { .. })
}

/// Runs the selected algorithms. With `out`, writes `<algorithm>.csv` for
/// each completed run and `report.json`.
pub fn run(scenario: &Scenario, selector: AlgorithmSelector, out: Option<&Path>) -> Result<(RunReport, Vec<RunTrace>)> {
    let prepared = Prepared::new(scenario)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut runs = Vec::new();
    let mut traces = Vec::new();
    let mut skipped = Vec::new();
    if scenario.max_iters > 0 {
        for algorithm in selector.algorithms() {
            let trace = match prepared.run_algorithm(algorithm) {
                Ok(t) => t,
                Err(e) if selector == AlgorithmSelector::All && is_unsupported(&e) => {
                    skipped.push(Skipped { algorithm, reason: e.to_string() });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let trace_file = match out {
                Some(dir) => Some(write_trace(dir, &trace)?),
                None => None,
            };
            runs.push(algorithm_report(&prepared, algorithm, &trace, trace_file)?);
            traces.push(trace);
        }
    }
    let (step_size, step_size_note) = match &prepared.step_size {
        Ok(r) => (Some(r.clone()), None),
        Err(note) => (None, Some(note.clone())),
    };
    let report = RunReport {
        scenario: prepared.scenario.clone(),
        kappa_n: prepared.problem.graph.max_eigenvalue(),
        step_size,
        step_size_note,
        oracle: OracleSummary::from(&prepared.oracle),
        initial: prepared.snapshot(&prepared.init.x)?,
        runs,
        skipped,
    };
    if let Some(dir) = out {
        let f = BufWriter::new(File::create(dir.join("report.json"))?);
        serde_json::to_writer_pretty(f, &report)?;
    }
    Ok((report, traces))
}

fn write_trace(dir: &Path, trace: &RunTrace) -> Result<String> {
    let name = format!("{}.csv", trace.algorithm);
    let path: PathBuf = dir.join(&name);
    let mut w = BufWriter::new(File::create(&path)?);
    trace.write_csv(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(name)
}

fn algorithm_report(p: &Prepared, algorithm: Algorithm, trace: &RunTrace, trace_file: Option<String>) -> Result<AlgorithmReport> {
    let x = trace.terminal_x();
    let m = p.problem.dim();
    Ok(AlgorithmReport {
        algorithm,
        iterations: trace.iterates.steps(),
        converged: trace.iterates.converged,
        terminal_x: x.as_slice().chunks(m).map(<[f64]>::to_vec).collect(),
        terminal: p.snapshot(x)?,
        terminal_r_norm: trace.records.last().map(|r| r.r_norm),
        avg_gap: trace.records.last().and_then(|r| r.gap),
        sup_scaled_gap: trace.sup_scaled_gap(),
        trace_file,
    })
}
