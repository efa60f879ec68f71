//! The projected primal-dual iteration and the DGD baseline.
//!
//! With stacked iterates `X_k`, `Λ_k` and `𝐋 = L ⊗ I_m`, one primal-dual
//! step is
//!
//! ```text
//! X_{k+1} = P_Ω{ X_k - α ∇f̃(X_k) - α 𝐋 (Λ_k + X_k) }
//! Λ_{k+1} = Λ_k + α 𝐋 X_k
//! ```
//!
//! Both updates read the iteration-`k` values.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, CertificateContext, RunTrace, TraceSettings};
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::objectives::{estimate_local_lipschitz, LipschitzSampling, StackedObjective};
use crate::oracle::OracleSolution;
use crate::sets::{ProductSet, DEFAULT_MEMBERSHIP_TOL};

/// Graph, local objectives and local constraint sets of one instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: NetworkGraph,
    pub objective: StackedObjective,
    pub sets: ProductSet,
}

impl Problem {
    pub fn new(graph: NetworkGraph, objective: StackedObjective, sets: ProductSet) -> Result<Self> {
        let n = graph.n();
        if objective.len() != n {
            return Err(Error::DimensionMismatch { context: "objective count", expected: n, found: objective.len() });
        }
        if sets.len() != n {
            return Err(Error::DimensionMismatch { context: "set count", expected: n, found: sets.len() });
        }
        if sets.block_dim() != objective.block_dim() {
            return Err(Error::DimensionMismatch {
                context: "set dimension",
                expected: objective.block_dim(),
                found: sets.block_dim(),
            });
        }
        Ok(Self { graph, objective, sets })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Block dimension `m`.
    pub fn dim(&self) -> usize {
        self.objective.block_dim()
    }

    pub fn stacked_dim(&self) -> usize {
        self.n() * self.dim()
    }

    /// `1 ⊗ x`.
    pub fn replicate(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.stacked_dim(), (0..self.n()).flat_map(|_| x.iter().copied()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdState {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub k: usize,
}

impl PdState {
    pub fn new(x: DVector<f64>, lambda: DVector<f64>) -> Self {
        Self { x, lambda, k: 0 }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DVector::zeros(dim))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdConfig {
    pub alpha: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
}

impl PdConfig {
    pub fn new(alpha: f64, max_iters: usize, stop_tol: f64) -> Result<Self> {
        let cfg = Self { alpha, max_iters, stop_tol };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidStepSize(self.alpha));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidIterationBudget);
        }
        Ok(())
    }
}

fn check_state(problem: &Problem, state: &PdState) -> Result<()> {
    let dim = problem.stacked_dim();
    for v in [&state.x, &state.lambda] {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { context: "iterate", expected: dim, found: v.len() });
        }
    }
    Ok(())
}

fn ensure_finite(v: &DVector<f64>, iteration: usize, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, what })
    }
}

/// One step together with the pre-projection argument of the primal update.
#[derive(Debug, Clone)]
pub struct PdStep {
    pub next: PdState,
    pub pre_projection: DVector<f64>,
}

pub fn pd_step_detailed(problem: &Problem, state: &PdState, alpha: f64) -> Result<PdStep> {
    check_state(problem, state)?;
    let m = problem.dim();
    let grad = problem.objective.gradient(&state.x)?;
    ensure_finite(&grad, state.k, "gradient")?;
    let lx = problem.graph.apply_laplacian(&state.x, m);
    let llambda = problem.graph.apply_laplacian(&state.lambda, m);
    let pre_projection = &state.x - alpha * (grad + &llambda + &lx);
    let x = problem.sets.project(&pre_projection)?;
    let lambda = &state.lambda + alpha * lx;
    ensure_finite(&x, state.k, "primal iterate")?;
    ensure_finite(&lambda, state.k, "dual iterate")?;
    Ok(PdStep { next: PdState { x, lambda, k: state.k + 1 }, pre_projection })
}

pub fn pd_step(problem: &Problem, state: &PdState, alpha: f64) -> Result<PdState> {
    pd_step_detailed(problem, state, alpha).map(|s| s.next)
}

/// Raw iterate history of a run.
#[derive(Debug, Clone, Default)]
pub struct Iterates {
    /// `X_0 … X_K`.
    pub primal: Vec<DVector<f64>>,
    /// `Λ_0 … Λ_K`; empty for methods without a dual variable.
    pub dual: Vec<DVector<f64>>,
    /// `|r_k|` for `k = 0 … K-1`.
    pub residual_norms: Vec<f64>,
    /// Whether the run stopped on `stop_tol` rather than the budget.
    pub converged: bool,
}

impl Iterates {
    pub fn steps(&self) -> usize {
        self.primal.len().saturating_sub(1)
    }
}

/// Iterates until `|r_k| < stop_tol` or `max_iters` steps.
pub fn pd_iterate(problem: &Problem, cfg: &PdConfig, init: &PdState) -> Result<Iterates> {
    cfg.validate()?;
    check_state(problem, init)?;
    let m = problem.dim();
    let mut state = PdState { k: 0, ..init.clone() };
    let mut out = Iterates { primal: vec![state.x.clone()], dual: vec![state.lambda.clone()], ..Default::default() };
    for _ in 0..cfg.max_iters {
        let next = pd_step(problem, &state, cfg.alpha)?;
        let r = diagnostics::residual(&state.x, &next.x, &problem.graph, m).norm();
        out.primal.push(next.x.clone());
        out.dual.push(next.lambda.clone());
        out.residual_norms.push(r);
        state = next;
        if r < cfg.stop_tol {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

/// Runs the primal-dual method and evaluates per-iteration diagnostics.
pub fn pd_run(problem: &Problem, cfg: &PdConfig, init: &PdState, settings: &TraceSettings) -> Result<RunTrace> {
    let iterates = pd_iterate(problem, cfg, init)?;
    diagnostics::build_trace("pd", problem, cfg.alpha, iterates, settings)
}

/// Step-size rule for the DGD baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    Constant,
    /// `α / k^p`, indexed from `k = 1`.
    Diminishing(f64),
}

impl StepSchedule {
    /// Step used to move from iterate `k` to `k + 1`.
    pub fn step(&self, alpha: f64, k: usize) -> f64 {
        match self {
            StepSchedule::Constant => alpha,
            StepSchedule::Diminishing(p) => alpha / ((k + 1) as f64).powf(*p),
        }
    }
}

fn check_dgd_problem(problem: &Problem) -> Result<()> {
    if !problem.sets.is_box_or_whole() {
        return Err(Error::UnsupportedConstraint("DGD"));
    }
    let w = problem.graph.mixing_matrix();
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            if w[(i, j)] < 0.0 {
                return Err(Error::NegativeMixing { i: i + 1, j: j + 1 });
            }
        }
    }
    Ok(())
}

/// `x_{i,k+1} = Σ_j w_ij x_{j,k} - α_k ∇f_i(x_{i,k})` with `W = I - L`,
/// followed by projection onto box constraints when present.
pub fn dgd_step(problem: &Problem, state: &PdState, step: f64) -> Result<PdState> {
    check_state(problem, state)?;
    check_dgd_problem(problem)?;
    dgd_step_unchecked(problem, state, step)
}

fn dgd_step_unchecked(problem: &Problem, state: &PdState, step: f64) -> Result<PdState> {
    let m = problem.dim();
    let grad = problem.objective.gradient(&state.x)?;
    ensure_finite(&grad, state.k, "gradient")?;
    let mixed = &state.x - problem.graph.apply_laplacian(&state.x, m);
    let x = problem.sets.project(&(mixed - step * grad))?;
    ensure_finite(&x, state.k, "primal iterate")?;
    Ok(PdState { x, lambda: state.lambda.clone(), k: state.k + 1 })
}

pub fn dgd_iterate(problem: &Problem, alpha: f64, schedule: StepSchedule, max_iters: usize, x0: &DVector<f64>) -> Result<Iterates> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidStepSize(alpha));
    }
    check_dgd_problem(problem)?;
    let dim = problem.stacked_dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch { context: "iterate", expected: dim, found: x0.len() });
    }
    let m = problem.dim();
    let mut state = PdState::new(x0.clone(), DVector::zeros(dim));
    let mut out = Iterates { primal: vec![x0.clone()], ..Default::default() };
    for k in 0..max_iters {
        let next = dgd_step_unchecked(problem, &state, schedule.step(alpha, k))?;
        out.residual_norms.push(diagnostics::residual(&state.x, &next.x, &problem.graph, m).norm());
        out.primal.push(next.x.clone());
        state = next;
    }
    Ok(out)
}

pub fn dgd_run(
    problem: &Problem,
    alpha: f64,
    schedule: StepSchedule,
    max_iters: usize,
    x0: &DVector<f64>,
    name: &str,
    settings: &TraceSettings,
) -> Result<RunTrace> {
    let iterates = dgd_iterate(problem, alpha, schedule, max_iters, x0)?;
    diagnostics::build_trace(name, problem, alpha, iterates, settings)
}

/// Admissibility of a constant step size against both step-size bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizeReport {
    pub alpha: f64,
    pub kappa_n: f64,
    /// `1 / (2 κ_n)`.
    pub bound_spectral: f64,
    pub l_r: f64,
    /// `3 / (2 l_r)`.
    pub bound_lipschitz: f64,
    pub spectral_ok: bool,
    pub lipschitz_ok: bool,
    pub admissible: bool,
    pub r: f64,
    pub lambda_min_m: f64,
    /// `λ_min(W - (α l_r / 2) I)`.
    pub lambda_min_w_shifted: f64,
    /// `1 / λ_min(W - (α l_r / 2) I) + 1`, when that matrix is positive definite.
    pub c_r: Option<f64>,
    pub v0: f64,
}

impl StepSizeReport {
    pub fn from_context(ctx: &CertificateContext, kappa_n: f64) -> Self {
        let alpha = ctx.alpha();
        let l_r = ctx.l_r().unwrap_or(f64::INFINITY);
        let bound_spectral = if kappa_n > 0.0 { 1.0 / (2.0 * kappa_n) } else { f64::INFINITY };
        let bound_lipschitz = if l_r > 0.0 { 1.5 / l_r } else { f64::INFINITY };
        let spectral_ok = alpha > 0.0 && alpha <= bound_spectral;
        let lipschitz_ok = alpha < bound_lipschitz;
        Self {
            alpha,
            kappa_n,
            bound_spectral,
            l_r,
            bound_lipschitz,
            spectral_ok,
            lipschitz_ok,
            admissible: spectral_ok && lipschitz_ok,
            r: ctx.radius(),
            lambda_min_m: ctx.lambda_min_m(),
            lambda_min_w_shifted: ctx.lambda_min_w() - 0.5 * alpha * l_r,
            c_r: ctx.c_r(),
            v0: ctx.v0(),
        }
    }
}

/// Builds the certificate context for `(X*, Λ*)`, estimates `l_r` on the
/// radius-`r` region and reports admissibility of `alpha`.
pub fn validate_step_size(
    problem: &Problem,
    alpha: f64,
    init: &PdState,
    oracle: &OracleSolution,
    sampling: LipschitzSampling,
) -> Result<(StepSizeReport, CertificateContext)> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidStepSize(alpha));
    }
    let lambda_star = oracle
        .dual
        .clone()
        .ok_or_else(|| Error::OracleUnavailable("no dual reference solution".into()))?;
    let x_star = problem.replicate(&oracle.x_star);
    let mut ctx = CertificateContext::new(&problem.graph, problem.dim(), alpha, x_star, lambda_star, &init.x, &init.lambda)?;
    let r = ctx.radius();
    let l_r = if r > 0.0 {
        estimate_local_lipschitz(&problem.objective, ctx.x_star(), r, &problem.sets, sampling)?
    } else {
        // The region is the single point X*; any positive radius bounds it.
        estimate_local_lipschitz(&problem.objective, ctx.x_star(), f64::EPSILON, &problem.sets, sampling)?
    };
    ctx.set_lipschitz(l_r);
    Ok((StepSizeReport::from_context(&ctx, problem.graph.max_eigenvalue()), ctx))
}

/// Whether every block of `x` lies in its local set.
pub fn is_feasible(problem: &Problem, x: &DVector<f64>) -> bool {
    problem.sets.contains(x, DEFAULT_MEMBERSHIP_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphSpec, WeightRule};
    use crate::objectives::{ExpTerm, Objective};
    use crate::sets::ConvexSet;

    fn example51() -> Problem {
        let graph = build_graph(&GraphSpec::new(3, vec![(1, 3), (2, 3), (1, 1), (2, 2), (3, 3)], WeightRule::Metropolis))
            .unwrap();
        let parts = vec![
            Objective::QuadraticExp {
                q: vec![vec![1.0, 1.0], vec![1.0, 2.0]],
                b: vec![3.0, 2.0],
                c: 0.0,
                exp_terms: vec![ExpTerm { coef: 0.5, dir: vec![1.0, 1.0] }],
            },
            Objective::QuadraticExp {
                q: vec![vec![2.0, 1.0], vec![1.0, 4.0]],
                b: vec![2.0, 2.0],
                c: 0.0,
                exp_terms: vec![ExpTerm { coef: 1.0, dir: vec![0.0, 1.0] }],
            },
            Objective::QuadraticExp {
                q: vec![vec![4.0, 0.0], vec![0.0, 2.0]],
                b: vec![4.0, 2.0],
                c: 0.0,
                exp_terms: vec![ExpTerm { coef: 1.0, dir: vec![1.0, 0.0] }],
            },
        ];
        let sets = ProductSet::new(vec![
            ConvexSet::ball(vec![0.0, 0.0], 2f64.sqrt()).unwrap(),
            ConvexSet::half_space(vec![-1.0, 0.0], 1.0).unwrap(),
            ConvexSet::half_space(vec![0.0, 1.0], -0.5).unwrap(),
        ])
        .unwrap();
        Problem::new(graph, StackedObjective::new(parts).unwrap(), sets).unwrap()
    }

    fn huber_problem(a: &[f64]) -> Problem {
        let n = a.len();
        let edges = (1..n).map(|i| (i, i + 1)).collect();
        let graph = build_graph(&GraphSpec::new(n, edges, WeightRule::Metropolis)).unwrap();
        let parts = a.iter().map(|&c| Objective::Huber { center: vec![c] }).collect();
        let sets = ProductSet::new(vec![ConvexSet::whole_space(1); n]).unwrap();
        Problem::new(graph, StackedObjective::new(parts).unwrap(), sets).unwrap()
    }

    #[test]
    fn consensus_fixed_point() {
        let p = huber_problem(&[2.0, 2.0, 2.0]);
        let s = PdState::new(DVector::from_element(3, 2.0), DVector::zeros(3));
        let next = pd_step(&p, &s, 0.4).unwrap();
        assert_eq!(next.x, s.x);
        assert_eq!(next.lambda, s.lambda);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn dual_update_is_laplacian_of_old_primal() {
        let p = huber_problem(&[1.6, 2.4, 1.9, 2.2]);
        let s = PdState::new(DVector::from_vec(vec![0.3, -1.0, 2.0, 0.7]), DVector::from_vec(vec![0.1, 0.0, -0.2, 0.1]));
        let next = pd_step(&p, &s, 0.8).unwrap();
        let expected = 0.8 * p.graph.apply_laplacian(&s.x, 1);
        assert_eq!(&next.lambda - &s.lambda, expected);
    }

    #[test]
    fn first_step_example51() {
        let p = example51();
        let next = pd_step(&p, &PdState::zeros(6), 0.4).unwrap();
        // P_Ω of -0.4 * (3.5, 2.5 | 2, 3 | 5, 2); only the first block
        // leaves its set.
        let raw = [-1.4, -1.0, -0.8, -1.2, -2.0, -0.8];
        let block1 = ConvexSet::ball(vec![0.0, 0.0], 2f64.sqrt()).unwrap().project(&raw[0..2]).unwrap();
        let expected = [block1[0], block1[1], -0.8, -1.2, -2.0, -0.8];
        for (got, want) in next.x.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        // -1.4, -1.0 has norm > sqrt(2): it was scaled onto the sphere
        assert!((next.x.rows(0, 2).norm() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(next.lambda, DVector::zeros(6));
    }

    #[test]
    fn iterates_stay_feasible() {
        let p = example51();
        let cfg = PdConfig::new(0.3, 300, 0.0).unwrap();
        let it = pd_iterate(&p, &cfg, &PdState::zeros(6)).unwrap();
        for x in &it.primal[1..] {
            assert!(is_feasible(&p, x));
        }
    }

    #[test]
    fn example51_blows_up_at_step_04() {
        let p = example51();
        let cfg = PdConfig::new(0.4, 1000, 0.0).unwrap();
        match pd_iterate(&p, &cfg, &PdState::zeros(6)) {
            Err(Error::NonFinite { iteration, .. }) => assert!((20..30).contains(&iteration), "{iteration}"),
            other => panic!("expected a non-finite iterate, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(PdConfig::new(0.0, 10, 0.0), Err(Error::InvalidStepSize(_))));
        assert!(matches!(PdConfig::new(0.1, 0, 0.0), Err(Error::InvalidIterationBudget)));
    }

    #[test]
    fn dgd_single_agent_is_gradient_descent() {
        let p = huber_problem(&[2.0]);
        let s = PdState::new(DVector::from_element(1, 0.0), DVector::zeros(1));
        let next = dgd_step(&p, &s, 0.5).unwrap();
        assert_eq!(next.x[0], 0.5);
    }

    #[test]
    fn dgd_fixed_point() {
        let p = huber_problem(&[2.0, 2.0]);
        let s = PdState::new(DVector::from_element(2, 2.0), DVector::zeros(2));
        assert_eq!(dgd_step(&p, &s, 0.8).unwrap().x, s.x);
    }

    #[test]
    fn dgd_rejects_ball_and_negative_mixing() {
        assert!(matches!(dgd_step(&example51(), &PdState::zeros(6), 0.1), Err(Error::UnsupportedConstraint(_))));
        let graph = build_graph(&GraphSpec::new(3, vec![(1, 2), (2, 3), (1, 3)], WeightRule::Unit)).unwrap();
        let parts = vec![Objective::Huber { center: vec![0.0] }; 3];
        let sets = ProductSet::new(vec![ConvexSet::whole_space(1); 3]).unwrap();
        let p = Problem::new(graph, StackedObjective::new(parts).unwrap(), sets).unwrap();
        assert!(matches!(dgd_step(&p, &PdState::zeros(3), 0.1), Err(Error::NegativeMixing { .. })));
    }

    #[test]
    fn schedules_index_from_one() {
        assert_eq!(StepSchedule::Diminishing(0.75).step(0.8, 0), 0.8);
        assert!((StepSchedule::Diminishing(0.5).step(1.0, 3) - 0.5).abs() < 1e-15);
        assert_eq!(StepSchedule::Constant.step(0.8, 99), 0.8);
    }

    #[test]
    fn non_finite_is_reported() {
        let mut p = example51();
        p.sets = ProductSet::new(vec![ConvexSet::whole_space(2); 3]).unwrap();
        let s = PdState::new(DVector::from_element(6, 400.0), DVector::zeros(6));
        let err = pd_iterate(&p, &PdConfig::new(0.4, 50, 0.0).unwrap(), &s).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }
}
