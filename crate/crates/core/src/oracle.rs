//! Centralized reference solutions for `min Σ f_i(x)` over `∩ Ω_i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Objective, StackedObjective};
use crate::sets::ProductSet;
use crate::solver::{pd_step, PdState, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    ProjectedGradient,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    /// Analytic when available, otherwise projected gradient cross-checked by
    /// the grid when `m <= 2`.
    Auto,
    Analytic,
    ProjectedGradient,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub provenance: Provenance,
    /// Distance between the projected-gradient and grid answers, when both ran.
    pub cross_check: Option<f64>,
    /// Dual reference `Λ*`, attached by [`attach_dual`].
    #[serde(skip)]
    pub dual: Option<DVector<f64>>,
}

/// Agreement required between the projected-gradient and grid answers.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

const FEASIBILITY_TOL: f64 = 1e-9;

pub fn solve_centralized(objective: &StackedObjective, sets: &ProductSet, method: OracleMethod) -> Result<OracleSolution> {
    if sets.len() != objective.len() || sets.block_dim() != objective.block_dim() {
        return Err(Error::DimensionMismatch { context: "oracle sets", expected: objective.len(), found: sets.len() });
    }
    let finish = |x: Vec<f64>, provenance, cross_check| -> Result<OracleSolution> {
        let f_star = objective.global_value(&x)?;
        Ok(OracleSolution { x_star: x, f_star, provenance, cross_check, dual: None })
    };
    match method {
        OracleMethod::Analytic => {
            let x = analytic(objective, sets).ok_or_else(|| Error::OracleUnavailable("no closed form".into()))?;
            finish(x, Provenance::Analytic, None)
        }
        OracleMethod::ProjectedGradient => finish(projected_gradient(objective, sets)?, Provenance::ProjectedGradient, None),
        OracleMethod::Grid => {
            let (lo, hi) = grid_window(sets, None)?;
            finish(grid_search(objective, sets, &lo, &hi)?, Provenance::Grid, None)
        }
        OracleMethod::Auto => {
            if let Some(x) = analytic(objective, sets) {
                return finish(x, Provenance::Analytic, None);
            }
            let x = projected_gradient(objective, sets)?;
            let mut cross = None;
            if objective.block_dim() <= 2 {
                let (lo, hi) = grid_window(sets, Some(&x))?;
                let g = grid_search(objective, sets, &lo, &hi)?;
                let d = x.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if d > CROSS_CHECK_TOL {
                    return Err(Error::OracleUnavailable(format!(
                        "projected gradient and grid disagree by {d:e}"
                    )));
                }
                cross = Some(d);
            }
            finish(x, Provenance::ProjectedGradient, cross)
        }
    }
}

/// Closed forms for unconstrained problems: Huber sums whose mean lies in
/// every quadratic branch, and pure quadratics with a nonsingular Hessian sum.
fn analytic(objective: &StackedObjective, sets: &ProductSet) -> Option<Vec<f64>> {
    if !sets.is_unconstrained() {
        return None;
    }
    let parts = objective.parts();
    let m = objective.block_dim();
    if parts.iter().all(|p| matches!(p, Objective::Huber { .. })) {
        let centers: Vec<&Vec<f64>> =
            parts.iter().filter_map(|p| if let Objective::Huber { center } = p { Some(center) } else { None }).collect();
        let n = centers.len() as f64;
        let mean: Vec<f64> = (0..m).map(|c| centers.iter().map(|a| a[c]).sum::<f64>() / n).collect();
        let in_branch = centers.iter().all(|a| a.iter().zip(&mean).all(|(ai, xi)| (xi - ai).abs() <= 1.0));
        return in_branch.then_some(mean);
    }
    let mut h = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for p in parts {
        match p {
            Objective::Quadratic { q, b: bi, .. } => {
                h += DMatrix::from_fn(m, m, |i, j| q[i][j]);
                b += DVector::from_column_slice(bi);
            }
            Objective::QuadraticExp { q, b: bi, exp_terms, .. } if exp_terms.iter().all(|t| t.coef == 0.0) => {
                h += DMatrix::from_fn(m, m, |i, j| q[i][j]);
                b += DVector::from_column_slice(bi);
            }
            _ => return None,
        }
    }
    let x = h.cholesky()?.solve(&(-b));
    Some(x.iter().copied().collect())
}

/// Dykstra's alternating projections: converges to the Euclidean
/// projection onto the intersection of the factors.
pub fn project_intersection(sets: &ProductSet, y: &[f64]) -> Result<Vec<f64>> {
    let factors = sets.factors();
    let m = y.len();
    if factors.iter().all(|f| f.is_whole_space()) {
        return Ok(y.to_vec());
    }
    if factors.len() == 1 {
        return factors[0].project(y);
    }
    let mut x = y.to_vec();
    let mut increments = vec![vec![0.0; m]; factors.len()];
    const MAX_CYCLES: usize = 200_000;
    for _ in 0..MAX_CYCLES {
        let start = x.clone();
        for (f, p) in factors.iter().zip(increments.iter_mut()) {
            let z: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
            let proj = f.project_unchecked(&z);
            for c in 0..m {
                p[c] = z[c] - proj[c];
            }
            x = proj;
        }
        let moved = x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if moved <= 1e-15 * scale && sets.intersection_contains(&x, FEASIBILITY_TOL) {
            return Ok(x);
        }
    }
    if sets.intersection_contains(&x, 1e-6) {
        Ok(x)
    } else {
        Err(Error::InfeasibleIntersection)
    }
}

/// Projected gradient on `f = Σ f_i` over `∩ Ω_i`. The step `1/L` is found
/// by backtracking on the gradient Lipschitz condition along each step.
pub fn projected_gradient(objective: &StackedObjective, sets: &ProductSet) -> Result<Vec<f64>> {
    const MAX_ITERS: usize = 1_000_000;
    let m = objective.block_dim();
    let mut x = project_intersection(sets, &vec![0.0; m])?;
    if !objective.global_value(&x)?.is_finite() {
        return Err(Error::NonFinite { iteration: 0, what: "oracle objective" });
    }
    let mut lip = 1.0f64;
    let mut still = 0;
    for _ in 0..MAX_ITERS {
        let g = objective.global_gradient(&x)?;
        let next = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b / lip).collect();
            let cand = project_intersection(sets, &trial)?;
            let f_cand = objective.global_value(&cand)?;
            let g_cand = objective.global_gradient(&cand)?;
            let step = cand.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dg = g_cand.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if f_cand.is_finite() && dg.is_finite() && dg <= lip * step {
                break cand;
            }
            lip *= 2.0;
            if lip > 1e300 {
                return Err(Error::NonFinite { iteration: 0, what: "oracle step size" });
            }
        };
        let moved = next.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = next;
        if moved <= 1e-14 * scale {
            still += 1;
            if still >= 3 {
                return Ok(x);
            }
        } else {
            still = 0;
        }
        lip = (lip * 0.9).max(1e-12);
    }
    Err(Error::NoConvergence { what: "projected-gradient oracle", iterations: MAX_ITERS })
}

/// Search window for the grid: coordinate bounds implied by the sets, with
/// unbounded coordinates centered on `hint` (or the origin).
pub fn grid_window(sets: &ProductSet, hint: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = sets.block_dim();
    let mut lo = vec![f64::NEG_INFINITY; m];
    let mut hi = vec![f64::INFINITY; m];
    for f in sets.factors() {
        let (l, h) = f.coordinate_bounds();
        for c in 0..m {
            lo[c] = lo[c].max(l[c]);
            hi[c] = hi[c].min(h[c]);
        }
    }
    for c in 0..m {
        let center = hint.map(|h| h[c]).unwrap_or(0.0);
        let half = 10.0 * (1.0 + center.abs());
        if !lo[c].is_finite() {
            lo[c] = if hi[c].is_finite() { hi[c].min(center) - half } else { center - half };
        }
        if !hi[c].is_finite() {
            hi[c] = lo[c].max(center) + half;
        }
        if lo[c] > hi[c] {
            return Err(Error::InfeasibleIntersection);
        }
    }
    Ok((lo, hi))
}

/// Brute-force minimization over feasible grid points for `m <= 3`, refined
/// by repeated zooming until the pitch drops below `1e-9`.
pub fn grid_search(objective: &StackedObjective, sets: &ProductSet, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    let m = objective.block_dim();
    if m > 3 {
        return Err(Error::OracleUnavailable(format!("grid search needs m <= 3, got {m}")));
    }
    let coarse_points = [0, 4001, 501, 81][m];
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let mut pitch: Vec<f64> = (0..m).map(|c| (hi[c] - lo[c]) / (coarse_points - 1) as f64).collect();
    let mut best = scan(objective, sets, &lo, &pitch, coarse_points)?.ok_or(Error::InfeasibleIntersection)?;

    const ZOOM_POINTS: usize = 101;
    while pitch.iter().any(|&p| p > 1e-9) {
        for c in 0..m {
            lo[c] = best.0[c] - 5.0 * pitch[c];
            hi[c] = best.0[c] + 5.0 * pitch[c];
            pitch[c] = (hi[c] - lo[c]) / (ZOOM_POINTS - 1) as f64;
        }
        if let Some(found) = scan(objective, sets, &lo, &pitch, ZOOM_POINTS)? {
            if found.1 <= best.1 {
                best = found;
            }
        }
    }
    Ok(best.0)
}

fn scan(
    objective: &StackedObjective,
    sets: &ProductSet,
    lo: &[f64],
    pitch: &[f64],
    points: usize,
) -> Result<Option<(Vec<f64>, f64)>> {
    let m = lo.len();
    let total = points.pow(m as u32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x = vec![0.0; m];
    for idx in 0..total {
        let mut rem = idx;
        for c in 0..m {
            x[c] = lo[c] + pitch[c] * (rem % points) as f64;
            rem /= points;
        }
        if !sets.intersection_contains(&x, 0.0) {
            continue;
        }
        let v = objective.global_value(&x)?;
        if v.is_finite() && best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x.clone(), v));
        }
    }
    Ok(best)
}

/// Runs the primal-dual method from `X_0 = 1⊗x*`, `Λ_0 = 0` to convergence
/// and returns the terminal dual iterate as the reference `Λ*`. The step size
/// is halved (up to five times) if the run blows up or stalls.
pub fn reference_dual(problem: &Problem, alpha: f64, x_star: &[f64]) -> Result<DVector<f64>> {
    const MAX_ITERS: usize = 1_000_000;
    let m = problem.dim();
    let mut step = alpha;
    let mut last_err = Error::NoConvergence { what: "reference primal-dual run", iterations: MAX_ITERS };
    for _ in 0..6 {
        match reference_run(problem, step, x_star, MAX_ITERS) {
            Ok(state) => {
                let x_ref = problem.replicate(x_star);
                let gap = (0..problem.n())
                    .map(|i| (state.x.rows(i * m, m) - x_ref.rows(i * m, m)).norm())
                    .fold(0.0, f64::max);
                if gap > CROSS_CHECK_TOL {
                    return Err(Error::OracleUnavailable(format!(
                        "reference run settled {gap:e} away from the oracle solution"
                    )));
                }
                return Ok(state.lambda);
            }
            Err(e @ (Error::NonFinite { .. } | Error::NoConvergence { .. })) => {
                last_err = e;
                step *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

fn reference_run(problem: &Problem, alpha: f64, x_star: &[f64], max_iters: usize) -> Result<PdState> {
    let m = problem.dim();
    let mut state = PdState::new(problem.replicate(x_star), DVector::zeros(problem.stacked_dim()));
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for _ in 0..max_iters {
        let next = pd_step(problem, &state, alpha)?;
        let r = crate::diagnostics::residual(&state.x, &next.x, &problem.graph, m).norm();
        let scale = 1.0 + next.x.norm() + next.lambda.norm();
        state = next;
        if r <= 1e-14 * scale {
            return Ok(state);
        }
        if r < best * 0.999 {
            best = r;
            since_best = 0;
        } else {
            since_best += 1;
            // Stalled at the floating-point floor.
            if since_best > 20_000 && best <= 1e-11 * scale {
                return Ok(state);
            }
        }
    }
    if best <= 1e-10 * (1.0 + state.x.norm() + state.lambda.norm()) {
        Ok(state)
    } else {
        Err(Error::NoConvergence { what: "reference primal-dual run", iterations: max_iters })
    }
}

/// Attaches `Λ*` from a converged reference run.
pub fn attach_dual(solution: &mut OracleSolution, problem: &Problem, alpha: f64) -> Result<()> {
    solution.dual = Some(reference_dual(problem, alpha, &solution.x_star)?);
    Ok(())
}
