//! Convergence certificates evaluated along a run: the Lyapunov function
//! `V(X, Λ) = <X - X*, W (X - X*)> + |Λ - Λ*|²` with
//! `W = (I - αL + α²L²) ⊗ I_m`, the radius `r`, the optimality residual,
//! normalized error, time averages and the `O(1/k)` rate identities.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::solver::{Iterates, PdState, Problem};

/// Saddle-point data and the constants derived from it for a given step size.
#[derive(Debug, Clone)]
pub struct CertificateContext {
    graph: NetworkGraph,
    m: usize,
    alpha: f64,
    x_star: DVector<f64>,
    lambda_star: DVector<f64>,
    lambda_min_w: f64,
    lambda_min_m: f64,
    v0: f64,
    radius: f64,
    l_r: Option<f64>,
    c_r: Option<f64>,
}

impl CertificateContext {
    /// `x0`, `lambda0` are the initial iterates; `V(X_0, Λ_1)` and the
    /// radius are evaluated with `Λ_1 = Λ_0 + α 𝐋 X_0`.
    pub fn new(
        graph: &NetworkGraph,
        m: usize,
        alpha: f64,
        x_star: DVector<f64>,
        lambda_star: DVector<f64>,
        x0: &DVector<f64>,
        lambda0: &DVector<f64>,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidStepSize(alpha));
        }
        let dim = graph.n() * m;
        for v in [&x_star, &lambda_star, x0, lambda0] {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { context: "certificate context", expected: dim, found: v.len() });
            }
        }
        // Eigenvalues of W are 1 - ακ + α²κ² over the Laplacian spectrum.
        let lambda_min_w = graph
            .spectrum()
            .iter()
            .map(|&k| 1.0 - alpha * k + alpha * alpha * k * k)
            .fold(f64::INFINITY, f64::min);
        let mut ctx = Self {
            graph: graph.clone(),
            m,
            alpha,
            x_star,
            lambda_star,
            lambda_min_w,
            lambda_min_m: lambda_min_w.min(1.0),
            v0: 0.0,
            radius: 0.0,
            l_r: None,
            c_r: None,
        };
        let lambda1 = lambda0 + alpha * graph.apply_laplacian(x0, m);
        ctx.v0 = ctx.lyapunov(x0, &lambda1);
        ctx.radius = (ctx.v0 / ctx.lambda_min_m).sqrt();
        Ok(ctx)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn lambda_star(&self) -> &DVector<f64> {
        &self.lambda_star
    }

    pub fn lambda_min_w(&self) -> f64 {
        self.lambda_min_w
    }

    /// `λ_min(diag(I, W))`.
    pub fn lambda_min_m(&self) -> f64 {
        self.lambda_min_m
    }

    /// `V(X_0, Λ_1)`.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// `r = sqrt(V(X_0, Λ_1) / λ_min(M))`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn l_r(&self) -> Option<f64> {
        self.l_r
    }

    pub fn c_r(&self) -> Option<f64> {
        self.c_r
    }

    /// Records `l_r` and derives `c_r = 1/λ_min(W - (α l_r/2) I) + 1`, which
    /// exists only while that matrix is positive definite.
    pub fn set_lipschitz(&mut self, l_r: f64) {
        self.l_r = Some(l_r);
        let shifted = self.lambda_min_w - 0.5 * self.alpha * l_r;
        self.c_r = (shifted > 0.0).then(|| 1.0 / shifted + 1.0);
    }

    /// `W v`.
    pub fn apply_w(&self, v: &DVector<f64>) -> DVector<f64> {
        let lv = self.graph.apply_laplacian(v, self.m);
        let llv = self.graph.apply_laplacian(&lv, self.m);
        v - self.alpha * lv + self.alpha * self.alpha * llv
    }

    pub fn lyapunov(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        let dx = x - &self.x_star;
        dx.dot(&self.apply_w(&dx)) + (lambda - &self.lambda_star).norm_squared()
    }

    /// `sqrt(|X - X*|² + |Λ - Λ*|²)`.
    pub fn distance(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        ((x - &self.x_star).norm_squared() + (lambda - &self.lambda_star).norm_squared()).sqrt()
    }
}

pub fn lyapunov(x: &DVector<f64>, lambda: &DVector<f64>, ctx: &CertificateContext) -> f64 {
    ctx.lyapunov(x, lambda)
}

/// `r_k = col{X_{k+1} - X_k, 𝐋 X_k}`.
pub fn residual(x_k: &DVector<f64>, x_next: &DVector<f64>, graph: &NetworkGraph, m: usize) -> DVector<f64> {
    let lx = graph.apply_laplacian(x_k, m);
    let mut out = DVector::zeros(x_k.len() + lx.len());
    out.rows_mut(0, x_k.len()).copy_from(&(x_next - x_k));
    out.rows_mut(x_k.len(), lx.len()).copy_from(&lx);
    out
}

/// `e_k = |X_k - 1⊗x*| / |X_0 - 1⊗x*|`.
pub fn normalized_error(x_k: &DVector<f64>, x0: &DVector<f64>, x_star: &[f64]) -> Result<f64> {
    let m = x_star.len();
    if m == 0 || !x_k.len().is_multiple_of(m) || x0.len() != x_k.len() {
        return Err(Error::DimensionMismatch { context: "normalized error", expected: x0.len(), found: x_k.len() });
    }
    let dist = |x: &DVector<f64>| {
        x.iter().enumerate().map(|(i, v)| (v - x_star[i % m]).powi(2)).sum::<f64>().sqrt()
    };
    let denom = dist(x0);
    if denom == 0.0 {
        return Err(Error::DegenerateNormalization);
    }
    Ok(dist(x_k) / denom)
}

/// Largest pairwise distance between agent blocks.
pub fn consensus_spread(x: &DVector<f64>, m: usize) -> f64 {
    let n = x.len() / m;
    let s = x.as_slice();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let d = (0..m).map(|c| (s[i * m + c] - s[j * m + c]).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

/// Running mean `X̄_k = (1/(k+1)) Σ_{p≤k} X_p` with a compensated sum.
#[derive(Debug, Clone)]
pub struct TimeAverage {
    sum: DVector<f64>,
    carry: DVector<f64>,
    count: usize,
}

impl TimeAverage {
    pub fn new(dim: usize) -> Self {
        Self { sum: DVector::zeros(dim), carry: DVector::zeros(dim), count: 0 }
    }

    pub fn push(&mut self, x: &DVector<f64>) {
        for i in 0..x.len() {
            let y = x[i] - self.carry[i];
            let t = self.sum[i] + y;
            self.carry[i] = (t - self.sum[i]) - y;
            self.sum[i] = t;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `Σ_{p≤k} X_p`.
    pub fn sum(&self) -> &DVector<f64> {
        &self.sum
    }

    pub fn mean(&self) -> DVector<f64> {
        &self.sum / self.count.max(1) as f64
    }
}

/// Optimal point and value the diagnostics compare against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TraceSettings {
    pub ctx: Option<CertificateContext>,
    pub reference: Option<Reference>,
}

/// Diagnostics at iteration `k`. Fields that do not apply to the method or
/// scenario are `None` and written as empty CSV cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `V(X_k, Λ_{k+1})`.
    pub v: Option<f64>,
    /// `sqrt(|X_k - X*|² + |Λ_{k+1} - Λ*|²)`.
    pub d: Option<f64>,
    pub r_norm: f64,
    pub consensus_spread: f64,
    pub e: Option<f64>,
    /// `f̃(X̄_k)`.
    pub f_avg: f64,
    pub eq13_err: Option<f64>,
    pub eq14_ub: Option<f64>,
    pub eq15_lb: Option<f64>,
    /// `f̃(X̄_k) - f*`.
    pub gap: Option<f64>,
}

pub const CSV_HEADER: &str = "k,V,d,r_norm,consensus_spread,e,f_avg,eq13_err,eq14_ub,eq15_lb";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.k,
            fmt_opt(self.v),
            fmt_opt(self.d),
            fmt_f64(self.r_norm),
            fmt_f64(self.consensus_spread),
            fmt_opt(self.e),
            fmt_f64(self.f_avg),
            fmt_opt(self.eq13_err),
            fmt_opt(self.eq14_ub),
            fmt_opt(self.eq15_lb),
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: String,
    pub records: Vec<TraceRecord>,
    pub iterates: Iterates,
}

impl RunTrace {
    pub fn terminal_x(&self) -> &DVector<f64> {
        self.iterates.primal.last().expect("trace holds X_0")
    }

    pub fn terminal_state(&self) -> PdState {
        let k = self.iterates.steps();
        let lambda = self.iterates.dual.last().cloned().unwrap_or_else(|| DVector::zeros(self.terminal_x().len()));
        PdState { x: self.terminal_x().clone(), lambda, k }
    }

    /// `X̄_k` recomputed from the stored iterates.
    pub fn time_average(&self, k: usize) -> Option<DVector<f64>> {
        time_average(self, k)
    }

    /// `sup_k k·|f̃(X̄_k) - f*|` over the recorded iterations.
    pub fn sup_scaled_gap(&self) -> Option<f64> {
        self.records.iter().map(|r| r.gap.map(|g| r.k as f64 * g.abs())).collect::<Option<Vec<_>>>().map(|v| {
            v.into_iter().fold(0.0, f64::max)
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

pub fn time_average(trace: &RunTrace, k: usize) -> Option<DVector<f64>> {
    let xs = trace.iterates.primal.get(..=k)?;
    let mut avg = TimeAverage::new(xs[0].len());
    xs.iter().for_each(|x| avg.push(x));
    Some(avg.mean())
}

fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let diff = (a - b).norm();
    if diff == 0.0 {
        0.0
    } else {
        diff / a.norm().max(b.norm())
    }
}

/// The rate quantities at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCertificate {
    pub k: usize,
    /// Relative error of `𝐋 X̄_k = (Λ_{k+1} - Λ_0) / ((k+1) α)`.
    pub eq13_err: f64,
    /// Upper bound on `f̃(X̄_k)`; `None` when `c_r` is undefined.
    pub eq14_ub: Option<f64>,
    /// Lower bound `f* - <Λ_{k+1} - Λ_0, Λ*> / ((k+1) α)`.
    pub eq15_lb: f64,
    pub f_avg: f64,
    pub gap: f64,
    pub scaled_gap: f64,
}

struct RateInputs<'a> {
    problem: &'a Problem,
    alpha: f64,
    x0: &'a DVector<f64>,
    lambda0: &'a DVector<f64>,
}

impl RateInputs<'_> {
    fn eq13(&self, k: usize, sum_x: &DVector<f64>, lambda_next: &DVector<f64>) -> f64 {
        let scale = (k + 1) as f64;
        let lhs = self.problem.graph.apply_laplacian(sum_x, self.problem.dim()) / scale;
        let rhs = (lambda_next - self.lambda0) / (scale * self.alpha);
        relative_error(&lhs, &rhs)
    }

    fn eq14(
        &self,
        k: usize,
        ctx: &CertificateContext,
        f_star: f64,
        x_next: &DVector<f64>,
        lambda_next: &DVector<f64>,
    ) -> Option<f64> {
        let c_r = ctx.c_r()?;
        let denom = 2.0 * self.alpha * (k + 1) as f64;
        let lambda_next2 = lambda_next + self.alpha * self.problem.graph.apply_laplacian(x_next, self.problem.dim());
        let first = (self.x0 - ctx.x_star()).norm_squared() + self.lambda0.norm_squared()
            - (x_next - ctx.x_star()).norm_squared()
            - lambda_next.norm_squared();
        let second = ctx.v0() - ctx.lyapunov(x_next, &lambda_next2);
        Some(f_star + first / denom + c_r * second / denom)
    }

    fn eq15(&self, k: usize, ctx: &CertificateContext, f_star: f64, lambda_next: &DVector<f64>) -> f64 {
        f_star - (lambda_next - self.lambda0).dot(ctx.lambda_star()) / ((k + 1) as f64 * self.alpha)
    }
}

/// Evaluates every per-iteration record of a finished run.
pub fn build_trace(
    name: &str,
    problem: &Problem,
    alpha: f64,
    iterates: Iterates,
    settings: &TraceSettings,
) -> Result<RunTrace> {
    let m = problem.dim();
    let steps = iterates.steps();
    let has_dual = iterates.dual.len() == iterates.primal.len();
    let x0 = &iterates.primal[0];
    let zero = DVector::zeros(x0.len());
    let lambda0 = if has_dual { &iterates.dual[0] } else { &zero };
    let inputs = RateInputs { problem, alpha, x0, lambda0 };
    let rate_bounds = problem.sets.is_unconstrained();
    let e_defined = settings.reference.as_ref().map(|r| normalized_error(x0, x0, &r.x_star).is_ok());

    let mut avg = TimeAverage::new(x0.len());
    let mut records = Vec::with_capacity(steps);
    for k in 0..steps {
        let x_k = &iterates.primal[k];
        let x_next = &iterates.primal[k + 1];
        avg.push(x_k);
        let f_avg = problem.objective.value(&avg.mean())?;
        let mut rec = TraceRecord {
            k,
            v: None,
            d: None,
            r_norm: iterates.residual_norms[k],
            consensus_spread: consensus_spread(x_k, m),
            e: None,
            f_avg,
            eq13_err: None,
            eq14_ub: None,
            eq15_lb: None,
            gap: None,
        };
        if let Some(reference) = &settings.reference {
            if e_defined == Some(true) {
                rec.e = Some(normalized_error(x_k, x0, &reference.x_star)?);
            }
            rec.gap = Some(f_avg - reference.f_star);
        }
        if has_dual {
            let lambda_next = &iterates.dual[k + 1];
            rec.eq13_err = Some(inputs.eq13(k, avg.sum(), lambda_next));
            if let Some(ctx) = &settings.ctx {
                rec.v = Some(ctx.lyapunov(x_k, lambda_next));
                rec.d = Some(ctx.distance(x_k, lambda_next));
                if let (true, Some(reference)) = (rate_bounds, &settings.reference) {
                    rec.eq14_ub = inputs.eq14(k, ctx, reference.f_star, x_next, lambda_next);
                    rec.eq15_lb = Some(inputs.eq15(k, ctx, reference.f_star, lambda_next));
                }
            }
        }
        records.push(rec);
    }
    Ok(RunTrace { algorithm: name.to_string(), records, iterates })
}

/// The rate identities for every recorded `k` of a primal-dual trace.
/// The value bounds only hold for unconstrained problems; requesting them on
/// a constrained one is an error.
pub fn rate_certificates(
    trace: &RunTrace,
    problem: &Problem,
    ctx: &CertificateContext,
    reference: &Reference,
) -> Result<Vec<RateCertificate>> {
    if !problem.sets.is_unconstrained() {
        return Err(Error::UnsupportedConstraint("the O(1/k) value bounds"));
    }
    let it = &trace.iterates;
    if it.dual.len() != it.primal.len() {
        return Err(Error::OracleUnavailable("trace has no dual iterates".into()));
    }
    let inputs = RateInputs { problem, alpha: ctx.alpha(), x0: &it.primal[0], lambda0: &it.dual[0] };
    let mut avg = TimeAverage::new(it.primal[0].len());
    let mut out = Vec::with_capacity(it.steps());
    for k in 0..it.steps() {
        avg.push(&it.primal[k]);
        let f_avg = problem.objective.value(&avg.mean())?;
        let gap = f_avg - reference.f_star;
        out.push(RateCertificate {
            k,
            eq13_err: inputs.eq13(k, avg.sum(), &it.dual[k + 1]),
            eq14_ub: inputs.eq14(k, ctx, reference.f_star, &it.primal[k + 1], &it.dual[k + 1]),
            eq15_lb: inputs.eq15(k, ctx, reference.f_star, &it.dual[k + 1]),
            f_avg,
            gap,
            scaled_gap: k as f64 * gap.abs(),
        });
    }
    Ok(out)
}

/// Fixed-point optimality at `state`: with
/// `Z = -α(∇f̃(X) + 𝐋(Λ + X))`, tests `Z_i ∈ N_{Ω_i}(x_i)` for every agent.
pub fn normal_cone_optimality(problem: &Problem, state: &PdState, alpha: f64) -> Result<Vec<bool>> {
    let m = problem.dim();
    let grad = problem.objective.gradient(&state.x)?;
    let coupling = problem.graph.apply_laplacian(&(&state.lambda + &state.x), m);
    let z = -alpha * (grad + coupling);
    problem
        .sets
        .factors()
        .iter()
        .enumerate()
        .map(|(i, set)| set.in_normal_cone(&state.x.as_slice()[i * m..(i + 1) * m], &z.as_slice()[i * m..(i + 1) * m]))
        .collect()
}
