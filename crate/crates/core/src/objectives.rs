//! Smooth convex local objectives `f_i` and their stacked sum
//! `f̃(X) = Σ f_i(x_i)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::{ConvexSet, ProductSet};

/// `coef * exp(<dir, x>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub coef: f64,
    pub dir: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    /// `½ xᵀQx + bᵀx + c + Σ coef·exp(<dir, x>)`.
    QuadraticExp {
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
        #[serde(default)]
        exp_terms: Vec<ExpTerm>,
    },
    /// Componentwise Huber loss with unit threshold around `center`.
    Huber { center: Vec<f64> },
    /// `½ xᵀQx + bᵀx + c`.
    Quadratic {
        q: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
}

fn huber(t: f64) -> f64 {
    if t.abs() <= 1.0 {
        0.5 * t * t
    } else {
        t.abs() - 0.5
    }
}

fn quad_form(q: &[Vec<f64>], x: &[f64]) -> f64 {
    q.iter().zip(x).map(|(row, xi)| xi * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spectral_norm(m: DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::QuadraticExp { b, .. } | Objective::Quadratic { b, .. } => b.len(),
            Objective::Huber { center } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_quadratic = |q: &[Vec<f64>], b: &[f64], c: f64| -> Result<()> {
            let m = b.len();
            if m == 0 || q.len() != m || q.iter().any(|r| r.len() != m) {
                return Err(Error::InvalidObjective(format!("Q must be {m}x{m} to match b")));
            }
            if q.iter().flatten().chain(b).any(|v| !v.is_finite()) || !c.is_finite() {
                return Err(Error::InvalidObjective("coefficients must be finite".into()));
            }
            let qm = DMatrix::from_fn(m, m, |i, j| q[i][j]);
            for ((i, j), v) in qm.iter().enumerate().map(|(idx, v)| ((idx % m, idx / m), v)) {
                if (v - qm[(j, i)]).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(Error::InvalidObjective(format!("Q is not symmetric at ({i}, {j})")));
                }
            }
            let scale = spectral_norm(qm.clone()).max(1.0);
            let min = SymmetricEigen::new(qm).eigenvalues.min();
            if min < -1e-10 * scale {
                return Err(Error::InvalidObjective(format!("Q is not positive semi-definite (eigenvalue {min})")));
            }
            Ok(())
        };
        match self {
            Objective::Quadratic { q, b, c } => check_quadratic(q, b, *c),
            Objective::QuadraticExp { q, b, c, exp_terms } => {
                check_quadratic(q, b, *c)?;
                for t in exp_terms {
                    if t.dir.len() != b.len() || t.dir.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidObjective("exp term direction has wrong dimension".into()));
                    }
                    if !(t.coef.is_finite() && t.coef >= 0.0) {
                        return Err(Error::InvalidObjective("exp term coefficient must be nonnegative".into()));
                    }
                }
                Ok(())
            }
            Objective::Huber { center } => {
                if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidObjective("huber center must be a non-empty finite vector".into()));
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { context: "objective", expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// Exact value. Exponential overflow yields `+inf`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Quadratic { q, b, c } => 0.5 * quad_form(q, x) + dot(b, x) + c,
            Objective::QuadraticExp { q, b, c, exp_terms } => {
                0.5 * quad_form(q, x)
                    + dot(b, x)
                    + c
                    + exp_terms.iter().map(|t| t.coef * dot(&t.dir, x).exp()).sum::<f64>()
            }
            Objective::Huber { center } => x.iter().zip(center).map(|(xi, ai)| huber(xi - ai)).sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Objective::Quadratic { q, b, .. } | Objective::QuadraticExp { q, b, .. } => {
                for (o, (row, bi)) in out.iter_mut().zip(q.iter().zip(b)) {
                    *o = dot(row, x) + bi;
                }
                if let Objective::QuadraticExp { exp_terms, .. } = self {
                    for t in exp_terms {
                        let w = t.coef * dot(&t.dir, x).exp();
                        for (o, d) in out.iter_mut().zip(&t.dir) {
                            *o += w * d;
                        }
                    }
                }
            }
            Objective::Huber { center } => {
                for (o, (xi, ai)) in out.iter_mut().zip(x.iter().zip(center)) {
                    *o = (xi - ai).clamp(-1.0, 1.0);
                }
            }
        }
    }

    /// Hessian where it exists; for Huber the one-sided value `1` is used
    /// on the branch boundary.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.dim();
        match self {
            Objective::Quadratic { q, .. } => DMatrix::from_fn(m, m, |i, j| q[i][j]),
            Objective::QuadraticExp { q, exp_terms, .. } => {
                let mut h = DMatrix::from_fn(m, m, |i, j| q[i][j]);
                for t in exp_terms {
                    let w = t.coef * dot(&t.dir, x).exp();
                    h += DMatrix::from_fn(m, m, |i, j| w * t.dir[i] * t.dir[j]);
                }
                h
            }
            Objective::Huber { center } => DMatrix::from_diagonal(&DVector::from_iterator(
                m,
                x.iter().zip(center).map(|(xi, ai)| if (xi - ai).abs() <= 1.0 { 1.0 } else { 0.0 }),
            )),
        }
    }

    /// Global gradient Lipschitz constant when it has a closed form.
    pub fn exact_lipschitz(&self) -> Option<f64> {
        match self {
            Objective::Huber { .. } => Some(1.0),
            Objective::Quadratic { .. } => Some(spectral_norm(self.hessian(&vec![0.0; self.dim()]))),
            Objective::QuadraticExp { exp_terms, .. } if exp_terms.iter().all(|t| t.coef == 0.0) => {
                Some(spectral_norm(self.hessian(&vec![0.0; self.dim()])))
            }
            Objective::QuadraticExp { .. } => None,
        }
    }
}

/// `f̃(X) = Σ f_i(x_i)` over a stacked vector of `n` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedObjective {
    parts: Vec<Objective>,
    m: usize,
}

impl StackedObjective {
    pub fn new(parts: Vec<Objective>) -> Result<Self> {
        let m = parts.first().map(Objective::dim).ok_or_else(|| Error::InvalidObjective("no parts".into()))?;
        for p in &parts {
            p.validate()?;
            if p.dim() != m {
                return Err(Error::DimensionMismatch { context: "stacked objective part", expected: m, found: p.dim() });
            }
        }
        Ok(Self { parts, m })
    }

    pub fn parts(&self) -> &[Objective] {
        &self.parts
    }

    pub fn block_dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        let expected = self.m * self.parts.len();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { context: "stacked objective", expected, found: x.len() });
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check(x)?;
        let m = self.m;
        Ok(self.parts.iter().enumerate().map(|(i, p)| p.value_unchecked(&x.as_slice()[i * m..(i + 1) * m])).sum())
    }

    /// `f(x) = Σ f_i(x)` at a single point.
    pub fn global_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch { context: "global objective", expected: self.m, found: x.len() });
        }
        Ok(self.parts.iter().map(|p| p.value_unchecked(x)).sum())
    }

    /// `∇f(x) = Σ ∇f_i(x)` at a single point.
    pub fn global_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.m {
            return Err(Error::DimensionMismatch { context: "global gradient", expected: self.m, found: x.len() });
        }
        let mut total = vec![0.0; self.m];
        let mut g = vec![0.0; self.m];
        for p in &self.parts {
            p.gradient_into(x, &mut g);
            for (t, v) in total.iter_mut().zip(&g) {
                *t += v;
            }
        }
        Ok(total)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let m = self.m;
        let mut out = DVector::zeros(x.len());
        for (i, p) in self.parts.iter().enumerate() {
            p.gradient_into(&x.as_slice()[i * m..(i + 1) * m], &mut out.as_mut_slice()[i * m..(i + 1) * m]);
        }
        Ok(out)
    }
}

/// Sampling parameters for [`estimate_local_lipschitz`].
#[derive(Debug, Clone, Copy)]
pub struct LipschitzSampling {
    pub pairs: usize,
    pub seed: u64,
    pub safety_factor: f64,
}

impl Default for LipschitzSampling {
    fn default() -> Self {
        Self { pairs: 10_000, seed: 0x6c72_5f73_616d_706c, safety_factor: 1.25 }
    }
}

/// Upper estimate of the Lipschitz constant of `∇f̃` on
/// `{X ∈ Ω : |X - center| <= radius}`.
///
/// Huber and quadratic parts use their exact global constants. Other parts
/// are sampled over `{x ∈ Ω_i : |x - center_i| <= radius}`, which contains the
/// block's projection of the stacked region; because the Hessian is block
/// diagonal, the maximum of the per-block constants bounds the stacked one.
/// Sampled constants combine difference quotients over random pairs with
/// Hessian norms at the sampled points, then get multiplied by the safety
/// factor.
pub fn estimate_local_lipschitz(
    stack: &StackedObjective,
    center: &DVector<f64>,
    radius: f64,
    sets: &ProductSet,
    sampling: LipschitzSampling,
) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidRadius(radius));
    }
    stack.check(center)?;
    let m = stack.m;
    if sets.len() != stack.len() || sets.block_dim() != m {
        return Err(Error::DimensionMismatch { context: "lipschitz sets", expected: stack.len(), found: sets.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let mut best = 0.0f64;
    for (i, part) in stack.parts.iter().enumerate() {
        if let Some(l) = part.exact_lipschitz() {
            best = best.max(l);
            continue;
        }
        let c = &center.as_slice()[i * m..(i + 1) * m];
        let l = sample_block_lipschitz(part, c, radius, &sets.factors()[i], sampling.pairs, &mut rng);
        best = best.max(l * sampling.safety_factor);
    }
    Ok(best)
}

fn sample_in_ball(center: &[f64], radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = center.len();
    let dir: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let scale = radius * rng.gen::<f64>().powf(1.0 / m as f64) / norm;
    center.iter().zip(&dir).map(|(c, d)| c + scale * d).collect()
}

fn sample_block_lipschitz(
    part: &Objective,
    center: &[f64],
    radius: f64,
    set: &ConvexSet,
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let m = center.len();
    // Projection onto Ω_i is non-expansive and the center lies in Ω_i, so
    // projected samples stay inside the ball.
    let anchor = set.project_unchecked(center);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for c in 0..m {
        for sign in [-1.0, 1.0] {
            let mut p = anchor.clone();
            p[c] += sign * radius;
            points.push(set.project_unchecked(&p));
        }
    }
    if let Objective::QuadraticExp { exp_terms, .. } = part {
        for t in exp_terms {
            let norm = dot(&t.dir, &t.dir).sqrt();
            if norm > 0.0 {
                let p: Vec<f64> = anchor.iter().zip(&t.dir).map(|(a, d)| a + radius * d / norm).collect();
                points.push(set.project_unchecked(&p));
            }
        }
    }

    let mut best = points.iter().map(|p| spectral_norm(part.hessian(p))).fold(0.0, f64::max);
    let mut gx = vec![0.0; m];
    let mut gy = vec![0.0; m];
    for _ in 0..pairs {
        let x = set.project_unchecked(&sample_in_ball(&anchor, radius, rng));
        let y = set.project_unchecked(&sample_in_ball(&anchor, radius, rng));
        best = best.max(spectral_norm(part.hessian(&x)));
        let dxy = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dxy > 1e-12 {
            part.gradient_into(&x, &mut gx);
            part.gradient_into(&y, &mut gy);
            let dg = gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            best = best.max(dg / dxy);
        }
    }
    if best.is_nan() {
        f64::INFINITY
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    pub(crate) fn example51() -> Vec<Objective> {
        vec![
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
        ]
    }

    // Direct transcriptions of the three polynomial-plus-exponential costs.
    fn f1(x: f64, y: f64) -> f64 {
        x * x / 2.0 + 3.0 * x + y * y + 2.0 * y + x * y + 0.5 * (x + y).exp()
    }
    fn f2(x: f64, y: f64) -> f64 {
        x * x + 2.0 * x + 2.0 * y * y + 2.0 * y + x * y + y.exp()
    }
    fn f3(x: f64, y: f64) -> f64 {
        2.0 * x * x + 4.0 * x + y * y + 2.0 * y + x.exp()
    }

    #[test]
    fn encodings_match_formulas() {
        let parts = example51();
        let fs: [fn(f64, f64) -> f64; 3] = [f1, f2, f3];
        for (p, f) in parts.iter().zip(fs) {
            for &(x, y) in &[(0.0, 0.0), (0.3, -1.2), (-0.9, 0.4), (1.1, -0.5)] {
                assert!((p.value(&[x, y]).unwrap() - f(x, y)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn values() {
        assert_eq!(example51()[0].value(&[0.0, 0.0]).unwrap(), 0.5);
        let h = Objective::Huber { center: vec![2.0] };
        assert_eq!(h.value(&[2.0]).unwrap(), 0.0);
        assert_eq!(h.value(&[4.0]).unwrap(), 1.5);
    }

    #[test]
    fn gradients() {
        let h = Objective::Huber { center: vec![2.0] };
        assert_eq!(h.gradient(&[2.0]).unwrap(), vec![0.0]);
        assert_eq!(h.gradient(&[4.0]).unwrap(), vec![1.0]);
        assert_eq!(example51()[2].gradient(&[0.0, 0.0]).unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn stacked_gradient_example51() {
        let s = StackedObjective::new(example51()).unwrap();
        let g = s.gradient(&DVector::zeros(6)).unwrap();
        assert_eq!(g.as_slice(), &[3.5, 2.5, 2.0, 3.0, 5.0, 2.0]);
    }

    #[test]
    fn stacked_gradient_huber_at_centers_and_single() {
        let a = [1.6, 2.2, 2.4];
        let s = StackedObjective::new(a.iter().map(|&c| Objective::Huber { center: vec![c] }).collect()).unwrap();
        let g = s.gradient(&DVector::from_column_slice(&a)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let single = StackedObjective::new(vec![example51()[1].clone()]).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2]);
        assert_eq!(single.gradient(&x).unwrap().as_slice(), &example51()[1].gradient(&[0.3, -0.2]).unwrap()[..]);
    }

    #[test]
    fn huber_branch_continuity() {
        let h = Objective::Huber { center: vec![0.0] };
        for edge in [1.0, -1.0] {
            let below = h.value(&[edge * (1.0 - 1e-13)]).unwrap();
            let above = h.value(&[edge * (1.0 + 1e-13)]).unwrap();
            assert!((below - above).abs() < 1e-12);
            let gb = h.gradient(&[edge * (1.0 - 1e-13)]).unwrap()[0];
            let ga = h.gradient(&[edge * (1.0 + 1e-13)]).unwrap()[0];
            assert!((gb - ga).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_lipschitz_constants() {
        let q = Objective::Quadratic { q: vec![vec![2.0, 0.0], vec![0.0, 4.0]], b: vec![0.0, 0.0], c: 0.0 };
        let s = StackedObjective::new(vec![q]).unwrap();
        let sets = ProductSet::new(vec![ConvexSet::whole_space(2)]).unwrap();
        let l = estimate_local_lipschitz(&s, &DVector::zeros(2), 1.0, &sets, LipschitzSampling::default()).unwrap();
        assert!((l - 4.0).abs() < 1e-12);

        let hub = StackedObjective::new(vec![Objective::Huber { center: vec![2.0] }; 4]).unwrap();
        let sets = ProductSet::new(vec![ConvexSet::whole_space(1); 4]).unwrap();
        let l = estimate_local_lipschitz(&hub, &DVector::from_element(4, 2.0), 5.0, &sets, LipschitzSampling::default())
            .unwrap();
        assert_eq!(l, 1.0);
        assert!(matches!(
            estimate_local_lipschitz(&hub, &DVector::zeros(4), 0.0, &sets, LipschitzSampling::default()),
            Err(Error::InvalidRadius(_))
        ));
    }

    #[test]
    fn huber_lipschitz_brute_force() {
        let h = Objective::Huber { center: vec![2.0] };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for _ in 0..20_000 {
            let x: f64 = rng.gen_range(-5.0..9.0);
            let y: f64 = rng.gen_range(-5.0..9.0);
            if (x - y).abs() > 1e-9 {
                let d = (h.gradient(&[x]).unwrap()[0] - h.gradient(&[y]).unwrap()[0]).abs() / (x - y).abs();
                worst = worst.max(d);
            }
        }
        assert!(worst <= 1.0 + 1e-12);
        assert!(worst > 0.99);
    }

    #[test]
    fn sampled_lipschitz_exceeds_hessian_at_center() {
        let s = StackedObjective::new(example51()).unwrap();
        let sets = ProductSet::new(vec![
            ConvexSet::ball(vec![0.0, 0.0], 2f64.sqrt()).unwrap(),
            ConvexSet::half_space(vec![-1.0, 0.0], 1.0).unwrap(),
            ConvexSet::half_space(vec![0.0, 1.0], -0.5).unwrap(),
        ])
        .unwrap();
        let center = DVector::from_vec(vec![-0.8, -0.6, -0.8, -0.6, -0.8, -0.6]);
        let l = estimate_local_lipschitz(&s, &center, 1.0, &sets, LipschitzSampling::default()).unwrap();
        for (i, p) in s.parts().iter().enumerate() {
            let c = &center.as_slice()[2 * i..2 * i + 2];
            assert!(l >= spectral_norm(p.hessian(c)));
        }
        assert!(l.is_finite() && l >= 1.0);
        // deterministic
        let again = estimate_local_lipschitz(&s, &center, 1.0, &sets, LipschitzSampling::default()).unwrap();
        assert_eq!(l.to_bits(), again.to_bits());
    }

    #[test]
    fn validation() {
        let bad = Objective::Quadratic { q: vec![vec![1.0, 2.0], vec![0.0, 1.0]], b: vec![0.0, 0.0], c: 0.0 };
        assert!(bad.validate().is_err());
        let indefinite = Objective::Quadratic { q: vec![vec![1.0, 0.0], vec![0.0, -1.0]], b: vec![0.0, 0.0], c: 0.0 };
        assert!(indefinite.validate().is_err());
        let neg_exp = Objective::QuadraticExp {
            q: vec![vec![1.0]],
            b: vec![0.0],
            c: 0.0,
            exp_terms: vec![ExpTerm { coef: -1.0, dir: vec![1.0] }],
        };
        assert!(neg_exp.validate().is_err());
        assert!(example51().iter().all(|o| o.validate().is_ok()));
    }

    #[test]
    fn overflow_is_infinite() {
        let v = example51()[2].value(&[800.0, 0.0]).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    fn arb_objective() -> impl Strategy<Value = Objective> {
        prop_oneof![
            Just(example51()[0].clone()),
            Just(example51()[1].clone()),
            Just(example51()[2].clone()),
            prop::collection::vec(-3.0..3.0f64, 2).prop_map(|c| Objective::Huber { center: c }),
            (0.1..3.0f64, 0.1..3.0f64, -0.9..0.9f64, prop::collection::vec(-2.0..2.0f64, 2)).prop_map(
                |(a, d, rho, b)| {
                    let off = rho * (a * d).sqrt();
                    Objective::Quadratic { q: vec![vec![a, off], vec![off, d]], b, c: 0.0 }
                }
            ),
        ]
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(o in arb_objective(), x in prop::collection::vec(-1.5..1.5f64, 2)) {
            let g = o.gradient(&x).unwrap();
            let h = 1e-6;
            for c in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                let fd = (o.value(&xp).unwrap() - o.value(&xm).unwrap()) / (2.0 * h);
                if let Objective::Huber { center } = &o {
                    // central differences straddling a kink are meaningless
                    let t = (x[c] - center[c]).abs();
                    prop_assume!((t - 1.0).abs() > 1e-4);
                }
                prop_assert!((fd - g[c]).abs() <= 1e-5 * g[c].abs().max(1.0), "fd {} vs {}", fd, g[c]);
            }
        }

        #[test]
        fn first_order_convexity(
            o in arb_objective(),
            x in prop::collection::vec(-1.5..1.5f64, 2),
            y in prop::collection::vec(-1.5..1.5f64, 2),
        ) {
            let g = o.gradient(&x).unwrap();
            let lin = o.value(&x).unwrap() + g.iter().zip(y.iter().zip(&x)).map(|(gi, (yi, xi))| gi * (yi - xi)).sum::<f64>();
            prop_assert!(o.value(&y).unwrap() >= lin - 1e-9);
        }

        #[test]
        fn huber_cocoercive(
            a in prop::collection::vec(1.5..2.5f64, 4),
            x in prop::collection::vec(-3.0..6.0f64, 4),
            y in prop::collection::vec(-3.0..6.0f64, 4),
        ) {
            let s = StackedObjective::new(a.iter().map(|&c| Objective::Huber { center: vec![c] }).collect()).unwrap();
            let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
            let dg = s.gradient(&x).unwrap() - s.gradient(&y).unwrap();
            prop_assert!((&x - &y).dot(&dg) >= dg.norm_squared() - 1e-9);
        }
    }
}
