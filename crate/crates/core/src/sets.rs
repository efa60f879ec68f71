//! Closed convex sets with closed-form Euclidean projections.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default additive slack for membership tests.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConvexSet {
    WholeSpace {
        dim: usize,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x : <normal, x> <= offset}`.
    HalfSpace {
        normal: Vec<f64>,
        offset: f64,
    },
    /// Componentwise bounds; infinite bounds are written as `null`.
    Box {
        #[serde(with = "lower_bounds")]
        lower: Vec<f64>,
        #[serde(with = "upper_bounds")]
        upper: Vec<f64>,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl ConvexSet {
    pub fn whole_space(dim: usize) -> Self {
        ConvexSet::WholeSpace { dim }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = ConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn half_space(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let s = ConvexSet::HalfSpace { normal, offset };
        s.validate()?;
        Ok(s)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let s = ConvexSet::Box { lower, upper };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::WholeSpace { dim } => *dim,
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::HalfSpace { normal, .. } => normal.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::WholeSpace { dim } if *dim == 0 => Err(Error::InvalidSet("dimension must be positive".into())),
            ConvexSet::WholeSpace { .. } => Ok(()),
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSet("ball center must be a non-empty finite vector".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidSet(format!("ball radius must be positive, got {radius}")));
                }
                Ok(())
            }
            ConvexSet::HalfSpace { normal, offset } => {
                if normal.is_empty() || normal.iter().any(|c| !c.is_finite()) || !offset.is_finite() {
                    return Err(Error::InvalidSet("half-space normal and offset must be finite".into()));
                }
                if normal.iter().all(|&c| c == 0.0) {
                    return Err(Error::InvalidSet("half-space normal must be nonzero".into()));
                }
                Ok(())
            }
            ConvexSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::InvalidSet("box bounds must be non-empty and of equal length".into()));
                }
                for (l, u) in lower.iter().zip(upper) {
                    if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                        return Err(Error::InvalidSet(format!("box bound [{l}, {u}] is empty")));
                    }
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { context: "set projection", expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexSet::WholeSpace { .. } => x.to_vec(),
            ConvexSet::Ball { center, radius } => {
                let d = dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / d;
                    x.iter().zip(center).map(|(xi, ci)| ci + s * (xi - ci)).collect()
                }
            }
            ConvexSet::HalfSpace { normal, offset } => {
                let excess = dot(normal, x) - offset;
                if excess <= 0.0 {
                    x.to_vec()
                } else {
                    let s = excess / dot(normal, normal);
                    x.iter().zip(normal).map(|(xi, ai)| xi - s * ai).collect()
                }
            }
            ConvexSet::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).map(|(xi, (l, u))| xi.clamp(*l, *u)).collect()
            }
        }
    }

    /// Largest violation of any defining inequality (0 when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConvexSet::WholeSpace { .. } => 0.0,
            ConvexSet::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            ConvexSet::HalfSpace { normal, offset } => (dot(normal, x) - offset).max(0.0),
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (l, u))| (l - xi).max(xi - u).max(0.0))
                .fold(0.0, f64::max),
        }
    }

    /// Membership with additive slack `tol` on each defining inequality.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.violation(x) <= tol
    }

    /// Tests `v ∈ N(x)` through the fixed-point characterization
    /// `P(x + v) = x`, with tolerance `1e-9 * (1 + |v|)`.
    pub fn in_normal_cone(&self, x: &[f64], v: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        self.check_dim(v)?;
        let violation = self.violation(x);
        if violation > DEFAULT_MEMBERSHIP_TOL {
            return Err(Error::NotInSet { violation });
        }
        let shifted: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + b).collect();
        let p = self.project_unchecked(&shifted);
        let vnorm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok(dist(&p, x) <= 1e-9 * (1.0 + vnorm))
    }

    /// Per-coordinate bounds implied by the set alone (infinite when the
    /// set does not restrict that coordinate).
    pub fn coordinate_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let mut lo = vec![f64::NEG_INFINITY; m];
        let mut hi = vec![f64::INFINITY; m];
        match self {
            ConvexSet::WholeSpace { .. } => {}
            ConvexSet::Ball { center, radius } => {
                for c in 0..m {
                    lo[c] = center[c] - radius;
                    hi[c] = center[c] + radius;
                }
            }
            ConvexSet::HalfSpace { normal, offset } => {
                let nonzero: Vec<usize> = (0..m).filter(|&c| normal[c] != 0.0).collect();
                if let [c] = nonzero[..] {
                    let bound = offset / normal[c];
                    if normal[c] > 0.0 {
                        hi[c] = bound;
                    } else {
                        lo[c] = bound;
                    }
                }
            }
            ConvexSet::Box { lower, upper } => {
                lo.clone_from(lower);
                hi.clone_from(upper);
            }
        }
        (lo, hi)
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, ConvexSet::WholeSpace { .. })
    }
}

/// Cartesian product `Ω_1 × … × Ω_n` acting on stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet {
    factors: Vec<ConvexSet>,
    dim: usize,
}

impl ProductSet {
    pub fn new(factors: Vec<ConvexSet>) -> Result<Self> {
        let dim = factors.first().map(ConvexSet::dim).ok_or_else(|| Error::InvalidSet("empty product".into()))?;
        for f in &factors {
            f.validate()?;
            if f.dim() != dim {
                return Err(Error::DimensionMismatch { context: "product factor", expected: dim, found: f.dim() });
            }
        }
        Ok(Self { factors, dim })
    }

    pub fn factors(&self) -> &[ConvexSet] {
        &self.factors
    }

    /// Block dimension `m`.
    pub fn block_dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dim * self.factors.len()
    }

    fn check(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.total_dim() {
            return Err(Error::DimensionMismatch { context: "product projection", expected: self.total_dim(), found: x.len() });
        }
        Ok(())
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(x)?;
        let m = self.dim;
        let mut out = DVector::zeros(x.len());
        for (i, f) in self.factors.iter().enumerate() {
            let p = f.project_unchecked(&x.as_slice()[i * m..(i + 1) * m]);
            out.as_mut_slice()[i * m..(i + 1) * m].copy_from_slice(&p);
        }
        Ok(out)
    }

    /// Blockwise membership; false on dimension mismatch.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        let m = self.dim;
        x.len() == self.total_dim()
            && self.factors.iter().enumerate().all(|(i, f)| f.contains(&x.as_slice()[i * m..(i + 1) * m], tol))
    }

    /// Whether a single point lies in every factor (the intersection).
    pub fn intersection_contains(&self, x: &[f64], tol: f64) -> bool {
        self.factors.iter().all(|f| f.contains(x, tol))
    }

    pub fn is_unconstrained(&self) -> bool {
        self.factors.iter().all(ConvexSet::is_whole_space)
    }

    pub fn is_box_or_whole(&self) -> bool {
        self.factors.iter().all(|f| matches!(f, ConvexSet::WholeSpace { .. } | ConvexSet::Box { .. }))
    }
}

mod lower_bounds {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
    }
}

mod upper_bounds {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn example51_sets() -> Vec<ConvexSet> {
        vec![
            ConvexSet::ball(vec![0.0, 0.0], 2f64.sqrt()).unwrap(),
            ConvexSet::half_space(vec![-1.0, 0.0], 1.0).unwrap(),
            ConvexSet::half_space(vec![0.0, 1.0], -0.5).unwrap(),
        ]
    }

    #[test]
    fn ball_radial_scaling() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 2f64.sqrt()).unwrap();
        assert!(close(&b.project(&[2.0, 2.0]).unwrap(), &[1.0, 1.0], 1e-15));
    }

    #[test]
    fn half_space_clamp() {
        let h = ConvexSet::half_space(vec![-1.0, 0.0], 1.0).unwrap();
        assert_eq!(h.project(&[-2.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn identity_inside() {
        for s in example51_sets() {
            let p = s.project(&[0.1, -0.7]).unwrap();
            assert_eq!(p, vec![0.1, -0.7]);
        }
    }

    #[test]
    fn product_example51() {
        let p = ProductSet::new(example51_sets()).unwrap();
        let x = DVector::from_vec(vec![2.0, 2.0, -2.0, 0.0, 0.0, 0.0]);
        let y = p.project(&x).unwrap();
        assert!(close(y.as_slice(), &[1.0, 1.0, -1.0, 0.0, 0.0, -0.5], 1e-15));
    }

    #[test]
    fn product_whole_space_and_single_factor() {
        let p = ProductSet::new(vec![ConvexSet::whole_space(2); 3]).unwrap();
        let x = DVector::from_vec(vec![5.0, -3.0, 1e6, 0.0, -1e-3, 7.0]);
        assert_eq!(p.project(&x).unwrap(), x);
        let single = ProductSet::new(vec![ConvexSet::ball(vec![0.0], 1.0).unwrap()]).unwrap();
        let inside = DVector::from_vec(vec![0.5]);
        assert_eq!(single.project(&inside).unwrap(), inside);
    }

    #[test]
    fn normal_cone_cases() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(b.in_normal_cone(&[0.2, 0.1], &[0.0, 0.0]).unwrap());
        assert!(!b.in_normal_cone(&[0.2, 0.1], &[0.1, 0.0]).unwrap());
        assert_eq!(b.project(&[1.5, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(b.in_normal_cone(&[1.0, 0.0], &[0.5, 0.0]).unwrap());
        assert!(!b.in_normal_cone(&[1.0, 0.0], &[0.0, 0.5]).unwrap());
        assert!(matches!(b.in_normal_cone(&[2.0, 0.0], &[0.0, 0.0]), Err(Error::NotInSet { .. })));
    }

    #[test]
    fn membership() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 2f64.sqrt()).unwrap();
        assert!(b.contains(&[1.0, 1.0], DEFAULT_MEMBERSHIP_TOL));
        let h = ConvexSet::half_space(vec![0.0, 1.0], -0.5).unwrap();
        assert!(!h.contains(&[0.0, 0.0], DEFAULT_MEMBERSHIP_TOL));
        let bx = ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(bx.contains(&[0.5, 0.5], DEFAULT_MEMBERSHIP_TOL));
    }

    #[test]
    fn dimension_mismatch() {
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(b.project(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let p = ProductSet::new(vec![b]).unwrap();
        assert!(p.project(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn invalid_sets() {
        assert!(ConvexSet::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexSet::half_space(vec![0.0, 0.0], 1.0).is_err());
        assert!(ConvexSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ProductSet::new(vec![ConvexSet::whole_space(1), ConvexSet::whole_space(2)]).is_err());
    }

    #[test]
    fn box_serde_infinite_bounds() {
        let b = ConvexSet::boxed(vec![f64::NEG_INFINITY, 0.0], vec![1.0, f64::INFINITY]).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"type":"box","lower":[null,0.0],"upper":[1.0,null]}"#);
        let back: ConvexSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }

    fn arb_set() -> impl Strategy<Value = ConvexSet> {
        let v2 = || prop::collection::vec(-3.0..3.0f64, 2);
        prop_oneof![
            Just(ConvexSet::whole_space(2)),
            (v2(), 0.1..3.0f64).prop_map(|(c, r)| ConvexSet::Ball { center: c, radius: r }),
            (v2(), -2.0..2.0f64)
                .prop_filter("nonzero normal", |(n, _)| n.iter().any(|c| c.abs() > 1e-3))
                .prop_map(|(n, o)| ConvexSet::HalfSpace { normal: n, offset: o }),
            (v2(), prop::collection::vec(0.0..3.0f64, 2)).prop_map(|(l, w)| ConvexSet::Box {
                upper: l.iter().zip(&w).map(|(a, b)| a + b).collect(),
                lower: l,
            }),
        ]
    }

    proptest! {
        #[test]
        fn projection_idempotent(s in arb_set(), x in prop::collection::vec(-10.0..10.0f64, 2)) {
            let p = s.project(&x).unwrap();
            let pp = s.project(&p).unwrap();
            prop_assert!(close(&p, &pp, 1e-12));
            prop_assert!(s.contains(&p, 1e-12));
        }

        #[test]
        fn projection_non_expansive(
            s in arb_set(),
            x in prop::collection::vec(-10.0..10.0f64, 2),
            y in prop::collection::vec(-10.0..10.0f64, 2),
        ) {
            let (px, py) = (s.project(&x).unwrap(), s.project(&y).unwrap());
            prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
        }

        #[test]
        fn variational_inequality(
            s in arb_set(),
            x in prop::collection::vec(-10.0..10.0f64, 2),
            w in prop::collection::vec(-10.0..10.0f64, 2),
        ) {
            let p = s.project(&x).unwrap();
            let z = s.project(&w).unwrap();
            let r: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            let d: Vec<f64> = z.iter().zip(&p).map(|(a, b)| a - b).collect();
            prop_assert!(dot(&r, &d) <= 1e-9);
        }

        #[test]
        fn normal_cone_fixed_point(s in arb_set(), x in prop::collection::vec(-10.0..10.0f64, 2)) {
            // x - P(x) is a normal vector at P(x)
            let p = s.project(&x).unwrap();
            let v: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
            prop_assert!(s.in_normal_cone(&p, &v).unwrap());
            let back = s.project(&x).unwrap();
            prop_assert!(close(&back, &p, 1e-12));
        }
    }
}
