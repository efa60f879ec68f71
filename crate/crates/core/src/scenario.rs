//! JSON scenario files.

use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, GraphSpec, WeightRule};
use crate::objectives::{Objective, StackedObjective};
use crate::sets::{ConvexSet, ProductSet};
use crate::solver::{PdState, Problem};

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_STOP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformRange {
    pub low: f64,
    pub high: f64,
}

/// Local objectives, either listed per agent or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObjectiveSpec {
    Explicit(Vec<Objective>),
    /// One-dimensional Huber losses with centers drawn uniformly from the
    /// range using the scenario seed.
    Generated { huber_uniform: UniformRange },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub graph: GraphSpec,
    pub objectives: ObjectiveSpec,
    /// Local constraint sets; omitted means unconstrained for every agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<ConvexSet>>,
    pub alpha: f64,
    /// Base step for the DGD baselines; defaults to `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dgd_alpha: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Per-agent initial primal values; zeros when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Vec<f64>>>,
    /// Per-agent initial dual values; zeros when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<Vec<Vec<f64>>>,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_stop_tol() -> f64 {
    DEFAULT_STOP_TOL
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n(&self) -> usize {
        self.graph.n
    }

    pub fn dgd_alpha(&self) -> f64 {
        self.dgd_alpha.unwrap_or(self.alpha)
    }

    /// Objectives with generated parameters drawn from the seed.
    pub fn resolved_objectives(&self) -> Result<Vec<Objective>> {
        match &self.objectives {
            ObjectiveSpec::Explicit(list) => Ok(list.clone()),
            ObjectiveSpec::Generated { huber_uniform } => {
                let UniformRange { low, high } = *huber_uniform;
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(Error::scenario("objectives.huber_uniform", format!("empty range [{low}, {high}]")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..self.n())
                    .map(|_| Objective::Huber { center: vec![if low == high { low } else { rng.gen_range(low..=high) }] })
                    .collect())
            }
        }
    }

    /// Block dimension `m`.
    pub fn dim(&self) -> Result<usize> {
        let objectives = self.resolved_objectives()?;
        objectives.first().map(Objective::dim).ok_or_else(|| Error::scenario("objectives", "no objectives listed"))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::scenario("graph.n", "must be at least 1"));
        }
        for (idx, &(a, b)) in self.graph.edges.iter().enumerate() {
            if a == 0 || b == 0 || a > n || b > n {
                return Err(Error::scenario(format!("graph.edges[{idx}]"), format!("agent index out of 1..={n}")));
            }
        }
        if let WeightRule::Explicit(rows) = &self.graph.weights {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::scenario("graph.weights", format!("explicit matrix must be {n}x{n}")));
            }
        }
        let objectives = self.resolved_objectives()?;
        if objectives.len() != n {
            return Err(Error::scenario("objectives", format!("expected {n} entries, found {}", objectives.len())));
        }
        let m = objectives[0].dim();
        for (i, o) in objectives.iter().enumerate() {
            if o.dim() != m {
                return Err(Error::scenario(format!("objectives[{i}]"), format!("dimension {} differs from {m}", o.dim())));
            }
            o.validate().map_err(|e| Error::scenario(format!("objectives[{i}]"), e.to_string()))?;
        }
        if let Some(sets) = &self.sets {
            if sets.len() != n {
                return Err(Error::scenario("sets", format!("expected {n} entries, found {}", sets.len())));
            }
            for (i, s) in sets.iter().enumerate() {
                if s.dim() != m {
                    return Err(Error::scenario(format!("sets[{i}]"), format!("dimension {} differs from {m}", s.dim())));
                }
                s.validate().map_err(|e| Error::scenario(format!("sets[{i}]"), e.to_string()))?;
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::scenario("alpha", "must be positive and finite"));
        }
        if let Some(a) = self.dgd_alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::scenario("dgd_alpha", "must be positive and finite"));
            }
        }
        if !(self.stop_tol.is_finite() && self.stop_tol >= 0.0) {
            return Err(Error::scenario("stop_tol", "must be finite and nonnegative"));
        }
        for (field, init) in [("x0", &self.x0), ("lambda0", &self.lambda0)] {
            if let Some(rows) = init {
                if rows.len() != n {
                    return Err(Error::scenario(field, format!("expected {n} agent rows, found {}", rows.len())));
                }
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != m || r.iter().any(|v| !v.is_finite()) {
                        return Err(Error::scenario(format!("{field}[{i}]"), format!("must be {m} finite values")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let graph = build_graph(&self.graph)?;
        let objective = StackedObjective::new(self.resolved_objectives()?)?;
        let m = objective.block_dim();
        let sets = match &self.sets {
            Some(list) => ProductSet::new(list.clone())?,
            None => ProductSet::new(vec![ConvexSet::whole_space(m); self.n()])?,
        };
        Problem::new(graph, objective, sets)
    }

    pub fn initial_state(&self, m: usize) -> PdState {
        let stack = |rows: &Option<Vec<Vec<f64>>>| match rows {
            Some(r) => DVector::from_iterator(self.n() * m, r.iter().flatten().copied()),
            None => DVector::zeros(self.n() * m),
        };
        PdState::new(stack(&self.x0), stack(&self.lambda0))
    }
}

/// Erdős–Rényi sampling with edge probability `degree / (n - 1)`, redrawn
/// until connected. Returns a Metropolis-weighted spec.
pub fn generate_random_graph(n: usize, degree: f64, seed: u64) -> Result<GraphSpec> {
    if n < 2 || !(degree > 0.0 && degree < n as f64) {
        return Err(Error::InvalidDegree { degree, n });
    }
    const ATTEMPTS: usize = 1000;
    let p = degree / (n - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        let mut edges = Vec::new();
        for i in 1..=n {
            for j in i + 1..=n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let spec = GraphSpec::new(n, edges, WeightRule::Metropolis);
        if build_graph(&spec)?.is_connected() {
            return Ok(spec);
        }
    }
    Err(Error::Connectivity { attempts: ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "tiny",
        "graph": {"n": 2, "edges": [[1, 2]], "weights": "metropolis"},
        "objectives": [{"type": "huber", "center": [1.0]}, {"type": "huber", "center": [2.0]}],
        "alpha": 0.5
    }"#;

    #[test]
    fn defaults_filled() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.max_iters, DEFAULT_MAX_ITERS);
        assert_eq!(s.stop_tol, DEFAULT_STOP_TOL);
        assert_eq!(s.seed, 0);
        let p = s.build().unwrap();
        assert!(p.sets.is_unconstrained());
        assert_eq!(s.initial_state(1), PdState::zeros(2));
    }

    #[test]
    fn zero_agents_rejected() {
        let text = MINIMAL.replace(r#""n": 2, "edges": [[1, 2]]"#, r#""n": 0, "edges": []"#);
        match parse_scenario(&text) {
            Err(Error::Scenario { field, .. }) => assert_eq!(field, "graph.n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let text = MINIMAL.replace(r#""alpha": 0.5"#, r#""alpha": -1"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { field, .. }) if field == "alpha"));
        let text = MINIMAL.replace(r#"[[1, 2]]"#, r#"[[1, 3]]"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { field, .. }) if field == "graph.edges[0]"));
        let text = MINIMAL.replace(r#""alpha": 0.5"#, r#""alpha": 0.5, "sets": [{"type": "whole_space", "dim": 2}, {"type": "whole_space", "dim": 1}]"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { field, .. }) if field == "sets[0]"));
        let text = MINIMAL.replace("huber", "hubber");
        assert!(matches!(parse_scenario(&text), Err(Error::Parse(_))));
    }

    #[test]
    fn generated_huber_centers_are_seeded() {
        let text = MINIMAL.replace(
            r#"[{"type": "huber", "center": [1.0]}, {"type": "huber", "center": [2.0]}]"#,
            r#"{"huber_uniform": {"low": 1.5, "high": 2.5}}"#,
        );
        let s = parse_scenario(&text).unwrap();
        let a = s.resolved_objectives().unwrap();
        assert_eq!(a, s.resolved_objectives().unwrap());
        for o in &a {
            let Objective::Huber { center } = o else { panic!() };
            assert!((1.5..=2.5).contains(&center[0]));
        }
        let mut other = s.clone();
        other.seed = 99;
        assert_ne!(other.resolved_objectives().unwrap(), a);
    }

    #[test]
    fn random_graph_generation() {
        let spec = generate_random_graph(10, 4.0, 7).unwrap();
        assert!(build_graph(&spec).unwrap().is_connected());
        assert_eq!(spec, generate_random_graph(10, 4.0, 7).unwrap());
        let two = generate_random_graph(2, 1.0, 0).unwrap();
        assert_eq!(two.edges, vec![(1, 2)]);
        assert!(matches!(generate_random_graph(5, 5.0, 0), Err(Error::InvalidDegree { .. })));
        assert!(matches!(generate_random_graph(5, 0.0, 0), Err(Error::InvalidDegree { .. })));
    }

    #[test]
    fn random_graph_edge_count_near_expectation() {
        // Mean edge count over seeds should be near n·degree/2 = 20
        // (slightly above, since disconnected draws are rejected).
        let counts: Vec<usize> = (0..200).map(|s| generate_random_graph(10, 4.0, s).unwrap().edges.len()).collect();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        assert!((18.0..24.0).contains(&mean), "mean edge count {mean}");
    }
}
