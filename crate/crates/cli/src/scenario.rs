use std::path::Path;

use oligonet::graph::realize_degree_sequence;
use oligonet::stability::VerificationMode;
use oligonet::{
    CollaborationGraph, CostModel, CostSpec, DegreeSequence, Market, MarketSpec, SolverConfig,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Which graph a command acts on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    /// `"complete"`, `"empty"`, or `"target"` (Havel–Hakimi realization of
    /// the cost shifts).
    Named(String),
    Edges {
        edges: Vec<(usize, usize)>,
    },
    Degrees {
        degrees: Vec<usize>,
    },
    File {
        file: String,
    },
}

/// A complete run description; one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub firms: usize,
    pub market: MarketSpec,
    pub cost: CostSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default = "default_solver")]
    pub solver: String,
    #[serde(default)]
    pub solver_config: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<VerificationMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_solver() -> String {
    "auto".into()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("bad scenario {}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn market(&self) -> Result<Market, CliError> {
        Ok(self.market.build(self.firms)?)
    }

    pub fn cost(&self) -> Result<CostModel, CliError> {
        let cost = self.cost.build()?;
        if let CostModel::ShiftedConvex(c) = &cost {
            if c.n() != self.firms {
                return Err(CliError::Validation(format!(
                    "cost shifts cover {} firms, scenario has {}",
                    c.n(),
                    self.firms
                )));
            }
        }
        Ok(cost)
    }

    /// Target degree sequence: the cost shifts.
    pub fn target(&self) -> Result<DegreeSequence, CliError> {
        match self.cost()? {
            CostModel::ShiftedConvex(c) => Ok(c.shifts().clone()),
            other => Err(CliError::Validation(format!(
                "{} cost model has no target degree sequence",
                other.kind()
            ))),
        }
    }

    pub fn graph(&self, base_dir: &Path) -> Result<CollaborationGraph, CliError> {
        let spec = self
            .graph
            .as_ref()
            .ok_or_else(|| CliError::Validation("scenario has no 'graph'".into()))?;
        let g = match spec {
            GraphSpec::Named(name) => match name.as_str() {
                "complete" => CollaborationGraph::complete(self.firms),
                "empty" => CollaborationGraph::empty(self.firms),
                "target" => realize_degree_sequence(&self.target()?)?,
                other => {
                    return Err(CliError::Validation(format!(
                        "unknown graph name '{other}'"
                    )));
                }
            },
            GraphSpec::Edges { edges } => {
                CollaborationGraph::from_edges(self.firms, edges.iter().copied())?
            }
            GraphSpec::Degrees { degrees } => {
                realize_degree_sequence(&DegreeSequence::new(degrees.clone())?)?
            }
            GraphSpec::File { file } => {
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::Validation(format!("cannot read {}: {e}", path.display()))
                })?;
                CollaborationGraph::from_text(&text)?
            }
        };
        if g.n() != self.firms {
            return Err(CliError::Validation(format!(
                "graph has {} firms, scenario has {}",
                g.n(),
                self.firms
            )));
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIVE_FIRM: &str = r#"{
        "firms": 5,
        "market": {"alpha": 103, "shipping": 1, "nodes": 2},
        "cost": {"type": "shifted_convex", "gamma0": 5, "base": "quadratic_psi", "psi": 2, "k": [2,3,4,3,2]},
        "graph": "target",
        "mode": "exhaustive"
    }"#;

    #[test]
    fn parses_and_hashes() {
        let s: Scenario = serde_json::from_str(FIVE_FIRM).unwrap();
        assert_eq!(s.solver, "auto");
        assert_eq!(s.mode, Some(VerificationMode::Exhaustive));
        let g = s.graph(Path::new(".")).unwrap();
        assert_eq!(g.degree_sequence().as_slice(), &[2, 3, 4, 3, 2]);
        assert_eq!(s.hash(), s.clone().hash());
        let mut t = s.clone();
        t.solver = "closed-form".into();
        assert_ne!(s.hash(), t.hash());
    }

    #[test]
    fn graph_forms() {
        let mut s: Scenario = serde_json::from_str(FIVE_FIRM).unwrap();
        s.graph = Some(serde_json::from_str(r#"{"edges": [[0, 1], [3, 4]]}"#).unwrap());
        assert_eq!(s.graph(Path::new(".")).unwrap().edge_count(), 2);
        s.graph = Some(serde_json::from_str(r#"{"degrees": [1, 1, 0, 0, 0]}"#).unwrap());
        assert_eq!(s.graph(Path::new(".")).unwrap().edge_count(), 1);
        s.graph = Some(GraphSpec::Named("complete".into()));
        assert_eq!(s.graph(Path::new(".")).unwrap().edge_count(), 10);
        s.graph = Some(GraphSpec::Named("star".into()));
        assert!(s.graph(Path::new(".")).is_err());
        s.graph = Some(serde_json::from_str(r#"{"edges": [[0, 7]]}"#).unwrap());
        assert!(s.graph(Path::new(".")).is_err());
    }

    #[test]
    fn sampled_mode_needs_seed() {
        let bad = FIVE_FIRM.replace(r#""exhaustive""#, r#"{"sampled": {"count": 3}}"#);
        assert!(serde_json::from_str::<Scenario>(&bad).is_err());
        let good = FIVE_FIRM.replace(r#""exhaustive""#, r#"{"sampled": {"count": 3, "seed": 9}}"#);
        let s: Scenario = serde_json::from_str(&good).unwrap();
        assert_eq!(
            s.mode,
            Some(VerificationMode::Sampled { count: 3, seed: 9 })
        );
    }

    #[test]
    fn shift_length_must_match() {
        let s: Scenario =
            serde_json::from_str(&FIVE_FIRM.replace(r#""firms": 5"#, r#""firms": 4"#)).unwrap();
        assert!(s.cost().is_err());
    }
}
