//! Pairwise stability of collaboration graphs.
//!
//! A graph is pairwise stable when no firm strictly gains by severing one of
//! its links, and no absent link would strictly benefit one endpoint while
//! leaving the other at least as well off. Payoffs for every deviation are
//! recomputed from scratch by a [`PayoffOracle`]; the closed-form deltas in
//! [`crate::spatial`] are audited against them separately.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::{self, CollaborationGraph, DegreeSequence};
use crate::market::Market;
use crate::solver::EquilibriumSolver;
use crate::spatial::{spatial_condition, spatial_deviation_delta, ConditionReport, Direction};

/// Relative tolerance for payoff comparisons.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Relative tolerance for analytic-vs-direct delta audits.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// `x > y` beyond float noise: `x − y > ε·max(1, |x|, |y|)`.
pub fn strictly_greater(x: f64, y: f64, eps: f64) -> bool {
    x - y > eps * 1f64.max(x.abs()).max(y.abs())
}

/// Graph → per-firm payoffs (the allocation rule).
pub trait PayoffOracle: Sync {
    fn payoffs(&self, g: &CollaborationGraph) -> Result<Vec<f64>>;

    fn epsilon(&self) -> f64 {
        DEFAULT_EPSILON
    }

    /// Which computation produced the payoffs.
    fn provenance(&self) -> String;

    /// `h(g) = Σ_i Y_i(g)`.
    fn value(&self, g: &CollaborationGraph) -> Result<f64> {
        Ok(self.payoffs(g)?.iter().sum())
    }
}

/// Equilibrium profits from a registered solver.
#[derive(Clone)]
pub struct EquilibriumOracle {
    pub market: Market,
    pub cost: CostModel,
    pub solver: Arc<dyn EquilibriumSolver>,
    pub epsilon: f64,
}

impl EquilibriumOracle {
    pub fn new(market: Market, cost: CostModel, solver: Arc<dyn EquilibriumSolver>) -> Self {
        Self {
            market,
            cost,
            solver,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl PayoffOracle for EquilibriumOracle {
    fn payoffs(&self, g: &CollaborationGraph) -> Result<Vec<f64>> {
        self.solver
            .solve(&self.market, &self.cost, g)
            .map(|o| o.profits)
            .map_err(|e| Error::OracleFailure {
                graph: g.to_string(),
                source: Box::new(e),
            })
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn provenance(&self) -> String {
        let kind = if self.market.is_spatial() {
            "spatial"
        } else {
            "aspatial"
        };
        format!("{kind}/{}", self.solver.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    DropProfitable,
    AddMutuallyBeneficial,
}

/// A profitable deviation. Deltas are `Y(g ± ij) − Y(g)` for both endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub edge: (usize, usize),
    pub kind: ViolationKind,
    pub delta_i: f64,
    pub delta_j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub deviations_checked: usize,
    pub payoffs: Vec<f64>,
    pub provenance: String,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }
}

/// Check every single-link deletion and addition of `g`.
pub fn is_pairwise_stable(
    g: &CollaborationGraph,
    oracle: &dyn PayoffOracle,
) -> Result<StabilityReport> {
    let eps = oracle.epsilon();
    let gt = |x: f64, y: f64| strictly_greater(x, y, eps);
    let base = oracle.payoffs(g)?;
    let mut violations = Vec::new();
    let mut checked = 0;

    for (i, j) in g.edges() {
        checked += 1;
        let after = oracle.payoffs(&g.drop_link(i, j)?)?;
        if gt(after[i], base[i]) || gt(after[j], base[j]) {
            violations.push(Violation {
                edge: (i, j),
                kind: ViolationKind::DropProfitable,
                delta_i: after[i] - base[i],
                delta_j: after[j] - base[j],
            });
        }
    }

    for (i, j) in g.non_edges() {
        checked += 1;
        let after = oracle.payoffs(&g.add_link(i, j)?)?;
        // negation of "Y_i(g+ij) > Y_i(g) implies Y_j(g+ij) < Y_j(g)", both ways
        let gains = |a: usize, b: usize| gt(after[a], base[a]) && !gt(base[b], after[b]);
        if gains(i, j) || gains(j, i) {
            violations.push(Violation {
                edge: (i, j),
                kind: ViolationKind::AddMutuallyBeneficial,
                delta_i: after[i] - base[i],
                delta_j: after[j] - base[j],
            });
        }
    }

    Ok(StabilityReport {
        verdict: if violations.is_empty() {
            Verdict::Stable
        } else {
            Verdict::Unstable
        },
        violations,
        deviations_checked: checked,
        payoffs: base,
        provenance: oracle.provenance(),
    })
}

/// All labeled graphs on `n` firms that pass a full deviation scan, in mask
/// order. Graphs are checked in parallel.
pub fn enumerate_stable_graphs(
    n: usize,
    oracle: &dyn PayoffOracle,
    cap: usize,
) -> Result<Vec<CollaborationGraph>> {
    let count = graph::graph_count(n, cap)?;
    let stable: Vec<Option<CollaborationGraph>> = (0..count)
        .into_par_iter()
        .map(|mask| {
            let g = CollaborationGraph::from_mask(n, mask);
            Ok(is_pairwise_stable(&g, oracle)?.is_stable().then_some(g))
        })
        .collect::<Result<_>>()?;
    Ok(stable.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationMode {
    Exhaustive,
    Sampled { count: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremStatus {
    Pass,
    Fail,
    HypothesisUnmet,
}

/// One audited deviation: closed-form delta against re-solved payoffs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub graph: usize,
    pub firm: usize,
    pub partner: usize,
    pub direction: Direction,
    pub analytic: f64,
    pub direct: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub status: TheoremStatus,
    pub target: Vec<usize>,
    pub mode: VerificationMode,
    /// `None` when the cost family itself fails validation.
    pub condition: Option<ConditionReport>,
    pub reason: Option<String>,
    pub graphs: Vec<CollaborationGraph>,
    pub unstable: Vec<usize>,
    pub all_deltas_negative: bool,
    pub max_relative_error: f64,
    pub audit: Vec<AuditRow>,
}

/// Check that every realization of `k` is pairwise stable under the shifted
/// cost family, provided the sufficient condition holds, and audit each
/// deviation's closed-form delta against a direct re-solve.
pub fn verify_theorem_class(
    k: &DegreeSequence,
    market: &Market,
    cost: &CostModel,
    solver: Arc<dyn EquilibriumSolver>,
    mode: VerificationMode,
    cap: usize,
) -> Result<TheoremReport> {
    if !k.is_graphical() {
        return Err(Error::NotGraphical(k.as_slice().to_vec()));
    }
    if market.n() != k.len() {
        return Err(Error::Invalid(format!(
            "target has {} firms, market has {}",
            k.len(),
            market.n()
        )));
    }
    let mut report = TheoremReport {
        status: TheoremStatus::HypothesisUnmet,
        target: k.as_slice().to_vec(),
        mode,
        condition: None,
        reason: None,
        graphs: Vec::new(),
        unstable: Vec::new(),
        all_deltas_negative: true,
        max_relative_error: 0.0,
        audit: Vec::new(),
    };

    let shifted = cost.shifted()?;
    if shifted.shifts() != k {
        report.reason = Some(format!(
            "cost shifts {:?} differ from target degrees",
            shifted.shifts().as_slice()
        ));
        return Ok(report);
    }
    let spatial = market.to_spatial();
    let condition = match spatial_condition(&spatial, cost) {
        Ok(c) => c,
        Err(Error::InvalidCostFamily(msg)) => {
            report.reason = Some(msg);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let holds = condition.holds;
    report.condition = Some(condition);
    if !holds {
        report.reason = Some("sufficient condition is not positive".into());
        return Ok(report);
    }

    report.graphs = match mode {
        VerificationMode::Exhaustive => graph::enumerate_realizations(k, cap)?,
        VerificationMode::Sampled { count, seed } => (0..count as u64)
            .map(|r| graph::random_realization(k, seed.wrapping_add(r)))
            .collect::<Result<_>>()?,
    };

    let oracle = EquilibriumOracle::new(market.clone(), cost.clone(), solver);
    for (idx, g) in report.graphs.iter().enumerate() {
        if !is_pairwise_stable(g, &oracle)?.is_stable() {
            report.unstable.push(idx);
        }
        let base = oracle.payoffs(g)?;
        let deviations = g
            .edges()
            .map(|e| (e, Direction::Drop))
            .chain(g.non_edges().map(|e| (e, Direction::Add)));
        for ((i, j), direction) in deviations {
            let moved = match direction {
                Direction::Drop => g.drop_link(i, j)?,
                Direction::Add => g.add_link(i, j)?,
            };
            let after = oracle.payoffs(&moved)?;
            for (firm, partner) in [(i, j), (j, i)] {
                let analytic =
                    spatial_deviation_delta(&spatial, cost, g, firm, partner, direction)?.total;
                let direct = after[firm] - base[firm];
                let relative_error =
                    (analytic - direct).abs() / 1f64.max(analytic.abs()).max(direct.abs());
                report.max_relative_error = report.max_relative_error.max(relative_error);
                if !(direct < 0.0 && analytic < 0.0) {
                    report.all_deltas_negative = false;
                }
                report.audit.push(AuditRow {
                    graph: idx,
                    firm,
                    partner,
                    direction,
                    analytic,
                    direct,
                    relative_error,
                });
            }
        }
    }

    let ok = report.unstable.is_empty()
        && report.all_deltas_negative
        && report.max_relative_error <= AUDIT_TOLERANCE;
    report.status = if ok {
        TheoremStatus::Pass
    } else {
        TheoremStatus::Fail
    };
    Ok(report)
}
