//! Single-market Cournot oligopoly with degree-dependent marginal costs.

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::CollaborationGraph;
use crate::spatial::{
    closed_form_node, constant_costs, spatial_deviation_delta, ConditionReport, DeviationAudit,
    Direction, OutcomeFlag, SolverPath, SpatialMarket, SpatialOutcome,
};

/// Inverse demand `P = α − Q` shared by `n` firms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspatialMarket {
    pub alpha: f64,
    pub n: usize,
}

impl AspatialMarket {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Invalid(format!(
                "demand intercept {alpha} must be positive"
            )));
        }
        if n < 2 {
            return Err(Error::Invalid(format!("need at least two firms, got {n}")));
        }
        Ok(Self { alpha, n })
    }

    pub fn as_spatial(&self) -> SpatialMarket {
        SpatialMarket {
            alpha: vec![self.alpha],
            shipping: vec![vec![0.0; self.n]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub degrees: Vec<usize>,
    pub quantities: Vec<f64>,
    pub total: f64,
    pub price: f64,
    pub marginal_costs: Vec<f64>,
    pub profits: Vec<f64>,
    pub flags: Vec<OutcomeFlag>,
    pub path: SolverPath,
}

impl EquilibriumOutcome {
    pub fn is_feasible(&self) -> bool {
        !self.flags.contains(&OutcomeFlag::Infeasible)
    }

    /// CSV with columns `firm,degree,q,c,Y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("firm,degree,q,c,Y\n");
        for i in 0..self.quantities.len() {
            s.push_str(&format!(
                "{i},{},{},{},{}\n",
                self.degrees[i], self.quantities[i], self.marginal_costs[i], self.profits[i]
            ));
        }
        s
    }
}

impl TryFrom<SpatialOutcome> for EquilibriumOutcome {
    type Error = Error;

    /// Only one-node outcomes convert.
    fn try_from(o: SpatialOutcome) -> Result<Self> {
        if o.demands.len() != 1 {
            return Err(Error::Invalid(format!(
                "outcome spans {} nodes, expected one",
                o.demands.len()
            )));
        }
        Ok(Self {
            degrees: o.degrees,
            quantities: o.demands.into_iter().next().unwrap(),
            total: o.node_totals[0],
            price: o.prices[0],
            marginal_costs: o.marginal_costs,
            profits: o.profits,
            flags: o.flags,
            path: o.path,
        })
    }
}

/// Closed-form interior equilibrium
/// `q_i = (α − γ0 − n·b_i + Σ_{j≠i} b_j) / (n + 1)`.
///
/// Negative quantities are flagged [`OutcomeFlag::Infeasible`]; the caller
/// is expected to fall back to the iterative solver.
pub fn cournot_quantities(
    market: &AspatialMarket,
    cost: &CostModel,
    g: &CollaborationGraph,
) -> Result<EquilibriumOutcome> {
    if g.n() != market.n {
        return Err(Error::Invalid(format!(
            "graph has {} firms, market has {}",
            g.n(),
            market.n
        )));
    }
    let (gamma0, offsets, costs) = constant_costs(cost, g)?;
    let quantities = closed_form_node(market.alpha - gamma0, &offsets);
    let total: f64 = quantities.iter().sum();
    let price = market.alpha - total;
    let profits = quantities
        .iter()
        .zip(&costs)
        .map(|(q, c)| q * (price - c) + 0.0)
        .collect();
    let mut flags = Vec::new();
    if quantities.iter().any(|&q| q < 0.0) {
        flags.push(OutcomeFlag::Infeasible);
    }
    if costs.iter().any(|&c| c < 0.0) {
        flags.push(OutcomeFlag::NegativeMarginalCost);
    }
    Ok(EquilibriumOutcome {
        degrees: g.degree_sequence().into(),
        quantities,
        total,
        price,
        marginal_costs: costs,
        profits,
        flags,
        path: SolverPath::ClosedForm,
    })
}

/// `α − γ0 − n·max{f(n−1), f(1−n)} − ½(n−1)·max{Δ⁺f, Δ⁻f}`; positive means
/// every graph has nonnegative equilibrium quantities.
pub fn aspatial_condition(market: &AspatialMarket, cost: &CostModel) -> Result<ConditionReport> {
    ConditionReport::evaluate(market.alpha, 0.0, cost, false)
}

/// `Y_i(g ± ij) − Y_i(g)` from the closed-form delta
/// `−Δf·((n−1)/(n+1))·(2q_i − ((n−1)/(n+1))·Δf)`.
pub fn analytic_deviation_delta(
    market: &AspatialMarket,
    cost: &CostModel,
    g: &CollaborationGraph,
    firm: usize,
    partner: usize,
    direction: Direction,
) -> Result<DeviationAudit> {
    spatial_deviation_delta(&market.as_spatial(), cost, g, firm, partner, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{LinearCost, ShiftedConvexCost};
    use crate::graph::DegreeSequence;

    fn k(v: &[usize]) -> DegreeSequence {
        DegreeSequence::new(v.to_vec()).unwrap()
    }

    fn figure_one() -> CollaborationGraph {
        CollaborationGraph::from_edges(5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)])
            .unwrap()
    }

    /// Jacobi best response run to a fixed point; an oracle independent of
    /// the closed form.
    fn best_response_oracle(alpha: f64, costs: &[f64]) -> Vec<f64> {
        let n = costs.len();
        let mut q = vec![0.0; n];
        let theta = 1.0 / (n as f64 + 1.0);
        for _ in 0..200_000 {
            let total: f64 = q.iter().sum();
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    let br = ((alpha - (total - q[i]) - costs[i]) / 2.0).max(0.0);
                    (1.0 - theta) * q[i] + theta * br
                })
                .collect();
            let change = next
                .iter()
                .zip(&q)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            q = next;
            if change < 1e-14 {
                break;
            }
        }
        q
    }

    #[test]
    fn symmetric_duopoly() {
        let m = AspatialMarket::new(10.0, 2).unwrap();
        let cost: CostModel = ShiftedConvexCost::named(1.0, "zero", None, k(&[0, 0]))
            .unwrap()
            .into();
        let out = cournot_quantities(&m, &cost, &CollaborationGraph::empty(2)).unwrap();
        assert_eq!(out.quantities, vec![3.0, 3.0]);
        assert_eq!(out.price, 4.0);
        assert_eq!(out.profits, vec![9.0, 9.0]);
        assert_eq!(out.to_csv(), "firm,degree,q,c,Y\n0,0,3,1,9\n1,0,3,1,9\n");
    }

    #[test]
    fn linear_complete_graph() {
        let m = AspatialMarket::new(10.0, 3).unwrap();
        let cost: CostModel = LinearCost::new(2.0, 0.5).unwrap().into();
        let out = cournot_quantities(&m, &cost, &CollaborationGraph::complete(3)).unwrap();
        let oracle = best_response_oracle(10.0, &out.marginal_costs);
        for (q, o) in out.quantities.iter().zip(&oracle) {
            assert!((q - 2.25).abs() < 1e-12);
            assert!((q - o).abs() < 1e-9);
        }
    }

    #[test]
    fn five_firm_single_market() {
        let m = AspatialMarket::new(103.0, 5).unwrap();
        let cost: CostModel = ShiftedConvexCost::quadratic(5.0, 2.0, k(&[2, 3, 4, 3, 2])).into();
        let out = cournot_quantities(&m, &cost, &figure_one()).unwrap();
        let oracle = best_response_oracle(103.0, &out.marginal_costs);
        for (q, o) in out.quantities.iter().zip(&oracle) {
            assert_eq!(*q, 16.0);
            assert!((q - o).abs() < 1e-9);
        }
    }

    #[test]
    fn general_cost_is_rejected() {
        struct Flat;
        impl crate::cost::QuantityCost for Flat {
            fn value(&self, _: usize, _: f64, _: usize) -> f64 {
                1.0
            }
        }
        let cost: CostModel = crate::cost::GeneralCost::new(Flat).into();
        let m = AspatialMarket::new(10.0, 2).unwrap();
        assert!(matches!(
            cournot_quantities(&m, &cost, &CollaborationGraph::empty(2)),
            Err(Error::UnsupportedModel("general"))
        ));
    }

    #[test]
    fn first_order_condition() {
        let m = AspatialMarket::new(103.0, 5).unwrap();
        let cost: CostModel = ShiftedConvexCost::quadratic(5.0, 2.0, k(&[2, 3, 4, 3, 2])).into();
        for mask in (0..1024).step_by(37) {
            let g = CollaborationGraph::from_mask(5, mask);
            let out = cournot_quantities(&m, &cost, &g).unwrap();
            for i in 0..5 {
                let q = out.quantities[i];
                assert!((out.price - out.marginal_costs[i] - q).abs() <= 1e-10 * q.abs().max(1.0));
                assert!((out.profits[i] - q * q).abs() <= 1e-10 * (q * q).max(1.0));
            }
        }
    }

    #[test]
    fn condition_examples() {
        let cost: CostModel = ShiftedConvexCost::quadratic(5.0, 2.0, k(&[2, 3, 4, 3, 2])).into();
        // 103 − 5 − 5·18 − ½·4·1
        let r = aspatial_condition(&AspatialMarket::new(103.0, 5).unwrap(), &cost).unwrap();
        assert_eq!(r.value, 6.0);
        assert!(r.holds);
        let r = aspatial_condition(&AspatialMarket::new(50.0, 5).unwrap(), &cost).unwrap();
        assert_eq!(r.value, -47.0);
        assert!(!r.holds);

        let zero: CostModel = ShiftedConvexCost::named(4.0, "zero", None, k(&[1, 1, 0]))
            .unwrap()
            .into();
        let r = aspatial_condition(&AspatialMarket::new(10.0, 3).unwrap(), &zero).unwrap();
        assert_eq!(r.value, 10.0 - 4.0);
    }

    #[test]
    fn single_market_drop_delta() {
        let m = AspatialMarket::new(103.0, 5).unwrap();
        let cost: CostModel = ShiftedConvexCost::quadratic(5.0, 2.0, k(&[2, 3, 4, 3, 2])).into();
        let g = figure_one();
        let audit = analytic_deviation_delta(&m, &cost, &g, 1, 2, Direction::Drop).unwrap();
        // −(4/6)(32 − 4/6) = −188/9
        assert!((audit.total + 188.0 / 9.0).abs() < 1e-12);

        let before = cournot_quantities(&m, &cost, &g).unwrap();
        let after = cournot_quantities(&m, &cost, &g.drop_link(1, 2).unwrap()).unwrap();
        let direct = after.profits[1] - before.profits[1];
        assert!((audit.total - direct).abs() <= 1e-9 * direct.abs());
    }
}
