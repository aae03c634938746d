//! Spatially separated markets with per-node linear demand and shipping costs.
//!
//! With constant marginal costs each node is an independent Cournot
//! oligopoly, so the equilibrium is computed node by node from the same
//! closed-form kernel used for the single market.

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::CollaborationGraph;

/// Demand intercepts per node and a `v × n` shipping cost matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMarket {
    pub alpha: Vec<f64>,
    pub shipping: Vec<Vec<f64>>,
}

impl SpatialMarket {
    pub fn new(alpha: Vec<f64>, shipping: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Invalid(
                "spatial market needs at least one node".into(),
            ));
        }
        if n == 0 {
            return Err(Error::Invalid(
                "spatial market needs at least one firm".into(),
            ));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::Invalid(format!(
                "demand intercept {a} must be positive"
            )));
        }
        if shipping.len() != alpha.len() || shipping.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(format!(
                "shipping matrix must be {}x{n}",
                alpha.len()
            )));
        }
        if shipping
            .iter()
            .flatten()
            .any(|s| !(*s >= 0.0) || !s.is_finite())
        {
            return Err(Error::Invalid(
                "shipping costs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { alpha, shipping })
    }

    /// `v` nodes, all with intercept `alpha` and shipping cost `s`.
    pub fn uniform(v: usize, n: usize, alpha: f64, s: f64) -> Result<Self> {
        Self::new(vec![alpha; v], vec![vec![s; n]; v], n)
    }

    pub fn v(&self) -> usize {
        self.alpha.len()
    }

    pub fn n(&self) -> usize {
        self.shipping[0].len()
    }

    pub fn max_shipping(&self) -> f64 {
        self.shipping.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn min_alpha(&self) -> f64 {
        self.alpha.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn heterogeneous_alpha(&self) -> bool {
        self.alpha.iter().any(|&a| a != self.alpha[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeFlag {
    /// The closed form produced a negative quantity.
    Infeasible,
    /// Some marginal cost is below zero.
    NegativeMarginalCost,
    /// Numbers come from the iterative solver after the closed form failed.
    ViFallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    ClosedForm,
    BestResponse,
    ProjectedGradient,
}

/// Equilibrium on `v` nodes; every matrix is indexed `[node][firm]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialOutcome {
    pub degrees: Vec<usize>,
    pub demands: Vec<Vec<f64>>,
    pub node_totals: Vec<f64>,
    pub prices: Vec<f64>,
    pub firm_totals: Vec<f64>,
    pub marginal_costs: Vec<f64>,
    pub node_profits: Vec<Vec<f64>>,
    pub profits: Vec<f64>,
    pub flags: Vec<OutcomeFlag>,
    pub path: SolverPath,
}

impl SpatialOutcome {
    /// Assemble prices and profits from demands and per-firm marginal costs.
    pub fn assemble(
        market: &SpatialMarket,
        degrees: Vec<usize>,
        demands: Vec<Vec<f64>>,
        marginal_costs: Vec<f64>,
        path: SolverPath,
    ) -> Self {
        let n = market.n();
        let node_totals: Vec<f64> = demands.iter().map(|row| row.iter().sum()).collect();
        let prices: Vec<f64> = market
            .alpha
            .iter()
            .zip(&node_totals)
            .map(|(a, d)| a - d)
            .collect();
        let node_profits: Vec<Vec<f64>> = demands
            .iter()
            .enumerate()
            .map(|(l, row)| {
                row.iter()
                    .enumerate()
                    // adding 0.0 maps -0.0 from zero demands to 0.0
                    .map(|(i, d)| d * (prices[l] - marginal_costs[i] - market.shipping[l][i]) + 0.0)
                    .collect()
            })
            .collect();
        let firm_totals = (0..n).map(|i| demands.iter().map(|r| r[i]).sum()).collect();
        let profits = (0..n)
            .map(|i| node_profits.iter().map(|r| r[i]).sum())
            .collect();
        let mut flags = Vec::new();
        if demands.iter().flatten().any(|&d| d < 0.0) {
            flags.push(OutcomeFlag::Infeasible);
        }
        if marginal_costs.iter().any(|&c| c < 0.0) {
            flags.push(OutcomeFlag::NegativeMarginalCost);
        }
        Self {
            degrees,
            demands,
            node_totals,
            prices,
            firm_totals,
            marginal_costs,
            node_profits,
            profits,
            flags,
            path,
        }
    }

    pub fn is_feasible(&self) -> bool {
        !self.flags.contains(&OutcomeFlag::Infeasible)
    }

    /// CSV with columns `node,firm,d,P_l,y`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,firm,d,P_l,y\n");
        for (l, row) in self.demands.iter().enumerate() {
            for (i, d) in row.iter().enumerate() {
                s.push_str(&format!(
                    "{l},{i},{d},{},{}\n",
                    self.prices[l], self.node_profits[l][i]
                ));
            }
        }
        s
    }
}

/// Closed-form Cournot quantities for one node:
/// `x_i = (a − n·b_i + Σ_{j≠i} b_j) / (n + 1)` with `a = α − γ0`.
pub(crate) fn closed_form_node(a: f64, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let mut others = 0.0;
            for (j, bj) in b.iter().enumerate() {
                if j != i {
                    others += bj;
                }
            }
            (a - nf * b[i] + others) / (nf + 1.0)
        })
        .collect()
}

/// Constant marginal costs `(γ0, c_i)` for every firm at graph `g`.
pub(crate) fn constant_costs(
    cost: &CostModel,
    g: &CollaborationGraph,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let gamma0 = cost.gamma0().ok_or(Error::UnsupportedModel("general"))?;
    let degrees = g.degree_sequence();
    let n = g.n();
    let offsets = degrees
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &d)| cost.offset(i, d, n))
        .collect::<Result<Vec<_>>>()?;
    let costs = offsets.iter().map(|b| gamma0 + b).collect();
    Ok((gamma0, offsets, costs))
}

fn check_sizes(n_market: usize, cost: &CostModel, g: &CollaborationGraph) -> Result<()> {
    if g.n() != n_market {
        return Err(Error::Invalid(format!(
            "graph has {} firms, market has {n_market}",
            g.n()
        )));
    }
    if let CostModel::ShiftedConvex(c) = cost {
        if c.n() != n_market {
            return Err(Error::Invalid(format!(
                "cost shifts cover {} firms, market has {n_market}",
                c.n()
            )));
        }
    }
    Ok(())
}

/// Per-node closed-form equilibrium. Negative demands are flagged
/// [`OutcomeFlag::Infeasible`] rather than rejected.
pub fn spatial_quantities(
    market: &SpatialMarket,
    cost: &CostModel,
    g: &CollaborationGraph,
) -> Result<SpatialOutcome> {
    check_sizes(market.n(), cost, g)?;
    let (gamma0, offsets, costs) = constant_costs(cost, g)?;
    let demands = market
        .alpha
        .iter()
        .zip(&market.shipping)
        .map(|(alpha, s)| {
            let b: Vec<f64> = s.iter().zip(&offsets).map(|(s, f)| s + f).collect();
            closed_form_node(alpha - gamma0, &b)
        })
        .collect();
    Ok(SpatialOutcome::assemble(
        market,
        g.degree_sequence().into(),
        demands,
        costs,
        SolverPath::ClosedForm,
    ))
}

/// Left-hand side of the sufficient condition for nonnegative demands at
/// every node on every graph, with its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub value: f64,
    pub holds: bool,
    pub alpha: f64,
    pub gamma0: f64,
    pub n: usize,
    pub max_shipping: f64,
    /// `f(n−1)` and `f(1−n)`.
    pub f_extremes: (f64, f64),
    /// `f(1) − f(0)` and `f(−1) − f(0)`.
    pub deltas: (f64, f64),
    /// Set when node intercepts differ and the minimum was used.
    pub heterogeneous_alpha: bool,
}

impl ConditionReport {
    pub(crate) fn evaluate(
        alpha: f64,
        max_shipping: f64,
        cost: &CostModel,
        heterogeneous_alpha: bool,
    ) -> Result<Self> {
        let c = cost.shifted().map_err(|_| {
            Error::InvalidCostFamily(format!("{} cost has no base function", cost.kind()))
        })?;
        let n = c.n();
        if n < 2 {
            return Err(Error::InvalidCostFamily("condition needs n >= 2".into()));
        }
        let validation = c.validate(n);
        if !validation.passed() {
            return Err(Error::InvalidCostFamily(validation.failures().join("; ")));
        }
        let span = n as i64 - 1;
        let f_extremes = (c.f(span).unwrap(), c.f(-span).unwrap());
        let deltas = (c.delta_plus()?, c.delta_minus()?);
        let nf = n as f64;
        let value = alpha
            - c.gamma0()
            - nf * (max_shipping + f_extremes.0.max(f_extremes.1))
            - 0.5 * (nf - 1.0) * deltas.0.max(deltas.1);
        Ok(Self {
            value,
            holds: value > 0.0,
            alpha,
            gamma0: c.gamma0(),
            n,
            max_shipping,
            f_extremes,
            deltas,
            heterogeneous_alpha,
        })
    }

    /// The condition written out step by step, ending in `value > 0`.
    pub fn chain(&self) -> Vec<String> {
        let n = self.n as f64;
        let fmax = self.f_extremes.0.max(self.f_extremes.1);
        let dmax = self.deltas.0.max(self.deltas.1);
        let cmp = if self.holds { ">" } else { "≤" };
        vec![
            format!(
                "{} − {} − {}·[{} + max({}, {})] − ½·{}·max({}, {}) {cmp} 0",
                self.alpha,
                self.gamma0,
                self.n,
                self.max_shipping,
                self.f_extremes.0,
                self.f_extremes.1,
                self.n - 1,
                self.deltas.0,
                self.deltas.1
            ),
            format!(
                "{} − {}·{} − {}·{} {cmp} 0",
                self.alpha - self.gamma0,
                self.n,
                self.max_shipping + fmax,
                0.5 * (n - 1.0),
                dmax
            ),
            format!(
                "{} − {} − {} {cmp} 0",
                self.alpha - self.gamma0,
                n * (self.max_shipping + fmax),
                0.5 * (n - 1.0) * dmax
            ),
            format!("{} {cmp} 0", self.value),
        ]
    }
}

/// Sufficient condition for nonnegative equilibrium demands across all
/// graphs. With heterogeneous intercepts the smallest one is used.
pub fn spatial_condition(market: &SpatialMarket, cost: &CostModel) -> Result<ConditionReport> {
    ConditionReport::evaluate(
        market.min_alpha(),
        market.max_shipping(),
        cost,
        market.heterogeneous_alpha(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Drop,
    Add,
}

/// Closed-form profit change for one firm when one of its links is dropped
/// or a new one is added, at a graph whose degrees equal the cost shifts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationAudit {
    pub firm: usize,
    pub partner: usize,
    pub direction: Direction,
    /// `Δ⁻f` or `Δ⁺f`.
    pub cost_step: f64,
    /// `y_li(g ± ij) − y_li(g)` per node.
    pub node_deltas: Vec<f64>,
    /// `Y_i(g ± ij) − Y_i(g)`.
    pub total: f64,
    pub demands_before: Vec<Vec<f64>>,
    /// Demands at `g ± ij` obtained from the per-firm update rule.
    pub demands_after: Vec<Vec<f64>>,
}

/// Profit change for `firm` when link `{firm, partner}` is dropped or added,
/// computed from the closed-form deltas rather than by re-solving.
pub fn spatial_deviation_delta(
    market: &SpatialMarket,
    cost: &CostModel,
    g: &CollaborationGraph,
    firm: usize,
    partner: usize,
    direction: Direction,
) -> Result<DeviationAudit> {
    let c = cost.shifted()?;
    check_sizes(market.n(), cost, g)?;
    let actual = g.degree_sequence();
    if &actual != c.shifts() {
        return Err(Error::DegreeMismatch {
            actual: actual.into(),
            target: c.shifts().as_slice().to_vec(),
        });
    }
    // validates the pair and edge existence for the chosen direction
    match direction {
        Direction::Drop => g.drop_link(firm, partner)?,
        Direction::Add => g.add_link(firm, partner)?,
    };
    let step = match direction {
        Direction::Drop => c.delta_minus()?,
        Direction::Add => c.delta_plus()?,
    };
    let base = spatial_quantities(market, cost, g)?;
    let n = market.n() as f64;
    let ratio = (n - 1.0) / (n + 1.0);
    let node_deltas: Vec<f64> = base
        .demands
        .iter()
        .map(|row| -step * ratio * (2.0 * row[firm] - ratio * step))
        .collect();
    let total = node_deltas.iter().sum();
    let demands_after = base
        .demands
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(r, &d)| {
                    if r == firm || r == partner {
                        d - step * n / (n + 1.0) + step / (n + 1.0)
                    } else {
                        d + 2.0 * step / (n + 1.0)
                    }
                })
                .collect()
        })
        .collect();
    Ok(DeviationAudit {
        firm,
        partner,
        direction,
        cost_step: step,
        node_deltas,
        total,
        demands_before: base.demands,
        demands_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{LinearCost, ShiftedConvexCost};
    use crate::graph::DegreeSequence;
    use approx::assert_relative_eq;

    fn five_firm_cost() -> CostModel {
        ShiftedConvexCost::quadratic(5.0, 2.0, DegreeSequence::new(vec![2, 3, 4, 3, 2]).unwrap())
            .into()
    }

    fn figure_one() -> CollaborationGraph {
        CollaborationGraph::from_edges(5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)])
            .unwrap()
    }

    #[test]
    fn five_firm_demands() {
        let m = SpatialMarket::uniform(3, 5, 103.0, 1.0).unwrap();
        let out = spatial_quantities(&m, &five_firm_cost(), &figure_one()).unwrap();
        for d in out.demands.iter().flatten() {
            assert!((d - 95.0 / 6.0).abs() < 1e-12);
        }
        assert!(out.is_feasible());
        assert_eq!(out.path, SolverPath::ClosedForm);
    }

    #[test]
    fn two_node_duopoly() {
        let m = SpatialMarket::new(vec![10.0, 20.0], vec![vec![0.0; 2]; 2], 2).unwrap();
        let cost: CostModel = LinearCost::new(0.0, 0.0).unwrap().into();
        let out = spatial_quantities(&m, &cost, &CollaborationGraph::empty(2)).unwrap();
        for i in 0..2 {
            assert_relative_eq!(out.demands[0][i], 10.0 / 3.0, max_relative = 1e-14);
            assert_relative_eq!(out.demands[1][i], 20.0 / 3.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn negative_demand_is_flagged() {
        let mut shipping = vec![vec![0.0; 3]];
        shipping[0][2] = 50.0;
        let m = SpatialMarket::new(vec![20.0], shipping, 3).unwrap();
        let cost: CostModel = LinearCost::new(1.0, 0.0).unwrap().into();
        let out = spatial_quantities(&m, &cost, &CollaborationGraph::empty(3)).unwrap();
        assert!(!out.is_feasible());
        assert!(out.demands[0][2] < 0.0);
    }

    #[test]
    fn condition_examples() {
        let cost = five_firm_cost();
        let m = SpatialMarket::uniform(2, 5, 103.0, 1.0).unwrap();
        let r = spatial_condition(&m, &cost).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.holds);
        assert_eq!(
            r.chain(),
            vec![
                "103 − 5 − 5·[1 + max(18, 18)] − ½·4·max(1, 1) > 0",
                "98 − 5·19 − 2·1 > 0",
                "98 − 95 − 2 > 0",
                "1 > 0",
            ]
        );

        let m2 = SpatialMarket::uniform(2, 5, 103.0, 2.0).unwrap();
        let r2 = spatial_condition(&m2, &cost).unwrap();
        assert_eq!(r2.value, -4.0);
        assert!(!r2.holds);

        let het = SpatialMarket::new(vec![103.0, 120.0], vec![vec![1.0; 5]; 2], 5).unwrap();
        let r3 = spatial_condition(&het, &cost).unwrap();
        assert_eq!(r3.value, 1.0);
        assert!(r3.heterogeneous_alpha);

        let lin: CostModel = LinearCost::new(1.0, 1.0).unwrap().into();
        assert!(matches!(
            spatial_condition(&m, &lin),
            Err(Error::InvalidCostFamily(_))
        ));
    }

    #[test]
    fn drop_delta_per_node() {
        let m = SpatialMarket::uniform(2, 5, 103.0, 1.0).unwrap();
        let audit =
            spatial_deviation_delta(&m, &five_firm_cost(), &figure_one(), 1, 2, Direction::Drop)
                .unwrap();
        for d in &audit.node_deltas {
            assert!((d + 62.0 / 3.0).abs() < 1e-9);
        }
        assert!((audit.total + 124.0 / 3.0).abs() < 1e-9);

        // the update rule reproduces a fresh solve at g − ij
        let dropped = spatial_quantities(
            &m,
            &five_firm_cost(),
            &figure_one().drop_link(1, 2).unwrap(),
        )
        .unwrap();
        for (a, b) in audit
            .demands_after
            .iter()
            .flatten()
            .zip(dropped.demands.iter().flatten())
        {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn deviation_preconditions() {
        let m = SpatialMarket::uniform(1, 5, 103.0, 1.0).unwrap();
        let g = figure_one();
        assert!(matches!(
            spatial_deviation_delta(&m, &five_firm_cost(), &g, 0, 4, Direction::Drop),
            Err(Error::EdgeMissing(0, 4))
        ));
        assert!(matches!(
            spatial_deviation_delta(&m, &five_firm_cost(), &g, 0, 1, Direction::Add),
            Err(Error::EdgeExists(0, 1))
        ));
        let other = g.drop_link(0, 1).unwrap();
        assert!(matches!(
            spatial_deviation_delta(&m, &five_firm_cost(), &other, 0, 2, Direction::Drop),
            Err(Error::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn flat_family_has_zero_add_delta() {
        let k = DegreeSequence::new(vec![1, 1, 0]).unwrap();
        let cost: CostModel = ShiftedConvexCost::named(1.0, "zero", None, k)
            .unwrap()
            .into();
        let g = CollaborationGraph::from_edges(3, [(0, 1)]).unwrap();
        let m = SpatialMarket::uniform(2, 3, 10.0, 0.5).unwrap();
        let audit = spatial_deviation_delta(&m, &cost, &g, 0, 2, Direction::Add).unwrap();
        assert!(audit.node_deltas.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn csv_columns() {
        let m = SpatialMarket::uniform(1, 2, 10.0, 0.0).unwrap();
        let cost: CostModel = LinearCost::new(1.0, 0.0).unwrap().into();
        let out = spatial_quantities(&m, &cost, &CollaborationGraph::empty(2)).unwrap();
        let csv = out.to_csv();
        assert_eq!(csv.lines().next(), Some("node,firm,d,P_l,y"));
        assert_eq!(csv.lines().nth(1), Some("0,0,3,4,9"));
    }
}
