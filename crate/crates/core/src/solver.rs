//! Equilibrium strategies behind a common trait, registered by name.
//!
//! | name                 | method                                           |
//! |----------------------|--------------------------------------------------|
//! | `closed-form`        | per-node closed form, flags negative quantities  |
//! | `best-response`      | damped Jacobi best response (constant costs)     |
//! | `projected-gradient` | projected fixed-point iteration (any cost model) |
//! | `auto`               | closed form, falling back to an iterative method |

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::CollaborationGraph;
use crate::market::Market;
use crate::spatial::{spatial_quantities, OutcomeFlag, SolverPath, SpatialOutcome};
use crate::vi::{best_response_iterate, solve_general, SolverConfig, ViProblem};

pub trait EquilibriumSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        market: &Market,
        cost: &CostModel,
        graph: &CollaborationGraph,
    ) -> Result<SpatialOutcome>;
}

pub struct ClosedFormSolver;

impl EquilibriumSolver for ClosedFormSolver {
    fn name(&self) -> &'static str {
        "closed-form"
    }

    fn solve(
        &self,
        market: &Market,
        cost: &CostModel,
        graph: &CollaborationGraph,
    ) -> Result<SpatialOutcome> {
        spatial_quantities(&market.to_spatial(), cost, graph)
    }
}

pub struct BestResponseSolver {
    pub config: SolverConfig,
}

impl EquilibriumSolver for BestResponseSolver {
    fn name(&self) -> &'static str {
        "best-response"
    }

    fn solve(
        &self,
        market: &Market,
        cost: &CostModel,
        graph: &CollaborationGraph,
    ) -> Result<SpatialOutcome> {
        let problem = ViProblem::from_market(market, cost, graph)?;
        let x0 = vec![0.0; problem.dim()];
        let sol = best_response_iterate(&problem, &self.config, &x0)?;
        Ok(problem.outcome(&sol.x, SolverPath::BestResponse))
    }
}

pub struct ProjectedGradientSolver {
    pub config: SolverConfig,
}

impl EquilibriumSolver for ProjectedGradientSolver {
    fn name(&self) -> &'static str {
        "projected-gradient"
    }

    fn solve(
        &self,
        market: &Market,
        cost: &CostModel,
        graph: &CollaborationGraph,
    ) -> Result<SpatialOutcome> {
        let problem = ViProblem::from_market(market, cost, graph)?;
        let sol = solve_general(&problem, &self.config)?;
        Ok(problem.outcome(&sol.x, SolverPath::ProjectedGradient))
    }
}

/// Closed form where it is valid. Infeasible closed forms go to best
/// response; quantity-dependent costs go to the projected iteration.
pub struct AutoSolver {
    pub config: SolverConfig,
}

impl EquilibriumSolver for AutoSolver {
    fn name(&self) -> &'static str {
        "auto"
    }

    fn solve(
        &self,
        market: &Market,
        cost: &CostModel,
        graph: &CollaborationGraph,
    ) -> Result<SpatialOutcome> {
        if !cost.is_constant() {
            return ProjectedGradientSolver {
                config: self.config.clone(),
            }
            .solve(market, cost, graph);
        }
        let closed = ClosedFormSolver.solve(market, cost, graph)?;
        if closed.is_feasible() {
            return Ok(closed);
        }
        let mut out = BestResponseSolver {
            config: self.config.clone(),
        }
        .solve(market, cost, graph)?;
        out.flags.push(OutcomeFlag::ViFallback);
        Ok(out)
    }
}

/// Name → solver lookup.
#[derive(Clone)]
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Arc<dyn EquilibriumSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self {
            solvers: BTreeMap::new(),
        }
    }

    /// The four built-in strategies sharing one iterative configuration.
    pub fn builtin(config: &SolverConfig) -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ClosedFormSolver));
        r.register(Arc::new(BestResponseSolver {
            config: config.clone(),
        }));
        r.register(Arc::new(ProjectedGradientSolver {
            config: config.clone(),
        }));
        r.register(Arc::new(AutoSolver {
            config: config.clone(),
        }));
        r
    }

    /// Adds or replaces the solver registered under its name.
    pub fn register(&mut self, solver: Arc<dyn EquilibriumSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn EquilibriumSolver>> {
        self.solvers
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownSolver(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.solvers.keys().copied()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        Self::builtin(&SolverConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{GeneralCost, LinearCost, QuantityCost};
    use crate::spatial::SpatialMarket;

    #[test]
    fn registry_lookup() {
        let r = SolverRegistry::default();
        assert_eq!(
            r.names().collect::<Vec<_>>(),
            vec!["auto", "best-response", "closed-form", "projected-gradient"]
        );
        assert!(matches!(r.get("newton"), Err(Error::UnknownSolver(_))));
    }

    #[test]
    fn strategies_agree_on_interior_instance() {
        let market: Market = SpatialMarket::uniform(2, 3, 30.0, 1.0).unwrap().into();
        let cost: CostModel = LinearCost::new(2.0, 0.5).unwrap().into();
        let g = CollaborationGraph::from_edges(3, [(0, 1)]).unwrap();
        let r = SolverRegistry::default();
        let reference = r
            .get("closed-form")
            .unwrap()
            .solve(&market, &cost, &g)
            .unwrap();
        for name in ["best-response", "projected-gradient", "auto"] {
            let out = r.get(name).unwrap().solve(&market, &cost, &g).unwrap();
            for (a, b) in out
                .demands
                .iter()
                .flatten()
                .zip(reference.demands.iter().flatten())
            {
                assert!((a - b).abs() < 1e-8, "{name}");
            }
        }
    }

    #[test]
    fn auto_falls_back_on_boundary() {
        let mut shipping = vec![vec![0.0; 3]];
        shipping[0][2] = 40.0;
        let market: Market = SpatialMarket::new(vec![20.0], shipping, 3).unwrap().into();
        let cost: CostModel = LinearCost::new(1.0, 0.0).unwrap().into();
        let g = CollaborationGraph::empty(3);
        let out = SolverRegistry::default()
            .get("auto")
            .unwrap()
            .solve(&market, &cost, &g)
            .unwrap();
        assert_eq!(out.path, SolverPath::BestResponse);
        assert!(out.flags.contains(&OutcomeFlag::ViFallback));
        assert_eq!(out.demands[0][2], 0.0);
        assert!((out.demands[0][0] - 19.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn auto_routes_general_costs() {
        struct Rising;
        impl QuantityCost for Rising {
            fn value(&self, _: usize, q: f64, _: usize) -> f64 {
                1.0 + 0.1 * q
            }
        }
        let market: Market = SpatialMarket::uniform(1, 2, 10.0, 0.0).unwrap().into();
        let cost: CostModel = GeneralCost::new(Rising).into();
        let out = SolverRegistry::default()
            .get("auto")
            .unwrap()
            .solve(&market, &cost, &CollaborationGraph::empty(2))
            .unwrap();
        assert_eq!(out.path, SolverPath::ProjectedGradient);
        assert!((out.firm_totals[0] - 9.0 / 3.2).abs() < 1e-6);
    }
}
