//! Iterative equilibrium solvers for the composed variational inequality.
//!
//! The decision vector stacks demands `x[l·n + i] = d_li` (a single market
//! is the one-node case). The map used throughout is the pseudo-gradient of
//! profits, `F_li(x) = P_l − d_li − s_li − c_i(q_i) − q_i·∂c_i/∂q_i`, so a
//! solution satisfies `⟨F(x*), y − x*⟩ ≤ 0` for every `y ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::cost::CostModel;
use crate::error::{Error, Result};
use crate::graph::CollaborationGraph;
use crate::market::Market;
use crate::spatial::{SolverPath, SpatialMarket, SpatialOutcome};

/// Probe quantities for the analytic-vs-numeric `∂c/∂q` check.
const GRADIENT_PROBES: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Best-response damping θ. `None` picks `min(0.5, 4/(n+2))`.
    pub damping: Option<f64>,
    pub max_iter: usize,
    pub tolerance: f64,
    /// Projected-iteration step σ. `None` means `1/(2n)`.
    pub step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: None,
            max_iter: 10_000,
            tolerance: 1e-10,
            step: None,
        }
    }
}

impl SolverConfig {
    /// Jacobi best response on `n` firms has iteration eigenvalues
    /// `1 − θ/2` and `1 − θ(n+1)/2`; `4/(n+2)` balances the two.
    pub fn damping_for(&self, n: usize) -> f64 {
        self.damping
            .unwrap_or_else(|| (4.0 / (n as f64 + 2.0)).min(0.5))
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid("solver tolerance must be positive".into()));
        }
        if let Some(t) = self.damping {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Invalid(format!("damping {t} outside (0, 1]")));
            }
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(Error::Invalid(format!("step {s} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub max_change: f64,
}

/// `iteration,residual,max_change` rows.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,residual,max_change\n");
    for r in trace {
        s.push_str(&format!(
            "{},{},{}\n",
            r.iteration, r.residual, r.max_change
        ));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<TraceRow>,
    /// Result of probing `⟨F(x*), y − x*⟩ ≤ 0` along coordinate directions.
    pub vi_verified: bool,
}

/// Equilibrium problem on `v` nodes and `n` firms with nonnegative demands.
#[derive(Clone, Debug)]
pub struct ViProblem {
    market: SpatialMarket,
    degrees: Vec<usize>,
    cost: CostModel,
    /// Marginal costs when they do not depend on output.
    constant_costs: Option<Vec<f64>>,
}

impl ViProblem {
    pub fn new(market: SpatialMarket, degrees: Vec<usize>, cost: CostModel) -> Result<Self> {
        let n = market.n();
        if degrees.len() != n {
            return Err(Error::Invalid(format!(
                "{} degrees for {n} firms",
                degrees.len()
            )));
        }
        let constant_costs = if cost.is_constant() {
            Some(
                degrees
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| cost.marginal_cost(i, d, n, None))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            if let Some(&degree) = degrees.iter().find(|&&d| d + 1 > n) {
                return Err(Error::DomainError { degree, max: n - 1 });
            }
            None
        };
        Ok(Self {
            market,
            degrees,
            cost,
            constant_costs,
        })
    }

    pub fn from_market(market: &Market, cost: &CostModel, g: &CollaborationGraph) -> Result<Self> {
        if g.n() != market.n() {
            return Err(Error::Invalid(format!(
                "graph has {} firms, market has {}",
                g.n(),
                market.n()
            )));
        }
        Self::new(
            market.to_spatial(),
            g.degree_sequence().into(),
            cost.clone(),
        )
    }

    pub fn n(&self) -> usize {
        self.market.n()
    }

    pub fn v(&self) -> usize {
        self.market.v()
    }

    pub fn dim(&self) -> usize {
        self.n() * self.v()
    }

    pub fn market(&self) -> &SpatialMarket {
        &self.market
    }

    pub fn firm_totals(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..self.v()).map(|l| x[l * n + i]).sum())
            .collect()
    }

    pub fn marginal_costs(&self, x: &[f64]) -> Vec<f64> {
        match &self.constant_costs {
            Some(c) => c.clone(),
            None => {
                let n = self.n();
                self.firm_totals(x)
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| {
                        self.cost
                            .marginal_cost(i, self.degrees[i], n, Some(q))
                            .expect("degrees validated at construction")
                    })
                    .collect()
            }
        }
    }

    fn prices(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        self.market
            .alpha
            .iter()
            .enumerate()
            .map(|(l, a)| a - x[l * n..(l + 1) * n].iter().sum::<f64>())
            .collect()
    }

    /// Profit pseudo-gradient `∂Y_i/∂d_li` stacked over `(l, i)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let prices = self.prices(x);
        let totals = self.firm_totals(x);
        let costs = self.marginal_costs(x);
        let own: Vec<f64> = (0..n)
            .map(|i| {
                costs[i] + totals[i] * self.cost.marginal_cost_slope(i, self.degrees[i], totals[i])
            })
            .collect();
        (0..self.dim())
            .map(|k| {
                let (l, i) = (k / n, k % n);
                prices[l] - x[k] - self.market.shipping[l][i] - own[i]
            })
            .collect()
    }

    /// `Y_i = Σ_l d_li·(P_l − s_li) − q_i·c_i(q_i)`.
    pub fn profits(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let prices = self.prices(x);
        let totals = self.firm_totals(x);
        let costs = self.marginal_costs(x);
        (0..n)
            .map(|i| {
                let revenue: f64 = (0..self.v())
                    .map(|l| x[l * n + i] * (prices[l] - self.market.shipping[l][i]))
                    .sum();
                revenue - totals[i] * costs[i]
            })
            .collect()
    }

    /// Coordinate-wise best response, constant marginal costs only:
    /// `max(0, (α_l − Σ_{j≠i} d_lj − c_i − s_li) / 2)`.
    pub fn best_response(&self, x: &[f64]) -> Result<Vec<f64>> {
        let costs = self
            .constant_costs
            .as_ref()
            .ok_or(Error::UnsupportedModel("general"))?;
        let n = self.n();
        let mut out = vec![0.0; self.dim()];
        for l in 0..self.v() {
            let row = &x[l * n..(l + 1) * n];
            let total: f64 = row.iter().sum();
            for i in 0..n {
                let rivals = total - row[i];
                let br =
                    (self.market.alpha[l] - rivals - costs[i] - self.market.shipping[l][i]) / 2.0;
                out[l * n + i] = br.max(0.0);
            }
        }
        Ok(out)
    }

    /// Package a solution vector as an outcome.
    pub fn outcome(&self, x: &[f64], path: SolverPath) -> SpatialOutcome {
        let n = self.n();
        let demands = x.chunks(n).map(|c| c.to_vec()).collect();
        SpatialOutcome::assemble(
            &self.market,
            self.degrees.clone(),
            demands,
            self.marginal_costs(x),
            path,
        )
    }

    fn check_start(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "start has {} entries, problem has {}",
                x0.len(),
                self.dim()
            )));
        }
        if let Some(k) = x0.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidStart(k));
        }
        Ok(())
    }

    /// Probe `⟨F(x), y − x⟩ ≤ tol` for `y = x ± e_k` (clipped to the orthant).
    pub fn verify_vi(&self, x: &[f64], tol: f64) -> bool {
        let f = self.gradient(x);
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        f.iter().zip(x).all(|(&fk, &xk)| {
            let up = fk;
            let down = -fk * xk.min(1.0);
            up <= tol * scale && down <= tol * scale
        })
    }
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Natural-map residual `‖x − Π_+(x + F(x))‖∞`; zero exactly at solutions.
pub fn vi_residual(problem: &ViProblem, x: &[f64]) -> f64 {
    let f = problem.gradient(x);
    x.iter()
        .zip(&f)
        .map(|(&xk, &fk)| (xk - (xk + fk).max(0.0)).abs())
        .fold(0.0, f64::max)
}

/// Damped Jacobi best response `x ← (1−θ)x + θ·BR(x)` from `x0`.
pub fn best_response_iterate(
    problem: &ViProblem,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<Solution> {
    config.validate()?;
    problem.check_start(x0)?;
    if !problem.cost.is_constant() {
        return Err(Error::UnsupportedModel("general"));
    }
    let theta = config.damping_for(problem.n());
    let mut x = x0.to_vec();
    let mut trace = Vec::new();
    let mut residual = vi_residual(problem, &x);
    for iteration in 1..=config.max_iter {
        let br = problem.best_response(&x)?;
        let next: Vec<f64> = x
            .iter()
            .zip(&br)
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        let max_change = inf_norm_diff(&next, &x);
        x = next;
        residual = vi_residual(problem, &x);
        trace.push(TraceRow {
            iteration,
            residual,
            max_change,
        });
        if !residual.is_finite() {
            break;
        }
        if max_change <= config.tolerance && residual <= config.tolerance {
            // one undamped step puts boundary coordinates exactly at zero
            let polished = problem.best_response(&x)?;
            let polished_residual = vi_residual(problem, &polished);
            if polished_residual <= residual {
                x = polished;
                residual = polished_residual;
            }
            let vi_verified = problem.verify_vi(&x, 1e-8);
            return Ok(Solution {
                x,
                iterations: iteration,
                residual,
                trace,
                vi_verified,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: trace.len(),
        residual,
        trace,
    })
}

/// Projected iteration `x ← Π_+(x + σF(x))` from the origin, halving σ
/// whenever a step is longer than the one before it.
pub fn solve_general(problem: &ViProblem, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    if let CostModel::General(c) = &problem.cost {
        c.check_gradient(problem.n(), &GRADIENT_PROBES)?;
    }
    let mut sigma = config.step.unwrap_or(1.0 / (2.0 * problem.n() as f64));
    let mut x = vec![0.0; problem.dim()];
    let mut trace = Vec::new();
    let mut residual = vi_residual(problem, &x);
    let mut prev_step = f64::INFINITY;
    let mut iteration = 0;
    while iteration < config.max_iter {
        if residual <= config.tolerance {
            break;
        }
        iteration += 1;
        let f = problem.gradient(&x);
        let next: Vec<f64> = x
            .iter()
            .zip(&f)
            .map(|(xk, fk)| (xk + sigma * fk).max(0.0))
            .collect();
        let step: f64 = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if step > prev_step * (1.0 + 1e-9) && step > 1e-12 && sigma > 1e-12 {
            sigma /= 2.0;
            prev_step = f64::INFINITY;
            continue;
        }
        let max_change = inf_norm_diff(&next, &x);
        prev_step = step;
        x = next;
        residual = vi_residual(problem, &x);
        trace.push(TraceRow {
            iteration,
            residual,
            max_change,
        });
        if !residual.is_finite() {
            break;
        }
    }
    if residual <= config.tolerance {
        let vi_verified = problem.verify_vi(&x, 1e-8);
        Ok(Solution {
            x,
            iterations: iteration,
            residual,
            trace,
            vi_verified,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: iteration,
            residual,
            trace,
        })
    }
}
