use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use oligonet::stability::{self, VerificationMode};
use oligonet::{
    aspatial_condition, spatial_condition, ConditionReport, EquilibriumOracle, EquilibriumOutcome,
    EquilibriumSolver, Market, SolverRegistry, SpatialOutcome, TheoremStatus,
};
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Dot,
}

/// Everything a subcommand needs besides the scenario contents.
pub struct Context {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub format: Format,
    pub cap: usize,
    pub assert_stable: bool,
}

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub scenario_hash: String,
    pub scenario: &'a Scenario,
    pub result: T,
}

impl Context {
    fn solver(&self) -> Result<Arc<dyn EquilibriumSolver>, CliError> {
        let registry = SolverRegistry::builtin(&self.scenario.solver_config);
        Ok(registry.get(&self.scenario.solver)?)
    }

    fn oracle(&self) -> Result<EquilibriumOracle, CliError> {
        let mut oracle = EquilibriumOracle::new(
            self.scenario.market()?,
            self.scenario.cost()?,
            self.solver()?,
        );
        if let Some(eps) = self.scenario.epsilon {
            oracle.epsilon = eps;
        }
        Ok(oracle)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(
        &self,
        command: &str,
        name: &str,
        result: T,
    ) -> Result<PathBuf, CliError> {
        self.write(name, &envelope_json(command, &self.scenario, result))
    }
}

/// Pretty JSON report wrapped with tool version and scenario hash.
pub fn envelope_json<T: Serialize>(command: &str, scenario: &Scenario, result: T) -> String {
    let envelope = Envelope {
        tool: "oligonet",
        version: env!("CARGO_PKG_VERSION"),
        command,
        scenario_hash: scenario.hash(),
        scenario,
        result,
    };
    let mut json = serde_json::to_string_pretty(&envelope).expect("report serializes");
    json.push('\n');
    json
}

#[derive(Serialize)]
#[serde(untagged)]
enum AnyOutcome {
    Aspatial(EquilibriumOutcome),
    Spatial(SpatialOutcome),
}

pub fn equilibrium(ctx: &Context) -> Result<(), CliError> {
    let market = ctx.scenario.market()?;
    let cost = ctx.scenario.cost()?;
    let g = ctx.scenario.graph(&ctx.base_dir)?;
    let outcome = ctx.solver()?.solve(&market, &cost, &g)?;
    println!("path: {:?}", outcome.path);
    if !outcome.flags.is_empty() {
        println!("flags: {:?}", outcome.flags);
    }
    let (csv, result) = match market {
        Market::Aspatial(_) => {
            let out = EquilibriumOutcome::try_from(outcome)?;
            for (i, q) in out.quantities.iter().enumerate() {
                println!("firm {i}: q = {q}, Y = {}", out.profits[i]);
            }
            (out.to_csv(), AnyOutcome::Aspatial(out))
        }
        Market::Spatial(_) => {
            for (l, row) in outcome.demands.iter().enumerate() {
                println!("node {l}: d = {row:?}");
            }
            (outcome.to_csv(), AnyOutcome::Spatial(outcome))
        }
    };
    ctx.write("equilibrium.csv", &csv)?;
    let path = ctx.write_json("equilibrium", "equilibrium.json", result)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn stability(ctx: &Context) -> Result<(), CliError> {
    let g = ctx.scenario.graph(&ctx.base_dir)?;
    let report = stability::is_pairwise_stable(&g, &ctx.oracle()?)?;
    println!(
        "{}: {:?} ({} deviations checked, {} violations)",
        g,
        report.verdict,
        report.deviations_checked,
        report.violations.len()
    );
    for v in &report.violations {
        println!(
            "  {:?} on {:?}: Δ = ({}, {})",
            v.kind, v.edge, v.delta_i, v.delta_j
        );
    }
    if ctx.format == Format::Dot {
        ctx.write("graph.dot", &g.to_dot("G"))?;
    }
    let path = ctx.write_json("stability", "stability.json", &report)?;
    println!("wrote {}", path.display());
    if ctx.assert_stable && !report.is_stable() {
        return Err(CliError::Assertion(format!("{g} is not pairwise stable")));
    }
    Ok(())
}

#[derive(Serialize)]
struct StableGraph {
    degrees: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

pub fn enumerate(ctx: &Context) -> Result<(), CliError> {
    let n = ctx.scenario.firms;
    let stable = stability::enumerate_stable_graphs(n, &ctx.oracle()?, ctx.cap)?;
    println!("{} stable graph(s) on {n} firms", stable.len());
    for g in &stable {
        println!("  {g}");
    }
    match ctx.format {
        Format::Dot => {
            for (idx, g) in stable.iter().enumerate() {
                ctx.write(
                    &format!("stable_{idx:03}.dot"),
                    &g.to_dot(&format!("stable_{idx}")),
                )?;
            }
        }
        Format::Csv => {
            let mut csv = String::from("index,degrees,edges\n");
            for (idx, g) in stable.iter().enumerate() {
                let degrees: Vec<String> = g
                    .degree_sequence()
                    .as_slice()
                    .iter()
                    .map(|d| d.to_string())
                    .collect();
                let edges: Vec<String> = g.edges().map(|(i, j)| format!("{i}-{j}")).collect();
                csv.push_str(&format!(
                    "{idx},{},{}\n",
                    degrees.join(" "),
                    edges.join(" ")
                ));
            }
            ctx.write("stable.csv", &csv)?;
        }
        Format::Json => {}
    }
    let graphs: Vec<StableGraph> = stable
        .iter()
        .map(|g| StableGraph {
            degrees: g.degree_sequence().into(),
            edges: g.edges().collect(),
        })
        .collect();
    let path = ctx.write_json("enumerate", "enumerate.json", &graphs)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn print_condition(report: &ConditionReport) {
    let word = if report.holds { "PASS" } else { "FAIL" };
    println!("condition: {word} (value {})", report.value);
    for line in report.chain() {
        println!("  {line}");
    }
    if report.heterogeneous_alpha {
        println!("  note: intercepts differ across nodes; the smallest was used");
    }
}

pub fn verify_theorem(ctx: &Context) -> Result<(), CliError> {
    let market = ctx.scenario.market()?;
    let cost = ctx.scenario.cost()?;
    let target = ctx.scenario.target()?;
    let mode = ctx.scenario.mode.unwrap_or(VerificationMode::Exhaustive);
    let report =
        stability::verify_theorem_class(&target, &market, &cost, ctx.solver()?, mode, ctx.cap)?;
    if let Some(c) = &report.condition {
        print_condition(c);
    }
    let status = match report.status {
        TheoremStatus::Pass => "PASS",
        TheoremStatus::Fail => "FAIL",
        TheoremStatus::HypothesisUnmet => "HYPOTHESIS UNMET",
    };
    println!(
        "verify-theorem: {status} ({} realization(s), {} unstable, max audit error {:e})",
        report.graphs.len(),
        report.unstable.len(),
        report.max_relative_error
    );
    if let Some(reason) = &report.reason {
        println!("  {reason}");
    }
    if ctx.format == Format::Csv {
        let mut csv = String::from("graph,firm,partner,direction,analytic,direct,relative_error\n");
        for r in &report.audit {
            csv.push_str(&format!(
                "{},{},{},{:?},{},{},{}\n",
                r.graph, r.firm, r.partner, r.direction, r.analytic, r.direct, r.relative_error
            ));
        }
        ctx.write("audit.csv", &csv)?;
    }
    if ctx.format == Format::Dot {
        for (idx, g) in report.graphs.iter().enumerate() {
            ctx.write(
                &format!("realization_{idx:03}.dot"),
                &g.to_dot(&format!("realization_{idx}")),
            )?;
        }
    }
    let pass = report.status == TheoremStatus::Pass;
    let path = ctx.write_json("verify-theorem", "verify-theorem.json", &report)?;
    println!("wrote {}", path.display());
    if ctx.assert_stable && !pass {
        return Err(CliError::Assertion(format!("verification status {status}")));
    }
    Ok(())
}

pub fn condition_report(
    market: &Market,
    cost: &oligonet::CostModel,
) -> Result<ConditionReport, CliError> {
    Ok(match market {
        Market::Aspatial(m) => aspatial_condition(m, cost)?,
        Market::Spatial(m) => spatial_condition(m, cost)?,
    })
}

pub fn condition(ctx: &Context) -> Result<(), CliError> {
    let report = condition_report(&ctx.scenario.market()?, &ctx.scenario.cost()?)?;
    print_condition(&report);
    let path = ctx.write_json("condition", "condition.json", &report)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn out_dir(
    flag: Option<&Path>,
    scenario: Option<&str>,
    base_dir: &Path,
    default: &str,
) -> PathBuf {
    match (flag, scenario) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(s)) => base_dir.join(s),
        (None, None) => PathBuf::from(default),
    }
}
