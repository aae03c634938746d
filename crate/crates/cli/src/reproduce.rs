use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use oligonet::graph::{random_realization, realize_degree_sequence};
use oligonet::market::ScalarOr;
use oligonet::stability::{self, VerificationMode};
use oligonet::{
    spatial_condition, spatial_deviation_delta, CollaborationGraph, ConditionReport, CostSpec,
    Direction, EquilibriumOracle, MarketSpec, SolverConfig, SolverRegistry, StabilityReport,
    TheoremStatus,
};
use serde::Serialize;

use crate::commands::{envelope_json, print_condition};
use crate::error::CliError;
use crate::scenario::Scenario;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 103.0)]
    alpha: f64,
    #[arg(long, default_value_t = 5.0)]
    gamma0: f64,
    /// Offset in the base function `f(η) = η² + ψ`.
    #[arg(long, default_value_t = 2.0)]
    psi: f64,
    /// Target degree sequence.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,3,2")]
    k: Vec<usize>,
    /// Uniform shipping cost.
    #[arg(long, default_value_t = 1.0)]
    shipping: f64,
    #[arg(long, default_value_t = 2)]
    nodes: usize,
}

const DEFAULT_TARGET: [usize; 5] = [2, 3, 4, 3, 2];

fn figure_graphs(k: &[usize], seed: u64) -> Result<[CollaborationGraph; 2], CliError> {
    if k == DEFAULT_TARGET {
        return Ok([
            CollaborationGraph::from_edges(
                5,
                [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)],
            )?,
            CollaborationGraph::from_edges(
                5,
                [(0, 2), (1, 2), (2, 3), (2, 4), (0, 3), (1, 3), (1, 4)],
            )?,
        ]);
    }
    let k = oligonet::DegreeSequence::new(k.to_vec())?;
    Ok([realize_degree_sequence(&k)?, random_realization(&k, seed)?])
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct FigureResult {
    name: String,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    stability: Option<StabilityReport>,
    demands: Option<Vec<Vec<f64>>>,
    /// Per-node profit change for each endpoint when the first link is dropped.
    drop_delta: Option<DropDelta>,
    error: Option<String>,
}

#[derive(Serialize)]
struct DropDelta {
    link: (usize, usize),
    node_deltas: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct Bundle {
    cost_table: Vec<(i64, f64)>,
    condition: Option<ConditionReport>,
    condition_error: Option<String>,
    figures: Vec<FigureResult>,
    theorem_status: Option<TheoremStatus>,
    realizations: usize,
    max_audit_error: f64,
    checks: Vec<Check>,
    passed: bool,
}

fn scenario(args: &Args, solver: Option<&str>) -> Scenario {
    Scenario {
        firms: args.k.len(),
        market: MarketSpec {
            alpha: ScalarOr::Scalar(args.alpha),
            shipping: Some(ScalarOr::Scalar(args.shipping)),
            nodes: Some(args.nodes),
        },
        cost: CostSpec::ShiftedConvex {
            gamma0: args.gamma0,
            base: "quadratic_psi".into(),
            psi: Some(args.psi),
            values: None,
            k: args.k.clone(),
        },
        graph: None,
        solver: solver.unwrap_or("auto").into(),
        solver_config: SolverConfig::default(),
        mode: Some(VerificationMode::Exhaustive),
        epsilon: None,
        output: None,
    }
}

fn figure(name: &str, g: &CollaborationGraph, oracle: &EquilibriumOracle) -> FigureResult {
    let mut out = FigureResult {
        name: name.into(),
        edges: g.edges().collect(),
        degrees: g.degree_sequence().into(),
        stability: None,
        demands: None,
        drop_delta: None,
        error: None,
    };
    let spatial = oracle.market.to_spatial();
    let result = (|| -> Result<(), CliError> {
        out.demands = Some(
            oracle
                .solver
                .solve(&oracle.market, &oracle.cost, g)?
                .demands,
        );
        if let Some((i, j)) = g.edges().next() {
            let a = spatial_deviation_delta(&spatial, &oracle.cost, g, i, j, Direction::Drop)?;
            let b = spatial_deviation_delta(&spatial, &oracle.cost, g, j, i, Direction::Drop)?;
            out.drop_delta = Some(DropDelta {
                link: (i, j),
                node_deltas: vec![a.node_deltas, b.node_deltas],
            });
        }
        out.stability = Some(stability::is_pairwise_stable(g, oracle)?);
        Ok(())
    })();
    if let Err(e) = result {
        out.error = Some(e.to_string());
    }
    out
}

fn markdown(args: &Args, sc: &Scenario, b: &Bundle) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Collaboration network example\n");
    let _ = writeln!(md, "scenario hash: `{}`  ", sc.hash());
    let _ = writeln!(md, "tool version: {}  ", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(md, "solver: {}\n", sc.solver);
    let _ = writeln!(
        md,
        "α = {}, γ0 = {}, ψ = {}, k = {:?}, s = {}, nodes = {}\n",
        args.alpha, args.gamma0, args.psi, args.k, args.shipping, args.nodes
    );
    let _ = writeln!(md, "## Cost table\n\n| η | f(η) |\n|---|---|");
    for (eta, f) in &b.cost_table {
        let _ = writeln!(md, "| {eta} | {f} |");
    }
    let _ = writeln!(md, "\n## Condition\n");
    match (&b.condition, &b.condition_error) {
        (Some(c), _) => {
            for line in c.chain() {
                let _ = writeln!(md, "    {line}");
            }
        }
        (None, Some(e)) => {
            let _ = writeln!(md, "cost family rejected: {e}");
        }
        (None, None) => {}
    }
    let _ = writeln!(md, "\n## Example graphs\n");
    for f in &b.figures {
        let edges: Vec<String> = f.edges.iter().map(|(i, j)| format!("{i}-{j}")).collect();
        let _ = writeln!(md, "### {}\n\nedges: {}  ", f.name, edges.join(", "));
        let _ = writeln!(md, "degrees: {:?}  ", f.degrees);
        if let Some(s) = &f.stability {
            let _ = writeln!(
                md,
                "verdict: {:?} ({} violations)  ",
                s.verdict,
                s.violations.len()
            );
        }
        if let Some(d) = &f.demands {
            for (l, row) in d.iter().enumerate() {
                let _ = writeln!(md, "node {l} demands: {row:?}  ");
            }
        }
        if let Some(dd) = &f.drop_delta {
            let _ = writeln!(
                md,
                "dropping {}-{}: per-node deltas {:?} / {:?}  ",
                dd.link.0, dd.link.1, dd.node_deltas[0], dd.node_deltas[1]
            );
        }
        if let Some(e) = &f.error {
            let _ = writeln!(md, "error: {e}  ");
        }
        let _ = writeln!(md);
    }
    let _ = writeln!(
        md,
        "## Class verification\n\n{} realization(s), status {:?}, max audit error {:e}\n",
        b.realizations, b.theorem_status, b.max_audit_error
    );
    let _ = writeln!(
        md,
        "## Checks\n\n| check | result | detail |\n|---|---|---|"
    );
    for c in &b.checks {
        let word = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(md, "| {} | {word} | {} |", c.name, c.detail);
    }
    md
}

pub fn run(
    args: &Args,
    out: &Path,
    solver: Option<&str>,
    seed: u64,
    cap: usize,
) -> Result<(), CliError> {
    let sc = scenario(args, solver);
    let market = sc.market()?;
    let cost = sc.cost()?;
    let n = args.k.len() as i64;
    let shifted = cost.shifted()?;
    let cost_table = (-(n - 1)..=n - 1)
        .filter_map(|eta| shifted.f(eta).map(|f| (eta, f)))
        .collect();

    let registry = SolverRegistry::builtin(&sc.solver_config);
    let solver = registry.get(&sc.solver)?;
    let oracle = EquilibriumOracle::new(market.clone(), cost.clone(), solver.clone());

    let mut checks = Vec::new();
    let (condition, condition_error) = match spatial_condition(&market.to_spatial(), &cost) {
        Ok(c) => (Some(c), None),
        Err(oligonet::Error::InvalidCostFamily(msg)) => (None, Some(msg)),
        Err(e) => return Err(e.into()),
    };
    checks.push(Check {
        name: "sufficient condition".into(),
        passed: condition.as_ref().is_some_and(|c| c.holds),
        detail: match (&condition, &condition_error) {
            (Some(c), _) => format!("value {}", c.value),
            (None, e) => e.clone().unwrap_or_default(),
        },
    });

    let graphs = figure_graphs(&args.k, seed)?;
    let mut figures = Vec::new();
    for (idx, g) in graphs.iter().enumerate() {
        let name = format!("figure{}", idx + 1);
        let f = figure(&name, g, &oracle);
        checks.push(Check {
            name: format!("{name} pairwise stable"),
            passed: f.stability.as_ref().is_some_and(|s| s.is_stable()),
            detail: match (&f.stability, &f.error) {
                (_, Some(e)) => e.clone(),
                (Some(s), None) => format!("{:?}", s.verdict),
                (None, None) => String::new(),
            },
        });
        figures.push(f);
    }

    let k = oligonet::DegreeSequence::new(args.k.clone())?;
    let (theorem_status, realizations, max_audit_error) = match stability::verify_theorem_class(
        &k,
        &market,
        &cost,
        solver,
        VerificationMode::Exhaustive,
        cap,
    ) {
        Ok(r) => {
            checks.push(Check {
                name: "every realization stable".into(),
                passed: r.status == TheoremStatus::Pass,
                detail: format!("{:?}, {} realization(s)", r.status, r.graphs.len()),
            });
            (Some(r.status), r.graphs.len(), r.max_relative_error)
        }
        Err(e) => {
            checks.push(Check {
                name: "every realization stable".into(),
                passed: false,
                detail: e.to_string(),
            });
            (None, 0, 0.0)
        }
    };

    let passed = checks.iter().all(|c| c.passed);
    let bundle = Bundle {
        cost_table,
        condition,
        condition_error,
        figures,
        theorem_status,
        realizations,
        max_audit_error,
        checks,
        passed,
    };

    fs::create_dir_all(out)?;
    for (idx, g) in graphs.iter().enumerate() {
        let name = format!("figure{}", idx + 1);
        fs::write(out.join(format!("{name}.dot")), g.to_dot(&name))?;
    }
    fs::write(out.join("reproduce.md"), markdown(args, &sc, &bundle))?;
    fs::write(
        out.join("reproduce.json"),
        envelope_json("reproduce-paper", &sc, &bundle),
    )?;

    if let Some(c) = &bundle.condition {
        print_condition(c);
    }
    for c in &bundle.checks {
        println!(
            "{}: {} ({})",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.detail
        );
    }
    println!("wrote {}", out.display());
    if !passed {
        return Err(CliError::Assertion(
            "one or more reproduction checks failed".into(),
        ));
    }
    Ok(())
}
