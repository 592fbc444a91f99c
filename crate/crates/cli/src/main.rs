//! Command-line front end: instance generation, solving, labeling, graph
//! export and the experiment harness.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use branchorder::cnf::read_dimacs_file;
use branchorder::graphx::export_graphs;
use branchorder::harness::{
    build_dataset, label_all, load_directory, read_config, read_labels, run_branching_impact_to_dir,
    run_evaluate, solver_config, with_workers, write_instances, write_labels,
    BranchingImpactConfig, DatasetConfig, EvaluateConfig, EvaluateOptions, GroupBy,
    InstanceSource,
};
use branchorder::labeling::{LabelMethod, LabelingConfig, SolveRunner};
use branchorder::solver::{solve, Heuristic, RemindMode, SolveResult, SolverConfig, VariableOrder};

#[derive(Parser)]
#[command(name = "branchorder", version, about = "CDCL solving with injected branching orders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write uniform random 3-CNF instances as DIMACS files.
    Generate(GenerateArgs),
    /// Solve one DIMACS file and print the result and statistics.
    Solve(SolveArgs),
    /// Label every instance in a directory.
    Label(LabelArgs),
    /// Convert instances (and optionally labels) to graphs.jsonl.
    Graph(GraphArgs),
    /// Measure how much the first decision variable changes solving cost.
    BranchingImpact(ImpactArgs),
    /// Generate or load instances, label them and export graphs (resumable).
    Dataset(DatasetArgs),
    /// Solve instances under supplied orders and compare with the default order.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Clone)]
struct GeneratorArgs {
    /// Number of instances to generate.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Variables per instance (lower bound when --max-vars is given).
    #[arg(long, default_value_t = 50)]
    vars: u32,
    #[arg(long)]
    max_vars: Option<u32>,
    /// Clauses per variable.
    #[arg(long, default_value_t = 4.3)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    /// Keep SAT and UNSAT instances balanced.
    #[arg(long)]
    balance: bool,
}

impl GeneratorArgs {
    fn source(&self) -> InstanceSource {
        InstanceSource::Generated {
            count: self.count,
            min_vars: self.vars,
            max_vars: self.max_vars.unwrap_or(self.vars),
            clause_ratio: self.ratio,
            seed: self.gen_seed,
            balance_sat: self.balance,
        }
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value = "vsids", value_parser = parse_heuristic)]
    heuristic: Heuristic,
    /// Propagation budget per solve.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

fn parse_heuristic(s: &str) -> Result<Heuristic, String> {
    s.parse().map_err(|e: branchorder::solver::SolverError| e.to_string())
}

fn parse_method(s: &str) -> Result<LabelMethod, String> {
    s.parse().map_err(|e: branchorder::labeling::LabelError| e.to_string())
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// Initial order: a file or inline text, either whitespace-separated
    /// variables or JSON (an array, or an object with an `order` field).
    #[arg(long)]
    order: Option<String>,
    #[arg(long, default_value = "vsids", value_parser = parse_heuristic)]
    heuristic: Heuristic,
    /// Re-apply the order to VSIDS activities at each restart with this factor.
    #[arg(long, default_value_t = 0.0)]
    remind_factor: f64,
    #[arg(long, default_value_t = 0.95)]
    remind_decay: f64,
    #[arg(long, value_enum, default_value_t = RemindArg::Additive)]
    remind_mode: RemindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    prop_limit: Option<u64>,
    #[arg(long)]
    conflict_limit: Option<u64>,
    /// Skip the `v` model lines.
    #[arg(long)]
    no_model: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RemindArg {
    Additive,
    Literal,
}

#[derive(Args)]
struct LabelArgs {
    /// Directory of *.cnf files.
    dir: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: LabelMethod,
    /// Trials per variable (first) or population (genetic).
    #[arg(long, default_value_t = 10)]
    k: u32,
    /// Generations (genetic).
    #[arg(long, default_value_t = 5)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    dir: PathBuf,
    /// Attach these labels; every instance needs exactly one.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImpactArgs {
    /// Directory of *.cnf files (omit to generate instances).
    dir: Option<PathBuf>,
    /// Re-run from a persisted config.json.
    #[arg(long, conflicts_with = "dir")]
    config: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value_t = 50)]
    sampled: usize,
    #[arg(long, default_value_t = 1000)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
    /// Also record wall-clock columns (not reproducible).
    #[arg(long)]
    record_time: bool,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Directory of *.cnf files (omit to generate instances).
    dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "dir")]
    config: Option<PathBuf>,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long, default_value = "conflict", value_parser = parse_method)]
    method: LabelMethod,
    #[arg(long, default_value_t = 10)]
    k: u32,
    #[arg(long, default_value_t = 5)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    All,
    NumVars,
    Result,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of *.cnf files.
    dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "dir")]
    config: Option<PathBuf>,
    /// Orders file (JSONL); a labels file also works.
    #[arg(long, required_unless_present = "config")]
    orders: Option<PathBuf>,
    /// Labels for Spearman correlation against the orders.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Also solve under a random order seeded with this value.
    #[arg(long)]
    random_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = GroupArg::All)]
    group_by: GroupArg,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    record_time: bool,
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Label(a) => label(a),
        Command::Graph(a) => graph(a),
        Command::BranchingImpact(a) => impact(a),
        Command::Dataset(a) => dataset(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let source = a.generator.source();
    let instances = with_workers(a.workers, || source.load())??;
    let written = write_instances(&instances, &a.out)?;
    println!("wrote {written} instances to {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}

/// Parses an order given inline or as a file path.
fn parse_order(arg: &str) -> Result<VariableOrder> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        arg.to_string()
    };
    let trimmed = text.trim();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(trimmed).context("order JSON")?;
        let list = match &value {
            serde_json::Value::Object(map) => map.get("order").cloned().context("JSON order object has no `order` field")?,
            _ => value,
        };
        return Ok(serde_json::from_value(list).context("invalid order")?);
    }
    let vars = trimmed
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u32>().with_context(|| format!("bad variable `{t}` in order")))
        .collect::<Result<Vec<_>>>()?;
    Ok(VariableOrder::new(vars)?)
}

fn solve_cmd(a: SolveArgs) -> Result<ExitCode> {
    let formula = read_dimacs_file(&a.file)?;
    let mut config = SolverConfig {
        heuristic: a.heuristic,
        remind_factor: a.remind_factor,
        remind_decay: a.remind_decay,
        remind_mode: match a.remind_mode {
            RemindArg::Additive => RemindMode::Additive,
            RemindArg::Literal => RemindMode::Literal,
        },
        seed: a.seed,
        propagation_limit: a.prop_limit,
        conflict_limit: a.conflict_limit,
        ..SolverConfig::default()
    };
    if let Some(order) = &a.order {
        config = config.with_order(parse_order(order)?);
    }
    let stats = solve(&formula, &config)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "c variables {} clauses {}", formula.num_vars(), formula.num_clauses())?;
    writeln!(out, "c propagations {}", stats.propagations)?;
    writeln!(out, "c conflicts {}", stats.conflicts)?;
    writeln!(out, "c decisions {}", stats.decisions)?;
    writeln!(out, "c restarts {}", stats.restarts)?;
    if let Some(v) = stats.first_decision {
        writeln!(out, "c first_decision {v}")?;
    }
    writeln!(out, "c time_ms {:.3}", stats.wall_time.as_secs_f64() * 1e3)?;
    let summary = serde_json::json!({
        "result": stats.result,
        "propagations": stats.propagations,
        "conflicts": stats.conflicts,
        "decisions": stats.decisions,
        "restarts": stats.restarts,
        "first_decision": stats.first_decision,
    });
    writeln!(out, "c stats {summary}")?;
    let (line, code) = match stats.result {
        SolveResult::Sat => ("SATISFIABLE", 10),
        SolveResult::Unsat => ("UNSATISFIABLE", 20),
        SolveResult::BudgetExceeded => ("UNKNOWN", 0),
    };
    writeln!(out, "s {line}")?;
    if let (Some(model), false) = (&stats.model, a.no_model) {
        let lits: Vec<String> = model
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { format!("{}", i + 1) } else { format!("-{}", i + 1) })
            .collect();
        for chunk in lits.chunks(20) {
            writeln!(out, "v {}", chunk.join(" "))?;
        }
        writeln!(out, "v 0")?;
    }
    Ok(ExitCode::from(code))
}

fn label(a: LabelArgs) -> Result<ExitCode> {
    let cfg = LabelingConfig {
        method: a.method,
        k: a.k,
        m: a.m,
        seed: a.seed,
    };
    let runner = SolveRunner::new(solver_config(a.run.heuristic, a.run.budget));
    let labels = with_workers(a.run.workers, || {
        let instances = load_directory(&a.dir)?;
        label_all(&instances, &cfg, &runner)
    })??;
    write_labels(&a.out, &labels)?;
    let partial = labels.iter().filter(|l| l.partial).count();
    println!(
        "labeled {} instances with {} solves ({partial} partial) -> {}",
        labels.len(),
        runner.calls(),
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn graph(a: GraphArgs) -> Result<ExitCode> {
    let instances = load_directory(&a.dir)?;
    let labels = a.labels.as_deref().map(read_labels).transpose()?;
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    export_graphs(&instances, labels.as_deref(), std::io::BufWriter::new(file))?;
    println!("wrote {} graphs to {}", instances.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn source_from(dir: &Option<PathBuf>, generator: &GeneratorArgs) -> InstanceSource {
    match dir {
        Some(path) => InstanceSource::Directory { path: path.clone() },
        None => generator.source(),
    }
}

fn impact(a: ImpactArgs) -> Result<ExitCode> {
    let config = match &a.config {
        Some(path) => read_config(path)?,
        None => BranchingImpactConfig {
            source: source_from(&a.dir, &a.generator),
            sampled_variables: a.sampled,
            runs_per_variable: a.runs,
            seed: a.seed,
            budget: a.run.budget,
            heuristic: a.run.heuristic,
            workers: a.run.workers,
            out_dir: a.out.clone().context("--out is required")?,
            record_time: a.record_time,
        },
    };
    let report = run_branching_impact_to_dir(&config)?;
    for id in &report.skipped {
        eprintln!("skipped {id}: default solve exceeded the budget");
    }
    println!("instance,median,best,best_speedup_pct,top10_speedup_pct,max_min_ratio");
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.1}"));
    for inst in &report.instances {
        let s = inst.summary;
        println!(
            "{},{:.1},{:.1},{},{},{}",
            inst.instance_id,
            s.median,
            s.best,
            fmt(s.best_speedup_pct),
            fmt(s.top10_speedup_pct),
            s.max_min_ratio.map_or_else(String::new, |x| format!("{x:.3}"))
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn dataset(a: DatasetArgs) -> Result<ExitCode> {
    let config = match &a.config {
        Some(path) => read_config(path)?,
        None => DatasetConfig {
            source: source_from(&a.dir, &a.generator),
            labeling: LabelingConfig {
                method: a.method,
                k: a.k,
                m: a.m,
                seed: a.seed,
            },
            budget: a.run.budget,
            heuristic: a.run.heuristic,
            workers: a.run.workers,
            out_dir: a.out.clone().context("--out is required")?,
        },
    };
    let s = build_dataset(&config)?;
    println!(
        "{} instances: {} newly labeled, {} newly graphed, {} partial labels",
        s.instances, s.labeled, s.graphed, s.partial
    );
    Ok(ExitCode::SUCCESS)
}

fn evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let config = match &a.config {
        Some(path) => read_config(path)?,
        None => {
            let Some(dir) = a.dir.clone() else {
                bail!("an instance directory or --config is required");
            };
            EvaluateConfig {
                source: InstanceSource::Directory { path: dir },
                orders: a.orders.clone().context("--orders is required")?,
                labels: a.labels.clone(),
                options: EvaluateOptions {
                    heuristic: a.run.heuristic,
                    budget: a.run.budget,
                    random_baseline_seed: a.random_seed,
                    record_time: a.record_time,
                },
                group_by: match a.group_by {
                    GroupArg::All => GroupBy::All,
                    GroupArg::NumVars => GroupBy::NumVars,
                    GroupArg::Result => GroupBy::Result,
                },
                workers: a.run.workers,
                out_dir: a.out.clone().context("--out is required")?,
            }
        }
    };
    let (rows, groups) = run_evaluate(&config)?;
    let missing = rows.iter().filter(|r| r.propagations_tested.is_none()).count();
    if missing > 0 {
        eprintln!("{missing} instances had no order");
    }
    for g in &groups {
        let red = g.reduction.map_or_else(
            || "n/a".to_string(),
            |m| match (m.ci_low, m.ci_high) {
                (Some(lo), Some(hi)) => format!("{:.4} [{lo:.4}, {hi:.4}]", m.mean),
                _ => format!("{:.4}", m.mean),
            },
        );
        println!("{}: {} rows, mean reduction {red}", g.group, g.rows);
    }
    Ok(ExitCode::SUCCESS)
}
