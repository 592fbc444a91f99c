//! Acceptance checks, one line of output per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every criterion is reported
//! even when an earlier one fails. Exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use branchorder::cnf::{generate_3cnf, Formula, GeneratorConfig, Literal};
use branchorder::graphx::{export_graphs, read_graphs, to_graph};
use branchorder::harness::{
    build_dataset, evaluate_orders, run_branching_impact, run_evaluate, solver_config,
    summarize, write_impact_files, write_orders, BranchingImpactConfig, DatasetConfig,
    EvaluateConfig, EvaluateOptions, GroupBy, Instance, InstanceSource, OrderRecord,
};
use branchorder::labeling::{label_instance, LabelMethod, LabelingConfig, SolveRunner};
use branchorder::ranking::{relevance, spearman};
use branchorder::seed::{derive_seed, rng_from_seed, stable_hash};
use branchorder::solver::{solve, verify_model, Heuristic, SolveResult, SolverConfig, VariableOrder};
use rand::Rng;

use common::{brute_force_sat, level0_fixed};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs())
}

fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let mut disagreements = 0;
    let mut bad_models = 0;
    let mut sat = 0;
    let mut total = 0;
    for (ri, ratio) in [3.0, 4.3, 5.5].into_iter().enumerate() {
        let count = if ri == 2 { 166 } else { 167 };
        for i in 0..count {
            let cfg = GeneratorConfig::new(12, derive_seed(100, &[ri as u64, i])).with_ratio(ratio);
            let f = generate_3cnf(&cfg).map_err(|e| e.to_string())?;
            let expected = brute_force_sat(&f);
            sat += usize::from(expected);
            total += 1;
            for heuristic in [Heuristic::Vsids, Heuristic::Vmtf] {
                let s = solve(&f, &SolverConfig { heuristic, ..Default::default() })
                    .map_err(|e| e.to_string())?;
                if (s.result == SolveResult::Sat) != expected {
                    disagreements += 1;
                }
                if let Some(m) = &s.model {
                    if !verify_model(&f, m).unwrap_or(false) {
                        bad_models += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        total == 500 && disagreements == 0 && bad_models == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{total} instances ({sat} SAT) x 2 heuristics, {disagreements} disagreements, \
             {bad_models} bad models, {}",
            within(elapsed, Duration::from_secs(60))
        ),
    )
}

fn injection_contract() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for i in 0..200u64 {
        let n = 8 + (i % 40) as u32;
        let base = generate_3cnf(&GeneratorConfig::new(n, derive_seed(200, &[i])).with_ratio(2.5))
            .map_err(|e| e.to_string())?;
        // A few random unit clauses so level-0 propagation has something to fix.
        let mut rng = rng_from_seed(derive_seed(201, &[i]));
        let mut clauses = base.clauses().to_vec();
        for _ in 0..rng.gen_range(0..4) {
            let v = rng.gen_range(1..=n);
            clauses.insert(0, vec![Literal::new(v, rng.gen_bool(0.5))]);
        }
        let f = Formula::new(n, clauses).map_err(|e| e.to_string())?;
        let order = VariableOrder::random(n, &mut rng);
        let fixed = level0_fixed(&f);
        let expected = fixed
            .as_ref()
            .and_then(|fx| order.as_slice().iter().copied().find(|v| !fx.contains(v)));
        for heuristic in [Heuristic::Vsids, Heuristic::Vmtf] {
            let cfg = SolverConfig { heuristic, ..Default::default() }.with_order(order.clone());
            let s = solve(&f, &cfg).map_err(|e| e.to_string())?;
            checked += 1;
            if s.first_decision != expected {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("{checked} (formula, order, heuristic) runs, {violations} violations"),
    )
}

fn branching_impact() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = BranchingImpactConfig {
        source: InstanceSource::Generated {
            count: 10,
            min_vars: 100,
            max_vars: 100,
            clause_ratio: 4.3,
            seed: 2024,
            balance_sat: false,
        },
        sampled_variables: 20,
        runs_per_variable: 100,
        seed: 7,
        budget: None,
        heuristic: Heuristic::Vsids,
        workers: workers(),
        out_dir: dir.path().to_path_buf(),
        record_time: false,
    };
    let instances = config.source.load().map_err(|e| e.to_string())?;
    let report = run_branching_impact(&instances, &config).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = report
        .instances
        .iter()
        .map(|i| i.summary.max_min_ratio.unwrap_or(f64::INFINITY))
        .collect();
    let hits = ratios.iter().filter(|&&r| r >= 1.5).count();
    let elapsed = start.elapsed();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    check(
        hits >= 5 && report.skipped.is_empty() && elapsed <= Duration::from_secs(1800),
        format!(
            "{hits}/10 instances with max/min >= 1.5 (ratios [{}]), {}",
            shown.join(", "),
            within(elapsed, Duration::from_secs(1800))
        ),
    )
}

fn genetic_instances() -> Result<Vec<Instance>, String> {
    (0..50u64)
        .map(|i| {
            let f = generate_3cnf(&GeneratorConfig::new(50, derive_seed(300, &[i])).with_ratio(4.3))
                .map_err(|e| e.to_string())?;
            Ok((format!("gen50-{i:02}"), f))
        })
        .collect()
}

const GENETIC: LabelingConfig = LabelingConfig {
    method: LabelMethod::Genetic,
    k: 8,
    m: 6,
    seed: 11,
};

fn genetic_labels(instances: &[Instance]) -> Result<Vec<branchorder::labeling::LabelRecord>, String> {
    let runner = SolveRunner::new(solver_config(Heuristic::Vsids, None));
    instances
        .iter()
        .map(|(id, f)| label_instance(id, f, &GENETIC, &runner, stable_hash(id)).map_err(|e| e.to_string()))
        .collect()
}

fn genetic_improves(labels: &[branchorder::labeling::LabelRecord], elapsed: Duration) -> Outcome {
    let mut not_worse = 0;
    let mut strictly = 0;
    for l in labels {
        let trace = l.trace.as_ref().ok_or("genetic label without trace")?;
        let (first, last) = (trace[0], *trace.last().unwrap());
        not_worse += usize::from(last <= first);
        strictly += usize::from(last < first);
    }
    let n = labels.len();
    check(
        n == 50 && not_worse == n && strictly * 10 >= n * 6 && elapsed <= Duration::from_secs(900),
        format!(
            "{not_worse}/{n} final <= initial best, {strictly}/{n} strictly lower (need 30), {}",
            within(elapsed, Duration::from_secs(900))
        ),
    )
}

fn oracle_evaluation(instances: &[Instance], labels: &[branchorder::labeling::LabelRecord]) -> Outcome {
    let orders: Vec<OrderRecord> = labels.iter().map(OrderRecord::from).collect();
    let opts = EvaluateOptions {
        heuristic: Heuristic::Vsids,
        budget: None,
        random_baseline_seed: Some(5),
        record_time: false,
    };
    let rows = evaluate_orders(instances, &orders, Some(labels), &opts).map_err(|e| e.to_string())?;
    let groups = summarize(&rows, GroupBy::All).map_err(|e| e.to_string())?;
    let g = &groups[0];
    let r = g.reduction.ok_or("no reduction values")?;
    let rr = g.reduction_random.map_or(f64::NAN, |m| m.mean);
    check(
        r.mean > 0.0 && g.ci_excludes_zero(),
        format!(
            "mean reduction {:.3}, 95% CI [{:.3}, {:.3}] over {} instances (random order baseline {:.3})",
            r.mean,
            r.ci_low.unwrap_or(f64::NAN),
            r.ci_high.unwrap_or(f64::NAN),
            r.n,
            rr
        ),
    )
}

fn call_counts() -> Outcome {
    let f = generate_3cnf(&GeneratorConfig::new(20, 400)).map_err(|e| e.to_string())?;
    let (k, m) = (3u32, 2u32);
    let mut seen = Vec::new();
    let mut ok = true;
    for (method, expected) in [
        (LabelMethod::Conflict, 1u64),
        (LabelMethod::FirstVariable, u64::from(k) * 20),
        (LabelMethod::Genetic, u64::from(k) * u64::from(m + 1)),
    ] {
        let runner = SolveRunner::new(SolverConfig::default());
        let cfg = LabelingConfig { method, k, m, seed: 1 };
        let label = label_instance("c", &f, &cfg, &runner, 0).map_err(|e| e.to_string())?;
        let calls = runner.calls();
        ok &= calls == expected && label.trials_used == expected;
        seen.push(format!("{method:?} {calls} (expected {expected})"));
    }
    check(ok, format!("n=20 k={k} m={m}: {}", seen.join(", ")))
}

fn metrics() -> Outcome {
    let o = |v: &[u32]| VariableOrder::new(v.to_vec()).unwrap();
    let id = spearman(&o(&[1, 2, 3, 4, 5]), &o(&[1, 2, 3, 4, 5])).map_err(|e| e.to_string())?;
    let rev = spearman(&o(&[1, 2, 3, 4, 5]), &o(&[5, 4, 3, 2, 1])).map_err(|e| e.to_string())?;
    // ranks (1,2,3,4) vs (2,1,4,3): sum d^2 = 4, 1 - 24/60 = 0.6
    let hand = spearman(&o(&[1, 2, 3, 4]), &o(&[2, 1, 4, 3])).map_err(|e| e.to_string())?;
    let r1 = relevance(1).map_err(|e| e.to_string())?;
    let r3 = relevance(3).map_err(|e| e.to_string())?;
    check(
        id == 1.0 && rev == -1.0 && (hand - 0.6).abs() <= 1e-12 && r1 == 1.0 && r3 == 0.5,
        format!("spearman id {id}, reverse {rev}, hand case {hand}; relevance(1) {r1}, relevance(3) {r3}"),
    )
}

fn graph_export() -> Outcome {
    let f = Formula::from_dimacs_clauses(3, &[&[1, -2], &[2, 3]]);
    let g = to_graph(&f);
    let mut edges: Vec<(usize, usize, i8)> = g.edges.iter().map(|e| (e.src, e.dst, e.weight)).collect();
    edges.sort_unstable();
    // Nodes 0..3 are x1..x3, 3 and 4 the clauses, 5 the meta node.
    let expected = vec![(0, 3, 1), (1, 3, -1), (1, 4, 1), (2, 4, 1), (5, 3, 0), (5, 4, 0)];
    let kinds: Vec<String> = g.nodes.iter().map(|n| format!("{:?}", n.kind)).collect();
    let kinds_ok = kinds == ["Variable", "Variable", "Variable", "Clause", "Clause", "Meta"];

    let mut instances: Vec<Instance> = vec![("figure".into(), f)];
    for i in 0..20u64 {
        let r = generate_3cnf(&GeneratorConfig::new(15 + i as u32, i)).map_err(|e| e.to_string())?;
        instances.push((format!("r{i}"), r));
    }
    let mut buf = Vec::new();
    export_graphs(&instances, None, &mut buf).map_err(|e| e.to_string())?;
    let back = read_graphs(buf.as_slice()).map_err(|e| e.to_string())?;
    let round_trip = back.len() == instances.len()
        && back
            .iter()
            .zip(&instances)
            .all(|(r, (id, f))| &r.instance_id == id && r.to_graph().ok().as_ref() == Some(&to_graph(f)));
    check(
        edges == expected && kinds_ok && round_trip,
        format!(
            "figure formula: {} nodes, edges {edges:?}; round trip of {} graphs {}",
            g.nodes.len(),
            instances.len(),
            if round_trip { "identical" } else { "differs" }
        ),
    )
}

fn result_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "config.json") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_all_experiments(root: &Path, workers: usize) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let source = InstanceSource::Generated {
        count: 6,
        min_vars: 20,
        max_vars: 30,
        clause_ratio: 4.3,
        seed: 99,
        balance_sat: true,
    };
    let impact = BranchingImpactConfig {
        source: source.clone(),
        sampled_variables: 5,
        runs_per_variable: 8,
        seed: 3,
        budget: Some(20_000),
        heuristic: Heuristic::Vsids,
        workers,
        out_dir: root.join("impact"),
        record_time: false,
    };
    let instances = source.load().map_err(|e| e.to_string())?;
    let report = run_branching_impact(&instances, &impact).map_err(|e| e.to_string())?;
    write_impact_files(&report, &impact).map_err(|e| e.to_string())?;

    let mut label_files = Vec::new();
    for (name, method) in [
        ("conflict", LabelMethod::Conflict),
        ("first", LabelMethod::FirstVariable),
        ("genetic", LabelMethod::Genetic),
    ] {
        let ds = DatasetConfig {
            source: source.clone(),
            labeling: LabelingConfig { method, k: 3, m: 2, seed: 17 },
            budget: Some(5_000),
            heuristic: Heuristic::Vsids,
            workers,
            out_dir: root.join(format!("dataset-{name}")),
        };
        build_dataset(&ds).map_err(|e| e.to_string())?;
        label_files.push(ds.labels_path());
    }

    let orders_path = root.join("orders.jsonl");
    let labels = branchorder::harness::read_labels(&label_files[2]).map_err(|e| e.to_string())?;
    let orders: Vec<OrderRecord> = labels.iter().map(OrderRecord::from).collect();
    write_orders(&orders_path, &orders).map_err(|e| e.to_string())?;
    run_evaluate(&EvaluateConfig {
        source: InstanceSource::Directory { path: root.join("dataset-genetic/instances") },
        orders: orders_path,
        labels: Some(label_files[0].clone()),
        options: EvaluateOptions {
            heuristic: Heuristic::Vsids,
            budget: None,
            random_baseline_seed: Some(1),
            record_time: false,
        },
        group_by: GroupBy::Result,
        workers,
        out_dir: root.join("evaluate"),
    })
    .map_err(|e| e.to_string())?;
    Ok(result_files(root))
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let one = run_all_experiments(a.path(), 1)?;
    let four = run_all_experiments(b.path(), 4)?;
    let names: HashSet<&String> = one.keys().chain(four.keys()).collect();
    let differing: Vec<&&String> = names.iter().filter(|n| one.get(**n) != four.get(**n)).collect();
    check(
        differing.is_empty() && !one.is_empty(),
        format!(
            "{} result files compared between 1 and 4 workers, {} differ {:?}",
            names.len(),
            differing.len(),
            differing
        ),
    )
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match &outcome {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failures += 1;
                println!("FAIL {name}: {d}");
            }
        }
    };
    report("solver matches truth table", solver_oracle());
    report("order injection sets first decision", injection_contract());
    report("labeling call counts", call_counts());
    report("ranking metrics", metrics());
    report("graph export", graph_export());

    let start = Instant::now();
    match genetic_instances().and_then(|inst| Ok((genetic_labels(&inst)?, inst))) {
        Ok((labels, inst)) => {
            report("genetic labeling improves", genetic_improves(&labels, start.elapsed()));
            report("genetic labels reduce propagations", oracle_evaluation(&inst, &labels));
        }
        Err(e) => {
            report("genetic labeling improves", Err(e.clone()));
            report("genetic labels reduce propagations", Err(e));
        }
    }
    report("deterministic across worker counts", determinism());
    report("first-variable choice matters", branching_impact());

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
