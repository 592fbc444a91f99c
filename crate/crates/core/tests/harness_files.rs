use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use branchorder::cnf::{generate_3cnf, GeneratorConfig};
use branchorder::graphx::{export_graphs, read_graphs};
use branchorder::harness::{
    build_dataset, evaluate_orders, read_config, read_labels, run_branching_impact_to_dir,
    summarize_means, BranchingImpactConfig, DatasetConfig, EvaluateOptions, Instance,
    InstanceSource, OrderRecord,
};
use branchorder::labeling::{LabelMethod, LabelingConfig};
use branchorder::solver::{Heuristic, VariableOrder};

fn generated(count: usize, seed: u64) -> InstanceSource {
    InstanceSource::Generated {
        count,
        min_vars: 20,
        max_vars: 30,
        clause_ratio: 4.3,
        seed,
        balance_sat: false,
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn id_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["instance_id"].as_str().unwrap().to_string()
        })
        .collect()
}

fn dataset_config(out: &Path, method: LabelMethod) -> DatasetConfig {
    DatasetConfig {
        source: generated(10, 4),
        labeling: LabelingConfig { method, k: 3, m: 2, seed: 8 },
        budget: Some(50_000),
        heuristic: Heuristic::Vsids,
        workers: 2,
        out_dir: out.to_path_buf(),
    }
}

#[test]
fn identity_orders_give_zero_reduction() {
    let instances: Vec<Instance> = (0..20u64)
        .map(|i| (format!("i{i}"), generate_3cnf(&GeneratorConfig::new(40, i)).unwrap()))
        .collect();
    let orders: Vec<OrderRecord> = instances
        .iter()
        .map(|(id, f)| OrderRecord {
            instance_id: id.clone(),
            order: VariableOrder::identity(f.num_vars()),
            scores: None,
            inference_time_ms: None,
        })
        .collect();
    for heuristic in [Heuristic::Vsids, Heuristic::Vmtf] {
        let opts = EvaluateOptions {
            heuristic,
            budget: None,
            random_baseline_seed: None,
            record_time: false,
        };
        let rows = evaluate_orders(&instances, &orders, None, &opts).unwrap();
        assert_eq!(rows.len(), 20);
        for r in rows {
            assert_eq!(r.propagations_tested, Some(r.propagations_default));
            assert_eq!(r.reduction, Some(0.0), "{} {heuristic:?}", r.instance_id);
        }
    }
}

#[test]
fn hundred_instances_export_hundred_lines() {
    let instances = generated(100, 12).load().unwrap();
    let mut buf = Vec::new();
    export_graphs(&instances, None, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 100);
    let records = read_graphs(buf.as_slice()).unwrap();
    let ids: Vec<&str> = records.iter().map(|r| r.instance_id.as_str()).collect();
    let expected: Vec<&str> = instances.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, expected);
}

#[test]
fn dataset_files_are_aligned() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset_config(dir.path(), LabelMethod::Conflict);
    let summary = build_dataset(&cfg).unwrap();
    assert_eq!((summary.instances, summary.labeled, summary.graphed), (10, 10, 10));
    let label_ids = id_lines(&cfg.labels_path());
    let graph_ids = id_lines(&cfg.graphs_path());
    assert_eq!(label_ids.len(), 10);
    assert_eq!(label_ids, graph_ids);
    assert_eq!(fs::read_dir(cfg.instances_dir()).unwrap().count(), 10);
    let labels = read_labels(&cfg.labels_path()).unwrap();
    let graphs = branchorder::harness::read_dataset_graphs(&cfg).unwrap();
    for (l, g) in labels.iter().zip(&graphs) {
        assert_eq!(g.label_order.as_deref(), Some(l.order.as_slice()));
        assert_eq!(g.label_scores.as_ref(), Some(&l.scores));
        assert_eq!(g.num_vars as usize, l.order.len());
    }
    let persisted: DatasetConfig = read_config(&dir.path().join("config.json")).unwrap();
    assert_eq!(persisted, cfg);
}

#[test]
fn rebuilding_a_complete_dataset_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset_config(dir.path(), LabelMethod::Genetic);
    build_dataset(&cfg).unwrap();
    let before = snapshot(dir.path());
    let again = build_dataset(&cfg).unwrap();
    assert_eq!((again.labeled, again.graphed), (0, 0));
    assert_eq!(snapshot(dir.path()), before);
}

#[test]
fn interrupted_build_resumes_to_the_same_files() {
    let full = tempfile::tempdir().unwrap();
    build_dataset(&dataset_config(full.path(), LabelMethod::FirstVariable)).unwrap();

    let partial = tempfile::tempdir().unwrap();
    let cfg = dataset_config(partial.path(), LabelMethod::FirstVariable);
    build_dataset(&cfg).unwrap();
    // keep 4 labels and 2 graphs, as if the run had stopped early
    for (path, keep) in [(cfg.labels_path(), 4), (cfg.graphs_path(), 2)] {
        let text = fs::read_to_string(&path).unwrap();
        let kept: String = text.lines().take(keep).map(|l| format!("{l}\n")).collect();
        fs::write(&path, kept).unwrap();
    }
    let resumed = build_dataset(&cfg).unwrap();
    assert_eq!((resumed.labeled, resumed.graphed), (6, 8));
    // config.json differs only by out_dir
    let strip = |mut m: BTreeMap<String, Vec<u8>>| {
        m.remove("config.json");
        m
    };
    let (a, b) = (strip(snapshot(partial.path())), strip(snapshot(full.path())));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs from a fresh build");
    }
}

#[test]
fn resuming_with_another_config_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    build_dataset(&dataset_config(dir.path(), LabelMethod::Conflict)).unwrap();
    let mut other = dataset_config(dir.path(), LabelMethod::Conflict);
    other.labeling.seed += 1;
    assert!(build_dataset(&other).is_err());
}

#[derive(serde::Deserialize)]
struct PerVariable {
    instance_id: String,
    mean_propagations: f64,
}

#[derive(serde::Deserialize)]
struct SummaryLine {
    instance_id: String,
    median: f64,
    best: f64,
    p10: f64,
    best_speedup_pct: Option<f64>,
    top10_speedup_pct: Option<f64>,
    max_min_ratio: Option<f64>,
}

#[test]
fn impact_summary_recomputes_from_per_variable_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BranchingImpactConfig {
        source: generated(4, 21),
        sampled_variables: 12,
        runs_per_variable: 6,
        seed: 2,
        budget: None,
        heuristic: Heuristic::Vsids,
        workers: 2,
        out_dir: dir.path().to_path_buf(),
        record_time: false,
    };
    let report = run_branching_impact_to_dir(&cfg).unwrap();
    assert_eq!(report.instances.len(), 4);

    let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in csv::Reader::from_path(cfg.per_variable_path()).unwrap().deserialize() {
        let row: PerVariable = row.unwrap();
        per.entry(row.instance_id).or_default().push(row.mean_propagations);
    }
    let lines: Vec<SummaryLine> = csv::Reader::from_path(cfg.summary_path())
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    for line in lines {
        let mut means = per[&line.instance_id].clone();
        assert_eq!(means.len(), 12);
        // independent recomputation: sort, middle pair, nearest-rank 10th percentile
        means.sort_by(f64::total_cmp);
        let median = (means[5] + means[6]) / 2.0;
        let best = means[0];
        let p10 = means[1]; // ceil(0.1 * 12) = 2nd smallest
        assert_eq!(line.median, median);
        assert_eq!(line.best, best);
        assert_eq!(line.p10, p10);
        let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(line.best_speedup_pct, (median - best) / best * 100.0));
        assert!(close(line.top10_speedup_pct, (median - p10) / p10 * 100.0));
        assert!(close(line.max_min_ratio, means[11] / best));
        let s = summarize_means(&per[&line.instance_id]).unwrap();
        assert_eq!(s.median, line.median);
    }
}

#[test]
fn impact_rerun_from_persisted_config_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BranchingImpactConfig {
        source: generated(3, 5),
        sampled_variables: 4,
        runs_per_variable: 5,
        seed: 9,
        budget: Some(100_000),
        heuristic: Heuristic::Vmtf,
        workers: 1,
        out_dir: dir.path().to_path_buf(),
        record_time: false,
    };
    run_branching_impact_to_dir(&cfg).unwrap();
    let first = snapshot(dir.path());
    let mut replay: BranchingImpactConfig = read_config(&dir.path().join("config.json")).unwrap();
    assert_eq!(replay, cfg);
    replay.workers = 3;
    run_branching_impact_to_dir(&replay).unwrap();
    let second = snapshot(dir.path());
    for name in ["per_variable.csv", "summary.csv", "skipped.txt"] {
        assert_eq!(first[name], second[name], "{name}");
    }
}
