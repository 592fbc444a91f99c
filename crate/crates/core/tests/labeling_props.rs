use branchorder::cnf::{generate_3cnf, Formula, GeneratorConfig, Literal};
use branchorder::harness::{label_all, with_workers, Instance};
use branchorder::labeling::{
    first_variable_label, genetic_label, GeneticConfig, LabelMethod, LabelingConfig, SolveRunner,
};
use branchorder::solver::{solve, SolverConfig};

fn runner() -> SolveRunner {
    SolveRunner::new(SolverConfig::default())
}

/// (x1) & (-x1 | x2) & (-x2 | x3) followed by a random 3-CNF over x4..x10.
fn chain_formula(seed: u64) -> Formula {
    let tail = generate_3cnf(&GeneratorConfig::new(7, seed).with_ratio(4.0)).unwrap();
    let mut clauses = vec![
        vec![Literal::new(1, true)],
        vec![Literal::new(1, false), Literal::new(2, true)],
        vec![Literal::new(2, false), Literal::new(3, true)],
    ];
    for c in tail.clauses() {
        clauses.push(c.iter().map(|l| Literal::new(l.var() + 3, l.is_positive())).collect());
    }
    Formula::new(10, clauses).unwrap()
}

fn spread(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::MIN, f64::max);
    let min = scores.iter().copied().fold(f64::MAX, f64::min);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    (max - min) / mean
}

/// x1..x3 are fixed by level-0 propagation, so forcing any of them first
/// leaves the same search; their scores differ only by sampling noise.
/// Tail variables can differ for real and are left out of the spread.
#[test]
fn more_trials_shrink_first_variable_spread() {
    let mut compared = 0;
    for seed in 0..20 {
        let f = chain_formula(seed);
        let few = first_variable_label("chain", &f, 5, &runner(), 1).unwrap();
        if spread(&few.scores[..3]) == 0.0 {
            // the tail is decided without search whatever the order
            continue;
        }
        let many = first_variable_label("chain", &f, 200, &runner(), 1).unwrap();
        assert!(
            spread(&many.scores[..3]) < spread(&few.scores[..3]),
            "seed {seed}: k=200 spread {} vs k=5 spread {}",
            spread(&many.scores[..3]),
            spread(&few.scores[..3])
        );
        compared += 1;
    }
    assert!(compared >= 5, "only {compared} chain formulas had any spread");
}

#[test]
fn genetic_incumbent_never_worsens_on_50_instances() {
    for i in 0..50u64 {
        let f = generate_3cnf(&GeneratorConfig::new(25 + (i % 15) as u32, 500 + i)).unwrap();
        let cfg = GeneticConfig {
            population: 5,
            generations: 4,
            seed: i,
        };
        let run = runner();
        let r = genetic_label("g", &f, &cfg, &run).unwrap();
        let trace = r.trace.as_ref().unwrap();
        assert_eq!(trace.len(), 5);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]), "instance {i}: {trace:?}");
        assert_eq!(run.calls(), 25);
        assert_eq!(r.order_from_scores(), r.order);
        let replay = solve(&f, &SolverConfig::default().with_order(r.order.clone())).unwrap();
        assert_eq!(replay.propagations, *trace.last().unwrap());
    }
}

#[test]
fn labels_do_not_depend_on_worker_count() {
    let instances: Vec<Instance> = (0..8u64)
        .map(|i| (format!("w{i}"), generate_3cnf(&GeneratorConfig::new(20, i)).unwrap()))
        .collect();
    for method in [LabelMethod::Conflict, LabelMethod::FirstVariable, LabelMethod::Genetic] {
        let cfg = LabelingConfig { method, k: 3, m: 2, seed: 5 };
        let one = with_workers(1, || label_all(&instances, &cfg, &runner())).unwrap().unwrap();
        let four = with_workers(4, || label_all(&instances, &cfg, &runner())).unwrap().unwrap();
        assert_eq!(one, four, "{method:?}");
        for l in &one {
            assert_eq!(l.order_from_scores(), l.order, "{method:?}");
        }
    }
}
