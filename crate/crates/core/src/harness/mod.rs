//! Experiment orchestration over flat files.
//!
//! Each experiment takes a serialisable config, writes it as `config.json`
//! next to its outputs, and produces JSONL/CSV files that depend only on that
//! config. Work is spread over a rayon pool of `workers` threads; every task
//! derives its own seed, so the worker count never changes an output byte.
//! Wall-clock columns are opt-in (`record_time`) since they cannot be replayed.

mod dataset;
mod evaluate;
mod impact;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{emit_dimacs, generate_3cnf, read_dimacs_file, CnfError, Formula, GeneratorConfig};
use crate::graphx::GraphError;
use crate::labeling::LabelError;
use crate::ranking::RankingError;
use crate::seed::{derive_seed, rng_from_seed};
use crate::solver::{solve, Heuristic, SolveResult, SolverConfig, SolverError};

pub use dataset::{build_dataset, read_dataset_graphs, DatasetConfig, DatasetSummary};
pub use evaluate::{
    evaluate_orders, read_orders, run_evaluate, summarize, write_orders, EvaluateConfig, EvaluateOptions,
    GroupBy, OrderRecord,
};
pub use impact::{
    run_branching_impact, run_branching_impact_to_dir, summarize_means, write_impact_files, BranchingImpactConfig,
    ImpactReport, ImpactSummary, InstanceImpact, VariableImpact,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where instances come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    /// Every `*.cnf` file in a directory, ordered by file name; ids are file stems.
    Directory { path: PathBuf },
    /// Uniform random 3-CNF with a variable count drawn uniformly from
    /// `min_vars..=max_vars` per instance.
    Generated {
        count: usize,
        min_vars: u32,
        max_vars: u32,
        clause_ratio: f64,
        seed: u64,
        /// Keep equal numbers of SAT and UNSAT instances (SAT gets the odd one).
        #[serde(default)]
        balance_sat: bool,
    },
}

/// A loaded instance with its id.
pub type Instance = (String, Formula);

fn generated_candidate(i: u64, min_vars: u32, max_vars: u32, ratio: f64, seed: u64) -> Result<Instance, CnfError> {
    let mut rng = rng_from_seed(derive_seed(seed, &[i, 0]));
    let n = rng.gen_range(min_vars..=max_vars);
    let cfg = GeneratorConfig::new(n, derive_seed(seed, &[i, 1])).with_ratio(ratio);
    let id = format!("rand3-n{n}-{i:06}");
    Ok((id.clone(), generate_3cnf(&cfg)?.with_source_name(id)))
}

impl InstanceSource {
    pub fn load(&self) -> Result<Vec<Instance>, HarnessError> {
        match self {
            InstanceSource::Directory { path } => load_directory(path),
            InstanceSource::Generated {
                count,
                min_vars,
                max_vars,
                clause_ratio,
                seed,
                balance_sat,
            } => {
                if min_vars > max_vars {
                    return Err(HarnessError::Config(format!(
                        "min_vars {min_vars} > max_vars {max_vars}"
                    )));
                }
                if !balance_sat {
                    return (0..*count as u64)
                        .into_par_iter()
                        .map(|i| {
                            generated_candidate(i, *min_vars, *max_vars, *clause_ratio, *seed)
                                .map_err(HarnessError::from)
                        })
                        .collect();
                }
                let mut sat_left = count - count / 2;
                let mut unsat_left = count / 2;
                let mut out = Vec::with_capacity(*count);
                let max_candidates = (*count as u64).max(1) * 200;
                let chunk = 64u64;
                let mut next = 0u64;
                while sat_left + unsat_left > 0 {
                    if next >= max_candidates {
                        return Err(HarnessError::Config(format!(
                            "could not balance SAT/UNSAT after {max_candidates} candidates"
                        )));
                    }
                    let batch: Vec<(Instance, bool)> = (next..next + chunk)
                        .into_par_iter()
                        .map(|i| {
                            let inst = generated_candidate(i, *min_vars, *max_vars, *clause_ratio, *seed)?;
                            let sat = solve(&inst.1, &SolverConfig::default())?.result
                                == SolveResult::Sat;
                            Ok((inst, sat))
                        })
                        .collect::<Result<_, HarnessError>>()?;
                    next += chunk;
                    for (inst, sat) in batch {
                        let slot = if sat { &mut sat_left } else { &mut unsat_left };
                        if *slot > 0 {
                            *slot -= 1;
                            out.push(inst);
                            if sat_left + unsat_left == 0 {
                                break;
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

pub fn load_directory(dir: &Path) -> Result<Vec<Instance>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "cnf"))
        .collect();
    paths.sort();
    paths
        .par_iter()
        .map(|p| {
            let f = read_dimacs_file(p)?;
            let id = f.source_name().unwrap_or_default().to_string();
            Ok((id, f))
        })
        .collect()
}

/// Writes each instance as `<dir>/<id>.cnf`, skipping files already present.
pub fn write_instances(instances: &[Instance], dir: &Path) -> Result<usize, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = 0;
    for (id, f) in instances {
        let path = dir.join(format!("{id}.cnf"));
        if path.exists() {
            continue;
        }
        fs::write(&path, emit_dimacs(f)).map_err(io_err(&path))?;
        written += 1;
    }
    Ok(written)
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub fn with_workers<T, F>(workers: usize, f: F) -> Result<T, HarnessError>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers == 0 {
        return Err(HarnessError::Config("worker count must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

pub fn solver_config(heuristic: Heuristic, budget: Option<u64>) -> SolverConfig {
    SolverConfig {
        heuristic,
        propagation_limit: budget,
        ..SolverConfig::default()
    }
}

/// Persisted next to results so a run can be replayed from it.
#[derive(Debug, Serialize, Deserialize)]
struct PersistedConfig<T> {
    experiment: String,
    prng: String,
    config: T,
}

pub(crate) fn write_config<T: Serialize>(dir: &Path, experiment: &str, config: &T) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("config.json");
    let persisted = PersistedConfig {
        experiment: experiment.to_string(),
        prng: crate::seed::PRNG_ALGORITHM.to_string(),
        config,
    };
    let mut text = serde_json::to_string_pretty(&persisted).map_err(|source| HarnessError::Json {
        path: path.clone(),
        source,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}

/// Reads a `config.json` written by any experiment.
pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let persisted: PersistedConfig<T> =
        serde_json::from_str(&text).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(persisted.config)
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| HarnessError::Json {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(out)
}

pub(crate) fn write_jsonl<T: Serialize, W: Write>(records: &[T], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a labels file (one [`crate::labeling::LabelRecord`] per line).
pub fn read_labels(path: &Path) -> Result<Vec<crate::labeling::LabelRecord>, HarnessError> {
    read_jsonl(path)
}

pub fn write_labels(path: &Path, labels: &[crate::labeling::LabelRecord]) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_jsonl(labels, std::io::BufWriter::new(file)).map_err(io_err(path))
}

/// Labels every instance, in input order.
pub fn label_all(
    instances: &[Instance],
    labeling: &crate::labeling::LabelingConfig,
    runner: &crate::labeling::SolveRunner,
) -> Result<Vec<crate::labeling::LabelRecord>, HarnessError> {
    instances
        .par_iter()
        .map(|(id, f)| {
            crate::labeling::label_instance(id, f, labeling, runner, crate::seed::stable_hash(id))
                .map_err(HarnessError::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_source_is_deterministic_and_balanced() {
        let src = InstanceSource::Generated {
            count: 10,
            min_vars: 20,
            max_vars: 30,
            clause_ratio: 4.3,
            seed: 3,
            balance_sat: true,
        };
        let a = src.load().unwrap();
        let b = with_workers(3, || src.load()).unwrap().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let sat = a
            .iter()
            .filter(|(_, f)| solve(f, &SolverConfig::default()).unwrap().is_sat())
            .count();
        assert_eq!(sat, 5);
        assert!(a.iter().all(|(_, f)| (20..=30).contains(&f.num_vars())));
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = InstanceSource::Generated {
            count: 4,
            min_vars: 5,
            max_vars: 8,
            clause_ratio: 3.0,
            seed: 1,
            balance_sat: false,
        };
        let inst = src.load().unwrap();
        assert_eq!(write_instances(&inst, dir.path()).unwrap(), 4);
        assert_eq!(write_instances(&inst, dir.path()).unwrap(), 0);
        let back = load_directory(dir.path()).unwrap();
        let mut sorted = inst.clone();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(back, sorted);
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(with_workers(0, || ()).is_err());
    }
}
