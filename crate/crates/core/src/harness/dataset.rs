//! Labeled training data: instance files, `labels.jsonl` and `graphs.jsonl`.

use std::collections::{HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::impact::default_workers;
use super::{io_err, label_all, read_jsonl, solver_config, write_config, write_instances, write_jsonl, HarnessError, InstanceSource};
use crate::graphx::{export_graphs, GraphRecord};
use crate::labeling::{LabelRecord, LabelingConfig, SolveRunner};
use crate::solver::Heuristic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub source: InstanceSource,
    pub labeling: LabelingConfig,
    /// Propagation budget per labeling solve.
    pub budget: Option<u64>,
    #[serde(default)]
    pub heuristic: Heuristic,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl DatasetConfig {
    pub fn labels_path(&self) -> PathBuf {
        self.out_dir.join("labels.jsonl")
    }

    pub fn graphs_path(&self) -> PathBuf {
        self.out_dir.join("graphs.jsonl")
    }

    pub fn instances_dir(&self) -> PathBuf {
        self.out_dir.join("instances")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DatasetSummary {
    pub instances: usize,
    pub labeled: usize,
    pub graphed: usize,
    /// Labels (new or old) with at least one trial cut off by the budget.
    pub partial: usize,
}

/// Instances labeled per batch; each batch is appended before the next
/// starts, so an interrupted build loses at most one batch.
const BATCH: usize = 64;

#[derive(Deserialize)]
struct IdOnly {
    instance_id: String,
}

fn existing_ids(path: &Path) -> Result<HashSet<String>, HarnessError> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_jsonl::<IdOnly>(path)?
        .into_iter()
        .map(|r| r.instance_id)
        .collect())
}

fn append_file(path: &Path) -> Result<BufWriter<fs::File>, HarnessError> {
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    Ok(BufWriter::new(f))
}

/// Builds or resumes a dataset under `config.out_dir`. Ids already present in
/// `labels.jsonl` / `graphs.jsonl` are skipped, so rerunning a finished build
/// changes nothing. Resuming with a different config is refused.
pub fn build_dataset(config: &DatasetConfig) -> Result<DatasetSummary, HarnessError> {
    if config.workers == 0 {
        return Err(HarnessError::Config("worker count must be >= 1".into()));
    }
    let cfg_path = config.out_dir.join("config.json");
    if cfg_path.exists() {
        let old: DatasetConfig = super::read_config(&cfg_path)?;
        if &old != config {
            return Err(HarnessError::Config(format!(
                "{} was written by a different config",
                cfg_path.display()
            )));
        }
    } else {
        write_config(&config.out_dir, "dataset", config)?;
    }

    super::with_workers(config.workers, || {
        let instances = config.source.load()?;
        write_instances(&instances, &config.instances_dir())?;

        let labels_path = config.labels_path();
        let graphs_path = config.graphs_path();
        let have_graph = existing_ids(&graphs_path)?;
        let mut labels: HashMap<String, LabelRecord> = if labels_path.exists() {
            read_jsonl::<LabelRecord>(&labels_path)?
                .into_iter()
                .map(|l| (l.instance_id.clone(), l))
                .collect()
        } else {
            HashMap::new()
        };
        let runner = SolveRunner::new(solver_config(config.heuristic, config.budget));
        let mut summary = DatasetSummary {
            instances: instances.len(),
            ..DatasetSummary::default()
        };

        let todo: Vec<_> = instances
            .iter()
            .filter(|(id, _)| !labels.contains_key(id) || !have_graph.contains(id))
            .cloned()
            .collect();
        for batch in todo.chunks(BATCH) {
            let unlabeled: Vec<_> = batch
                .iter()
                .filter(|(id, _)| !labels.contains_key(id))
                .cloned()
                .collect();
            let fresh = label_all(&unlabeled, &config.labeling, &runner)?;
            if !fresh.is_empty() {
                write_jsonl(&fresh, append_file(&labels_path)?).map_err(io_err(&labels_path))?;
            }
            summary.labeled += fresh.len();
            for l in fresh {
                labels.insert(l.instance_id.clone(), l);
            }

            let ungraphed: Vec<_> = batch
                .iter()
                .filter(|(id, _)| !have_graph.contains(id))
                .cloned()
                .collect();
            if !ungraphed.is_empty() {
                let batch_labels: Vec<LabelRecord> =
                    ungraphed.iter().map(|(id, _)| labels[id].clone()).collect();
                export_graphs(&ungraphed, Some(&batch_labels), append_file(&graphs_path)?)?;
            }
            summary.graphed += ungraphed.len();
        }
        summary.partial = instances
            .iter()
            .filter(|(id, _)| labels.get(id).is_some_and(|l| l.partial))
            .count();
        Ok(summary)
    })?
}

/// Reads `graphs.jsonl` back.
pub fn read_dataset_graphs(config: &DatasetConfig) -> Result<Vec<GraphRecord>, HarnessError> {
    read_jsonl(&config.graphs_path())
}
