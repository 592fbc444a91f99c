//! Tripartite graph encoding of CNF formulas.
//!
//! Nodes are numbered variables first (`0..n`), then clauses (`n..n+m`), then
//! a single meta node. Every literal occurrence becomes a variable–clause
//! edge weighted +1 (positive) or −1 (negated); the meta node links to every
//! clause with weight 0. Node features are a 3-dim kind one-hot followed by a
//! 4-dim one-hot of the node's degree quartile among nodes of its kind.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::Formula;
use crate::labeling::LabelRecord;

pub const FEATURE_DIM: usize = 7;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("label for `{0}` has no matching instance")]
    OrphanLabel(String),
    #[error("more than one label for `{0}`")]
    DuplicateLabel(String),
    #[error("instance `{0}` has no label")]
    MissingLabel(String),
    #[error("label for `{id}` covers {got} variables, instance has {expected}")]
    LabelSize { id: String, expected: u32, got: usize },
    #[error("malformed graph record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Variable,
    Clause,
    Meta,
}

impl NodeKind {
    fn one_hot_index(self) -> usize {
        match self {
            NodeKind::Variable => 0,
            NodeKind::Clause => 1,
            NodeKind::Meta => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    /// 1-based variable index for variable nodes.
    pub var_index: Option<u32>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphInstance {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub num_vars: u32,
    pub num_clauses: usize,
}

impl GraphInstance {
    pub fn meta_node(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Quartile bucket (0..4) per degree. Boundaries are the nearest-rank 25th,
/// 50th and 75th percentile degrees; a degree equal to a boundary falls in
/// the lower bucket.
pub fn degree_quartiles(degrees: &[usize]) -> Vec<usize> {
    if degrees.is_empty() {
        return Vec::new();
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let pct = |p: usize| sorted[(p * n).div_ceil(100).max(1) - 1];
    let bounds = [pct(25), pct(50), pct(75)];
    degrees
        .iter()
        .map(|&d| bounds.iter().position(|&b| d <= b).unwrap_or(3))
        .collect()
}

fn features(kind: NodeKind, quartile: usize) -> Vec<f64> {
    let mut f = vec![0.0; FEATURE_DIM];
    f[kind.one_hot_index()] = 1.0;
    f[3 + quartile] = 1.0;
    f
}

pub fn to_graph(formula: &Formula) -> GraphInstance {
    let n = formula.num_vars() as usize;
    let m = formula.num_clauses();
    let meta = n + m;

    let mut edges = Vec::with_capacity(formula.num_literals() + m);
    let mut var_degree = vec![0usize; n];
    for (ci, clause) in formula.clauses().iter().enumerate() {
        for lit in clause {
            var_degree[lit.var() as usize - 1] += 1;
            edges.push(Edge {
                src: lit.var() as usize - 1,
                dst: n + ci,
                weight: if lit.is_positive() { 1 } else { -1 },
            });
        }
    }
    for ci in 0..m {
        edges.push(Edge {
            src: meta,
            dst: n + ci,
            weight: 0,
        });
    }
    let clause_degree: Vec<usize> = formula.clauses().iter().map(|c| c.len() + 1).collect();

    let var_q = degree_quartiles(&var_degree);
    let clause_q = degree_quartiles(&clause_degree);
    let mut nodes = Vec::with_capacity(n + m + 1);
    for (v, &q) in var_q.iter().enumerate() {
        nodes.push(Node {
            id: v,
            kind: NodeKind::Variable,
            var_index: Some(v as u32 + 1),
            features: features(NodeKind::Variable, q),
        });
    }
    for (c, &q) in clause_q.iter().enumerate() {
        nodes.push(Node {
            id: n + c,
            kind: NodeKind::Clause,
            var_index: None,
            features: features(NodeKind::Clause, q),
        });
    }
    nodes.push(Node {
        id: meta,
        kind: NodeKind::Meta,
        var_index: None,
        features: features(NodeKind::Meta, 3),
    });

    GraphInstance {
        nodes,
        edges,
        num_vars: formula.num_vars(),
        num_clauses: m,
    }
}

/// One line of a graphs file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub instance_id: String,
    pub num_vars: u32,
    pub num_clauses: usize,
    pub node_kinds: Vec<NodeKind>,
    pub features: Vec<Vec<f64>>,
    pub edge_list: Vec<(usize, usize, i8)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_order: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_scores: Option<Vec<f64>>,
}

impl GraphRecord {
    pub fn new(instance_id: &str, graph: &GraphInstance, label: Option<&LabelRecord>) -> Self {
        GraphRecord {
            instance_id: instance_id.to_string(),
            num_vars: graph.num_vars,
            num_clauses: graph.num_clauses,
            node_kinds: graph.nodes.iter().map(|n| n.kind).collect(),
            features: graph.nodes.iter().map(|n| n.features.clone()).collect(),
            edge_list: graph
                .edges
                .iter()
                .map(|e| (e.src, e.dst, e.weight))
                .collect(),
            label_order: label.map(|l| l.order.as_slice().to_vec()),
            label_scores: label.map(|l| l.scores.clone()),
        }
    }

    pub fn to_graph(&self) -> Result<GraphInstance, GraphError> {
        let n = self.num_vars as usize;
        let expected_nodes = n + self.num_clauses + 1;
        if self.node_kinds.len() != expected_nodes || self.features.len() != expected_nodes {
            return Err(GraphError::Malformed(format!(
                "`{}`: expected {expected_nodes} nodes",
                self.instance_id
            )));
        }
        let nodes = self
            .node_kinds
            .iter()
            .zip(&self.features)
            .enumerate()
            .map(|(id, (&kind, f))| Node {
                id,
                kind,
                var_index: (kind == NodeKind::Variable).then_some(id as u32 + 1),
                features: f.clone(),
            })
            .collect();
        let edges = self
            .edge_list
            .iter()
            .map(|&(src, dst, weight)| {
                if src >= expected_nodes || dst >= expected_nodes {
                    return Err(GraphError::Malformed(format!(
                        "`{}`: edge ({src},{dst}) out of range",
                        self.instance_id
                    )));
                }
                Ok(Edge { src, dst, weight })
            })
            .collect::<Result<_, _>>()?;
        Ok(GraphInstance {
            nodes,
            edges,
            num_vars: self.num_vars,
            num_clauses: self.num_clauses,
        })
    }
}

/// Writes one JSON record per instance. With `labels`, every instance must
/// have exactly one label with the same id.
pub fn export_graphs<W: Write>(
    instances: &[(String, Formula)],
    labels: Option<&[LabelRecord]>,
    mut out: W,
) -> Result<(), GraphError> {
    let by_id = match labels {
        Some(ls) => {
            let ids: HashSet<&str> = instances.iter().map(|(id, _)| id.as_str()).collect();
            let mut map: HashMap<&str, &LabelRecord> = HashMap::with_capacity(ls.len());
            for l in ls {
                if !ids.contains(l.instance_id.as_str()) {
                    return Err(GraphError::OrphanLabel(l.instance_id.clone()));
                }
                if map.insert(l.instance_id.as_str(), l).is_some() {
                    return Err(GraphError::DuplicateLabel(l.instance_id.clone()));
                }
            }
            Some(map)
        }
        None => None,
    };
    for (id, formula) in instances {
        let label = match &by_id {
            Some(map) => {
                let l = *map
                    .get(id.as_str())
                    .ok_or_else(|| GraphError::MissingLabel(id.clone()))?;
                if l.order.len() != formula.num_vars() as usize {
                    return Err(GraphError::LabelSize {
                        id: id.clone(),
                        expected: formula.num_vars(),
                        got: l.order.len(),
                    });
                }
                Some(l)
            }
            None => None,
        };
        let record = GraphRecord::new(id, &to_graph(formula), label);
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_graphs<R: BufRead>(input: R) -> Result<Vec<GraphRecord>, GraphError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
