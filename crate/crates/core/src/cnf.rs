//! CNF data model, DIMACS reading/writing and the uniform random 3-CNF generator.

use std::collections::HashSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use thiserror::Error;

use crate::seed::rng_from_seed;

/// A literal in DIMACS convention: 1-based variable index plus polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Literal {
        assert!(var >= 1, "variables are 1-based");
        Literal { var, positive }
    }

    /// Builds a literal from a signed DIMACS integer. Returns `None` for 0.
    pub fn from_dimacs(value: i64) -> Option<Literal> {
        if value == 0 || value.unsigned_abs() > u64::from(u32::MAX) {
            return None;
        }
        Some(Literal {
            var: value.unsigned_abs() as u32,
            positive: value > 0,
        })
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            i64::from(self.var)
        } else {
            -i64::from(self.var)
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

pub type Clause = Vec<Literal>;

/// An immutable CNF instance. Clause and literal order is kept exactly as given.
#[derive(Debug, Clone, Default)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
    source_name: Option<String>,
}

/// Equality is structural: the source name is not compared.
impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars == other.num_vars && self.clauses == other.clauses
    }
}

impl Eq for Formula {}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: clause data before the `p cnf` header")]
    MissingHeader { line: usize },
    #[error("line {line}: duplicate `p` header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: non-integer token `{token}`")]
    BadToken { line: usize, token: String },
    #[error("line {line}: variable {var} exceeds declared {declared}")]
    VariableOutOfRange { line: usize, var: u64, declared: u32 },
    #[error("line {line}: header declares {declared} clauses, found {found}")]
    ClauseCountMismatch {
        line: usize,
        declared: usize,
        found: usize,
    },
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error("no `p cnf` header found")]
    NoHeader,
    #[error("literal references variable {var} but formula has {num_vars}")]
    InvalidLiteral { var: u32, num_vars: u32 },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<Formula, CnfError> {
        for lit in clauses.iter().flatten() {
            if lit.var() > num_vars {
                return Err(CnfError::InvalidLiteral {
                    var: lit.var(),
                    num_vars,
                });
            }
        }
        Ok(Formula {
            num_vars,
            clauses,
            source_name: None,
        })
    }

    /// Convenience constructor from signed DIMACS integers. Panics on 0 or
    /// out-of-range variables; meant for tests and literals in code.
    pub fn from_dimacs_clauses(num_vars: u32, clauses: &[&[i64]]) -> Formula {
        let clauses = clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&v| Literal::from_dimacs(v).expect("non-zero literal"))
                    .collect()
            })
            .collect();
        Formula::new(num_vars, clauses).expect("valid formula")
    }

    pub fn with_source_name(mut self, name: impl Into<String>) -> Formula {
        self.source_name = Some(name.into());
        self
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn source_name(&self) -> Option<&str> {
        self.source_name.as_deref()
    }

    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(Vec::len).sum()
    }
}

/// Parses DIMACS CNF text. Clauses may span lines; a SATLIB-style `%` line
/// ends the clause section.
pub fn parse_dimacs(input: &[u8]) -> Result<Formula, CnfError> {
    let text = std::str::from_utf8(input).map_err(|_| CnfError::Encoding)?;
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Clause = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::DuplicateHeader { line: line_no });
            }
            header = Some(parse_header(line, line_no)?);
            continue;
        }
        let (num_vars, _) = header.ok_or(CnfError::MissingHeader { line: line_no })?;
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| CnfError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            let var = value.unsigned_abs();
            if var > u64::from(num_vars) {
                return Err(CnfError::VariableOutOfRange {
                    line: line_no,
                    var,
                    declared: num_vars,
                });
            }
            current.push(Literal::from_dimacs(value).expect("bounded non-zero literal"));
        }
    }

    let (num_vars, declared) = header.ok_or(CnfError::NoHeader)?;
    // A final clause without its terminating 0 is still accepted.
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != declared {
        return Err(CnfError::ClauseCountMismatch {
            line: last_line.max(1),
            declared,
            found: clauses.len(),
        });
    }
    Ok(Formula {
        num_vars,
        clauses,
        source_name: None,
    })
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), CnfError> {
    let malformed = |reason: &str| CnfError::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let mut parts = line.split_whitespace();
    if parts.next() != Some("p") {
        return Err(malformed("expected `p`"));
    }
    if parts.next() != Some("cnf") {
        return Err(malformed("expected format `cnf`"));
    }
    let vars = parts
        .next()
        .ok_or_else(|| malformed("missing variable count"))?
        .parse::<u32>()
        .map_err(|_| malformed("variable count is not a non-negative integer"))?;
    let clauses = parts
        .next()
        .ok_or_else(|| malformed("missing clause count"))?
        .parse::<usize>()
        .map_err(|_| malformed("clause count is not a non-negative integer"))?;
    if parts.next().is_some() {
        return Err(malformed("trailing tokens"));
    }
    Ok((vars, clauses))
}

pub fn emit_dimacs(formula: &Formula) -> String {
    let mut out = String::with_capacity(16 + formula.num_literals() * 4);
    writeln!(out, "p cnf {} {}", formula.num_vars, formula.clauses.len()).unwrap();
    for clause in &formula.clauses {
        for lit in clause {
            write!(out, "{lit} ").unwrap();
        }
        out.push_str("0\n");
    }
    out
}

/// Reads a DIMACS file, naming the formula after the file stem.
pub fn read_dimacs_file(path: &Path) -> Result<Formula, CnfError> {
    let bytes = std::fs::read(path).map_err(|e| CnfError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let formula = parse_dimacs(&bytes)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(formula.with_source_name(name))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GeneratorConfig {
    pub num_vars: u32,
    pub clause_ratio: f64,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub forbid_duplicate_literals: bool,
    #[serde(default)]
    pub forbid_duplicate_clauses: bool,
}

fn default_true() -> bool {
    true
}

/// Ratio used by the SATLIB uniform random 3-SAT suite (430 clauses at 100 variables).
pub const DEFAULT_CLAUSE_RATIO: f64 = 4.3;

impl GeneratorConfig {
    pub fn new(num_vars: u32, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            num_vars,
            clause_ratio: DEFAULT_CLAUSE_RATIO,
            seed,
            forbid_duplicate_literals: true,
            forbid_duplicate_clauses: false,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> GeneratorConfig {
        self.clause_ratio = ratio;
        self
    }

    pub fn num_clauses(&self) -> usize {
        (self.clause_ratio * f64::from(self.num_vars)).round() as usize
    }
}

/// Uniform random 3-CNF: each clause picks 3 distinct variables uniformly and
/// a uniform polarity for each.
pub fn generate_3cnf(config: &GeneratorConfig) -> Result<Formula, CnfError> {
    if config.num_vars < 3 {
        return Err(CnfError::InvalidConfig(format!(
            "3-CNF needs at least 3 variables, got {}",
            config.num_vars
        )));
    }
    if !(config.clause_ratio > 0.0) || !config.clause_ratio.is_finite() {
        return Err(CnfError::InvalidConfig(format!(
            "clause ratio must be positive, got {}",
            config.clause_ratio
        )));
    }
    let target = config.num_clauses();
    let n = config.num_vars as usize;
    if config.forbid_duplicate_clauses {
        // C(n,3) * 8 distinct clauses exist.
        let distinct = (n * (n - 1) * (n - 2) / 6) * 8;
        if target > distinct {
            return Err(CnfError::InvalidConfig(format!(
                "{target} distinct clauses requested but only {distinct} exist"
            )));
        }
    }

    let mut rng = rng_from_seed(config.seed);
    let mut seen: HashSet<Clause> = HashSet::new();
    let mut clauses = Vec::with_capacity(target);
    while clauses.len() < target {
        let vars: [usize; 3] = if config.forbid_duplicate_literals {
            let picked = sample(&mut rng, n, 3);
            [picked.index(0), picked.index(1), picked.index(2)]
        } else {
            [
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..n),
            ]
        };
        let clause: Clause = vars
            .iter()
            .map(|&v| Literal::new(v as u32 + 1, rng.gen_bool(0.5)))
            .collect();
        if config.forbid_duplicate_clauses {
            let mut key = clause.clone();
            key.sort();
            if !seen.insert(key) {
                continue;
            }
        }
        clauses.push(clause);
    }
    Ok(Formula {
        num_vars: config.num_vars,
        clauses,
        source_name: None,
    })
}
