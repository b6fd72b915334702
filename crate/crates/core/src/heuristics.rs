//! The k-nearest-neighbour switching heuristic and greedy line removal.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dcots::{evaluate_topology, DcotsError, DcotsInstance, DispatchSolution, Topology};

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("no training entry fits the instance's cardinality limit of {0}")]
    NoEligibleEntries(usize),
    #[error("parameter vector has length {got}, training vectors have length {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set was built for network {expected}, instance network is {got}")]
    FingerprintMismatch { expected: String, got: String },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("invalid norm '{0}' (expected euclidean, infinity or a number p >= 1)")]
    BadNorm(String),
    #[error("training file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Dcots(#[from] DcotsError),
}

/// Generation costs followed by bus demands, both in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn of(inst: &DcotsInstance) -> Self {
        Self(inst.gen_cost().iter().chain(inst.demand()).copied().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Euclidean,
    Infinity,
    P(f64),
}

impl Norm {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Self::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Self::Infinity => diffs.fold(0.0, f64::max),
            Self::P(p) => diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p),
        }
    }
}

impl FromStr for Norm {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" | "2" => Ok(Self::Euclidean),
            "infinity" | "inf" | "linf" => Ok(Self::Infinity),
            other => match other.trim_start_matches('l').parse::<f64>() {
                Ok(p) if p >= 1.0 && p.is_finite() => Ok(Self::P(p)),
                _ => Err(HeuristicError::BadNorm(s.to_string())),
            },
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Euclidean => f.write_str("euclidean"),
            Self::Infinity => f.write_str("infinity"),
            Self::P(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub norm: Norm,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 10, norm: Norm::Euclidean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEntry {
    pub q: Vec<f64>,
    pub open_lines: Vec<usize>,
    pub objective: f64,
    pub gap: f64,
    pub seconds: f64,
}

impl TrainingEntry {
    pub fn topology(&self) -> Topology {
        Topology::from_open(self.open_lines.iter().copied())
    }
}

/// An instance the training run could not solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingFailure {
    pub q: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    network_fingerprint: String,
    cardinality: Option<usize>,
}

/// Solved instances; written as JSON lines behind a header line.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub network_fingerprint: String,
    pub cardinality: Option<usize>,
    pub entries: Vec<TrainingEntry>,
    pub failures: Vec<TrainingFailure>,
}

impl TrainingSet {
    pub fn new(network_fingerprint: impl Into<String>, cardinality: Option<usize>) -> Self {
        Self { network_fingerprint: network_fingerprint.into(), cardinality, entries: Vec::new(), failures: Vec::new() }
    }

    pub fn header_line(&self) -> String {
        let h = Header { network_fingerprint: self.network_fingerprint.clone(), cardinality: self.cardinality };
        serde_json::to_string(&h).expect("header serializes")
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        for f in &self.failures {
            out.push_str(&serde_json::to_string(f).expect("failure serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the JSON-lines form. Entry lines carry `open_lines`; lines
    /// with an `error` key are failures.
    pub fn from_jsonl(text: &str) -> Result<Self, HeuristicError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, first)) = lines.next() else {
            return Err(HeuristicError::EmptyTrainingSet);
        };
        let header: Header =
            serde_json::from_str(first).map_err(|e| HeuristicError::Format { line: 1, msg: e.to_string() })?;
        let mut set = Self::new(header.network_fingerprint, header.cardinality);
        for (i, line) in lines {
            let fmt_err = |e: serde_json::Error| HeuristicError::Format { line: i + 1, msg: e.to_string() };
            let value: serde_json::Value = serde_json::from_str(line).map_err(fmt_err)?;
            if value.get("error").is_some() {
                set.failures.push(serde_json::from_value(value).map_err(fmt_err)?);
            } else {
                set.entries.push(serde_json::from_value(value).map_err(fmt_err)?);
            }
        }
        Ok(set)
    }

    pub fn dimension(&self) -> Option<usize> {
        self.entries.first().map(|e| e.q.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Position in the training entries.
    pub index: usize,
    pub distance: f64,
}

fn normalized(q: &[f64]) -> Vec<f64> {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        q.iter().map(|x| x / n).collect()
    } else {
        q.to_vec()
    }
}

/// Every point ranked by distance between ℓ₂-normalized vectors, ties by index.
pub fn rank_points<'a>(
    points: impl IntoIterator<Item = (usize, &'a [f64])>,
    q: &[f64],
    norm: Norm,
) -> Result<Vec<Neighbor>, HeuristicError> {
    let q_hat = normalized(q);
    let mut out = Vec::new();
    for (index, p) in points {
        if p.len() != q.len() {
            return Err(HeuristicError::DimensionMismatch { expected: p.len(), got: q.len() });
        }
        out.push(Neighbor { index, distance: norm.distance(&q_hat, &normalized(p)) });
    }
    out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    Ok(out)
}

/// The `min(k, |train|)` entries closest to `q`, sorted by `(distance, index)`.
pub fn knn_select(train: &TrainingSet, q: &ParameterVector, cfg: &KnnConfig) -> Result<Vec<Neighbor>, HeuristicError> {
    if cfg.k == 0 {
        return Err(HeuristicError::ZeroK);
    }
    if train.entries.is_empty() {
        return Err(HeuristicError::EmptyTrainingSet);
    }
    let mut ranked = rank_points(train.entries.iter().enumerate().map(|(i, e)| (i, e.q.as_slice())), &q.0, cfg.norm)?;
    ranked.truncate(cfg.k);
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Knn,
    Greedy,
}

#[derive(Debug, Clone)]
pub struct HeuristicResult {
    pub topology: Topology,
    pub dispatch: DispatchSolution,
    /// Candidates considered: neighbours for KNN, LP solves for greedy.
    pub candidate_count: usize,
    pub wall_time: f64,
    pub provenance: Provenance,
    pub lp_solves: usize,
    /// Training entry whose topology won (KNN only).
    pub source_entry: Option<usize>,
}

/// Evaluates each candidate once per distinct topology and returns the
/// position of the best `(total_objective, position)` with its dispatch.
pub(crate) fn best_candidate(
    inst: &DcotsInstance,
    candidates: &[Topology],
) -> Result<(usize, DispatchSolution, usize), DcotsError> {
    let mut first_seen: HashMap<&Topology, usize> = HashMap::new();
    let mut unique = Vec::new();
    for (i, t) in candidates.iter().enumerate() {
        first_seen.entry(t).or_insert_with(|| {
            unique.push(i);
            i
        });
    }
    let evaluated: Vec<DispatchSolution> =
        unique.par_iter().map(|&i| evaluate_topology(inst, &candidates[i])).collect::<Result<_, _>>()?;
    let (pos, _) = evaluated
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_objective.total_cmp(&b.1.total_objective).then(a.0.cmp(&b.0)))
        .expect("at least one candidate");
    let solves = evaluated.len();
    let best = evaluated.into_iter().nth(pos).expect("index in range");
    Ok((unique[pos], best, solves))
}

/// Runs KNN over the training entries that fit the instance's cardinality.
pub fn knn_heuristic(inst: &DcotsInstance, train: &TrainingSet, cfg: &KnnConfig) -> Result<HeuristicResult, HeuristicError> {
    let start = Instant::now();
    let got = inst.network().fingerprint();
    if got != train.network_fingerprint {
        return Err(HeuristicError::FingerprintMismatch { expected: train.network_fingerprint.clone(), got });
    }
    if cfg.k == 0 {
        return Err(HeuristicError::ZeroK);
    }
    if train.entries.is_empty() {
        return Err(HeuristicError::EmptyTrainingSet);
    }
    let q = ParameterVector::of(inst);
    let eligible = train
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.topology().check(inst).is_ok())
        .map(|(i, e)| (i, e.q.as_slice()));
    let mut neighbors = rank_points(eligible, &q.0, cfg.norm)?;
    if neighbors.is_empty() {
        return Err(HeuristicError::NoEligibleEntries(inst.open_budget()));
    }
    neighbors.truncate(cfg.k);
    let topologies: Vec<Topology> = neighbors.iter().map(|n| train.entries[n.index].topology()).collect();
    let (pos, dispatch, lp_solves) = best_candidate(inst, &topologies)?;
    Ok(HeuristicResult {
        topology: topologies[pos].clone(),
        dispatch,
        candidate_count: neighbors.len(),
        wall_time: start.elapsed().as_secs_f64(),
        provenance: Provenance::Knn,
        lp_solves,
        source_entry: Some(neighbors[pos].index),
    })
}

/// Greedy line removal: repeatedly open the single line that lowers the
/// objective most, until nothing improves or the cardinality budget is used.
pub fn greedy_local_search(inst: &DcotsInstance) -> Result<HeuristicResult, HeuristicError> {
    let start = Instant::now();
    let budget = inst.open_budget();
    let mut remaining: Vec<usize> = inst.network().switchable_lines().map(|l| l.id).collect();
    remaining.sort_unstable();
    let mut open: Vec<usize> = Vec::new();
    let mut best = evaluate_topology(inst, &Topology::all_closed())?;
    let mut lp_solves = 1;
    while open.len() < budget && !remaining.is_empty() {
        let trials: Vec<DispatchSolution> = remaining
            .par_iter()
            .map(|&l| evaluate_topology(inst, &Topology::from_open(open.iter().copied().chain([l]))))
            .collect::<Result<_, _>>()?;
        lp_solves += trials.len();
        let mut x = f64::INFINITY;
        let mut pick = None;
        for (i, t) in trials.iter().enumerate() {
            if t.total_objective < x {
                x = t.total_objective;
                pick = Some(i);
            }
        }
        let Some(i) = pick.filter(|_| x < best.total_objective) else {
            break;
        };
        open.push(remaining.remove(i));
        best = trials.into_iter().nth(i).expect("index in range");
    }
    Ok(HeuristicResult {
        topology: best.topology.clone(),
        dispatch: best,
        candidate_count: lp_solves,
        wall_time: start.elapsed().as_secs_f64(),
        provenance: Provenance::Greedy,
        lp_solves,
        source_entry: None,
    })
}
