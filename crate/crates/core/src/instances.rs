//! Perturbed instance generation, train/test splitting and offline training.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::dcots::{solve_dcots, DcotsError, DcotsInstance};
use crate::heuristics::{HeuristicError, ParameterVector, TrainingEntry, TrainingFailure, TrainingSet};
use crate::network::Network;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid generation spec: {0}")]
    BadSpec(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("existing training file {path} does not match this run: {why}")]
    ResumeMismatch { path: String, why: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Dcots(#[from] DcotsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub demand_band: [f64; 2],
    pub cost_band: [f64; 2],
}

impl Default for GenerationSpec {
    fn default() -> Self {
        Self { count: 300, test_count: 30, seed: 0, demand_band: [0.9, 1.1], cost_band: [0.95, 1.05] }
    }
}

impl GenerationSpec {
    pub fn validate(&self) -> Result<(), InstanceError> {
        for (name, [lo, hi]) in [("demand_band", self.demand_band), ("cost_band", self.cost_band)] {
            if !(lo <= 1.0 && 1.0 <= hi && lo.is_finite() && hi.is_finite()) {
                return Err(InstanceError::BadSpec(format!("{name} [{lo}, {hi}] must contain 1")));
            }
        }
        if !(0 < self.test_count && self.test_count < self.count) {
            return Err(InstanceError::BadSpec(format!(
                "test_count {} must lie strictly between 0 and count {}",
                self.test_count, self.count
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Entity {
    Demand = 1,
    Cost = 2,
    Shuffle = 3,
}

/// Uniform multiplier for one (instance, entity) cell.
///
/// Each entity gets its own ChaCha20 stream and each instance index its own
/// position in that stream, so a draw depends only on
/// `(seed, entity kind, entity index, instance index)`.
fn multiplier(seed: u64, kind: Entity, entity: usize, instance: usize, [lo, hi]: [f64; 2]) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 48) | entity as u64);
    rng.set_word_pos(2 * instance as u128);
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// `spec.count` instances with every bus demand and every generator cost
/// scaled independently. The nominal instance itself is not included.
pub fn generate_instances(
    net: &Arc<Network>,
    spec: &GenerationSpec,
    cardinality: Option<usize>,
) -> Result<Vec<DcotsInstance>, InstanceError> {
    spec.validate()?;
    let demand0 = net.nominal_demand();
    let cost0 = net.nominal_cost();
    (0..spec.count)
        .map(|i| {
            let d = demand0
                .iter()
                .enumerate()
                .map(|(b, d)| d * multiplier(spec.seed, Entity::Demand, b, i, spec.demand_band))
                .collect();
            let c = cost0
                .iter()
                .enumerate()
                .map(|(g, c)| c * multiplier(spec.seed, Entity::Cost, g, i, spec.cost_band))
                .collect();
            Ok(DcotsInstance::new(net.clone(), d, c)?.with_cardinality(cardinality))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// Ascending instance indexes.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle; the first `test_count` shuffled indexes form the test set.
pub fn split_indices(spec: &GenerationSpec) -> Result<Split, InstanceError> {
    spec.validate()?;
    let mut idx: Vec<usize> = (0..spec.count).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream((Entity::Shuffle as u64) << 48);
    idx.shuffle(&mut rng);
    let mut test = idx[..spec.test_count].to_vec();
    let mut train = idx[spec.test_count..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}

pub fn split_train_test<T: Clone>(items: &[T], spec: &GenerationSpec) -> Result<(Vec<T>, Vec<T>), InstanceError> {
    if items.len() != spec.count {
        return Err(InstanceError::BadSpec(format!("{} instances for count {}", items.len(), spec.count)));
    }
    let s = split_indices(spec)?;
    Ok((s.train.iter().map(|&i| items[i].clone()).collect(), s.test.iter().map(|&i| items[i].clone()).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub rel_gap: f64,
    pub time_limit: Option<Duration>,
    pub cardinality: Option<usize>,
    pub workers: usize,
    /// When false, per-entry solve times are written as 0 so that repeated
    /// runs produce identical files.
    pub record_time: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            rel_gap: 0.01,
            time_limit: Some(Duration::from_secs(1800)),
            cardinality: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            record_time: true,
        }
    }
}

fn solve_one(inst: &DcotsInstance, opts: &TrainOptions) -> Result<TrainingEntry, TrainingFailure> {
    let inst = inst.clone().with_cardinality(opts.cardinality);
    let q = ParameterVector::of(&inst).0;
    let start = Instant::now();
    match solve_dcots(&inst, opts.rel_gap, opts.time_limit, None) {
        Ok(sol) => Ok(TrainingEntry {
            q,
            open_lines: sol.topology.open_lines().iter().copied().collect(),
            objective: sol.dispatch.total_objective,
            gap: sol.mip.gap,
            seconds: if opts.record_time { start.elapsed().as_secs_f64() } else { 0.0 },
        }),
        Err(e) => Err(TrainingFailure { q, error: e.to_string() }),
    }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool")
}

/// Solves each instance; output order follows the input order regardless of
/// `workers`. Results are handed to `sink` in order, one batch at a time.
pub fn train_with_sink(
    instances: &[DcotsInstance],
    opts: &TrainOptions,
    mut sink: impl FnMut(&Result<TrainingEntry, TrainingFailure>) -> io::Result<()>,
) -> Result<(), InstanceError> {
    let pool = pool(opts.workers);
    let batch = opts.workers.max(1);
    for chunk in instances.chunks(batch) {
        let results: Vec<_> = pool.install(|| chunk.par_iter().map(|inst| solve_one(inst, opts)).collect());
        for r in &results {
            sink(r)?;
        }
    }
    Ok(())
}

fn training_header(instances: &[DcotsInstance], opts: &TrainOptions) -> TrainingSet {
    let fp = instances.first().map(|i| i.network().fingerprint()).unwrap_or_default();
    TrainingSet::new(fp, opts.cardinality)
}

/// In-memory training run.
pub fn train(instances: &[DcotsInstance], opts: &TrainOptions) -> Result<TrainingSet, InstanceError> {
    let mut set = training_header(instances, opts);
    train_with_sink(instances, opts, |r| {
        match r {
            Ok(e) => set.entries.push(e.clone()),
            Err(f) => set.failures.push(f.clone()),
        }
        Ok(())
    })?;
    Ok(set)
}

/// Training run that appends each result to `path` as it finishes.
///
/// If `path` already holds a matching header, the lines after it are taken
/// as results for the first instances and only the rest are solved.
pub fn train_to_file(path: &Path, instances: &[DcotsInstance], opts: &TrainOptions) -> Result<TrainingSet, InstanceError> {
    let header = training_header(instances, opts);
    let done = if path.exists() {
        match TrainingSet::from_jsonl(&std::fs::read_to_string(path)?) {
            Ok(set) => {
                if set.network_fingerprint != header.network_fingerprint || set.cardinality != header.cardinality {
                    return Err(InstanceError::ResumeMismatch {
                        path: path.display().to_string(),
                        why: "network or cardinality differs".into(),
                    });
                }
                let n = set.entries.len() + set.failures.len();
                if n > instances.len() {
                    return Err(InstanceError::ResumeMismatch {
                        path: path.display().to_string(),
                        why: format!("{n} results for {} instances", instances.len()),
                    });
                }
                n
            }
            Err(HeuristicError::EmptyTrainingSet) => {
                std::fs::write(path, format!("{}\n", header.header_line()))?;
                0
            }
            Err(e) => {
                return Err(InstanceError::ResumeMismatch { path: path.display().to_string(), why: e.to_string() })
            }
        }
    } else {
        std::fs::write(path, format!("{}\n", header.header_line()))?;
        0
    };
    let mut file = OpenOptions::new().append(true).open(path)?;
    train_with_sink(&instances[done..], opts, |r| {
        let line = match r {
            Ok(e) => serde_json::to_string(e),
            Err(f) => serde_json::to_string(f),
        }
        .map_err(io::Error::other)?;
        writeln!(file, "{line}")?;
        file.flush()
    })?;
    Ok(TrainingSet::from_jsonl(&std::fs::read_to_string(path)?)?)
}

/// Cardinality given as an integer or the string `"none"`.
fn deserialize_cardinality<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(usize),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Int(k) => Ok(Some(k)),
        Raw::Text(s) if s.eq_ignore_ascii_case("none") => Ok(None),
        Raw::Text(s) => s.parse().map(Some).map_err(|_| serde::de::Error::custom(format!("bad cardinality '{s}'"))),
    }
}

/// Experiment settings read from a TOML file; absent keys keep defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub demand_band: [f64; 2],
    pub cost_band: [f64; 2],
    #[serde(deserialize_with = "deserialize_cardinality")]
    pub cardinality: Option<usize>,
    pub rel_gap: f64,
    pub time_limit_s: f64,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let g = GenerationSpec::default();
        Self {
            count: g.count,
            test_count: g.test_count,
            seed: g.seed,
            demand_band: g.demand_band,
            cost_band: g.cost_band,
            cardinality: None,
            rel_gap: 0.01,
            time_limit_s: 1800.0,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, InstanceError> {
        toml::from_str(text).map_err(|e| InstanceError::Config(e.to_string()))
    }

    pub fn generation_spec(&self) -> GenerationSpec {
        GenerationSpec {
            count: self.count,
            test_count: self.test_count,
            seed: self.seed,
            demand_band: self.demand_band,
            cost_band: self.cost_band,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            rel_gap: self.rel_gap,
            time_limit: (self.time_limit_s.is_finite() && self.time_limit_s > 0.0)
                .then(|| Duration::from_secs_f64(self.time_limit_s)),
            cardinality: self.cardinality,
            workers: self.workers.unwrap_or_else(|| TrainOptions::default().workers),
            record_time: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn degenerate_bands_reproduce_nominal() {
        let net = Arc::new(cases::case6());
        let spec = GenerationSpec { count: 5, test_count: 1, demand_band: [1.0, 1.0], cost_band: [1.0, 1.0], ..Default::default() };
        for inst in generate_instances(&net, &spec, None).unwrap() {
            assert_eq!(inst.demand(), net.nominal_demand().as_slice());
            assert_eq!(inst.gen_cost(), net.nominal_cost().as_slice());
        }
    }

    #[test]
    fn multiplier_statistics() {
        let draws: Vec<f64> = (0..10_000).map(|i| multiplier(7, Entity::Demand, 3, i, [0.9, 1.1])).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
        assert!(draws.iter().all(|&b| (0.9..=1.1).contains(&b)));
        let other: Vec<f64> = (0..100).map(|i| multiplier(7, Entity::Demand, 4, i, [0.9, 1.1])).collect();
        assert_ne!(&draws[..100], &other[..]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = GenerationSpec::default();
        let s = split_indices(&spec).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (270, 30));
        assert_eq!(s, split_indices(&spec).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..300).collect::<Vec<_>>());
        let edge = GenerationSpec { count: 10, test_count: 9, ..Default::default() };
        assert_eq!(split_indices(&edge).unwrap().train.len(), 1);
        assert!(GenerationSpec { test_count: 0, ..Default::default() }.validate().is_err());
        assert!(GenerationSpec { demand_band: [1.05, 1.1], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn config_parsing() {
        let c = ExperimentConfig::from_toml_str("count = 40\ncardinality = \"none\"\ndemand_band = [0.8, 1.2]\nworkers = 2\n").unwrap();
        assert_eq!(c.count, 40);
        assert_eq!(c.cardinality, None);
        assert_eq!(c.demand_band, [0.8, 1.2]);
        assert_eq!(c.test_count, 30);
        assert_eq!(ExperimentConfig::from_toml_str("cardinality = 5").unwrap().cardinality, Some(5));
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
    }
}
