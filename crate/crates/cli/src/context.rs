use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context as _, Result};
use otswitch_core::cases;
use otswitch_core::dcots::DcotsInstance;
use otswitch_core::heuristics::TrainingSet;
use otswitch_core::instances::{ExperimentConfig, GenerationSpec, Split};
use otswitch_core::network::{parse_case_with, Network, ParseOptions};
use serde::{Deserialize, Serialize};

use crate::args::Common;

/// Malformed invocation that clap itself cannot detect.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: &'a [String],
    tool_version: &'a str,
    seed: u64,
    config: &'a ExperimentConfig,
    /// The resolved config as TOML, usable with `--config`.
    config_toml: String,
    case: Option<String>,
    network_fingerprint: Option<&'a str>,
    wall_time_s: Option<f64>,
    outputs: &'a [String],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRow {
    pub index: usize,
    pub demand: Vec<f64>,
    pub gen_cost: Vec<f64>,
}

/// Contents of `instances.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub network_fingerprint: String,
    pub spec: GenerationSpec,
    pub split: Split,
    pub instances: Vec<InstanceRow>,
}

pub struct Context {
    command: String,
    argv: Vec<String>,
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub no_timing: bool,
    linearize_cost: bool,
    case: Option<PathBuf>,
    case_label: Option<String>,
    fingerprint: Option<String>,
    outputs: Vec<String>,
    start: Instant,
}

impl Context {
    pub fn new(command: &str, argv: &[String], common: &Common) -> Result<Self> {
        let mut config = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_toml_str(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        if let Some(k) = common.cardinality {
            config.cardinality = k.0;
        }
        if let Some(gap) = common.gap {
            if !(gap >= 0.0 && gap.is_finite()) {
                return Err(usage(format!("--gap must be a non-negative number, got {gap}")));
            }
            config.rel_gap = gap;
        }
        if let Some(t) = common.time_limit {
            config.time_limit_s = t;
        }
        if let Some(w) = common.workers {
            if w == 0 {
                return Err(usage("--workers must be at least 1"));
            }
            config.workers = Some(w);
        }
        let workers = config.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        config.workers = Some(workers);
        // Ignored if a pool already exists (only possible when embedded).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
        let case = match (&common.case_file, &common.case) {
            (Some(a), Some(b)) if a != b => return Err(usage("case given both positionally and with --case")),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            config,
            out: common.out.clone(),
            no_timing: common.no_timing,
            linearize_cost: common.linearize_cost,
            case,
            case_label: None,
            fingerprint: None,
            outputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn seconds(&self, s: f64) -> f64 {
        if self.no_timing {
            0.0
        } else {
            s
        }
    }

    /// Loads the case; returns the network and the parser's warnings.
    pub fn network_with_warnings(&mut self) -> Result<(Arc<Network>, Vec<String>)> {
        let Some(path) = self.case.clone() else {
            return Err(usage("no case given (pass a case file or --case)"));
        };
        let opts = ParseOptions { linearize_cost: self.linearize_cost, ..Default::default() };
        let (text, label) = match std::fs::read_to_string(&path) {
            Ok(text) => (text, path.display().to_string()),
            Err(e) => {
                let stem = path.to_str().map(|s| s.trim_end_matches(".m"));
                match cases::bundled().into_iter().find(|(name, _)| Some(*name) == stem) {
                    Some((name, text)) => (text.to_string(), format!("bundled:{name}")),
                    None => return Err(anyhow::Error::new(e).context(format!("reading {}", path.display()))),
                }
            }
        };
        let parsed = parse_case_with(&text, &opts).with_context(|| format!("parsing {label}"))?;
        let net = Arc::new(parsed.network);
        self.fingerprint = Some(net.fingerprint());
        self.case_label = Some(label);
        Ok((net, parsed.warnings))
    }

    pub fn network(&mut self) -> Result<Arc<Network>> {
        let (net, warnings) = self.network_with_warnings()?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(net)
    }

    pub fn nominal(&self, net: &Arc<Network>) -> Result<DcotsInstance> {
        Ok(DcotsInstance::nominal(net.clone())?.with_cardinality(self.config.cardinality))
    }

    fn resolve(&self, given: Option<&PathBuf>, default: &str) -> PathBuf {
        given.cloned().unwrap_or_else(|| self.out.join(default))
    }

    pub fn instance_path(&self, given: Option<&PathBuf>) -> PathBuf {
        self.resolve(given, "instances.json")
    }

    pub fn train_path(&self, given: Option<&PathBuf>) -> PathBuf {
        self.resolve(given, "train.jsonl")
    }

    /// Reads an instance file; its generation settings replace those in the
    /// config snapshot.
    pub fn load_instances(&mut self, path: &Path, net: &Arc<Network>) -> Result<(InstanceFile, Vec<DcotsInstance>)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: InstanceFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if file.network_fingerprint != net.fingerprint() {
            bail!("{} was generated for a different network", path.display());
        }
        let spec = &file.spec;
        self.config.count = spec.count;
        self.config.test_count = spec.test_count;
        self.config.seed = spec.seed;
        self.config.demand_band = spec.demand_band;
        self.config.cost_band = spec.cost_band;
        let instances = file
            .instances
            .iter()
            .map(|r| {
                Ok(DcotsInstance::new(net.clone(), r.demand.clone(), r.gen_cost.clone())?
                    .with_cardinality(self.config.cardinality))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((file, instances))
    }

    /// Test instances from the instance file, or the nominal instance when
    /// the file was not given and does not exist in the output directory.
    pub fn test_instances(&mut self, given: Option<&PathBuf>, net: &Arc<Network>) -> Result<Vec<(usize, DcotsInstance)>> {
        let path = self.instance_path(given);
        if given.is_none() && !path.exists() {
            return Ok(vec![(0, self.nominal(net)?)]);
        }
        let (file, all) = self.load_instances(&path, net)?;
        Ok(file.split.test.iter().map(|&i| (i, all[i].clone())).collect())
    }

    pub fn load_training(&self, given: Option<&PathBuf>) -> Result<TrainingSet> {
        let path = self.train_path(given);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        TrainingSet::from_jsonl(&text).with_context(|| format!("loading {}", path.display()))
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn record(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    pub fn finish(self) -> Result<()> {
        let wall = self.start.elapsed().as_secs_f64();
        let manifest = RunManifest {
            command: &self.command,
            argv: &self.argv,
            tool_version: env!("CARGO_PKG_VERSION"),
            seed: self.config.seed,
            config: &self.config,
            config_toml: toml::to_string(&self.config)?,
            case: self.case_label.clone(),
            network_fingerprint: self.fingerprint.as_deref(),
            wall_time_s: (!self.no_timing).then_some(wall),
            outputs: &self.outputs,
        };
        let path = self.out.join(format!("manifest-{}.json", self.command));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
