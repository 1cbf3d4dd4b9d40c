use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hdmn::propagate::PropagationOptions;
use hdmn_transport::{TransportScenario, Variant};
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// A value or a list of values; lists expand into a grid.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Exact,
    IjgpS { i: OneOrMany<usize> },
    Rbpf { i: OneOrMany<usize>, w: OneOrMany<usize>, n: OneOrMany<usize> },
}

/// One concrete inference algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    Exact,
    IjgpS { i: usize },
    Rbpf { i: usize, w: usize, n: usize },
}

impl Algorithm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::Exact => Ok(()),
            Algorithm::IjgpS { i } if i >= 1 => Ok(()),
            Algorithm::Rbpf { i, n, .. } if i >= 1 && n >= 1 => Ok(()),
            a => Err(CliError::Config(format!("{a}: need i >= 1 and N >= 1"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Algorithm::Exact => write!(f, "exact"),
            Algorithm::IjgpS { i } => write!(f, "IJGP({i})-S"),
            Algorithm::Rbpf { i, w, n } => write!(f, "IJGP-RBPF({i},{w},{n})"),
        }
    }
}

/// `exact`, `ijgp-s:I` or `rbpf:I,W,N`.
impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::Config(format!("cannot parse algorithm `{s}` (exact | ijgp-s:I | rbpf:I,W,N)"));
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<usize> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',').map(|a| a.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
        };
        let alg = match (kind, nums.as_slice()) {
            ("exact", []) => Algorithm::Exact,
            ("ijgp-s", &[i]) => Algorithm::IjgpS { i },
            ("rbpf", &[i, w, n]) => Algorithm::Rbpf { i, w, n },
            _ => return Err(bad()),
        };
        alg.validate()?;
        Ok(alg)
    }
}

impl AlgorithmSpec {
    pub fn expand(&self) -> Vec<Algorithm> {
        match self {
            AlgorithmSpec::Exact => vec![Algorithm::Exact],
            AlgorithmSpec::IjgpS { i } => i.values().into_iter().map(|i| Algorithm::IjgpS { i }).collect(),
            AlgorithmSpec::Rbpf { i, w, n } => {
                let mut out = Vec::new();
                for n in n.values() {
                    for i in i.values() {
                        for w in w.values() {
                            out.push(Algorithm::Rbpf { i, w, n });
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    GoalAccuracy,
    RouteFp,
    RouteFn,
    RejectionRate,
    Ess,
    Time,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::GoalAccuracy,
        Metric::RouteFp,
        Metric::RouteFn,
        Metric::RejectionRate,
        Metric::Ess,
        Metric::Time,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Metric::GoalAccuracy => "goal_accuracy",
            Metric::RouteFp => "route_fp",
            Metric::RouteFn => "route_fn",
            Metric::RejectionRate => "rejection_rate",
            Metric::Ess => "ess",
            Metric::Time => "time_s",
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Propagation {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub damping_after: usize,
}

impl Default for Propagation {
    // Damping from the first iteration: on the travel model undamped loopy
    // updates can lock onto confidently wrong goal beliefs.
    fn default() -> Self {
        let d = PropagationOptions::<f64>::default();
        Self { tol: d.tol, max_iters: d.max_iters, damping: d.damping, damping_after: 0 }
    }
}

impl From<Propagation> for PropagationOptions<f64> {
    fn from(p: Propagation) -> Self {
        PropagationOptions { tol: p.tol, max_iters: p.max_iters, damping: p.damping, damping_after: p.damping_after }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

/// The declarative experiment file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<TransportScenario>,
    #[serde(default, rename = "algorithm")]
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default)]
    pub metrics: Option<Vec<Metric>>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Model1]
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentConfig {
    /// Parse and validate. Relative graph files resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(base) = base {
            for sc in &mut cfg.scenarios {
                if let Some(f) = &sc.graph_file {
                    if f.is_relative() {
                        sc.graph_file = Some(base.join(f));
                    }
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::parse(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.variants.is_empty() || self.seeds.is_empty() {
            return Err(CliError::Config("variants and seeds must be non-empty".into()));
        }
        if self.scenarios.is_empty() {
            return Err(CliError::Config("at least one [[scenario]] is required".into()));
        }
        for sc in &self.scenarios {
            if let Some(f) = &sc.graph_file {
                if !f.exists() {
                    return Err(CliError::Config(format!("scenario `{}`: graph file {} not found", sc.name, f.display())));
                }
            }
            if sc.horizon == 0 {
                return Err(CliError::Config(format!("scenario `{}`: horizon must be positive", sc.name)));
            }
        }
        for a in self.grid() {
            a.validate()?;
        }
        if let Some(m) = &self.metrics {
            if m.is_empty() {
                return Err(CliError::Config("metrics list is empty".into()));
            }
        }
        Ok(())
    }

    /// Every concrete algorithm, in file order.
    pub fn grid(&self) -> Vec<Algorithm> {
        self.algorithms.iter().flat_map(AlgorithmSpec::expand).collect()
    }

    pub fn metrics(&self) -> Vec<Metric> {
        self.metrics.clone().unwrap_or_else(|| Metric::ALL.to_vec())
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.as_ref().and_then(|o| o.dir.as_deref())
    }
}
