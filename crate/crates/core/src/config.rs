//! Run configuration: JSON file plus command-line overrides, validated with
//! JSON-pointer locations.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchConfig, BenchPrior};
use crate::error::{Error, Result};
use crate::mcar::McarSpec;
use crate::precision::{ChainConfig, SweepOptions};
use crate::priors::Family;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    FitPrecision,
    FitRegression,
    FitMcar,
    ElicitPrior,
    Bench,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::FitPrecision => "fit-precision",
            Command::FitRegression => "fit-regression",
            Command::FitMcar => "fit-mcar",
            Command::ElicitPrior => "elicit-prior",
            Command::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub store_draws: bool,
    pub options: SweepOptions,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        let c = ChainConfig::default();
        SamplerConfig {
            iters: c.iters,
            burnin: c.burnin,
            thin: c.thin,
            seed: c.seed,
            chains: 1,
            store_draws: c.store_draws,
            options: c.options,
        }
    }
}

impl SamplerConfig {
    /// Chain `k` shares the seed and runs on its own stream.
    pub fn chain(&self, k: usize) -> ChainConfig {
        ChainConfig {
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            chain: k as u64,
            store_draws: self.store_draws,
            options: self.options,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Observations, one row each (`fit-precision`).
    pub data: Option<PathBuf>,
    /// Design matrix and response column (`fit-regression`).
    pub design: Option<PathBuf>,
    pub response: Option<PathBuf>,
    /// 0/1 adjacency matrix (`fit-mcar`, `elicit-prior`).
    pub adjacency: Option<PathBuf>,
    /// One CSV per replicate matrix (`fit-mcar`).
    pub replicates: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

/// A value attached to element `(i, j)`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementValue {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Box constraint on element `(i, j)`, 1-based; missing bounds are infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementBox {
    pub i: usize,
    pub j: usize,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerConfig {
    /// 0/1 adjacency CSV of the graph; complete graph when absent.
    pub graph: Option<PathBuf>,
    pub centers: Vec<ElementValue>,
    pub multipliers: Vec<ElementValue>,
    pub boxes: Vec<ElementBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulateKind {
    Precision,
    Regression,
    Mcar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub kind: SimulateKind,
    /// Covariance model 1-4 and its size (`precision`).
    pub model: u8,
    pub p: usize,
    pub n: usize,
    /// Coefficient configuration 1-5 and design (`regression`).
    pub beta_config: u8,
    pub correlated: bool,
    /// Lattice of regions, `ρ` and replicate count (`mcar`).
    pub lattice: [usize; 2],
    pub rho: f64,
    pub replicates: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            kind: SimulateKind::Precision,
            model: 1,
            p: 30,
            n: 30,
            beta_config: 1,
            correlated: false,
            lattice: [2, 5],
            rho: 0.9,
            replicates: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElicitConfig {
    pub taus: Vec<f64>,
    pub draws: usize,
    pub burnin: usize,
}

impl Default for ElicitConfig {
    fn default() -> Self {
        ElicitConfig {
            taus: vec![0.1, 1.0, 10.0],
            draws: 10_000,
            burnin: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Option<Command>,
    pub prior: BenchPrior,
    pub sampler: SamplerConfig,
    pub io: IoConfig,
    pub ledger: LedgerConfig,
    pub simulate: SimulateConfig,
    pub mcar: McarSpec,
    pub elicit: ElicitConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            command: None,
            prior: BenchPrior {
                family: Family::Logarithmic,
                tau: None,
            },
            sampler: SamplerConfig::default(),
            io: IoConfig::default(),
            ledger: LedgerConfig::default(),
            simulate: SimulateConfig::default(),
            mcar: McarSpec::default(),
            elicit: ElicitConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

/// Command-line values that replace their config counterparts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub chains: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses a JSON config; errors carry the JSON pointer of the offending value.
pub fn parse_json(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        Error::config(pointer, e.into_inner().to_string())
    })
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s.push_str(&format!("/{index}")),
            Segment::Map { key } => s.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => s.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    if s.is_empty() {
        s.push('/');
    }
    s
}

/// Reads the optional config file, applies the overrides and validates.
pub fn parse_config(path: Option<&Path>, command: Command, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = config.command {
        if c != command {
            return Err(Error::config(
                "/command",
                format!("config is for `{}` but `{}` was requested", c.name(), command.name()),
            ));
        }
    }
    config.command = Some(command);
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn command(&self) -> Command {
        self.command.unwrap_or(Command::FitPrecision)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.io.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if self.command == Some(Command::Bench) {
            let b = &mut self.bench;
            b.seed = o.seed.unwrap_or(b.seed);
            b.iters = o.iters.unwrap_or(b.iters);
            b.burnin = o.burnin.unwrap_or(b.burnin);
            b.thin = o.thin.unwrap_or(b.thin);
        }
        let s = &mut self.sampler;
        s.seed = o.seed.unwrap_or(s.seed);
        s.iters = o.iters.unwrap_or(s.iters);
        s.burnin = o.burnin.unwrap_or(s.burnin);
        s.thin = o.thin.unwrap_or(s.thin);
        s.chains = o.chains.unwrap_or(s.chains);
        if let Some(out) = &o.out {
            self.io.out = Some(out.clone());
        }
        if self.io.out.is_none() {
            self.io.out = Some(PathBuf::from("out"));
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "/schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        let cmd = self.command();
        if cmd == Command::Bench {
            return self.validate_bench();
        }
        if cmd != Command::Simulate {
            self.sampler.chain(0).validate()?;
            if self.sampler.chains == 0 {
                return Err(Error::config("/sampler/chains", "at least one chain is required"));
            }
        }
        at("/prior", self.prior.family.validate())?;
        at("/prior/tau", self.prior.hyper().validate(&self.prior.family))?;
        match cmd {
            Command::Simulate => self.validate_simulate(),
            Command::FitPrecision => {
                require_file("/io/data", &self.io.data)?;
                if let Some(g) = &self.ledger.graph {
                    require_file("/ledger/graph", &Some(g.clone()))?;
                }
                self.validate_ledger_entries()
            }
            Command::FitRegression => {
                require_file("/io/design", &self.io.design)?;
                require_file("/io/response", &self.io.response)
            }
            Command::FitMcar => {
                require_file("/io/adjacency", &self.io.adjacency)?;
                if self.io.replicates.is_empty() {
                    return Err(Error::config("/io/replicates", "at least one replicate CSV is required"));
                }
                for (k, r) in self.io.replicates.iter().enumerate() {
                    require_file(&format!("/io/replicates/{k}"), &Some(r.clone()))?;
                }
                at("/mcar", self.mcar.validate())
            }
            Command::ElicitPrior => {
                require_file("/io/adjacency", &self.io.adjacency)?;
                at("/mcar", self.mcar.validate())?;
                if self.elicit.draws == 0 {
                    return Err(Error::config("/elicit/draws", "draws must be positive"));
                }
                if self.elicit.taus.is_empty() || self.elicit.taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                    return Err(Error::config("/elicit/taus", "taus must be a non-empty list of positive values"));
                }
                Ok(())
            }
            Command::Bench => unreachable!("handled above"),
        }
    }

    fn validate_simulate(&self) -> Result<()> {
        let s = &self.simulate;
        match s.kind {
            SimulateKind::Precision => {
                at("/simulate/model", crate::bench::ModelSpec::new(s.model, s.p, 0).map(|_| ()))?;
                if s.n == 0 {
                    return Err(Error::config("/simulate/n", "n must be positive"));
                }
                Ok(())
            }
            SimulateKind::Regression => at(
                "/simulate/beta_config",
                crate::regression::scenario_beta(s.beta_config).map(|_| ()),
            ),
            SimulateKind::Mcar => {
                if s.lattice[0] * s.lattice[1] < 2 {
                    return Err(Error::config("/simulate/lattice", "the lattice needs at least two regions"));
                }
                if s.replicates == 0 {
                    return Err(Error::config("/simulate/replicates", "replicates must be positive"));
                }
                Ok(())
            }
        }
    }

    fn validate_bench(&self) -> Result<()> {
        let b = &self.bench;
        if b.iters <= b.burnin {
            return Err(Error::config(
                "/bench/iters",
                format!("iters ({}) must exceed burnin ({})", b.iters, b.burnin),
            ));
        }
        if b.thin == 0 {
            return Err(Error::config("/bench/thin", "thin must be at least 1"));
        }
        for &m in &b.models {
            at("/bench/models", crate::bench::ModelSpec::new(m, b.p, 0).map(|_| ()))?;
        }
        for (k, pr) in b.priors.iter().enumerate() {
            at(&format!("/bench/priors/{k}"), pr.family.validate())?;
            at(&format!("/bench/priors/{k}/tau"), pr.hyper().validate(&pr.family))?;
        }
        if b.n.contains(&0) {
            return Err(Error::config("/bench/n", "sample sizes must be positive"));
        }
        Ok(())
    }

    fn validate_ledger_entries(&self) -> Result<()> {
        let l = &self.ledger;
        let check = |ptr: String, i: usize, j: usize| {
            if i == 0 || j == 0 {
                Err(Error::config(ptr, "element indices are 1-based"))
            } else {
                Ok(())
            }
        };
        for (k, e) in l.centers.iter().enumerate() {
            check(format!("/ledger/centers/{k}"), e.i, e.j)?;
        }
        for (k, e) in l.multipliers.iter().enumerate() {
            check(format!("/ledger/multipliers/{k}"), e.i, e.j)?;
            if !(e.value > 0.0 && e.value.is_finite()) {
                return Err(Error::config(format!("/ledger/multipliers/{k}/value"), "multipliers must be positive"));
            }
        }
        for (k, b) in l.boxes.iter().enumerate() {
            check(format!("/ledger/boxes/{k}"), b.i, b.j)?;
            let lo = b.lo.unwrap_or(f64::NEG_INFINITY);
            let hi = b.hi.unwrap_or(f64::INFINITY);
            if !(lo < hi) {
                return Err(Error::config(format!("/ledger/boxes/{k}"), "box needs lo < hi"));
            }
        }
        Ok(())
    }
}

/// Re-tags model errors raised while validating a config section.
fn at(pointer: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(pointer, other.to_string()),
    })
}

fn require_file(pointer: &str, path: &Option<PathBuf>) -> Result<()> {
    match path {
        None => Err(Error::config(pointer, "a path is required for this command")),
        Some(p) if !p.is_file() => Err(Error::config(pointer, format!("{} does not exist", p.display()))),
        Some(_) => Ok(()),
    }
}
