//! Flat experiment configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` TOML file,
//! command-line flags. The output directory additionally falls back to
//! `$ARWLAB_OUT`, then `./arwlab-out`.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use arw_core::experiments::Regime;

pub const OUT_ENV: &str = "ARWLAB_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Stabilize,
    AbelianCheck,
    HierarchyBuild,
    LoopStabilize,
    Upsilon,
    Lemmas,
    Sweep,
    Scaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stabilize => "stabilize",
            Command::AbelianCheck => "abelian-check",
            Command::HierarchyBuild => "hierarchy-build",
            Command::LoopStabilize => "loop-stabilize",
            Command::Upsilon => "upsilon",
            Command::Lemmas => "lemmas",
            Command::Sweep => "sweep",
            Command::Scaling => "scaling",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureKind {
    LowestIndex,
    NearbySleepers,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaKind {
    SumGeometrics,
    BernoulliBound,
    NextColour,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Comonotone,
    Independent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "defaults::d")]
    pub d: u32,
    #[serde(default = "defaults::n")]
    pub n: u32,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "defaults::procedure")]
    pub procedure: ProcedureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<u32>>,
    #[serde(default = "defaults::seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "defaults::budget")]
    pub budget: u64,
    #[serde(default = "defaults::samples")]
    pub samples: u64,
    #[serde(default = "defaults::orders")]
    pub orders: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<LemmaKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerKind>,
    /// Run the loop model coupled to a reference stabilization.
    #[serde(default)]
    pub couple: bool,
    /// Serialized hierarchy to load instead of building one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

mod defaults {
    use super::ProcedureKind;

    pub fn d() -> u32 {
        2
    }
    pub fn n() -> u32 {
        8
    }
    pub fn lambda() -> f64 {
        1.0
    }
    pub fn procedure() -> ProcedureKind {
        ProcedureKind::LowestIndex
    }
    pub fn seeds() -> u64 {
        1
    }
    pub fn budget() -> u64 {
        100_000_000
    }
    pub fn samples() -> u64 {
        100_000
    }
    pub fn orders() -> usize {
        20
    }
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        // Every other field has a serde default.
        toml::from_str(&format!("command = \"{}\"", command.name())).expect("defaults parse")
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the TOML text with the output directory removed, so the
    /// same experiment written elsewhere keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("arwlab-out"))
    }
}

/// Flag overrides; every flag left out keeps the file or default value.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub d: Option<u32>,
    #[arg(long, global = true)]
    pub n: Option<u32>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Comma-separated densities.
    #[arg(long, global = true, value_delimiter = ',')]
    pub mu_grid: Option<Vec<f64>>,
    #[arg(long, global = true, value_parser = parse_regime)]
    pub regime: Option<Regime>,
    #[arg(long, global = true)]
    pub v: Option<u64>,
    #[arg(long, global = true)]
    pub d0: Option<u64>,
    #[arg(long, global = true)]
    pub r: Option<u32>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub procedure: Option<ProcedureKind>,
    /// Comma-separated cube side lengths.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sizes: Option<Vec<u32>>,
    #[arg(long, global = true)]
    pub seeds: Option<u64>,
    #[arg(long, global = true)]
    pub master_seed: Option<u64>,
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<u64>,
    #[arg(long, global = true)]
    pub orders: Option<usize>,
    #[arg(long, global = true)]
    pub lemma: Option<LemmaKind>,
    #[arg(long, global = true)]
    pub a: Option<f64>,
    #[arg(long, global = true)]
    pub b: Option<f64>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub vars: Option<usize>,
    #[arg(long, global = true)]
    pub sampler: Option<SamplerKind>,
    #[arg(long, global = true)]
    pub couple: bool,
    #[arg(long, global = true)]
    pub hierarchy: Option<PathBuf>,
    #[arg(long = "out", global = true)]
    pub output_dir: Option<PathBuf>,
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse().map_err(|e: arw_core::Error| e.to_string())
}

impl Overrides {
    pub fn apply(self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(x) = self.$f {
                    c.$f = x;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f;
                }
            )*};
        }
        set!(
            d,
            n,
            lambda,
            procedure,
            seeds,
            master_seed,
            budget,
            samples,
            orders
        );
        set_opt!(
            mu, mu_grid, regime, v, d0, r, beta, sizes, lemma, a, b, p, c, vars, sampler,
            hierarchy, output_dir
        );
        c.couple |= self.couple;
    }
}
