//! Run configuration: a TOML file whose every key has an embedded default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lwi_core::eval::{ModelSpec, PlanParams};
use lwi_core::features::FeatureSpec;
use lwi_core::mbo::{Symbol, SynthParams};
use lwi_core::stats::{ScreenParams, DEFAULT_CONSENSUS_THRESHOLD};
use lwi_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub symbols: Vec<String>,
    /// Event files by symbol. `.mbo` is read as binary, anything else as
    /// CSV. Symbols without an entry read `{out}/synth/{symbol}.csv`.
    pub inputs: BTreeMap<String, PathBuf>,
    pub session: SessionConfig,
    pub features: FeatureSpec,
    pub screen: ScreenConfig,
    pub eval: EvalConfig,
    pub diag: DiagConfig,
    pub synth: SynthParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Session open, UTC nanoseconds.
    pub start_ns: u64,
    pub end_ns: u64,
    pub grid_ms: u64,
    pub warm_bins: usize,
}

// No deny_unknown_fields here: serde does not support it with flatten.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    pub horizon: usize,
    pub threshold: f64,
    #[serde(flatten)]
    pub params: ScreenParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub horizons: Vec<usize>,
    pub plan: PlanParams,
    pub models: Vec<ModelSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagConfig {
    pub adf_max_lags: usize,
    pub acf_max_lag: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out: PathBuf::from("out"),
            symbols: vec!["SYN".into()],
            inputs: BTreeMap::new(),
            session: SessionConfig::default(),
            features: FeatureSpec::default(),
            screen: ScreenConfig::default(),
            eval: EvalConfig::default(),
            diag: DiagConfig::default(),
            synth: SynthParams::default(),
        }
    }
}

impl Default for SessionConfig {
    fn default() -> Self {
        let start_ns = SynthParams::default().start_ns;
        Self {
            start_ns,
            end_ns: start_ns + 3_600 * 1_000_000_000,
            grid_ms: 250,
            warm_bins: 240,
        }
    }
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            horizon: 4,
            threshold: DEFAULT_CONSENSUS_THRESHOLD,
            params: ScreenParams::default(),
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1, 4, 8, 20],
            plan: PlanParams::default(),
            models: ModelSpec::default_suite(),
        }
    }
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self { adf_max_lags: 20, acf_max_lag: 40 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parse config text. `features.grid_ns` follows `session.grid_ms`
    /// unless given explicitly.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let explicit = table
            .get("features")
            .and_then(|f| f.as_table())
            .is_some_and(|f| f.contains_key("grid_ns"));
        if !explicit {
            cfg.features.grid_ns = cfg.grid_ns();
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("defaults serialize")
    }

    pub fn grid_ns(&self) -> u64 {
        self.session.grid_ms * 1_000_000
    }

    pub fn input_path(&self, symbol: &str) -> PathBuf {
        self.inputs
            .get(symbol)
            .cloned()
            .unwrap_or_else(|| self.out.join("synth").join(format!("{symbol}.csv")))
    }

    /// Check every setting. Reads nothing but the input paths.
    pub fn validate(&self, need_inputs: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.symbols.is_empty() {
            return bad("symbols must not be empty".into());
        }
        for s in &self.symbols {
            let tidy = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
            if !tidy || Symbol::new(s).is_none() {
                return bad(format!("invalid symbol '{s}'"));
            }
        }
        let mut sorted = self.symbols.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.symbols.len() {
            return bad("symbols must be unique".into());
        }
        if let Some(s) = self.inputs.keys().find(|s| !self.symbols.contains(s)) {
            return bad(format!("input given for unlisted symbol '{s}'"));
        }
        if self.session.grid_ms == 0 {
            return bad("session.grid_ms must be positive".into());
        }
        if self.session.end_ns <= self.session.start_ns {
            return bad("session.end_ns must be after session.start_ns".into());
        }
        if self.features.grid_ns != self.grid_ns() {
            return bad("features.grid_ns must equal session.grid_ms in nanoseconds".into());
        }
        self.features.validate()?;
        if self.eval.horizons.is_empty() {
            return bad("eval.horizons must not be empty".into());
        }
        for k in self.eval.horizons.iter().chain([&self.screen.horizon]) {
            if !self.features.horizons.contains(k) {
                return bad(format!("horizon {k} is not in features.horizons"));
            }
        }
        if self.eval.models.is_empty() {
            return bad("eval.models must not be empty".into());
        }
        self.eval.plan.validate()?;
        for m in &self.eval.models {
            m.validate()?;
        }
        self.screen.params.validate()?;
        if !(self.screen.threshold > 0.0 && self.screen.threshold <= 1.0) {
            return bad("screen.threshold must be in (0, 1]".into());
        }
        if self.diag.acf_max_lag == 0 {
            return bad("diag.acf_max_lag must be positive".into());
        }
        self.synth.validate()?;
        if need_inputs {
            for s in &self.symbols {
                let p = self.input_path(s);
                if let Err(e) = std::fs::File::open(&p) {
                    return bad(format!("input for {s} is not readable ({}): {e}", p.display()));
                }
            }
        }
        Ok(())
    }
}
