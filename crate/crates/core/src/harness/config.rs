//! Run configuration: TOML on disk, validated, with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::plasma::PlasmaParams;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Emtf,
    Eslm,
    Xmhd,
    /// ESLM and XMHD from the same data, compared after bridging.
    Paired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    PreparedRandom,
    Irrotational,
    SingleMode,
    FromFile,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn offset() -> f64 {
    0.1
}
fn dealias() -> f64 {
    2.0 / 3.0
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default = "default_recipe")]
    pub recipe: Recipe,
    /// H¹ norm of the raw velocities (random recipes) or mode amplitude.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Constant density perturbation n̄₀ shared by both species.
    #[serde(default = "offset")]
    pub density_offset: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

fn default_recipe() -> Recipe {
    Recipe::PreparedRandom
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData { recipe: default_recipe(), amplitude: 1.0, density_offset: offset(), path: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Points per axis.
    pub grid: usize,
    #[serde(default = "dealias")]
    pub dealias: f64,
    pub model: Model,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub epsilon_ladder: Option<Vec<f64>>,
    /// Slow-time horizon.
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Fixed maximal step; otherwise chosen from `cfl`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "half")]
    pub cfl: f64,
    /// Slow-time spacing of recorded samples; defaults to T/10.
    #[serde(default)]
    pub snapshot_interval: Option<f64>,
    #[serde(default = "yes")]
    pub write_snapshots: bool,
    #[serde(default = "one")]
    pub sobolev_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spectral_filter: bool,
    #[serde(default)]
    pub plasma: PlasmaParams,
    #[serde(default)]
    pub initial: InitialData,
}

impl RunConfig {
    /// Minimal configuration with every default applied.
    pub fn new(grid: usize, model: Model, t_end: f64) -> Self {
        RunConfig {
            grid,
            dealias: dealias(),
            model,
            epsilon: None,
            epsilon_ladder: None,
            t_end,
            dt: None,
            cfl: half(),
            snapshot_interval: None,
            write_snapshots: true,
            sobolev_sigma: 1.0,
            seed: 0,
            spectral_filter: false,
            plasma: PlasmaParams::default(),
            initial: InitialData::default(),
        }
    }

    /// ε values to run: the ladder if given, else the single ε.
    pub fn epsilons(&self) -> Vec<f64> {
        match (&self.epsilon_ladder, self.epsilon) {
            (Some(l), _) => l.clone(),
            (None, Some(e)) => vec![e],
            (None, None) => Vec::new(),
        }
    }

    /// Number of sampling intervals on [0, T].
    pub fn intervals(&self) -> usize {
        match self.snapshot_interval {
            Some(h) if h > 0.0 && self.t_end > 0.0 => ((self.t_end / h).round() as usize).max(1),
            _ => 10,
        }
    }

    /// Lists every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.grid < 8 || self.grid % 2 != 0 {
            errs.push(format!("grid must be even and at least 8, got {}", self.grid));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            errs.push(format!("dealias must lie in (0, 1], got {}", self.dealias));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            errs.push(format!("T must be a nonnegative number, got {}", self.t_end));
        }
        for e in self.epsilons() {
            if !(e > 0.0 && e <= 1.0) {
                errs.push(format!("epsilon values must lie in (0, 1], got {e}"));
            }
        }
        if self.model == Model::Emtf && self.epsilons().is_empty() {
            errs.push("model emtf needs epsilon or epsilon_ladder".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                errs.push(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.cfl > 0.0) {
            errs.push(format!("cfl must be positive, got {}", self.cfl));
        }
        if let Some(h) = self.snapshot_interval {
            if !(h > 0.0) {
                errs.push(format!("snapshot_interval must be positive, got {h}"));
            }
        }
        if !(self.sobolev_sigma >= 0.0) {
            errs.push(format!("sobolev_sigma must be nonnegative, got {}", self.sobolev_sigma));
        }
        if !(self.initial.amplitude >= 0.0 && self.initial.amplitude.is_finite()) {
            errs.push(format!("initial.amplitude must be finite and nonnegative, got {}", self.initial.amplitude));
        }
        if !self.initial.density_offset.is_finite() {
            errs.push("initial.density_offset must be finite".into());
        }
        if self.initial.recipe == Recipe::FromFile && self.initial.path.is_none() {
            errs.push("initial.recipe = \"from-file\" needs initial.path".into());
        }
        if let Err(e) = self.plasma.validate() {
            errs.push(format!("plasma: {e}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sets `a.b.c = value` inside a TOML table, creating sub-tables as needed.
fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> std::result::Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| format!("override {key}: {part} is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as TOML, falling back to a string.
fn parse_override(s: &str) -> std::result::Result<(String, toml::Value), String> {
    let (key, raw) = s.split_once('=').ok_or_else(|| format!("override {s:?} is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("override {s:?} has an empty key"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

/// Parses configuration text, applies overrides and validates.
pub fn parse_config(text: &str, origin: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(vec![format!("{origin}: {e}")]))?;
    let mut errs = Vec::new();
    for o in overrides {
        match parse_override(o).and_then(|(k, v)| set_dotted(&mut table, &k, v)) {
            Ok(()) => {}
            Err(e) => errs.push(e),
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("{origin}: {}", e.message())]))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    load_config_with(path, &[])
}

pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text, &path.display().to_string(), overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("grid = 16\nmodel = \"xmhd\"\nT = 0.1\n", "mem", &[]).unwrap();
        assert_eq!(c, RunConfig::new(16, Model::Xmhd, 0.1));
        assert_eq!(c.sobolev_sigma, 1.0);
        assert_eq!(c.intervals(), 10);
    }

    #[test]
    fn odd_grid_and_bad_epsilon_are_both_listed() {
        let err = parse_config("grid = 15\nmodel = \"emtf\"\nT = 0.1\nepsilon = 2.0\n", "mem", &[]).unwrap_err();
        match err {
            Error::Config(v) => {
                assert_eq!(v.len(), 2, "{v:?}");
                assert!(v[0].contains("even"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ladder_gives_three_runs() {
        let c = parse_config(
            "grid = 16\nmodel = \"emtf\"\nT = 0.1\nepsilon_ladder = [0.1, 0.05, 0.025]\n",
            "mem",
            &[],
        )
        .unwrap();
        assert_eq!(c.epsilons(), vec![0.1, 0.05, 0.025]);
    }

    #[test]
    fn unknown_keys_rejected_and_overrides_apply() {
        assert!(parse_config("grid = 16\nmodel = \"xmhd\"\nT = 0.1\ncolour = 3\n", "mem", &[]).is_err());
        let c = parse_config(
            "grid = 16\nmodel = \"xmhd\"\nT = 0.1\n",
            "mem",
            &["plasma.m_e=0.5".into(), "initial.recipe=single-mode".into(), "T=0.2".into()],
        )
        .unwrap();
        assert_eq!(c.plasma.m_e, 0.5);
        assert_eq!(c.initial.recipe, Recipe::SingleMode);
        assert_eq!(c.t_end, 0.2);
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = parse_config("grid = 16\nmodel = = 3\n", "cfg.toml", &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::new(16, Model::Xmhd, 0.1);
        let mut b = a.clone();
        b.seed = 1;
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
