use anyhow::{Context, Result};
use odfm::datamodel::CsvOptions;
use odfm::outliers::PipelineConfig;
use odfm::simulation::SimConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    #[default]
    Table,
    Csv,
}

/// Everything a run depends on. Loaded from a file, overridden by flags,
/// and written back into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub format: Format,
    pub transform_spec: Option<String>,
    pub csv: CsvOptions,
    /// Adequacy, factor count, estimator and detection settings; `estimate`
    /// and `adequacy` read the relevant parts.
    pub pipeline: PipelineConfig,
    /// Fit all three estimators in `estimate`.
    pub all_estimators: bool,
    pub preset: Option<String>,
    pub simulation: Option<SimConfig>,
    pub per_replication: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: PathBuf::from("odfm-out"),
            seed: None,
            format: Format::default(),
            transform_spec: None,
            csv: CsvOptions::default(),
            pipeline: PipelineConfig::default(),
            all_estimators: false,
            preset: None,
            simulation: None,
            per_replication: false,
            threads: None,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub odfm_version: String,
    pub command: String,
    /// Seconds since the Unix epoch; the only field that changes on rerun.
    pub created_unix: u64,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

/// TOML when the extension says so, JSON otherwise.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// A run configuration, or the configuration recorded in a manifest.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if value.get("odfm_version").is_some() {
            let manifest: Manifest = serde_json::from_value(value).context("reading manifest")?;
            return Ok(manifest.config);
        }
        return serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()));
    }
    read_structured(path)
}
