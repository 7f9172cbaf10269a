//! Runtime configuration.
//!
//! Sources, highest priority first: command-line flags, `STYLERAG_*`
//! environment variables, a key-value config file, built-in defaults.
//!
//! Config file format: one `key = value` per line; blank lines and lines
//! starting with `#` are ignored. Keys:
//!
//! | key | default |
//! |---|---|
//! | `db_dir` | `stylerag-db` |
//! | `dim` | `256` |
//! | `index_mode` | `clustered` (`exact`) |
//! | `n_clusters` | `auto` (round(sqrt(records))) |
//! | `probes` | `default` (ceil(sqrt(clusters))), `exhaustive` or a number |
//! | `seed` | `1592611239` |
//! | `quality_threshold` | `0.6` |
//! | `k` | `3` |
//! | `embedder.profile`, `embedder.emotion`, `embedder.user` | `reference` |
//! | `embedder.timeout_ms` | `5000` |
//! | `synthesizer` | `mock` |
//! | `processor.denoise`, `processor.diarize`, `processor.vad`, `processor.asr` | unset: taken from the manifest |
//! | `listen` | `127.0.0.1:8080` |
//! | `scripts_dir` | unset |
//! | `log` | `info` |
//!
//! The environment variable for a key is `STYLERAG_` followed by the key in
//! upper case with `.` replaced by `_`, e.g. `STYLERAG_EMBEDDER_PROFILE`.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::domain::{DEFAULT_DIM, DEFAULT_K};
use crate::embedders::{EmbedderEndpoint, EmbedderKind, EmbedderSet, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::index::IndexMode;
use crate::ingest::ProcessorLocators;
use crate::retrieval::Probes;
use crate::transport::DEFAULT_TIMEOUT_MS;

pub const ENV_PREFIX: &str = "STYLERAG_";

pub const KEYS: &[&str] = &[
    "db_dir",
    "dim",
    "index_mode",
    "n_clusters",
    "probes",
    "seed",
    "quality_threshold",
    "k",
    "embedder.profile",
    "embedder.emotion",
    "embedder.user",
    "embedder.timeout_ms",
    "synthesizer",
    "processor.denoise",
    "processor.diarize",
    "processor.vad",
    "processor.asr",
    "listen",
    "scripts_dir",
    "log",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProcessorOverrides {
    pub denoise: Option<String>,
    pub diarize: Option<String>,
    pub vad: Option<String>,
    pub asr: Option<String>,
}

impl ProcessorOverrides {
    pub fn apply(&self, base: &ProcessorLocators) -> ProcessorLocators {
        let pick = |o: &Option<String>, b: &String| o.clone().unwrap_or_else(|| b.clone());
        ProcessorLocators {
            denoise: pick(&self.denoise, &base.denoise),
            diarize: pick(&self.diarize, &base.diarize),
            vad: pick(&self.vad, &base.vad),
            asr: pick(&self.asr, &base.asr),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppConfig {
    pub db_dir: PathBuf,
    pub dim: usize,
    pub index_mode: IndexMode,
    /// `None`: round(sqrt(record count)).
    pub n_clusters: Option<usize>,
    pub probes: Probes,
    pub seed: u64,
    pub quality_threshold: f64,
    pub k: usize,
    pub embedder_profile: String,
    pub embedder_emotion: String,
    pub embedder_user: String,
    pub embedder_timeout_ms: u64,
    pub synthesizer: String,
    pub processors: ProcessorOverrides,
    pub listen: String,
    pub scripts_dir: Option<PathBuf>,
    pub log: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            db_dir: PathBuf::from("stylerag-db"),
            dim: DEFAULT_DIM,
            index_mode: IndexMode::Clustered,
            n_clusters: None,
            probes: Probes::Default,
            seed: DEFAULT_SEED,
            quality_threshold: 0.6,
            k: DEFAULT_K,
            embedder_profile: "reference".into(),
            embedder_emotion: "reference".into(),
            embedder_user: "reference".into(),
            embedder_timeout_ms: DEFAULT_TIMEOUT_MS,
            synthesizer: "mock".into(),
            processors: ProcessorOverrides::default(),
            listen: "127.0.0.1:8080".into(),
            scripts_dir: None,
            log: "info".into(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("{key} = {value:?}: {e}")))
}

fn positive(key: &str, value: &str) -> Result<usize> {
    match parse::<usize>(key, value)? {
        0 => Err(Error::InvalidArgument(format!("{key} must be positive"))),
        n => Ok(n),
    }
}

pub fn env_var_for(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace('.', "_"))
}

/// Parses the key-value config format.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("config line {}: expected key = value", n + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "config line {}: unknown key {k:?}",
                n + 1
            )));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl AppConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let opt = |v: &str| (!v.is_empty()).then(|| v.to_string());
        match key {
            "db_dir" => self.db_dir = PathBuf::from(value),
            "dim" => self.dim = positive(key, value)?,
            "index_mode" => {
                self.index_mode = match value {
                    "exact" => IndexMode::Exact,
                    "clustered" => IndexMode::Clustered,
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "index_mode must be exact or clustered, got {value:?}"
                        )))
                    }
                }
            }
            "n_clusters" => {
                self.n_clusters = if value == "auto" {
                    None
                } else {
                    Some(positive(key, value)?)
                }
            }
            "probes" => self.probes = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "quality_threshold" => {
                let t: f64 = parse(key, value)?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::InvalidArgument("quality_threshold must lie in [0, 1]".into()));
                }
                self.quality_threshold = t;
            }
            "k" => self.k = positive(key, value)?,
            "embedder.profile" => self.embedder_profile = value.to_string(),
            "embedder.emotion" => self.embedder_emotion = value.to_string(),
            "embedder.user" => self.embedder_user = value.to_string(),
            "embedder.timeout_ms" => self.embedder_timeout_ms = positive(key, value)? as u64,
            "synthesizer" => self.synthesizer = value.to_string(),
            "processor.denoise" => self.processors.denoise = opt(value),
            "processor.diarize" => self.processors.diarize = opt(value),
            "processor.vad" => self.processors.vad = opt(value),
            "processor.asr" => self.processors.asr = opt(value),
            "listen" => self.listen = value.to_string(),
            "scripts_dir" => self.scripts_dir = opt(value).map(PathBuf::from),
            "log" => self.log = value.to_string(),
            other => return Err(Error::InvalidArgument(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Layers defaults, the config file, the environment and flags.
    pub fn resolve(
        file: Option<&Path>,
        env: &HashMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<AppConfig> {
        let mut cfg = AppConfig::default();
        let file = file
            .map(Path::to_path_buf)
            .or_else(|| env.get(&format!("{ENV_PREFIX}CONFIG")).map(PathBuf::from));
        if let Some(path) = file {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for (k, v) in parse_config_text(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for key in KEYS {
            if let Some(v) = env.get(&env_var_for(key)) {
                cfg.set(key, v)?;
            }
        }
        for (k, v) in flags {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_process_env(file: Option<&Path>, flags: &BTreeMap<String, String>) -> Result<AppConfig> {
        let env: HashMap<String, String> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        Self::resolve(file, &env, flags)
    }

    pub fn embedder_set(&self, dim: usize) -> Result<EmbedderSet> {
        let ep = |kind, loc: &str| EmbedderEndpoint::from_locator(kind, loc, dim, self.seed, self.embedder_timeout_ms);
        EmbedderSet::from_endpoints(
            &ep(EmbedderKind::Profile, &self.embedder_profile)?,
            &ep(EmbedderKind::Emotion, &self.embedder_emotion)?,
            &ep(EmbedderKind::User, &self.embedder_user)?,
        )
    }

    pub fn index_path(&self) -> PathBuf {
        self.db_dir.join(INDEX_FILE)
    }

    pub fn records_path(&self) -> PathBuf {
        self.db_dir.join(RECORDS_FILE)
    }
}

pub const INDEX_FILE: &str = "index.asrx";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const CLIPS_FILE: &str = "clips.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_no_services() {
        let c = AppConfig::default();
        assert_eq!(c.embedder_profile, "reference");
        assert_eq!(c.synthesizer, "mock");
        assert_eq!(c.k, 3);
        c.embedder_set(c.dim).unwrap();
    }

    #[test]
    fn three_layers() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("stylerag.conf");
        std::fs::write(
            &file,
            "# db settings\nk = 5\ndim = 64\nquality_threshold = 0.7\nlisten = 0.0.0.0:1\n",
        )
        .unwrap();
        let env: HashMap<String, String> = [
            ("STYLERAG_DIM".to_string(), "32".to_string()),
            ("STYLERAG_QUALITY_THRESHOLD".to_string(), "0.8".to_string()),
            ("STYLERAG_EMBEDDER_USER".to_string(), "http://127.0.0.1:1".to_string()),
        ]
        .into();
        let flags: BTreeMap<String, String> = [("dim".to_string(), "16".to_string())].into();
        let c = AppConfig::resolve(Some(&file), &env, &flags).unwrap();
        assert_eq!(c.dim, 16); // flag over env over file
        assert_eq!(c.quality_threshold, 0.8); // env over file
        assert_eq!(c.k, 5); // file over default
        assert_eq!(c.listen, "0.0.0.0:1");
        assert_eq!(c.embedder_user, "http://127.0.0.1:1");
        assert_eq!(c.seed, DEFAULT_SEED);
    }

    #[test]
    fn config_file_from_env() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.conf");
        std::fs::write(&file, "probes = exhaustive\nn_clusters = 12\n").unwrap();
        let env: HashMap<String, String> = [("STYLERAG_CONFIG".to_string(), file.display().to_string())].into();
        let c = AppConfig::resolve(None, &env, &BTreeMap::new()).unwrap();
        assert_eq!(c.probes, Probes::Exhaustive);
        assert_eq!(c.n_clusters, Some(12));
    }

    #[test]
    fn bad_values() {
        assert!(parse_config_text("nonsense").is_err());
        assert!(parse_config_text("colour = blue").is_err());
        let mut c = AppConfig::default();
        assert!(c.set("dim", "0").is_err());
        assert!(c.set("quality_threshold", "1.5").is_err());
        assert!(c.set("index_mode", "graph").is_err());
        assert_eq!(env_var_for("embedder.timeout_ms"), "STYLERAG_EMBEDDER_TIMEOUT_MS");
    }
}
