//! Run configuration: a TOML file plus command-line overrides, and the hash
//! that names each run directory.
//!
//! ```toml
//! seed = 0
//! input = "cohort.csv"
//! out_dir = "runs"
//!
//! [synth]
//! sizes = [49, 45, 32]
//! weeks = 51
//!
//! [classify]
//! window_length = 20
//! forest = { n_trees = 100 }
//!
//! [spectrum]
//! resolution = 200
//! bandwidth = "scott"   # or { fixed = 0.05 }
//! ```
//!
//! Relative paths in the file are taken relative to the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::encode::{Group, Instrument};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::spectrum::Bandwidth;
use crate::synth::{CohortSpec, GroupGenerator};
use crate::tasks::TaskConfig;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub synth: SynthSection,
    pub classify: TaskSection,
    pub predict_state: TaskSection,
    pub predict_score: TaskSection,
    pub spectrum: SpectrumSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            input: None,
            out_dir: PathBuf::from("runs"),
            synth: SynthSection::default(),
            classify: TaskSection::default(),
            predict_state: TaskSection::default(),
            predict_score: TaskSection::default(),
            spectrum: SpectrumSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub sizes: [usize; 3],
    pub weeks: usize,
    pub weeks_jitter: usize,
    /// Draw every group from the BD generator.
    pub no_signal: bool,
    /// Replace every missingness model with i.i.d. Bernoulli(`missing_rate`).
    pub missing_rate: Option<f64>,
    /// BD, HC, BPD; the built-in presets when absent.
    pub generators: Option<[GroupGenerator; 3]>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let spec = CohortSpec::default();
        Self {
            sizes: spec.sizes,
            weeks: spec.weeks,
            weeks_jitter: spec.weeks_jitter,
            no_signal: false,
            missing_rate: None,
            generators: None,
        }
    }
}

impl SynthSection {
    pub fn to_spec(&self, seed: u64) -> CohortSpec {
        let mut spec = CohortSpec {
            sizes: self.sizes,
            weeks: self.weeks,
            weeks_jitter: self.weeks_jitter,
            seed,
            ..CohortSpec::default()
        };
        if let Some(g) = &self.generators {
            spec.generators = g.clone();
        }
        if self.no_signal {
            spec = spec.no_signal();
        }
        if let Some(p) = self.missing_rate {
            spec = spec.with_missing_rate(p);
        }
        spec
    }
}

/// Task settings; anything left out keeps the task's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub window_length: Option<usize>,
    pub signature_level: Option<usize>,
    pub split_fraction: Option<f64>,
    pub instruments: Option<Vec<Instrument>>,
    pub groups: Option<Vec<Group>>,
    pub forest: Option<ForestParams>,
    pub bootstrap_resamples: Option<usize>,
    pub leave_one_out: Option<bool>,
    pub rollout_horizon: Option<usize>,
}

impl TaskSection {
    pub fn apply(&self, mut base: TaskConfig, seed: u64) -> TaskConfig {
        base.seed = seed;
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    base.$f = v.clone();
                }
            )*};
        }
        take!(
            window_length,
            signature_level,
            split_fraction,
            instruments,
            groups,
            forest,
            bootstrap_resamples,
            leave_one_out,
            rollout_horizon
        );
        base
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub resolution: usize,
    pub bandwidth: Bandwidth,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            resolution: 200,
            bandwidth: Bandwidth::Scott,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub trees: Option<usize>,
    pub bootstrap: Option<usize>,
}

impl RunConfig {
    /// Reads `path` if given, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let mut c: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() as u64 + 1),
                    message: e.message().to_string(),
                })?;
                let base = path.parent().unwrap_or(Path::new(""));
                c.input = c.input.map(|p| base.join(p));
                c.out_dir = base.join(&c.out_dir);
                c
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.input {
            self.input = Some(p.clone());
        }
        if let Some(p) = &o.out_dir {
            self.out_dir = p.clone();
        }
        for section in [&mut self.classify, &mut self.predict_state, &mut self.predict_score] {
            if let Some(t) = o.trees {
                section.forest.get_or_insert_with(ForestParams::default).n_trees = t;
            }
            if let Some(b) = o.bootstrap {
                section.bootstrap_resamples = Some(b);
            }
        }
    }

    pub fn classify_config(&self) -> TaskConfig {
        self.classify.apply(TaskConfig::classification(), self.seed)
    }

    pub fn state_config(&self) -> TaskConfig {
        self.predict_state.apply(TaskConfig::state_prediction(), self.seed)
    }

    pub fn score_config(&self) -> TaskConfig {
        self.predict_score.apply(TaskConfig::score_prediction(), self.seed)
    }

    /// The input path, which must name an existing file.
    pub fn require_input(&self) -> Result<&Path> {
        let path = self
            .input
            .as_deref()
            .ok_or_else(|| Error::invalid("no input file: pass --input or set `input` in the config"))?;
        if !path.is_file() {
            return Err(Error::invalid(format!("input {} is not a readable file", path.display())));
        }
        Ok(path)
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identifies a run: the command, its resolved settings and the input
/// contents. Paths and the output directory do not enter the hash.
pub fn config_hash(command: &str, settings: &impl Serialize, input_sha256: Option<&str>) -> Result<String> {
    let doc = serde_json::json!({
        "command": command,
        "settings": settings,
        "input_sha256": input_sha256,
    });
    Ok(sha256_hex(canonical_json(&doc).as_bytes())[..16].to_string())
}

/// JSON with object keys sorted at every depth.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<_> = m.keys().collect();
                keys.sort();
                Value::Object(keys.into_iter().map(|k| (k.clone(), sorted(&m[k]))).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    sorted(v).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "seed = 4\ninput = \"c.csv\"\n[classify]\nwindow_length = 12\nforest = { n_trees = 7 }\n[spectrum]\nbandwidth = { fixed = 0.05 }\n",
        )
        .unwrap();
        let c = RunConfig::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(c.input.as_deref(), Some(dir.path().join("c.csv").as_path()));
        let t = c.classify_config();
        assert_eq!((t.seed, t.window_length, t.forest.n_trees), (4, 12, 7));
        assert_eq!(c.state_config().window_length, 10);
        assert_eq!(c.spectrum.bandwidth, Bandwidth::Fixed(0.05));

        let o = Overrides {
            seed: Some(9),
            trees: Some(3),
            bootstrap: Some(50),
            ..Overrides::default()
        };
        let c = RunConfig::load(Some(&path), &o).unwrap();
        let t = c.classify_config();
        assert_eq!((t.seed, t.window_length, t.forest.n_trees, t.bootstrap_resamples), (9, 12, 3, 50));
        assert_eq!(c.score_config().forest.n_trees, 3);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "seed = 1\n\n[classify]\nwindow = 3\n").unwrap();
        match RunConfig::load(Some(&path), &Overrides::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_ignores_key_order_and_tracks_settings() {
        let a = serde_json::json!({"b": 1, "a": {"y": 2, "x": 3}});
        let b = serde_json::json!({"a": {"x": 3, "y": 2}, "b": 1});
        assert_eq!(canonical_json(&a), canonical_json(&b));
        let c = RunConfig::default();
        let h1 = config_hash("classify", &c.classify_config(), Some("ab")).unwrap();
        assert_eq!(h1.len(), 16);
        assert_eq!(h1, config_hash("classify", &c.classify_config(), Some("ab")).unwrap());
        assert_ne!(h1, config_hash("classify", &c.classify_config(), Some("ac")).unwrap());
        assert_ne!(h1, config_hash("classify", &c.classify_config().with_seed(1), Some("ab")).unwrap());
    }
}
