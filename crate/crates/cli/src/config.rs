//! Experiment configuration: flat `key = value` text grouped into
//! `[sections]`, one experiment per file. `#` starts a comment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub train_images: PathBuf,
    pub train_labels: Option<PathBuf>,
    pub test_images: PathBuf,
    pub test_labels: Option<PathBuf>,
    pub image_size: usize,
    pub threshold: f64,
    /// 0 keeps every image.
    pub train_limit: usize,
    pub test_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub kind: String, // digits | smileys
    pub train_count: usize,
    pub test_count: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSection {
    pub beta: f64,
    /// 0 derives the count from beta (ceiling rule).
    pub k_patterns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleConfig {
    pub kind: String, // rayleigh | pink | imported
    pub grain: f64,
    pub exponent: f64,
    pub import_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub level: f64,
    pub apply_to: String, // test | train | both
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// 0 means 4 * d_model.
    pub d_ff: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    /// 0 disables early stopping.
    pub early_stop_loss: f64,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsSection {
    /// 0 selects the automatic rule.
    pub lambda: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub synth: SynthConfig,
    pub sampling: SamplingSection,
    pub speckles: SpeckleConfig,
    pub noise: NoiseConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub cs: CsSection,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {}", path.display(), e))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let sections = parse_sections(text)?;
        let get = |section: &str| sections.get(section).cloned().unwrap_or_default();

        let ds = get("dataset");
        let dataset = DatasetConfig {
            train_images: req_path(&ds, "dataset", "train_images")?,
            train_labels: opt_path(&ds, "train_labels"),
            test_images: req_path(&ds, "dataset", "test_images")?,
            test_labels: opt_path(&ds, "test_labels"),
            image_size: int(&ds, "image_size", 32)?,
            threshold: float(&ds, "threshold", 0.5)?,
            train_limit: int(&ds, "train_limit", 0)?,
            test_limit: int(&ds, "test_limit", 0)?,
        };
        known_keys(
            &ds,
            "dataset",
            &[
                "train_images",
                "train_labels",
                "test_images",
                "test_labels",
                "image_size",
                "threshold",
                "train_limit",
                "test_limit",
            ],
        )?;

        let sy = get("synth");
        let synth = SynthConfig {
            kind: string(&sy, "kind", "digits"),
            train_count: int(&sy, "train_count", 2000)?,
            test_count: int(&sy, "test_count", 100)?,
            size: int(&sy, "size", 28)?,
        };
        known_keys(&sy, "synth", &["kind", "train_count", "test_count", "size"])?;

        let sa = get("sampling");
        let sampling = SamplingSection {
            beta: float(&sa, "beta", 0.15)?,
            k_patterns: int(&sa, "k_patterns", 0)?,
        };
        known_keys(&sa, "sampling", &["beta", "k_patterns"])?;

        let sp = get("speckles");
        let speckles = SpeckleConfig {
            kind: string(&sp, "kind", "rayleigh"),
            grain: float(&sp, "grain", 2.0)?,
            exponent: float(&sp, "exponent", 1.0)?,
            import_path: opt_path(&sp, "import_path"),
        };
        known_keys(&sp, "speckles", &["kind", "grain", "exponent", "import_path"])?;

        let no = get("noise");
        let noise = NoiseConfig {
            level: float(&no, "level", 0.0)?,
            apply_to: string(&no, "apply_to", "test"),
        };
        known_keys(&no, "noise", &["level", "apply_to"])?;

        let mo = get("model");
        let model = ModelSection {
            enc_layers: int(&mo, "enc_layers", 6)?,
            dec_layers: int(&mo, "dec_layers", 6)?,
            d_model: int(&mo, "d_model", 512)?,
            n_heads: int(&mo, "n_heads", 8)?,
            d_ff: int(&mo, "d_ff", 0)?,
        };
        known_keys(&mo, "model", &["enc_layers", "dec_layers", "d_model", "n_heads", "d_ff"])?;

        let tr = get("train");
        let train = TrainSection {
            batch_size: int(&tr, "batch_size", 32)?,
            epochs: int(&tr, "epochs", 100)?,
            lr: float(&tr, "lr", 0.001)?,
            warmup_steps: int(&tr, "warmup_steps", 500)?,
            early_stop_loss: float(&tr, "early_stop_loss", 0.0)?,
            checkpoint_every: int(&tr, "checkpoint_every", 0)?,
        };
        known_keys(
            &tr,
            "train",
            &["batch_size", "epochs", "lr", "warmup_steps", "early_stop_loss", "checkpoint_every"],
        )?;

        let cs_s = get("cs");
        let cs = CsSection {
            lambda: float(&cs_s, "lambda", 0.0)?,
            max_iters: int(&cs_s, "max_iters", 500)?,
            rel_tol: float(&cs_s, "rel_tol", 1e-6)?,
        };
        known_keys(&cs_s, "cs", &["lambda", "max_iters", "rel_tol"])?;

        let run = get("run");
        let seed = run
            .get("seed")
            .ok_or_else(|| {
                CliError::Config("[run] seed is required; seeds are always explicit".into())
            })?
            .parse::<u64>()
            .map_err(|_| CliError::Config("bad [run] seed".into()))?;
        let out_dir = PathBuf::from(string(&run, "out_dir", "out"));
        known_keys(&run, "run", &["seed", "out_dir"])?;

        for section in sections.keys() {
            if !["dataset", "synth", "sampling", "speckles", "noise", "model", "train", "cs", "run"]
                .contains(&section.as_str())
            {
                return Err(CliError::Config(format!("unknown section [{}]", section)));
            }
        }

        let cfg = Self {
            dataset,
            synth,
            sampling,
            speckles,
            noise,
            model,
            train,
            cs,
            seed,
            out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.sampling.beta > 0.0 && self.sampling.beta <= 1.0) {
            return Err(CliError::Config(format!(
                "[sampling] beta {} outside (0, 1]",
                self.sampling.beta
            )));
        }
        let n = self.n_pixels();
        if self.n_patterns() < 1 {
            return Err(CliError::Config("sampling yields zero patterns".into()));
        }
        if self.sampling.k_patterns > n {
            return Err(CliError::Config(format!(
                "[sampling] k_patterns {} exceeds {} pixels",
                self.sampling.k_patterns, n
            )));
        }
        if !["rayleigh", "pink", "imported"].contains(&self.speckles.kind.as_str()) {
            return Err(CliError::Config(format!(
                "[speckles] kind {:?} is not rayleigh | pink | imported",
                self.speckles.kind
            )));
        }
        if !["test", "train", "both"].contains(&self.noise.apply_to.as_str()) {
            return Err(CliError::Config(format!(
                "[noise] apply_to {:?} is not test | train | both",
                self.noise.apply_to
            )));
        }
        if self.noise.level < 0.0 {
            return Err(CliError::Config("[noise] level must be nonnegative".into()));
        }
        if !["digits", "smileys"].contains(&self.synth.kind.as_str()) {
            return Err(CliError::Config(format!(
                "[synth] kind {:?} is not digits | smileys",
                self.synth.kind
            )));
        }
        if self.model.d_model == 0 || self.model.n_heads == 0 {
            return Err(CliError::Config("model dimensions must be positive".into()));
        }
        if self.model.d_model % self.model.n_heads != 0 {
            return Err(CliError::Config(format!(
                "[model] d_model {} not divisible by n_heads {}",
                self.model.d_model, self.model.n_heads
            )));
        }
        if !(self.dataset.threshold > 0.0 && self.dataset.threshold < 1.0) {
            return Err(CliError::Config("[dataset] threshold outside (0, 1)".into()));
        }
        Ok(())
    }

    pub fn n_pixels(&self) -> usize {
        self.dataset.image_size * self.dataset.image_size
    }

    /// Pattern count: explicit `k_patterns` when set, otherwise the ceiling
    /// of beta * n_pixels.
    pub fn n_patterns(&self) -> usize {
        if self.sampling.k_patterns > 0 {
            self.sampling.k_patterns
        } else {
            (self.sampling.beta * self.n_pixels() as f64).ceil() as usize
        }
    }

    pub fn effective_beta(&self) -> f64 {
        self.n_patterns() as f64 / self.n_pixels() as f64
    }

    pub fn d_ff(&self) -> usize {
        if self.model.d_ff > 0 {
            self.model.d_ff
        } else {
            4 * self.model.d_model
        }
    }

    /// Deterministic rendering of every resolved field; two configs with the
    /// same fingerprint produce the same artifacts under the same seed.
    pub fn canonical(&self) -> String {
        format!("{:#?}\nseed={}\n", self, self.seed)
    }

    pub fn fingerprint(&self) -> u32 {
        crc32fast::hash(self.canonical().as_bytes())
    }
}

fn parse_sections(
    text: &str,
) -> Result<BTreeMap<String, BTreeMap<String, String>>, CliError> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(idx) => &raw[..idx],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(CliError::Config(format!(
                    "line {}: malformed section header {:?}",
                    lineno + 1,
                    raw.trim()
                )));
            }
            let name = line[1..line.len() - 1].trim().to_string();
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("line {}: expected key = value, got {:?}", lineno + 1, raw))
        })?;
        let section = current.clone().ok_or_else(|| {
            CliError::Config(format!("line {}: key outside any [section]", lineno + 1))
        })?;
        sections
            .entry(section)
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(sections)
}

fn known_keys(
    map: &BTreeMap<String, String>,
    section: &str,
    allowed: &[&str],
) -> Result<(), CliError> {
    for key in map.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "unknown key {:?} in section [{}]",
                key, section
            )));
        }
    }
    Ok(())
}

fn string(map: &BTreeMap<String, String>, key: &str, default: &str) -> String {
    map.get(key).cloned().unwrap_or_else(|| default.to_string())
}

fn int(map: &BTreeMap<String, String>, key: &str, default: usize) -> Result<usize, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("bad integer for {}: {:?}", key, v))),
    }
}

fn float(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("bad number for {}: {:?}", key, v))),
    }
}

fn req_path(
    map: &BTreeMap<String, String>,
    section: &str,
    key: &str,
) -> Result<PathBuf, CliError> {
    map.get(key)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .ok_or_else(|| CliError::Config(format!("[{}] {} is required", section, key)))
}

fn opt_path(map: &BTreeMap<String, String>, key: &str) -> Option<PathBuf> {
    map.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = "\
[dataset]
train_images = data/train.idx
test_images = data/test.idx
image_size = 16

[run]
seed = 42
out_dir = out/test
";

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.dataset.image_size, 16);
        assert_eq!(cfg.n_pixels(), 256);
        assert_eq!(cfg.sampling.beta, 0.15);
        assert_eq!(cfg.n_patterns(), 39); // ceil(0.15 * 256)
        assert_eq!(cfg.model.d_model, 512);
        assert_eq!(cfg.d_ff(), 2048);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.train.epochs, 100);
        assert_eq!(cfg.train.lr, 0.001);
    }

    #[test]
    fn explicit_pattern_count_overrides_beta() {
        let text = format!("{}\n[sampling]\nbeta = 0.15\nk_patterns = 38\n", MINIMAL);
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.n_patterns(), 38);
        assert!((cfg.effective_beta() - 38.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# leading comment\n\n[dataset]\ntrain_images = a.idx # trailing\ntest_images = b.idx\n\n[run]\nseed = 1\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.dataset.train_images, PathBuf::from("a.idx"));
    }

    #[test]
    fn missing_seed_is_rejected() {
        let text = "[dataset]\ntrain_images = a\ntest_images = b\n[run]\nout_dir = o\n";
        assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let text = format!("{}\n[sampling]\nbeta = 0.1\ntypo_key = 3\n", MINIMAL);
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = format!("{}\n[unknown_section]\nx = 1\n", MINIMAL);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad_beta = format!("{}\n[sampling]\nbeta = 1.5\n", MINIMAL);
        assert!(ExperimentConfig::parse(&bad_beta).is_err());
        let bad_kind = format!("{}\n[speckles]\nkind = laser\n", MINIMAL);
        assert!(ExperimentConfig::parse(&bad_kind).is_err());
        let bad_heads = format!("{}\n[model]\nd_model = 100\nn_heads = 7\n", MINIMAL);
        assert!(ExperimentConfig::parse(&bad_heads).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let mut b = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 43;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
