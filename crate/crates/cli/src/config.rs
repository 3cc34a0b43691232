//! Experiment configuration.
//!
//! One TOML file describes a run. `scale` picks the base geometry (`paper` or
//! `desk`), the master `seed` fans out to every other seed, and any key given
//! in the file overrides the derived value. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ornn_core::data::SynthConfig;
use ornn_core::{DiffuserConfig, GaConfig, OpticsConfig, ReadoutConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// 600x800 modulator, 1024 grid, 480x640 camera, (20,16) pooling.
    #[default]
    Paper,
    /// 48x64 modulator, 128 grid, 48x64 camera, (4,4) pooling.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic(SynthConfig),
    /// IDX image/label pair; an optional second pair is the declared test split.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_images: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_labels: Option<PathBuf>,
    },
    /// Image files listed in a `path,label` CSV.
    ImageDir { root: PathBuf, manifest: PathBuf },
}

/// Seeds not owned by a component config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub subset: u64,
    pub split: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Independent (sample, start step) draws for the SSIM falloff.
    pub ssim_trials: usize,
    pub ssim_max_delta: i64,
    pub bit_depths: Vec<u8>,
    pub pool_sizes: Vec<(usize, usize)>,
    pub lda_components: usize,
}

impl AnalysisConfig {
    fn for_scale(scale: Scale) -> Self {
        let pool_sizes = match scale {
            Scale::Paper => vec![(10, 8), (20, 16), (40, 32), (80, 64)],
            Scale::Desk => vec![(2, 2), (4, 4), (8, 8), (16, 16)],
        };
        Self { ssim_trials: 5, ssim_max_delta: 9, bit_depths: vec![1, 2, 4, 8], pool_sizes, lda_components: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed.
    pub seed: u64,
    pub scale: Scale,
    /// Stratified subset size; 0 uses the whole dataset.
    pub subset: usize,
    pub dataset: DatasetSpec,
    pub optics: OpticsConfig,
    pub diffuser: DiffuserConfig,
    pub readout: ReadoutConfig,
    pub ga: GaConfig,
    pub seeds: Seeds,
    pub analysis: AnalysisConfig,
}

const SALT_SCREEN: u64 = 1;
const SALT_GA: u64 = 2;
const SALT_SUBSET: u64 = 3;
const SALT_SPLIT: u64 = 4;
const SALT_DATA: u64 = 5;
/// Offset between the master seed and the seeds of analysis trials.
pub const SALT_TRIAL: u64 = 6;

/// SplitMix64 of `master` mixed with a per-purpose salt, kept to 63 bits so it fits a TOML integer.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) >> 1
}

impl ExperimentConfig {
    /// Fully defaulted configuration for a dataset.
    pub fn new(dataset: DatasetSpec, scale: Scale, seed: u64) -> Self {
        let (optics, diffuser, readout) = match scale {
            Scale::Paper => (OpticsConfig::default(), DiffuserConfig::default(), ReadoutConfig::default()),
            Scale::Desk => (OpticsConfig::desk(), DiffuserConfig::desk(0), ReadoutConfig::desk()),
        };
        let mut cfg = Self {
            name: "experiment".into(),
            seed,
            scale,
            subset: 0,
            dataset,
            optics,
            diffuser,
            readout,
            ga: GaConfig::default(),
            seeds: Seeds { subset: 0, split: 0 },
            analysis: AnalysisConfig::for_scale(scale),
        };
        cfg.reseed(seed);
        cfg
    }

    /// Sets the master seed and re-derives every dependent seed.
    pub fn reseed(&mut self, master: u64) {
        self.seed = master;
        self.diffuser.seed = derive_seed(master, SALT_SCREEN);
        self.ga.rng_seed = derive_seed(master, SALT_GA);
        self.seeds = Seeds { subset: derive_seed(master, SALT_SUBSET), split: derive_seed(master, SALT_SPLIT) };
        if let DatasetSpec::Synthetic(s) = &mut self.dataset {
            s.seed = derive_seed(master, SALT_DATA);
        }
    }

    /// Parses TOML text; `seed_override` replaces the file's master seed before fan-out.
    pub fn from_toml_str(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let user: Table = text.parse().context("invalid TOML")?;
        let scale = match user.get("scale") {
            Some(v) => v.clone().try_into::<Scale>().context("scale must be \"paper\" or \"desk\"")?,
            None => Scale::default(),
        };
        let master = match (seed_override, user.get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => v.clone().try_into::<u64>().context("seed must be a non-negative integer")?,
            (None, None) => 0,
        };
        if master > i64::MAX as u64 {
            bail!("master seed {master} does not fit in 63 bits");
        }
        let Some(dataset) = user.get("dataset") else {
            bail!("the [dataset] section is required");
        };
        let dataset: DatasetSpec = dataset.clone().try_into().context("invalid [dataset] section")?;
        let base = Self::new(dataset, scale, master);
        let mut merged = Value::try_from(&base)?.as_table().cloned().expect("config serializes to a table");
        let mut user = user;
        user.insert("seed".into(), Value::Integer(master as i64));
        // An explicit seed in the file wins over the fan-out.
        deep_merge(&mut merged, user);
        let cfg: Self = Value::Table(merged).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text, seed_override).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        self.diffuser.validate()?;
        self.readout.validate()?;
        self.ga.validate()?;
        if let DatasetSpec::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        if self.analysis.bit_depths.iter().any(|b| !(1..=8).contains(b)) {
            bail!("analysis bit depths must lie in [1, 8]");
        }
        if self.analysis.ssim_trials == 0 {
            bail!("ssim_trials must be at least 1");
        }
        Ok(())
    }
}

fn deep_merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_is_fully_defaulted() {
        let cfg = ExperimentConfig::from_toml_str("[dataset]\nkind = \"synthetic\"\n", None).unwrap();
        assert_eq!(cfg.scale, Scale::Paper);
        assert_eq!(cfg.optics, OpticsConfig::default());
        assert_eq!(cfg.ga.generations, 12);
        assert_eq!(cfg.diffuser.seed, derive_seed(0, SALT_SCREEN));
    }

    #[test]
    fn file_values_override_preset_and_fan_out() {
        let text = "seed = 7\nscale = \"desk\"\n[dataset]\nkind = \"synthetic\"\nper_class = 10\n[readout]\nbit_depth = 2\n[ga]\nrng_seed = 99\n";
        let cfg = ExperimentConfig::from_toml_str(text, None).unwrap();
        assert_eq!(cfg.optics, OpticsConfig::desk());
        assert_eq!(cfg.readout.bit_depth, 2);
        assert_eq!(cfg.readout.pool_height, 4);
        assert_eq!(cfg.ga.rng_seed, 99);
        assert_eq!(cfg.diffuser.seed, derive_seed(7, SALT_SCREEN));
        let DatasetSpec::Synthetic(s) = &cfg.dataset else { panic!() };
        assert_eq!((s.per_class, s.seed), (10, derive_seed(7, SALT_DATA)));
    }

    #[test]
    fn seed_flag_beats_file() {
        let text = "seed = 7\n[dataset]\nkind = \"synthetic\"\n";
        let cfg = ExperimentConfig::from_toml_str(text, Some(3)).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.seeds.split, derive_seed(3, SALT_SPLIT));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "bogus = 1\n[dataset]\nkind = \"synthetic\"\n",
            "[dataset]\nkind = \"synthetic\"\n[optics]\nslm_hieght = 4\n",
            "[dataset]\nkind = \"synthetic\"\ncolour = 1\n",
            "[dataset]\nkind = \"idx\"\nimages = \"a\"\nlabels = \"b\"\nextra = 1\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(text, None).is_err(), "{text}");
        }
    }

    #[test]
    fn dataset_paths_are_required() {
        assert!(ExperimentConfig::from_toml_str("seed = 1\n", None).is_err());
        assert!(ExperimentConfig::from_toml_str("[dataset]\nkind = \"idx\"\nimages = \"a\"\n", None).is_err());
    }

    #[test]
    fn resolved_snapshot_round_trips() {
        let text = "seed = 11\nscale = \"desk\"\nsubset = 40\n[dataset]\nkind = \"synthetic\"\n";
        let cfg = ExperimentConfig::from_toml_str(text, None).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap(), None).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn derived_seeds_differ_by_purpose() {
        let s: Vec<u64> = (1..=6).map(|salt| derive_seed(0, salt)).collect();
        let mut d = s.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), s.len());
    }
}
