use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptConfig;
use crate::data::LabeledSet;
use crate::domains::{
    gen_open_set, gen_toy, load_csv, BlobSpec, CsvData, OpenSetSpec, Preset, TOY_HIDDEN,
    TOY_N_PER_CLASS,
};
use crate::error::{Error, Result};
use crate::UnlabeledSet;

/// Environment variable naming the default root for run directories.
pub const OUT_ROOT_ENV: &str = "USFAN_OUT_ROOT";

/// One experiment, read from TOML.
///
/// Every field has a default, so an empty file is a valid run with the
/// default hyperparameters on the mild toy preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Run directory. When absent it is `<root>/<name>`, where the root comes
    /// from `USFAN_OUT_ROOT` or defaults to `runs`.
    pub output_dir: Option<PathBuf>,
    pub hidden: Vec<usize>,
    pub data: DataConfig,
    pub adapt: AdaptConfig,
    pub eval: EvalConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "toy".into(),
            output_dir: None,
            hidden: TOY_HIDDEN.to_vec(),
            data: DataConfig::default(),
            adapt: AdaptConfig::default(),
            eval: EvalConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Either a toy preset (optionally at an interpolated shift scale) or CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub preset: Preset,
    /// Overrides `preset` with a mild-to-strong interpolation.
    pub shift_scale: Option<f64>,
    pub n_per_class: usize,
    pub seed: u64,
    /// Adds a far-away target-only class.
    pub open_set: bool,
    pub n_private: usize,
    pub source_csv: Option<PathBuf>,
    pub target_csv: Option<PathBuf>,
    /// Labelled source rows used to calibrate the open-set threshold.
    pub holdout_csv: Option<PathBuf>,
    /// Required with CSV data.
    pub num_classes: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Mild,
            shift_scale: None,
            n_per_class: TOY_N_PER_CLASS,
            seed: 0,
            open_set: false,
            n_private: 50,
            source_csv: None,
            target_csv: None,
            holdout_csv: None,
            num_classes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Map,
    Predictive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub mode: EvalMode,
    /// `[x_min, x_max, y_min, y_max]`.
    pub grid_bounds: [f64; 4],
    pub grid_resolution: [usize; 2],
    pub histogram_bins: usize,
    /// Source-entropy quantile used as the open-set threshold.
    pub unknown_quantile: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::Predictive,
            grid_bounds: [-8.0, 6.0, -5.0, 8.0],
            grid_resolution: [100, 100],
            histogram_bins: 20,
            unknown_quantile: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub scales: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scales: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            seeds: (0..5).collect(),
        }
    }
}

/// Source, target and calibration data for one run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub source: LabeledSet,
    /// Absent when the target CSV has no label column.
    pub target: Option<LabeledSet>,
    pub target_inputs: UnlabeledSet,
    pub holdout: Option<LabeledSet>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.adapt.validate()?;
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        let d = &self.data;
        if d.source_csv.is_some() != d.target_csv.is_some() {
            return Err(Error::Config("source_csv and target_csv must be given together".into()));
        }
        if d.source_csv.is_some() && d.num_classes.is_none() {
            return Err(Error::Config("CSV data needs data.num_classes".into()));
        }
        if let Some(s) = d.shift_scale {
            if !s.is_finite() {
                return Err(Error::Config("shift_scale must be finite".into()));
            }
        }
        if self.eval.histogram_bins == 0 || self.eval.grid_resolution.contains(&0) {
            return Err(Error::Config("histogram bins and grid resolution must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eval.unknown_quantile) {
            return Err(Error::Config("unknown_quantile must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Run directory, resolved against the output-root environment variable.
    pub fn run_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(dir) => dir.clone(),
            None => {
                let root = std::env::var_os(OUT_ROOT_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("runs"));
                root.join(&self.name)
            }
        }
    }

    pub fn uses_csv(&self) -> bool {
        self.data.source_csv.is_some()
    }

    /// Toy domain description, or `None` for CSV data.
    pub fn blob_spec(&self) -> Option<BlobSpec> {
        if self.uses_csv() {
            return None;
        }
        let d = &self.data;
        Some(match d.shift_scale {
            Some(s) => BlobSpec::shift_scale(s, d.n_per_class, d.seed),
            None => BlobSpec::preset(d.preset, d.n_per_class, d.seed),
        })
    }

    pub fn load_data(&self) -> Result<RunData> {
        match self.blob_spec() {
            Some(spec) => {
                let (source, target) = if self.data.open_set {
                    gen_open_set(&OpenSetSpec::far_private(spec.clone(), self.data.n_private))?
                } else {
                    gen_toy(&spec)?
                };
                // A fresh source draw for threshold calibration.
                let held = BlobSpec {
                    seed: spec.seed ^ 0x6a09_e667_f3bc_c908,
                    ..spec
                };
                let (holdout, _) = gen_toy(&held)?;
                Ok(RunData {
                    target_inputs: target.unlabeled(),
                    target: Some(target),
                    source,
                    holdout: Some(holdout),
                })
            }
            None => {
                let d = &self.data;
                let k = d.num_classes;
                let source = load_labeled(d.source_csv.as_ref().unwrap(), k)?;
                // An open-set target carries one extra label value.
                let target_k = k.map(|k| if d.open_set { k + 1 } else { k });
                let target = load_csv(d.target_csv.as_ref().unwrap(), target_k)?;
                let target_inputs = UnlabeledSet::new(target.inputs().clone())?;
                let target = match target {
                    CsvData::Labeled(set) => Some(set),
                    CsvData::Unlabeled(_) => None,
                };
                let holdout = match &d.holdout_csv {
                    Some(p) => Some(load_labeled(p, k)?),
                    None => None,
                };
                Ok(RunData {
                    source,
                    target,
                    target_inputs,
                    holdout,
                })
            }
        }
    }
}

fn load_labeled(path: &Path, k: Option<usize>) -> Result<LabeledSet> {
    load_csv(path, k)?
        .into_labeled()
        .ok_or_else(|| Error::format(path, "a label column is required"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn dotted_sections_override() {
        let cfg = RunConfig::from_toml(
            "name = \"x\"\n[adapt]\ngamma = 0.3\n[adapt.schedule]\neta0 = 0.05\n[data]\npreset = \"strong\"\n",
        )
        .unwrap();
        assert_eq!(cfg.adapt.gamma, 0.3);
        assert_eq!(cfg.adapt.schedule.eta0, 0.05);
        assert_eq!(cfg.adapt.schedule.momentum, 0.9);
        assert_eq!(cfg.data.preset, Preset::Strong);
    }

    #[test]
    fn resolved_round_trip() {
        let mut cfg = RunConfig { output_dir: Some("runs/a".into()), ..RunConfig::default() };
        cfg.data.shift_scale = Some(0.5);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        for text in ["unknown = 1", "[adapt]\ngamma = 2.0", "[data]\nsource_csv = \"a.csv\""] {
            assert_eq!(RunConfig::from_toml(text).unwrap_err().exit_code(), 1, "{text}");
        }
    }
}
