//! Flat `key = value` run configuration.
//!
//! Every field has a default; a file only overrides what it names. Values
//! serialize through the shortest round-trip float form, so
//! parse -> serialize -> parse is a fixed point.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gimm_core::contrast::{ContrastConfig, EmbeddingCombination};
use gimm_core::error::{Error, Result};
use gimm_core::eval::{LogRegConfig, PipelineConfig};
use gimm_core::graphdata::{
    load_edgelist_csv, load_tudataset, planted_motif_generate, sbm_dataset, GraphDataset,
};
use gimm_core::rng as seedstream;
use gimm_core::viewgen::{GeneratorConfig, ViewSamplerConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // dataset
    pub dataset_format: String, // tudataset | edgelist | sbm | motif
    pub dataset_path: String,
    pub dataset_name: String,
    pub edges_path: String,
    pub features_path: String,
    pub labels_path: String,
    pub sbm_blocks: String,
    pub sbm_p_in: f64,
    pub sbm_p_out: f64,
    pub sbm_features: usize,
    pub motif_graphs: usize,
    // generator
    pub gen_hidden_dim: usize,
    pub gen_tau: f64,
    pub gen_eps: f64,
    pub gen_lambda: f64,
    pub gen_epochs: usize,
    pub gen_lr: f64,
    pub gen_adversary_layers: usize,
    pub gen_projection_layers: usize,
    pub gen_zeta: f64,
    pub gen_batch_size: usize,
    pub gen_include_positive: bool,
    // view sampler
    pub view_p_s1_1: f64,
    pub view_p_s1_2: f64,
    pub view_p_s2_1: f64,
    pub view_p_s2_2: f64,
    pub view_p_t: f64,
    // contrast
    pub con_lr: f64,
    pub con_epochs: usize,
    pub con_batch_size: usize,
    pub con_eps: f64,
    pub con_embed_dim: usize,
    pub con_gcn_layers: usize,
    pub con_gin_layers: usize,
    pub con_head_layers: usize,
    pub con_combination: String, // views_plus_double_original | views_only
    pub con_resample_views: bool,
    pub con_include_positive: bool,
    // evaluation
    pub logreg_lr: f64,
    pub logreg_l2: f64,
    pub logreg_epochs: usize,
    pub svm_iters: usize,
    pub runs: usize,
    pub kfolds: usize,
    pub ratio_train: f64,
    pub ratio_test: f64,
    pub ratio_val: f64,
    pub sweep_grid: String,
    // misc
    pub seed: u64,
    pub out_dir: String,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_format: "motif".into(),
            dataset_path: "data/MUTAG".into(),
            dataset_name: "MUTAG".into(),
            edges_path: "edges.csv".into(),
            features_path: "features.csv".into(),
            labels_path: "labels.csv".into(),
            sbm_blocks: "150,150".into(),
            sbm_p_in: 0.2,
            sbm_p_out: 0.02,
            sbm_features: 16,
            motif_graphs: 40,
            gen_hidden_dim: 128,
            gen_tau: 0.4,
            gen_eps: 0.5,
            gen_lambda: 0.01,
            gen_epochs: 50,
            gen_lr: 1e-3,
            gen_adversary_layers: 1,
            gen_projection_layers: 1,
            gen_zeta: 0.0,
            gen_batch_size: 8,
            gen_include_positive: false,
            view_p_s1_1: 0.3,
            view_p_s1_2: 0.4,
            view_p_s2_1: 0.2,
            view_p_s2_2: 0.3,
            view_p_t: 0.7,
            con_lr: 1e-3,
            con_epochs: 60,
            con_batch_size: 32,
            con_eps: 0.5,
            con_embed_dim: 128,
            con_gcn_layers: 2,
            con_gin_layers: 3,
            con_head_layers: 2,
            con_combination: "views_plus_double_original".into(),
            con_resample_views: false,
            con_include_positive: false,
            logreg_lr: 0.01,
            logreg_l2: 1e-4,
            logreg_epochs: 500,
            svm_iters: 800,
            runs: 5,
            kfolds: 10,
            ratio_train: 0.8,
            ratio_test: 0.1,
            ratio_val: 0.1,
            sweep_grid: "0.0,0.1,0.3,0.7,0.9,1.0".into(),
            seed: 0,
            out_dir: "out".into(),
            jobs: 1,
        }
    }
}

macro_rules! config_fields {
    ($($name:ident : $kind:ident),* $(,)?) => {
        impl RunConfig {
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($name) => {
                        self.$name = parse_value!($kind, key, value)?;
                        Ok(())
                    })*
                    _ => Err(Error::Config(format!("unknown config key {key:?}"))),
                }
            }

            pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($name), format_value!($kind, &self.$name))),*]
            }
        }
    };
}

macro_rules! parse_value {
    (string, $key:expr, $value:expr) => {
        Ok::<String, Error>($value.to_string())
    };
    (f64, $key:expr, $value:expr) => {
        $value
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{}: expected a real number, got {:?}", $key, $value)))
    };
    (usize, $key:expr, $value:expr) => {
        $value
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{}: expected a non-negative integer, got {:?}", $key, $value)))
    };
    (u64, $key:expr, $value:expr) => {
        $value
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("{}: expected a non-negative integer, got {:?}", $key, $value)))
    };
    (bool, $key:expr, $value:expr) => {
        match $value {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::Config(format!(
                "{}: expected true or false, got {:?}",
                $key, other
            ))),
        }
    };
}

macro_rules! format_value {
    (string, $v:expr) => {
        $v.clone()
    };
    ($other:ident, $v:expr) => {
        format!("{}", $v)
    };
}

config_fields! {
    dataset_format: string,
    dataset_path: string,
    dataset_name: string,
    edges_path: string,
    features_path: string,
    labels_path: string,
    sbm_blocks: string,
    sbm_p_in: f64,
    sbm_p_out: f64,
    sbm_features: usize,
    motif_graphs: usize,
    gen_hidden_dim: usize,
    gen_tau: f64,
    gen_eps: f64,
    gen_lambda: f64,
    gen_epochs: usize,
    gen_lr: f64,
    gen_adversary_layers: usize,
    gen_projection_layers: usize,
    gen_zeta: f64,
    gen_batch_size: usize,
    gen_include_positive: bool,
    view_p_s1_1: f64,
    view_p_s1_2: f64,
    view_p_s2_1: f64,
    view_p_s2_2: f64,
    view_p_t: f64,
    con_lr: f64,
    con_epochs: usize,
    con_batch_size: usize,
    con_eps: f64,
    con_embed_dim: usize,
    con_gcn_layers: usize,
    con_gin_layers: usize,
    con_head_layers: usize,
    con_combination: string,
    con_resample_views: bool,
    con_include_positive: bool,
    logreg_lr: f64,
    logreg_l2: f64,
    logreg_epochs: usize,
    svm_iters: usize,
    runs: usize,
    kfolds: usize,
    ratio_train: f64,
    ratio_test: f64,
    ratio_val: f64,
    sweep_grid: string,
    seed: u64,
    out_dir: string,
    jobs: usize,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = RunConfig::default();
        for (no, raw) in body.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Format {
                    path: path.display().to_string(),
                    line: no + 1,
                    msg: format!("expected key = value, got {raw:?}"),
                });
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies a `--set key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(Error::Config(format!(
                "--set expects key=value, got {spec:?}"
            )));
        };
        self.set(key.trim(), value.trim())
    }

    /// Field-level validation, run before any dataset access.
    pub fn validate(&self) -> Result<()> {
        match self.dataset_format.as_str() {
            "tudataset" | "edgelist" | "sbm" | "motif" => {}
            other => {
                return Err(Error::Config(format!(
                    "dataset_format: expected tudataset|edgelist|sbm|motif, got {other:?}"
                )))
            }
        }
        match self.con_combination.as_str() {
            "views_plus_double_original" | "views_only" => {}
            other => {
                return Err(Error::Config(format!(
                    "con_combination: expected views_plus_double_original|views_only, got {other:?}"
                )))
            }
        }
        if self.dataset_format == "tudataset" && self.dataset_path.is_empty() {
            return Err(Error::Config("dataset_path: must not be empty".into()));
        }
        self.generator_config().validate()?;
        self.sampler_config().validate()?;
        self.contrast_config().validate()?;
        let total = self.ratio_train + self.ratio_test + self.ratio_val;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "ratio_train/test/val must sum to 1, got {total}"
            )));
        }
        if self.runs == 0 || self.kfolds == 0 {
            return Err(Error::Config("runs and kfolds must be positive".into()));
        }
        self.sweep_grid_values()?;
        self.sbm_block_sizes()?;
        Ok(())
    }

    pub fn sweep_grid_values(&self) -> Result<Vec<f64>> {
        self.sweep_grid
            .split(',')
            .map(|v| {
                let x = v.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!("sweep_grid: bad value {v:?}"))
                })?;
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Config(format!(
                        "sweep_grid: {x} outside [0, 1]"
                    )));
                }
                Ok(x)
            })
            .collect()
    }

    fn sbm_block_sizes(&self) -> Result<Vec<usize>> {
        self.sbm_blocks
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("sbm_blocks: bad size {v:?}")))
            })
            .collect()
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            hidden_dim: self.gen_hidden_dim,
            tau: self.gen_tau,
            eps: self.gen_eps,
            lambda: self.gen_lambda,
            epochs: self.gen_epochs,
            lr: self.gen_lr,
            adversary_layers: self.gen_adversary_layers,
            projection_layers: self.gen_projection_layers,
            zeta: self.gen_zeta,
            batch_size: self.gen_batch_size,
            include_positive_in_denominator: self.gen_include_positive,
            seed: self.seed,
        }
    }

    pub fn sampler_config(&self) -> ViewSamplerConfig {
        ViewSamplerConfig {
            p_s1: (self.view_p_s1_1, self.view_p_s1_2),
            p_s2: (self.view_p_s2_1, self.view_p_s2_2),
            p_t: self.view_p_t,
            seed: self.seed,
        }
    }

    pub fn contrast_config(&self) -> ContrastConfig {
        ContrastConfig {
            lr: self.con_lr,
            epochs: self.con_epochs,
            batch_size: self.con_batch_size,
            eps: self.con_eps,
            embed_dim: self.con_embed_dim,
            gcn_layers: self.con_gcn_layers,
            gin_layers: self.con_gin_layers,
            head_layers: self.con_head_layers,
            embedding_combination: if self.con_combination == "views_only" {
                EmbeddingCombination::ViewsOnly
            } else {
                EmbeddingCombination::ViewsPlusDoubleOriginal
            },
            resample_views_each_epoch: self.con_resample_views,
            include_positive_in_denominator: self.con_include_positive,
            seed: self.seed,
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            generator: self.generator_config(),
            sampler: self.sampler_config(),
            contrast: self.contrast_config(),
            logreg: LogRegConfig {
                lr: self.logreg_lr,
                l2: self.logreg_l2,
                epochs: self.logreg_epochs,
            },
            svm_iters: self.svm_iters,
            runs: self.runs,
            kfolds: self.kfolds,
            node_ratios: (self.ratio_train, self.ratio_test, self.ratio_val),
            jobs: self.jobs,
            master_seed: self.seed,
        }
    }

    pub fn load_dataset(&self) -> Result<GraphDataset> {
        match self.dataset_format.as_str() {
            "tudataset" => load_tudataset(&self.dataset_path, &self.dataset_name),
            "edgelist" => {
                load_edgelist_csv(&self.edges_path, &self.features_path, &self.labels_path)
            }
            "sbm" => {
                let blocks = self.sbm_block_sizes()?;
                sbm_dataset(
                    &blocks,
                    self.sbm_p_in,
                    self.sbm_p_out,
                    self.sbm_features,
                    &mut seedstream::stream(self.seed, "dataset"),
                )
            }
            "motif" => planted_motif_generate(
                self.motif_graphs,
                &mut seedstream::stream(self.seed, "dataset"),
            ),
            other => Err(Error::Config(format!("dataset_format: {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_is_fixed_point() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("run.cfg");
        fs::write(&path, "gen_tau = 0.25\nseed = 7\ndataset_format = sbm\n").unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.gen_tau, 0.25);
        assert_eq!(cfg.seed, 7);

        let serialized = cfg.serialize();
        let path2 = tmp.path().join("run2.cfg");
        fs::write(&path2, &serialized).unwrap();
        let cfg2 = RunConfig::from_file(&path2).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(cfg2.serialize(), serialized);
    }

    #[test]
    fn unknown_key_and_bad_values_fail_with_field_messages() {
        let mut cfg = RunConfig::default();
        let err = cfg.set("bogus_key", "1").unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
        let err = cfg.set("gen_tau", "fast").unwrap_err();
        assert!(err.to_string().contains("gen_tau"));
        let err = cfg.apply_override("gen_tau").unwrap_err();
        assert!(err.to_string().contains("key=value"));
        cfg.apply_override("gen_tau=0.7").unwrap();
        assert_eq!(cfg.gen_tau, 0.7);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut cfg = RunConfig::default();
        cfg.dataset_format = "hdf5".into();
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.gen_tau = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.ratio_val = 0.3;
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig::default();
        cfg.sweep_grid = "0.1,2.0".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn every_field_round_trips_through_set() {
        // each serialized pair must be accepted back by `set`
        let cfg = RunConfig::default();
        let mut rebuilt = RunConfig::default();
        for (k, v) in cfg.to_pairs() {
            rebuilt.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
        assert_eq!(cfg, rebuilt);
        assert_eq!(cfg.to_pairs().len(), cfg.serialize().lines().count());
    }
}
