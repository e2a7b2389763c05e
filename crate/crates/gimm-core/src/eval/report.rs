use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub run: usize,
    pub fold: usize,
    pub accuracy: f64,
    pub chosen_c: Option<f64>,
}

/// Per-fold accuracies with per-run means; `std` is the population standard
/// deviation over run means (one mean per pipeline repetition).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_fold: Vec<FoldResult>,
    pub run_means: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub runtime_seconds: f64,
    pub config_echo: serde_json::Value,
}

impl EvalReport {
    pub fn from_folds(
        per_fold: Vec<FoldResult>,
        runs: usize,
        runtime_seconds: f64,
        config_echo: serde_json::Value,
    ) -> Self {
        let mut run_means = Vec::with_capacity(runs);
        for run in 0..runs {
            let accs: Vec<f64> = per_fold
                .iter()
                .filter(|f| f.run == run)
                .map(|f| f.accuracy)
                .collect();
            let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
            run_means.push(mean);
        }
        let mean = run_means.iter().sum::<f64>() / run_means.len().max(1) as f64;
        let var = run_means
            .iter()
            .map(|m| (m - mean) * (m - mean))
            .sum::<f64>()
            / run_means.len().max(1) as f64;
        EvalReport {
            per_fold,
            run_means,
            mean,
            std: var.sqrt(),
            runtime_seconds,
            config_echo,
        }
    }

    /// Majority chosen C across folds, when the graph-task grid ran.
    pub fn chosen_c_mode(&self) -> Option<f64> {
        let mut counts: Vec<(f64, usize)> = Vec::new();
        for f in &self.per_fold {
            let c = f.chosen_c?;
            match counts.iter_mut().find(|(v, _)| *v == c) {
                Some((_, n)) => *n += 1,
                None => counts.push((c, 1)),
            }
        }
        counts
            .into_iter()
            .max_by_key(|&(_, n)| n)
            .map(|(c, _)| c)
    }
}

/// `fold,run,accuracy` rows.
pub fn write_report_csv(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    let path = path.as_ref();
    let mut body = String::from("fold,run,accuracy\n");
    for f in &report.per_fold {
        body.push_str(&format!("{},{},{}\n", f.fold, f.run, f.accuracy));
    }
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_report_json(path: impl AsRef<Path>, report: &EvalReport) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_string_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
