//! Cross-method comparison: final returns and steps-to-peak.

use super::csv::read_numeric_csv;
use crate::error::{Error, Result};
use std::fmt;
use std::path::Path;

/// One run's evaluation curve, loaded back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub name: String,
    pub curve: Vec<(u64, f64)>,
}

impl LoadedRun {
    pub fn final_return(&self) -> f64 {
        self.curve.last().map(|&(_, r)| r).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn best_return(&self) -> f64 {
        self.curve
            .iter()
            .map(|&(_, r)| r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First evaluation step whose mean return reaches `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<u64> {
        self.curve
            .iter()
            .find(|&&(_, r)| r >= threshold)
            .map(|&(step, _)| step)
    }

    pub fn last_step(&self) -> u64 {
        self.curve.last().map(|&(s, _)| s).unwrap_or(0)
    }
}

/// Load one run directory, or every run directory nested directly under a
/// method directory.
pub fn load_method(dir: &Path) -> Result<Vec<LoadedRun>> {
    let load_run = |dir: &Path| -> Result<LoadedRun> {
        let rows = read_numeric_csv(&dir.join("eval.csv"), "step,mean_return,std_return")?;
        Ok(LoadedRun {
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string()),
            curve: rows.iter().map(|row| (row[0] as u64, row[1])).collect(),
        })
    };
    if dir.join("eval.csv").exists() {
        return Ok(vec![load_run(dir)?]);
    }
    let mut runs = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    entries.sort();
    for entry in entries {
        if entry.is_dir() && entry.join("eval.csv").exists() {
            runs.push(load_run(&entry)?);
        }
    }
    if runs.is_empty() {
        return Err(Error::Config(format!(
            "{} holds no run directories with eval.csv",
            dir.display()
        )));
    }
    Ok(runs)
}

/// Mean and std (divisor n) of a sample.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Median; for even counts, the mean of the middle pair.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Drop the floor(n/5) best and worst runs by final return (both trims, as
/// long as something remains).
fn trimmed(runs: &[LoadedRun]) -> Vec<&LoadedRun> {
    let k = runs.len() / 5;
    if k == 0 || runs.len() <= 2 * k {
        return runs.iter().collect();
    }
    let mut sorted: Vec<&LoadedRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.final_return().partial_cmp(&b.final_return()).expect("finite"));
    sorted[k..sorted.len() - k].to_vec()
}

#[derive(Debug, Clone)]
pub struct MethodStats {
    pub n_runs: usize,
    pub final_mean: f64,
    pub final_std: f64,
    pub trimmed_mean: f64,
    pub trimmed_std: f64,
    /// Per-run steps to the comparison threshold; None = never reached.
    pub steps_to_threshold: Vec<Option<u64>>,
    /// Median steps over the runs that reach the threshold; None when no
    /// run does (never-reached runs are markers, not numbers).
    pub median_steps: Option<f64>,
    pub n_reached: usize,
}

fn method_stats(runs: &[LoadedRun], threshold: f64) -> MethodStats {
    let finals: Vec<f64> = runs.iter().map(|r| r.final_return()).collect();
    let (final_mean, final_std) = mean_std(&finals);
    let trimmed_runs = trimmed(runs);
    let trimmed_finals: Vec<f64> = trimmed_runs.iter().map(|r| r.final_return()).collect();
    let (trimmed_mean, trimmed_std) = mean_std(&trimmed_finals);
    let steps_to_threshold: Vec<Option<u64>> =
        runs.iter().map(|r| r.steps_to_threshold(threshold)).collect();
    let reached: Vec<f64> = steps_to_threshold
        .iter()
        .flatten()
        .map(|&s| s as f64)
        .collect();
    MethodStats {
        n_runs: runs.len(),
        final_mean,
        final_std,
        trimmed_mean,
        trimmed_std,
        median_steps: if reached.is_empty() {
            None
        } else {
            Some(median(&reached))
        },
        n_reached: reached.len(),
        steps_to_threshold,
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub threshold: f64,
    pub baseline: MethodStats,
    pub candidate: MethodStats,
    pub baseline_name: String,
    pub candidate_name: String,
}

impl Comparison {
    /// Candidate median steps as a percentage of the baseline's; None when
    /// either method never reaches the threshold (or the ratio is 0/0-free
    /// only for a baseline that needed any steps at all).
    pub fn steps_percent(&self) -> Option<f64> {
        match (self.baseline.median_steps, self.candidate.median_steps) {
            (Some(b), Some(c)) if b > 0.0 => Some(100.0 * c / b),
            // Both at step zero: equal by construction.
            (Some(b), Some(c)) if b == 0.0 && c == 0.0 => Some(100.0),
            _ => None,
        }
    }
}

/// Compare two method directories. The threshold defaults to the
/// baseline's peak rule: the mean over baseline runs of each run's best
/// evaluation return.
pub fn compare(
    baseline_dir: &Path,
    candidate_dir: &Path,
    threshold_override: Option<f64>,
) -> Result<Comparison> {
    let baseline = load_method(baseline_dir)?;
    let candidate = load_method(candidate_dir)?;
    let bests: Vec<f64> = baseline.iter().map(|r| r.best_return()).collect();
    let threshold = threshold_override.unwrap_or_else(|| mean_std(&bests).0);
    Ok(Comparison {
        threshold,
        baseline: method_stats(&baseline, threshold),
        candidate: method_stats(&candidate, threshold),
        baseline_name: baseline_dir.display().to_string(),
        candidate_name: candidate_dir.display().to_string(),
    })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "threshold (baseline peak rule): {:.4}", self.threshold)?;
        writeln!(
            f,
            "{:<12} {:>6} {:>20} {:>20} {:>16} {:>10}",
            "method", "runs", "final mean+-std", "trimmed mean+-std", "median steps", "reached"
        )?;
        for (name, stats) in [
            (&self.baseline_name, &self.baseline),
            (&self.candidate_name, &self.candidate),
        ] {
            let median_text = stats
                .median_steps
                .map(|m| format!("{m:.0}"))
                .unwrap_or_else(|| "not reached".into());
            writeln!(
                f,
                "{:<12} {:>6} {:>12.4} +- {:<6.4} {:>12.4} +- {:<6.4} {:>16} {:>7}/{}",
                name,
                stats.n_runs,
                stats.final_mean,
                stats.final_std,
                stats.trimmed_mean,
                stats.trimmed_std,
                median_text,
                stats.n_reached,
                stats.n_runs
            )?;
        }
        match self.steps_percent() {
            Some(pct) => writeln!(
                f,
                "candidate reaches the baseline peak in {pct:.1}% of the baseline's steps \
                 (medians over reaching runs)"
            ),
            None => writeln!(f, "steps comparison unavailable: a method never reaches the threshold"),
        }
    }
}
