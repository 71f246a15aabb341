use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_metrics, MetricRow, ThresholdConfig};
use crate::agents::EpisodeRecord;
use crate::error::Result;

/// Mean and sample standard deviation (zero for fewer than two values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() };
        Self { mean, sd, n }
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Episodes run when the trailing `window`-episode mean of the mean step
/// reward first reaches the threshold; `None` if it never does.
pub fn episodes_to_threshold(records: &[EpisodeRecord], t: &ThresholdConfig) -> Option<u64> {
    let w = t.window.max(1);
    if records.len() < w {
        return None;
    }
    (w..=records.len())
        .find(|&end| records[end - w..end].iter().map(|r| r.mean_step_reward).sum::<f64>() / w as f64 >= t.mean_step_reward)
        .map(|end| end as u64)
}

/// Per-run means over its episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub cell: String,
    pub seed: u64,
    pub episodes: u64,
    pub mean_reward: f64,
    pub mean_step_reward: f64,
    pub mean_length: f64,
    /// Guided steps over all steps.
    pub intervention_rate: f64,
    pub success_rate: f64,
    pub mean_yaw_rate: f64,
    pub mean_lat_accel: f64,
    /// Mean step reward over the last `final_window` episodes.
    pub final_step_reward: f64,
    pub episodes_to_threshold: Option<u64>,
}

impl RunSummary {
    pub fn from_records(run_id: &str, seed: u64, records: &[EpisodeRecord], t: &ThresholdConfig) -> Self {
        let n = records.len().max(1) as f64;
        let mean = |f: fn(&EpisodeRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        let steps: u64 = records.iter().map(|r| r.steps).sum();
        let guided: u64 = records.iter().map(|r| r.guided_steps).sum();
        let tail = &records[records.len().saturating_sub(t.final_window)..];
        Self {
            run_id: run_id.to_string(),
            cell: cell_of(run_id).to_string(),
            seed,
            episodes: records.len() as u64,
            mean_reward: mean(|r| r.reward),
            mean_step_reward: mean(|r| r.mean_step_reward),
            mean_length: mean(|r| r.steps as f64),
            intervention_rate: if steps == 0 { 0.0 } else { guided as f64 / steps as f64 },
            success_rate: mean(|r| f64::from(u8::from(r.success()))),
            mean_yaw_rate: mean(|r| r.mean_yaw_rate),
            mean_lat_accel: mean(|r| r.mean_lat_accel),
            final_step_reward: tail.iter().map(|r| r.mean_step_reward).sum::<f64>() / tail.len().max(1) as f64,
            episodes_to_threshold: episodes_to_threshold(records, t),
        }
    }

    /// Episodes to threshold, with runs that never reach it counted as one past their budget.
    pub fn censored_threshold(&self) -> u64 {
        self.episodes_to_threshold.unwrap_or(self.episodes + 1)
    }
}

/// Run id without its trailing `-seed<n>`.
pub fn cell_of(run_id: &str) -> &str {
    run_id.rsplit_once("-seed").map_or(run_id, |(c, _)| c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub runs: usize,
    pub mean_reward: MeanSd,
    pub mean_step_reward: MeanSd,
    pub mean_length: MeanSd,
    pub intervention_rate: MeanSd,
    pub success_rate: MeanSd,
    pub mean_yaw_rate: MeanSd,
    pub mean_lat_accel: MeanSd,
    pub final_step_reward: MeanSd,
    pub median_episodes_to_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<RunSummary>,
    pub cells: BTreeMap<String, CellStats>,
}

/// Groups rows by run, then runs by cell; descriptive statistics only.
pub fn summarize(rows: &[MetricRow], t: &ThresholdConfig) -> Summary {
    let mut by_run: BTreeMap<(String, u64), Vec<EpisodeRecord>> = BTreeMap::new();
    for r in rows {
        by_run.entry((r.run_id.clone(), r.seed)).or_default().push(r.record.clone());
    }
    let runs: Vec<RunSummary> = by_run
        .iter()
        .map(|((id, seed), recs)| {
            let mut recs = recs.clone();
            recs.sort_by_key(|r| r.episode);
            RunSummary::from_records(id, *seed, &recs, t)
        })
        .collect();
    let mut grouped: BTreeMap<String, Vec<&RunSummary>> = BTreeMap::new();
    for r in &runs {
        grouped.entry(r.cell.clone()).or_default().push(r);
    }
    let cells = grouped
        .into_iter()
        .map(|(cell, rs)| {
            let col = |f: fn(&RunSummary) -> f64| MeanSd::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let thresholds: Vec<f64> = rs.iter().map(|r| r.censored_threshold() as f64).collect();
            let stats = CellStats {
                runs: rs.len(),
                mean_reward: col(|r| r.mean_reward),
                mean_step_reward: col(|r| r.mean_step_reward),
                mean_length: col(|r| r.mean_length),
                intervention_rate: col(|r| r.intervention_rate),
                success_rate: col(|r| r.success_rate),
                mean_yaw_rate: col(|r| r.mean_yaw_rate),
                mean_lat_accel: col(|r| r.mean_lat_accel),
                final_step_reward: col(|r| r.final_step_reward),
                median_episodes_to_threshold: median(&thresholds),
            };
            (cell, stats)
        })
        .collect();
    Summary { runs, cells }
}

pub fn summarize_files(paths: &[PathBuf], t: &ThresholdConfig) -> Result<Summary> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_metrics(p)?);
    }
    Ok(summarize(&rows, t))
}

impl Summary {
    pub fn runs_csv(&self) -> String {
        let mut s = String::from("run_id,cell,seed,episodes,mean_reward,mean_step_reward,mean_length,intervention_rate,success_rate,mean_yaw_rate,mean_lat_accel,final_step_reward,episodes_to_threshold\n");
        for r in &self.runs {
            let ett = r.episodes_to_threshold.map_or(String::new(), |e| e.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                r.run_id,
                r.cell,
                r.seed,
                r.episodes,
                r.mean_reward,
                r.mean_step_reward,
                r.mean_length,
                r.intervention_rate,
                r.success_rate,
                r.mean_yaw_rate,
                r.mean_lat_accel,
                r.final_step_reward,
                ett
            );
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let metrics = ["mean_reward", "mean_step_reward", "mean_length", "intervention_rate", "success_rate", "mean_yaw_rate", "mean_lat_accel", "final_step_reward"];
        let mut s = String::from("cell,runs");
        for m in metrics {
            let _ = write!(s, ",{m}_mean,{m}_sd");
        }
        s.push_str(",median_episodes_to_threshold\n");
        for (cell, c) in &self.cells {
            let _ = write!(s, "{cell},{}", c.runs);
            for v in [c.mean_reward, c.mean_step_reward, c.mean_length, c.intervention_rate, c.success_rate, c.mean_yaw_rate, c.mean_lat_accel, c.final_step_reward] {
                let _ = write!(s, ",{:?},{:?}", v.mean, v.sd);
            }
            let _ = writeln!(s, ",{:?}", c.median_episodes_to_threshold);
        }
        s
    }

    /// Writes `summary_runs.csv` (raw per-run values) and `summary_cells.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary_runs.csv"), self.runs_csv())?;
        fs::write(dir.join("summary_cells.csv"), self.cells_csv())?;
        Ok(())
    }
}
