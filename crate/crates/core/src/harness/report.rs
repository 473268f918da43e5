use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpisodeResult, HarnessError, PlannerMode};
use crate::env::{task_info, TaskCategory};

/// Per-task aggregates keyed by task name. Serializes as a plain map so
/// `report.json` is `{task: {...}}` with sorted keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Report {
    pub tasks: BTreeMap<String, TaskReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub category: TaskCategory,
    pub mode: PlannerMode,
    pub trials: usize,
    pub seeds: BTreeMap<u64, EpisodeResult>,
    /// Fraction of non-errored episodes solved within the first `T` trials.
    #[serde(rename = "completion_rate_by_T")]
    pub completion_rate_by_t: BTreeMap<usize, Option<f64>>,
    pub mean_planner_calls: Option<f64>,
    pub errored: usize,
}

/// Completed-within-`cutoff` over non-errored episodes; `None` when every
/// episode errored.
pub fn completion_rate<'a>(results: impl IntoIterator<Item = &'a EpisodeResult>, cutoff: usize) -> Option<f64> {
    let (mut ok, mut total) = (0usize, 0usize);
    for r in results.into_iter().filter(|r| r.errored.is_none()) {
        total += 1;
        if r.first_success_trial.is_some_and(|t| t <= cutoff) {
            ok += 1;
        }
    }
    (total > 0).then(|| ok as f64 / total as f64)
}

#[derive(Serialize)]
struct SeedRow<'a> {
    task: &'a str,
    seed: u64,
    category: &'a str,
    completed: bool,
    first_success_trial: Option<usize>,
    trial_statuses: String,
    planner_calls: usize,
    reflector_calls: usize,
    errored: &'a str,
}

#[derive(Serialize)]
struct RateRow<'a> {
    task: &'a str,
    trials: usize,
    completion_rate: Option<f64>,
}

impl Report {
    pub fn from_results(
        trials: usize,
        mode: PlannerMode,
        results: impl IntoIterator<Item = (String, u64, EpisodeResult)>,
    ) -> Report {
        let mut grouped: BTreeMap<String, BTreeMap<u64, EpisodeResult>> = BTreeMap::new();
        for (task, seed, result) in results {
            grouped.entry(task).or_default().insert(seed, result);
        }
        let mut cutoffs: Vec<usize> = [1, 3, 5].into_iter().filter(|c| *c <= trials).collect();
        if !cutoffs.contains(&trials) {
            cutoffs.push(trials);
        }
        let tasks = grouped
            .into_iter()
            .map(|(task, seeds)| {
                let category = task_info(&task).map(|t| t.category).expect("registered task");
                let completion_rate_by_t = cutoffs.iter().map(|&c| (c, completion_rate(seeds.values(), c))).collect();
                let ok: Vec<_> = seeds.values().filter(|r| r.errored.is_none()).collect();
                let mean_planner_calls = (!ok.is_empty())
                    .then(|| ok.iter().map(|r| r.planner_calls).sum::<usize>() as f64 / ok.len() as f64);
                let report = TaskReport {
                    category,
                    mode,
                    trials,
                    errored: seeds.len() - ok.len(),
                    completion_rate_by_t,
                    mean_planner_calls,
                    seeds,
                };
                (task, report)
            })
            .collect();
        Report { tasks }
    }

    pub fn any_errored(&self) -> bool {
        self.tasks.values().any(|t| t.errored > 0)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::write(dir.join("report.json"), self.to_json())?;

        let mut seeds = csv::Writer::from_path(dir.join("report.csv"))?;
        for (task, t) in &self.tasks {
            for (seed, r) in &t.seeds {
                let statuses: Vec<&str> = r.trial_statuses.iter().map(|s| s.as_str()).collect();
                seeds.serialize(SeedRow {
                    task,
                    seed: *seed,
                    category: t.category.as_str(),
                    completed: r.completed,
                    first_success_trial: r.first_success_trial,
                    trial_statuses: statuses.join(";"),
                    planner_calls: r.planner_calls,
                    reflector_calls: r.reflector_calls,
                    errored: r.errored.as_deref().unwrap_or(""),
                })?;
            }
        }
        seeds.flush()?;

        let mut rates = csv::Writer::from_path(dir.join("rates.csv"))?;
        for (task, t) in &self.tasks {
            for (trials, rate) in &t.completion_rate_by_t {
                rates.serialize(RateRow { task, trials: *trials, completion_rate: *rate })?;
            }
        }
        rates.flush()?;
        Ok(())
    }
}

pub fn read_report(path: &Path) -> Result<Report, HarnessError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
