//! Episode trace files: JSON lines of step records, one `trial_end` line per
//! trial, and a closing `episode` line with config, result and memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Episode, EpisodeConfig, EpisodeResult, HarnessError};
use crate::planner::{EndingStatus, StepRecord};
use crate::reflection::ReflectionMemory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Step {
        trial: usize,
        #[serde(flatten)]
        step: StepRecord,
    },
    TrialEnd {
        trial: usize,
        status: EndingStatus,
        planner_calls: usize,
        reflector_calls: usize,
        summary_calls: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Episode {
        config: EpisodeConfig,
        result: EpisodeResult,
        memory: ReflectionMemory,
    },
}

pub fn trace_lines(episode: &Episode) -> Vec<TraceLine> {
    let mut lines = Vec::new();
    for t in &episode.traces {
        for step in &t.steps {
            lines.push(TraceLine::Step { trial: t.trial_index, step: step.clone() });
        }
        lines.push(TraceLine::TrialEnd {
            trial: t.trial_index,
            status: t.status,
            planner_calls: t.planner_calls,
            reflector_calls: t.reflector_calls,
            summary_calls: t.summary_calls,
            detail: t.detail.clone(),
        });
    }
    lines.push(TraceLine::Episode {
        config: episode.config.clone(),
        result: episode.result.clone(),
        memory: episode.memory.clone(),
    });
    lines
}

pub fn write_trace(path: &Path, episode: &Episode) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in trace_lines(episode) {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceLine>, HarnessError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(&line)
            .map_err(|e| HarnessError::Corrupt { path: path.to_path_buf(), reason: format!("line {}: {e}", n + 1) })?;
        lines.push(parsed);
    }
    Ok(lines)
}
