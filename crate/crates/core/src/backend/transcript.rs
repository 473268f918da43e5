//! Transcript recording and strict replay.
//!
//! A transcript is JSON lines of `{kind, prompt_sha256, prompt, reply}`.
//! Replay answers call `i` with the `i`-th recorded reply only if the live
//! prompt matches the recorded one exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackendError, CompletionBackend, PromptBundle, PromptKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub kind: PromptKind,
    pub prompt_sha256: String,
    pub prompt: String,
    pub reply: String,
}

impl TranscriptEntry {
    pub fn new(prompt: &PromptBundle, reply: String) -> Self {
        TranscriptEntry {
            kind: prompt.kind,
            prompt_sha256: sha256_hex(&prompt.text),
            prompt: prompt.text.clone(),
            reply,
        }
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn write_transcript(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptEntry>> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    Ok(entries)
}

/// Forwards to `inner` and keeps every exchange.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Vec<TranscriptEntry>,
}

impl<B: CompletionBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, entries: Vec::new() }
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<TranscriptEntry> {
        self.entries
    }
}

impl<B: CompletionBackend> CompletionBackend for RecordingBackend<B> {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let reply = self.inner.complete(prompt)?;
        self.entries.push(TranscriptEntry::new(prompt, reply.clone()));
        Ok(reply)
    }

    fn begin_trial(&mut self, trial: usize) {
        self.inner.begin_trial(trial)
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

pub struct ReplayBackend {
    entries: Vec<TranscriptEntry>,
    cursor: usize,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ReplayBackend { entries, cursor: 0 }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(read_transcript(path)?))
    }

    /// Recorded calls not consumed yet.
    pub fn remaining(&self) -> usize {
        self.entries.len() - self.cursor
    }
}

fn first_difference(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

impl CompletionBackend for ReplayBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        let index = self.cursor;
        let mismatch = |position, detail: String| BackendError::ReplayMismatch { index, position, detail };
        let Some(entry) = self.entries.get(index) else {
            return Err(mismatch(None, "transcript has no more recorded calls".into()));
        };
        if sha256_hex(&entry.prompt) != entry.prompt_sha256 {
            return Err(mismatch(None, "recorded prompt does not match its sha256".into()));
        }
        if entry.prompt != prompt.text {
            let pos = first_difference(&entry.prompt, &prompt.text);
            return Err(mismatch(Some(pos), "live prompt differs from the recording".into()));
        }
        if entry.kind != prompt.kind {
            return Err(mismatch(None, format!("expected a {:?} call", entry.kind)));
        }
        self.cursor += 1;
        Ok(entry.reply.clone())
    }

    fn identity(&self) -> String {
        "replay".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::FixedBackend;

    fn bundle(text: &str) -> PromptBundle {
        PromptBundle { kind: PromptKind::Plan, text: text.into(), context_budget: 100 }
    }

    #[test]
    fn record_then_replay() {
        let mut rec = RecordingBackend::new(FixedBackend::new(["a", "b"]));
        rec.complete(&bundle("p1")).unwrap();
        rec.complete(&bundle("p2")).unwrap();
        let mut rep = ReplayBackend::new(rec.into_entries());
        assert_eq!(rep.complete(&bundle("p1")).unwrap(), "a");
        assert_eq!(rep.complete(&bundle("p2")).unwrap(), "b");
        let err = rep.complete(&bundle("p3")).unwrap_err();
        assert!(matches!(err, BackendError::ReplayMismatch { index: 2, position: None, .. }));
    }

    #[test]
    fn diverging_prompt_reports_position() {
        let entry = TranscriptEntry::new(&bundle("hello world"), "r".into());
        let mut rep = ReplayBackend::new(vec![entry]);
        let err = rep.complete(&bundle("hello there")).unwrap_err();
        assert!(matches!(err, BackendError::ReplayMismatch { index: 0, position: Some(6), .. }));
    }

    #[test]
    fn edited_prompt_fails_sha_check() {
        let mut entry = TranscriptEntry::new(&bundle("hello"), "r".into());
        entry.prompt = "hullo".into();
        let mut rep = ReplayBackend::new(vec![entry]);
        let err = rep.complete(&bundle("hullo")).unwrap_err();
        assert!(err.to_string().contains("sha256"), "{err}");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let entries = vec![TranscriptEntry::new(&bundle("x\ny"), "z".into())];
        write_transcript(&path, &entries).unwrap();
        assert_eq!(read_transcript(&path).unwrap(), entries);
    }
}
