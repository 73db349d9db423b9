//! Append-only JSONL run logs. Each iteration is one line; infinite
//! values are written as the string `"inf"`.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use sharp_core::{
    rank_and_select, Acquisition, AcquisitionScore, AnnotationSource, EvalPoint, IterationRecord,
    PreferenceLabel, Score, VerifyReport,
};

use crate::error::{IoError, Result};

/// An `f64` that may be `+inf`, serialized as `"inf"` in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(ExtReal(x)),
            Raw::Str(s) if s == "inf" => Ok(ExtReal(f64::INFINITY)),
            Raw::Str(s) => Err(de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub id: String,
    pub delta: f64,
    pub gamma_norm: ExtReal,
    pub score: ExtReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WinnerRepr {
    First,
    Second,
}

impl From<PreferenceLabel> for WinnerRepr {
    fn from(l: PreferenceLabel) -> Self {
        match l {
            PreferenceLabel::First => WinnerRepr::First,
            PreferenceLabel::Second => WinnerRepr::Second,
        }
    }
}

impl From<WinnerRepr> for PreferenceLabel {
    fn from(w: WinnerRepr) -> Self {
        match w {
            WinnerRepr::First => PreferenceLabel::First,
            WinnerRepr::Second => PreferenceLabel::Second,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceRepr {
    SimulatedOracle,
    Human,
}

impl From<AnnotationSource> for SourceRepr {
    fn from(s: AnnotationSource) -> Self {
        match s {
            AnnotationSource::SimulatedOracle => SourceRepr::SimulatedOracle,
            AnnotationSource::Human => SourceRepr::Human,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub id: String,
    pub winner: WinnerRepr,
    pub source: SourceRepr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub labeled_count: usize,
    pub accuracy_raw: f64,
    pub accuracy_ema: f64,
    #[serde(default)]
    pub winrate_raw: Option<f64>,
    #[serde(default)]
    pub winrate_ema: Option<f64>,
}

impl From<&EvalPoint> for MetricsEntry {
    fn from(p: &EvalPoint) -> Self {
        MetricsEntry {
            labeled_count: p.labeled_count,
            accuracy_raw: p.accuracy,
            accuracy_ema: p.accuracy_ema,
            winrate_raw: p.winrate,
            winrate_ema: p.winrate_ema,
        }
    }
}

/// One line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    pub iteration: u64,
    pub candidate_ids: Vec<String>,
    pub scores: Vec<ScoreEntry>,
    pub selected_ids: Vec<String>,
    pub labels: Vec<LabelEntry>,
    pub pre_loss: f64,
    pub post_loss: f64,
    #[serde(default)]
    pub metrics: Option<MetricsEntry>,
}

impl From<&IterationRecord> for RunLogRecord {
    fn from(r: &IterationRecord) -> Self {
        RunLogRecord {
            iteration: r.iteration,
            candidate_ids: r.candidate_ids.clone(),
            scores: r
                .scores
                .iter()
                .map(|s| ScoreEntry {
                    id: s.tuple_id.clone(),
                    delta: s.delta,
                    gamma_norm: ExtReal(s.gamma_norm),
                    score: ExtReal(s.score.value()),
                })
                .collect(),
            selected_ids: r.selected_ids.clone(),
            labels: r
                .labels
                .iter()
                .map(|l| LabelEntry { id: l.tuple_id.clone(), winner: l.winner.into(), source: l.source.into() })
                .collect(),
            pre_loss: r.pre_loss,
            post_loss: r.post_loss,
            metrics: r.metrics.as_ref().map(MetricsEntry::from),
        }
    }
}

impl RunLogRecord {
    /// Checks the record-level invariants: selections come from the
    /// candidates and each selection has one label.
    pub fn check(&self) -> std::result::Result<(), String> {
        if let Some(s) = self.selected_ids.iter().find(|s| !self.candidate_ids.contains(s)) {
            return Err(format!("selected id {s} is not a candidate"));
        }
        if self.labels.len() != self.selected_ids.len()
            || self.selected_ids.iter().any(|s| self.labels.iter().filter(|l| &l.id == s).count() != 1)
        {
            return Err("every selected id needs exactly one label".into());
        }
        Ok(())
    }

    /// Recomputes the top-`b` selection from the logged scores.
    pub fn replay_selection(&self) -> Result<Vec<String>> {
        let scores: Vec<AcquisitionScore> = self
            .scores
            .iter()
            .map(|s| AcquisitionScore {
                tuple_id: s.id.clone(),
                delta: s.delta,
                gamma_norm: s.gamma_norm.0,
                score: Score::new(s.score.0),
            })
            .collect();
        Ok(rank_and_select(&scores, self.selected_ids.len())?)
    }
}

/// Line-buffered, append-only JSONL writer.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    /// Opens `path` for appending, creating it if needed.
    pub fn append(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| IoError::io(&path, e))?;
        Ok(Self { path, out: BufWriter::new(f) })
    }

    /// Truncates `path` first.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        File::create(&path).map_err(|e| IoError::io(&path, e))?;
        Self::append(path)
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record).map_err(|e| IoError::Format(e.to_string()))?;
        self.out
            .write_all(b"\n")
            .and_then(|_| self.out.flush())
            .map_err(|e| IoError::io(&self.path, e))
    }
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<RunLogRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| IoError::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchEntry {
    pub id: String,
    pub closed_form: ExtReal,
    pub explicit: ExtReal,
    pub rel_err: ExtReal,
}

/// Gradient-oracle verification summary, written as one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRecord {
    pub acquisition: String,
    pub instances: usize,
    pub tolerance: f64,
    pub max_rel_err: f64,
    pub infinite_agreements: usize,
    pub degenerate: Vec<String>,
    pub violations: Vec<MismatchEntry>,
    pub passed: bool,
}

impl VerifyRecord {
    pub fn new(kind: Acquisition, tolerance: f64, r: &VerifyReport) -> Self {
        VerifyRecord {
            acquisition: kind.as_str().into(),
            instances: r.instances,
            tolerance,
            max_rel_err: r.max_rel_err,
            infinite_agreements: r.infinite_agreements,
            degenerate: r.degenerate.clone(),
            violations: r
                .violations
                .iter()
                .map(|m| MismatchEntry {
                    id: m.tuple_id.clone(),
                    closed_form: ExtReal(m.closed_form.value()),
                    explicit: ExtReal(m.explicit.value()),
                    rel_err: ExtReal(m.rel_err),
                })
                .collect(),
            passed: r.passed(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_uses_string_sentinel() {
        let e = ScoreEntry { id: "a".into(), delta: 0.0, gamma_norm: ExtReal(1.0), score: ExtReal(f64::INFINITY) };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"id":"a","delta":0.0,"gamma_norm":1.0,"score":"inf"}"#);
        assert_eq!(serde_json::from_str::<ScoreEntry>(&s).unwrap(), e);
        assert!(serde_json::from_str::<ExtReal>("\"nan\"").is_err());
    }

    #[test]
    fn record_check_catches_foreign_selection() {
        let mut r = RunLogRecord {
            iteration: 0,
            candidate_ids: vec!["a".into(), "b".into()],
            scores: vec![],
            selected_ids: vec!["a".into()],
            labels: vec![LabelEntry { id: "a".into(), winner: WinnerRepr::First, source: SourceRepr::Human }],
            pre_loss: 0.7,
            post_loss: 0.6,
            metrics: None,
        };
        assert!(r.check().is_ok());
        r.selected_ids = vec!["c".into()];
        assert!(r.check().is_err());
    }
}
