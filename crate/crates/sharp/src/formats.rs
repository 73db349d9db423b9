//! On-disk formats: JSONL datasets, the hidden-reward file and policy
//! checkpoints.
//!
//! Dataset lines look like
//! `{"id": "t00001", "prompt": null, "responses": [null, null], "f1": [...], "f2": [...], "distractors": []}`.
//! Floats are written in shortest round-trip form and parsed exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sharp_core::{validate_dataset, Dataset, GroundTruthReward, NoiseMode, PolicyParams, PreferenceTuple};

use crate::error::{IoError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleLine {
    id: String,
    #[serde(default)]
    prompt: Option<String>,
    #[serde(default)]
    responses: [Option<String>; 2],
    f1: Vec<f64>,
    f2: Vec<f64>,
    #[serde(default)]
    distractors: Vec<Vec<f64>>,
}

impl From<TupleLine> for PreferenceTuple {
    fn from(l: TupleLine) -> Self {
        PreferenceTuple {
            id: l.id,
            prompt_text: l.prompt,
            response_texts: l.responses,
            feature_y1: l.f1,
            feature_y2: l.f2,
            distractor_features: l.distractors,
        }
    }
}

impl From<&PreferenceTuple> for TupleLine {
    fn from(t: &PreferenceTuple) -> Self {
        TupleLine {
            id: t.id.clone(),
            prompt: t.prompt_text.clone(),
            responses: t.response_texts.clone(),
            f1: t.feature_y1.clone(),
            f2: t.feature_y2.clone(),
            distractors: t.distractor_features.clone(),
        }
    }
}

/// Parses JSONL tuples and validates the result. The feature dimension is
/// taken from the first tuple. Blank lines are skipped.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut tuples = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| IoError::Parse { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TupleLine = serde_json::from_str(&line)
            .map_err(|e| IoError::Parse { line: line_no, message: e.to_string() })?;
        tuples.push(PreferenceTuple::from(parsed));
    }
    let dim = tuples.first().map_or(0, |t| t.feature_y1.len());
    let ds = Dataset::new(tuples, dim);
    let violations = validate_dataset(&ds);
    if violations.is_empty() {
        Ok(ds)
    } else {
        Err(IoError::Validation(violations))
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    read_dataset(f)
}

pub fn write_dataset<W: Write>(mut w: W, dataset: &Dataset) -> std::io::Result<()> {
    for t in &dataset.tuples {
        serde_json::to_writer(&mut w, &TupleLine::from(t))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_dataset(&mut w, dataset).and_then(|_| w.flush()).map_err(|e| IoError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseRepr {
    Stochastic,
    Deterministic,
}

impl From<NoiseMode> for NoiseRepr {
    fn from(m: NoiseMode) -> Self {
        match m {
            NoiseMode::Stochastic => NoiseRepr::Stochastic,
            NoiseMode::Deterministic => NoiseRepr::Deterministic,
        }
    }
}

impl From<NoiseRepr> for NoiseMode {
    fn from(m: NoiseRepr) -> Self {
        match m {
            NoiseRepr::Stochastic => NoiseMode::Stochastic,
            NoiseRepr::Deterministic => NoiseMode::Deterministic,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OracleFile {
    theta_star: Vec<f64>,
    noise: NoiseRepr,
}

pub fn save_oracle(path: impl AsRef<Path>, oracle: &GroundTruthReward) -> Result<()> {
    let body = OracleFile { theta_star: oracle.theta_star.clone(), noise: oracle.noise_mode.into() };
    write_json(path.as_ref(), &body)
}

pub fn load_oracle(path: impl AsRef<Path>) -> Result<GroundTruthReward> {
    let f: OracleFile = read_json(path.as_ref())?;
    Ok(GroundTruthReward { theta_star: f.theta_star, noise_mode: f.noise.into() })
}

/// Policy checkpoint: `{"d": .., "beta": .., "theta": [..], "reference": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub d: usize,
    pub beta: f64,
    pub theta: Vec<f64>,
    /// Absent means the zero reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
}

impl Checkpoint {
    pub fn new(policy: &PolicyParams, reference: &PolicyParams, beta: f64) -> Self {
        Self { d: policy.dim(), beta, theta: policy.theta.clone(), reference: Some(reference.theta.clone()) }
    }

    pub fn policy(&self) -> PolicyParams {
        PolicyParams::new(self.theta.clone())
    }

    pub fn reference(&self) -> PolicyParams {
        self.reference.clone().map_or_else(|| PolicyParams::zeros(self.d), PolicyParams::new)
    }

    fn check(&self) -> Result<()> {
        let bad_ref = self.reference.as_ref().is_some_and(|r| r.len() != self.d);
        if self.theta.len() != self.d || bad_ref {
            return Err(IoError::Format(format!("checkpoint header says d = {} but vectors disagree", self.d)));
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    write_json(path.as_ref(), ck)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let ck: Checkpoint = read_json(path.as_ref())?;
    ck.check()?;
    Ok(ck)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IoError::Format(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| IoError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| IoError::Format(format!("{}: {e}", path.display())))
}
