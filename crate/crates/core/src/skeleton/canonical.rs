//! Canonical on-disk dataset layout.
//!
//! ```text
//! <dir>/meta.json          graph topology, channel count, frame rate
//! <dir>/manifest.jsonl     one record per sample
//! <dir>/frames/<id>.txt    T rows x (J*C) whitespace-separated floats
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! re-read reproduces every coordinate bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::dataset::{Assessment, Dataset, Label, LabeledSample};
use super::graph::SkeletonGraph;
use super::sequence::SkeletonSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalMeta {
    pub name: String,
    pub joint_count: usize,
    pub channel_count: usize,
    pub fps: f64,
    pub edges: Vec<(usize, usize)>,
    pub root_joint: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub exercise_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<Assessment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clinical_score: Option<f64>,
    pub subject_id: String,
    pub frames_file: String,
    pub frame_count: usize,
    /// Only present when the sample's rate differs from `meta.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

/// What [`export_canonical`] wrote.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestSummary {
    pub path: PathBuf,
    pub sample_count: usize,
    pub exercise_types: Vec<String>,
}

const DEFAULT_FPS: f64 = 30.0;

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::Argument(format!("sample id `{id}` is not usable as a file name")));
    }
    Ok(())
}

pub fn export_canonical(dataset: &Dataset, out: &Path) -> Result<ManifestSummary> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let fps = dataset
        .samples()
        .first()
        .map(|s| s.sequence.fps())
        .unwrap_or(DEFAULT_FPS);
    let graph = dataset.graph();
    let meta = CanonicalMeta {
        name: dataset.name.clone(),
        joint_count: graph.joint_count(),
        channel_count: dataset.channel_count().unwrap_or(0),
        fps,
        edges: graph.edges().to_vec(),
        root_joint: graph.root_joint(),
    };
    let meta_path = out.join("meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;

    let frames_dir = out.join("frames");
    if !dataset.is_empty() {
        fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    }
    let manifest_path = out.join("manifest.jsonl");
    let file = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut manifest = BufWriter::new(file);
    for s in dataset.samples() {
        check_id(&s.id)?;
        let frames_file = format!("frames/{}.txt", s.id);
        write_matrix(&out.join(&frames_file), &s.sequence)?;
        let record = ManifestRecord {
            id: s.id.clone(),
            exercise_type: s.exercise_type.to_string(),
            assessment: s.label.assessment(),
            clinical_score: s.label.clinical_score(),
            subject_id: s.subject_id.clone(),
            frames_file,
            frame_count: s.sequence.len(),
            fps: (s.sequence.fps() != fps).then_some(s.sequence.fps()),
        };
        writeln!(manifest, "{}", serde_json::to_string(&record)?).map_err(|e| Error::io(&manifest_path, e))?;
    }
    manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;
    Ok(ManifestSummary {
        path: out.to_path_buf(),
        sample_count: dataset.len(),
        exercise_types: dataset.exercise_types().into_iter().map(|t| t.0).collect(),
    })
}

fn write_matrix(path: &Path, seq: &SkeletonSequence) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for frame in seq.frames().outer_iter() {
        line.clear();
        for (k, v) in frame.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_matrix(path: &Path, joints: usize, channels: usize) -> Result<Array3<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let width = joints * channels;
    let mut values = Vec::new();
    let mut rows = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("`{tok}` is not a number"),
            })?;
            values.push(v);
        }
        if values.len() - before != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: format!("expected {width} columns, found {}", values.len() - before),
            });
        }
        rows += 1;
    }
    Array3::from_shape_vec((rows, joints, channels), values).map_err(|e| Error::Shape(e.to_string()))
}

pub fn load_canonical(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CanonicalMeta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let graph = SkeletonGraph::new(meta.joint_count, meta.edges.clone(), meta.root_joint)?;

    let manifest_path = dir.join("manifest.jsonl");
    let file = fs::File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut samples = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&manifest_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: manifest_path.clone(),
            line: n + 1,
            message,
        };
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let label = match (rec.assessment, rec.clinical_score) {
            (Some(a), None) => Label::Binary(a),
            (None, Some(s)) => Label::clinical(s).map_err(|e| parse_err(e.to_string()))?,
            _ => return Err(parse_err("exactly one of assessment / clinical_score is required".into())),
        };
        let frames_path = dir.join(&rec.frames_file);
        let frames = read_matrix(&frames_path, meta.joint_count, meta.channel_count)?;
        if frames.dim().0 != rec.frame_count {
            return Err(Error::Ingest {
                path: frames_path,
                message: format!("manifest says {} frames, file has {}", rec.frame_count, frames.dim().0),
            });
        }
        let sequence = SkeletonSequence::new(frames, rec.fps.unwrap_or(meta.fps)).map_err(|e| Error::Ingest {
            path: frames_path.clone(),
            message: e.to_string(),
        })?;
        samples.push(LabeledSample {
            id: rec.id,
            sequence,
            exercise_type: rec.exercise_type.into(),
            label,
            subject_id: rec.subject_id,
        });
    }
    Dataset::new(meta.name, graph, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new("empty", SkeletonGraph::chain(3).unwrap(), vec![]).unwrap();
        let summary = export_canonical(&ds, dir.path()).unwrap();
        assert_eq!(summary.sample_count, 0);
        assert!(!dir.path().join("frames").exists());
        assert_eq!(fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap(), "");
        assert_eq!(load_canonical(dir.path()).unwrap(), ds);
    }

    #[test]
    fn clinical_score_is_passed_through_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let seq = SkeletonSequence::new(Array3::from_elem((4, 2, 3), 0.1), 30.0).unwrap();
        let ds = Dataset::new(
            "k",
            SkeletonGraph::chain(2).unwrap(),
            vec![LabeledSample {
                id: "k01_a".into(),
                sequence: seq,
                exercise_type: "k01".into(),
                label: Label::Clinical(37.5),
                subject_id: "p1".into(),
            }],
        )
        .unwrap();
        export_canonical(&ds, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
        assert!(text.contains("\"clinical_score\":37.5"), "{text}");
        assert!(!text.contains("assessment"));
        assert_eq!(load_canonical(dir.path()).unwrap(), ds);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        fs::write(&p, "1 2 3 4\n1 2 x 4\n").unwrap();
        match read_matrix(&p, 2, 2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_path_like_ids() {
        assert!(check_id("../x").is_err());
        assert!(check_id("u01_s01_e01_c").is_ok());
    }
}
