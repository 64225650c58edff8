//! Adapters from the published UI-PRMD / IRDS / KIMORE segmented layouts
//! (and the canonical layout) into [`Dataset`].
//!
//! Recognised layouts:
//!
//! * **UI-PRMD**: `.../Kinect/Positions/mMM_sSS_eEE_positions.txt` for correct
//!   repetitions and `..._positions_inc.txt` for incorrect ones. Each row holds
//!   22 joints x 3 coordinates. Files under non-Kinect trees (Vicon) are ignored.
//! * **IRDS**: `<subject>_<date>_<gesture>_<repetition>_<correct>_<position>.txt`
//!   (or `.csv`). Gesture `g` in `0..=8` maps to `i0{g+1}`; correctness label
//!   `1` is correct and `2` incorrect; other labels are skipped. Rows hold 25
//!   joints x 3 coordinates, optionally preceded by a frame index.
//! * **KIMORE**: `<subject>/Es<k>/Raw/JointPosition*.csv` with 25 joints x 4
//!   values (x, y, z, tracking state) per row. The clinical total score comes
//!   from the `clinical TS Ex#k` column of `<subject>/Es<k>/Label/ClinicalAssessment*`
//!   (`.csv` or `.xlsx`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array3;
use regex::Regex;
use walkdir::WalkDir;

use super::canonical::load_canonical;
use super::dataset::{Assessment, Dataset, Label, LabeledSample};
use super::graph::SkeletonGraph;
use super::sequence::{repair_non_finite, SkeletonSequence};
use crate::error::{Error, Result};

const KINECT_FPS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Uiprmd,
    Irds,
    Kimore,
    Canonical,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uiprmd" => Ok(DatasetKind::Uiprmd),
            "irds" => Ok(DatasetKind::Irds),
            "kimore" => Ok(DatasetKind::Kimore),
            "canonical" => Ok(DatasetKind::Canonical),
            _ => Err(Error::Usage(format!(
                "unknown dataset kind `{s}` (expected uiprmd, irds, kimore or canonical)"
            ))),
        }
    }
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Uiprmd => "uiprmd",
            DatasetKind::Irds => "irds",
            DatasetKind::Kimore => "kimore",
            DatasetKind::Canonical => "canonical",
        }
    }

    pub fn graph(self) -> Option<SkeletonGraph> {
        match self {
            DatasetKind::Uiprmd => Some(SkeletonGraph::uiprmd_kinect()),
            DatasetKind::Irds | DatasetKind::Kimore => Some(SkeletonGraph::kinect_v2()),
            DatasetKind::Canonical => None,
        }
    }
}

pub fn ingest(kind: DatasetKind, root: &Path) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::Ingest {
            path: root.to_path_buf(),
            message: "dataset root does not exist or is not a directory".into(),
        });
    }
    match kind {
        DatasetKind::Uiprmd => ingest_uiprmd(root),
        DatasetKind::Irds => ingest_irds(root),
        DatasetKind::Kimore => ingest_kimore(root),
        DatasetKind::Canonical => load_canonical(root),
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = WalkDir::new(root)
        .follow_links(true)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    files
}

fn file_name(path: &Path) -> &str {
    path.file_name().and_then(|n| n.to_str()).unwrap_or("")
}

/// Splits a raw row into numeric tokens. Commas, semicolons, whitespace and
/// parentheses all act as separators.
fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c == ';' || c == '(' || c == ')' || c.is_whitespace())
        .filter(|t| !t.is_empty())
}

/// Reads numeric rows; a leading non-numeric line is treated as a header.
fn read_rows(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = tokens(line).map(f64::from_str).collect();
        match parsed {
            Ok(v) if !v.is_empty() => rows.push((n + 1, v)),
            Ok(_) => {}
            Err(_) if rows.is_empty() => {}
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: "non-numeric value in data row".into(),
                })
            }
        }
    }
    Ok(rows)
}

/// Column layouts a row may follow for `joints` joints.
#[derive(Clone, Copy)]
enum RowLayout {
    Xyz,
    IndexedXyz,
    XyzState,
}

fn frames_from_rows(path: &Path, rows: &[(usize, Vec<f64>)], joints: usize, layouts: &[RowLayout]) -> Result<Array3<f64>> {
    if rows.len() < 2 {
        return Err(Error::Ingest {
            path: path.to_path_buf(),
            message: format!("need at least 2 frames, found {}", rows.len()),
        });
    }
    let mut data = Vec::with_capacity(rows.len() * joints * 3);
    for (line, row) in rows {
        let layout = layouts.iter().copied().find(|l| match l {
            RowLayout::Xyz => row.len() == joints * 3,
            RowLayout::IndexedXyz => row.len() == joints * 3 + 1,
            RowLayout::XyzState => row.len() == joints * 4,
        });
        match layout {
            Some(RowLayout::Xyz) => data.extend_from_slice(row),
            Some(RowLayout::IndexedXyz) => data.extend_from_slice(&row[1..]),
            Some(RowLayout::XyzState) => {
                for q in row.chunks_exact(4) {
                    data.extend_from_slice(&q[..3]);
                }
            }
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    message: format!("unexpected column count {} for {joints} joints", row.len()),
                })
            }
        }
    }
    let mut frames = Array3::from_shape_vec((rows.len(), joints, 3), data).map_err(|e| Error::Shape(e.to_string()))?;
    let repaired = repair_non_finite(&mut frames).map_err(|message| Error::Ingest {
        path: path.to_path_buf(),
        message,
    })?;
    if repaired > 0 {
        log::warn!("{}: repaired {repaired} non-finite values", path.display());
    }
    Ok(frames)
}

fn load_sequence(path: &Path, joints: usize, layouts: &[RowLayout]) -> Result<SkeletonSequence> {
    let rows = read_rows(path)?;
    let frames = frames_from_rows(path, &rows, joints, layouts)?;
    SkeletonSequence::new(frames, KINECT_FPS).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn ingest_uiprmd(root: &Path) -> Result<Dataset> {
    let graph = SkeletonGraph::uiprmd_kinect();
    let pattern = Regex::new(r"(?i)^m(\d{2})_s(\d{2})_e(\d{2})_positions(_inc)?\.txt$").unwrap();
    let mut samples = Vec::new();
    for path in files_under(root) {
        let Some(caps) = pattern.captures(file_name(&path)) else { continue };
        let in_kinect = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .components()
            .any(|c| c.as_os_str().to_string_lossy().eq_ignore_ascii_case("kinect"));
        if !in_kinect {
            continue;
        }
        let assessment = if caps.get(4).is_some() {
            Assessment::Incorrect
        } else {
            Assessment::Correct
        };
        let sequence = load_sequence(&path, graph.joint_count(), &[RowLayout::Xyz])?;
        samples.push(LabeledSample {
            id: format!(
                "u{}_s{}_e{}_{}",
                &caps[1],
                &caps[2],
                &caps[3],
                if assessment.is_correct() { "c" } else { "i" }
            ),
            sequence,
            exercise_type: format!("u{}", &caps[1]).into(),
            label: Label::Binary(assessment),
            subject_id: format!("s{}", &caps[2]),
        });
    }
    finish("uiprmd", root, graph, samples)
}

fn ingest_irds(root: &Path) -> Result<Dataset> {
    let graph = SkeletonGraph::kinect_v2();
    let pattern = Regex::new(r"(?i)^(\d+)_(\d+)_(\d+)_(\d+)_(\d+)_([A-Za-z]+)\.(txt|csv)$").unwrap();
    let mut samples = Vec::new();
    for path in files_under(root) {
        let Some(caps) = pattern.captures(file_name(&path)) else { continue };
        let gesture: usize = caps[3].parse().unwrap_or(usize::MAX);
        if gesture > 8 {
            log::warn!("{}: gesture label {gesture} outside 0..=8, skipped", path.display());
            continue;
        }
        let assessment = match &caps[5] {
            "1" => Assessment::Correct,
            "2" => Assessment::Incorrect,
            other => {
                log::warn!("{}: correctness label {other} not recognised, skipped", path.display());
                continue;
            }
        };
        let sequence = load_sequence(&path, graph.joint_count(), &[RowLayout::Xyz, RowLayout::IndexedXyz])?;
        samples.push(LabeledSample {
            id: format!("i{:02}_{}_{}_{}_{}", gesture + 1, &caps[1], &caps[2], &caps[4], caps[6].to_lowercase()),
            sequence,
            exercise_type: format!("i{:02}", gesture + 1).into(),
            label: Label::Binary(assessment),
            subject_id: caps[1].to_string(),
        });
    }
    finish("irds", root, graph, samples)
}

fn ingest_kimore(root: &Path) -> Result<Dataset> {
    let graph = SkeletonGraph::kinect_v2();
    let exercise_dir = Regex::new(r"(?i)^es(\d)$").unwrap();
    let mut samples = Vec::new();
    let mut label_cache: BTreeMap<PathBuf, BTreeMap<usize, f64>> = BTreeMap::new();
    for path in files_under(root) {
        let name = file_name(&path).to_ascii_lowercase();
        if !(name.starts_with("jointposition") && name.ends_with(".csv")) {
            continue;
        }
        let Some(raw_dir) = path.parent() else { continue };
        if !file_name(raw_dir).eq_ignore_ascii_case("raw") {
            continue;
        }
        let Some(ex_dir) = raw_dir.parent() else { continue };
        let Some(caps) = exercise_dir.captures(file_name(ex_dir)) else { continue };
        let exercise: usize = caps[1].parse().unwrap_or(0);
        if !(1..=5).contains(&exercise) {
            continue;
        }
        let subject = ex_dir.parent().map(file_name).unwrap_or("unknown").to_string();

        let label_file = find_label_file(&ex_dir.join("Label")).ok_or_else(|| Error::Ingest {
            path: ex_dir.join("Label"),
            message: "no ClinicalAssessment file found".into(),
        })?;
        if !label_cache.contains_key(&label_file) {
            let scores = read_clinical_scores(&label_file)?;
            label_cache.insert(label_file.clone(), scores);
        }
        let score = *label_cache[&label_file].get(&exercise).ok_or_else(|| Error::Ingest {
            path: label_file.clone(),
            message: format!("no `clinical TS Ex#{exercise}` value"),
        })?;
        let label = Label::clinical(score).map_err(|e| Error::Ingest {
            path: label_file.clone(),
            message: e.to_string(),
        })?;
        let sequence = load_sequence(&path, graph.joint_count(), &[RowLayout::XyzState, RowLayout::Xyz])?;
        samples.push(LabeledSample {
            id: format!("k{exercise:02}_{}", subject.replace(['/', '\\', ' '], "_")),
            sequence,
            exercise_type: format!("k{exercise:02}").into(),
            label,
            subject_id: subject,
        });
    }
    finish("kimore", root, graph, samples)
}

fn find_label_file(dir: &Path) -> Option<PathBuf> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir).ok()?.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    entries.sort();
    entries.into_iter().find(|p| {
        let n = file_name(p).to_ascii_lowercase();
        n.starts_with("clinicalassessment") && (n.ends_with(".csv") || n.ends_with(".xlsx"))
    })
}

/// Maps exercise number to the total clinical score from a header row
/// containing `clinical TS Ex#k` columns and the first data row below it.
fn clinical_scores_from_table(path: &Path, table: &[Vec<String>]) -> Result<BTreeMap<usize, f64>> {
    let column = Regex::new(r"(?i)\bTS\b.*ex\s*#?\s*(\d)").unwrap();
    let header_row = table
        .iter()
        .position(|row| row.iter().any(|cell| column.is_match(cell)))
        .ok_or_else(|| Error::Ingest {
            path: path.to_path_buf(),
            message: "no `clinical TS Ex#k` header".into(),
        })?;
    let values = table
        .iter()
        .skip(header_row + 1)
        .find(|row| row.iter().any(|c| !c.trim().is_empty()))
        .ok_or_else(|| Error::Ingest {
            path: path.to_path_buf(),
            message: "no data row below header".into(),
        })?;
    let mut out = BTreeMap::new();
    for (i, cell) in table[header_row].iter().enumerate() {
        let Some(caps) = column.captures(cell) else { continue };
        let ex: usize = caps[1].parse().unwrap_or(0);
        let raw = values.get(i).map(|s| s.trim()).unwrap_or("");
        let v: f64 = raw.replace(',', ".").parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: header_row + 2,
            message: format!("score `{raw}` for exercise {ex} is not a number"),
        })?;
        out.insert(ex, v);
    }
    Ok(out)
}

fn read_clinical_scores(path: &Path) -> Result<BTreeMap<usize, f64>> {
    let lower = file_name(path).to_ascii_lowercase();
    let table: Vec<Vec<String>> = if lower.ends_with(".xlsx") {
        use calamine::{open_workbook_auto, Reader};
        let mut wb = open_workbook_auto(path).map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let range = wb.worksheet_range_at(0).ok_or_else(|| Error::Ingest {
            path: path.to_path_buf(),
            message: "workbook has no sheets".into(),
        })?;
        let range = range.map_err(|e| Error::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        range.rows().map(|r| r.iter().map(|c| c.to_string()).collect()).collect()
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sep = if text.contains(';') { ';' } else { ',' };
        text.lines().map(|l| l.split(sep).map(str::to_owned).collect()).collect()
    };
    clinical_scores_from_table(path, &table)
}

fn finish(name: &str, root: &Path, graph: SkeletonGraph, samples: Vec<LabeledSample>) -> Result<Dataset> {
    if samples.is_empty() {
        return Err(Error::Ingest {
            path: root.to_path_buf(),
            message: format!("no {name} sample files found"),
        });
    }
    Dataset::new(name, graph, samples)
}
