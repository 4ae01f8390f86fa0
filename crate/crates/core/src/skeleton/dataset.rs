//! Dataset container and its record-per-line text format.
//!
//! Line 1 is a header object `{format_version, name, seed, tau_mm}`;
//! every following line is one flat record object. Numbers are written
//! with full round-trip precision, so save -> load -> save is
//! byte-identical.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::joints::NUM_JOINTS;
use super::pose::{Pose2D, Pose3D};
use crate::geometry::{Attribute, AttributeVector};

pub const FORMAT_VERSION: u32 = 1;

/// Which supervision a record carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Full 3D supervision (pose3d present, attributes derivable).
    #[serde(rename = "3d")]
    Labeled3D,
    /// 2D-only supervision (no pose3d, no attributes).
    #[serde(rename = "2d")]
    Labeled2D,
}

/// One training/evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub domain: Domain,
    pub pose2d: Pose2D,
    pub pose3d: Option<Pose3D>,
    pub attributes: Option<AttributeVector>,
    /// Unitless factor applied to the canonical bone lengths.
    pub subject_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub seed: u64,
    pub tau_mm: f64,
}

/// An ordered collection of records plus generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<SampleRecord>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("header: {0}")]
    Header(String),
    #[error("meta.tau_mm must be positive, got {0}")]
    NonPositiveTau(f64),
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    format_version: u32,
    name: String,
    seed: u64,
    tau_mm: f64,
}

// On-disk record shape; field order here is the byte-level contract.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    id: String,
    domain: Domain,
    image_w: u32,
    image_h: u32,
    pose2d: Vec<f64>,
    pose3d: Option<Vec<f64>>,
    attributes: Option<Vec<String>>,
    subject_scale: f64,
}

impl Dataset {
    pub fn new(meta: DatasetMeta) -> Self {
        Self {
            meta,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ids unique and tau positive; Labeled3D records carry pose3d.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.meta.tau_mm <= 0.0 {
            return Err(DatasetError::NonPositiveTau(self.meta.tau_mm));
        }
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    line: i + 2,
                    id: r.id.clone(),
                });
            }
            if r.domain == Domain::Labeled3D && r.pose3d.is_none() {
                return Err(DatasetError::Malformed {
                    line: i + 2,
                    msg: format!("record {:?} is 3d but has no pose3d", r.id),
                });
            }
        }
        Ok(())
    }
}

/// Serialize the dataset; `load_dataset` of the result reproduces every
/// field at full numeric precision.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    ds.validate()?;
    let mut text = String::new();
    let header = HeaderLine {
        format_version: FORMAT_VERSION,
        name: ds.meta.name.clone(),
        seed: ds.meta.seed,
        tau_mm: ds.meta.tau_mm,
    };
    writeln!(text, "{}", serde_json::to_string(&header).expect("header json")).unwrap();
    for r in &ds.records {
        let line = RecordLine {
            id: r.id.clone(),
            domain: r.domain,
            image_w: r.pose2d.image_w,
            image_h: r.pose2d.image_h,
            pose2d: r.pose2d.flat().to_vec(),
            pose3d: r.pose3d.as_ref().map(|p| p.flat().to_vec()),
            attributes: r
                .attributes
                .as_ref()
                .map(|a| a.labels.iter().map(|l| l.token().to_string()).collect()),
            subject_scale: r.subject_scale,
        };
        writeln!(text, "{}", serde_json::to_string(&line).expect("record json")).unwrap();
    }
    let mut f = fs::File::create(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(text.as_bytes()).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Parse a dataset file; ordering is preserved. Malformed lines report
/// their physical line number (the header is line 1).
pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset, DatasetError> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines
        .next()
        .ok_or_else(|| DatasetError::Header("empty file".to_string()))?;
    let header: HeaderLine = serde_json::from_str(header_line)
        .map_err(|e| DatasetError::Header(format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(DatasetError::Header(format!(
            "unsupported format_version {}, expected {}",
            header.format_version, FORMAT_VERSION
        )));
    }
    if header.tau_mm <= 0.0 {
        return Err(DatasetError::NonPositiveTau(header.tau_mm));
    }

    let mut ds = Dataset::new(DatasetMeta {
        name: header.name,
        seed: header.seed,
        tau_mm: header.tau_mm,
    });
    let mut ids = HashSet::new();
    for (idx, raw) in lines {
        let line_no = idx + 1; // enumerate is 0-based, humans count from 1
        if raw.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(raw).map_err(|e| DatasetError::Malformed {
            line: line_no,
            msg: format!("bad record json: {e}"),
        })?;
        if rec.pose2d.len() != NUM_JOINTS * 2 {
            return Err(DatasetError::Malformed {
                line: line_no,
                msg: format!(
                    "expected 16 joints in pose2d, got {}",
                    rec.pose2d.len() / 2
                ),
            });
        }
        let pose2d = Pose2D::from_flat(&rec.pose2d, rec.image_w, rec.image_h).unwrap();
        if !pose2d.is_finite() {
            return Err(DatasetError::Malformed {
                line: line_no,
                msg: "non-finite value in pose2d".to_string(),
            });
        }
        let pose3d = match rec.pose3d {
            Some(vals) => {
                if vals.len() != NUM_JOINTS * 3 {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        msg: format!("expected 16 joints in pose3d, got {}", vals.len() / 3),
                    });
                }
                let p = Pose3D::from_flat(&vals).unwrap();
                if !p.is_finite() {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        msg: "non-finite value in pose3d".to_string(),
                    });
                }
                Some(p)
            }
            None => None,
        };
        let attributes = match rec.attributes {
            Some(tokens) => {
                if tokens.len() != 9 {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        msg: format!("expected 9 attribute tokens, got {}", tokens.len()),
                    });
                }
                let mut labels = [Attribute::OnPlane; 9];
                for (i, t) in tokens.iter().enumerate() {
                    labels[i] = Attribute::from_token(t).ok_or_else(|| DatasetError::Malformed {
                        line: line_no,
                        msg: format!("unknown attribute token {:?} at position {}", t, i),
                    })?;
                }
                Some(AttributeVector::new(labels))
            }
            None => None,
        };
        if rec.domain == Domain::Labeled3D && pose3d.is_none() {
            return Err(DatasetError::Malformed {
                line: line_no,
                msg: format!("record {:?} is 3d but pose3d is null", rec.id),
            });
        }
        if !ids.insert(rec.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: line_no,
                id: rec.id,
            });
        }
        if !rec.subject_scale.is_finite() || rec.subject_scale <= 0.0 {
            return Err(DatasetError::Malformed {
                line: line_no,
                msg: format!("subject_scale must be positive, got {}", rec.subject_scale),
            });
        }
        ds.records.push(SampleRecord {
            id: rec.id,
            domain: rec.domain,
            pose2d,
            pose3d,
            attributes,
            subject_scale: rec.subject_scale,
        });
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::joints::CANONICAL_REST_POSE;

    fn sample_record(id: &str, domain: Domain) -> SampleRecord {
        let pose3d = Pose3D::new(CANONICAL_REST_POSE);
        SampleRecord {
            id: id.to_string(),
            domain,
            pose2d: Pose2D::new([[123.456789012345, 67.8]; NUM_JOINTS], 1000, 1000),
            pose3d: match domain {
                Domain::Labeled3D => Some(pose3d),
                Domain::Labeled2D => None,
            },
            attributes: match domain {
                Domain::Labeled3D => Some(AttributeVector::new([Attribute::OnPlane; 9])),
                Domain::Labeled2D => None,
            },
            subject_scale: 1.0 + 1.0 / 3.0,
        }
    }

    fn meta() -> DatasetMeta {
        DatasetMeta {
            name: "test".to_string(),
            seed: 7,
            tau_mm: 80.0,
        }
    }

    #[test]
    fn empty_dataset_round_trips_as_header_only_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let ds = Dataset::new(meta());
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn single_record_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        let mut ds = Dataset::new(meta());
        ds.records.push(sample_record("rec-0", Domain::Labeled3D));
        save_dataset(&ds, &p1).unwrap();
        let loaded = load_dataset(&p1).unwrap();
        assert_eq!(loaded, ds);
        save_dataset(&loaded, &p2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn absent_attributes_serialize_as_null() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("null.jsonl");
        let mut ds = Dataset::new(meta());
        ds.records.push(sample_record("rec-0", Domain::Labeled2D));
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let rec_line = text.lines().nth(1).unwrap();
        assert!(rec_line.contains("\"attributes\":null"));
        assert!(rec_line.contains("\"pose3d\":null"));
        let loaded = load_dataset(&path).unwrap();
        assert!(loaded.records[0].attributes.is_none());
    }

    #[test]
    fn wrong_joint_count_reports_line_number() {
        // header occupies line 1 and five good records lines 2-6, so the
        // malformed record lands on line 7
        let mut ds = Dataset::new(meta());
        for i in 0..5 {
            ds.records
                .push(sample_record(&format!("rec-{i}"), Domain::Labeled3D));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.jsonl");
        save_dataset(&ds, &path).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        let truncated: Vec<f64> = vec![1.0; 30]; // 15 joints
        let bad = RecordLine {
            id: "rec-bad".to_string(),
            domain: Domain::Labeled2D,
            image_w: 1000,
            image_h: 1000,
            pose2d: truncated,
            pose3d: None,
            attributes: None,
            subject_scale: 1.0,
        };
        text.push_str(&serde_json::to_string(&bad).unwrap());
        text.push('\n');
        fs::write(&path, text).unwrap();

        let err = load_dataset(&path).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line 7: expected 16 joints"),
            "unexpected message: {msg}"
        );
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        let mut ds = Dataset::new(meta());
        ds.records.push(sample_record("same", Domain::Labeled3D));
        ds.records.push(sample_record("other", Domain::Labeled3D));
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"id\":\"other\"", "\"id\":\"same\"");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(DatasetError::DuplicateId { .. })
        ));
    }

    #[test]
    fn labeled3d_without_pose3d_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad3d.jsonl");
        let mut ds = Dataset::new(meta());
        ds.records.push(sample_record("rec-0", Domain::Labeled3D));
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        // null out the pose3d field of the record line
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let start = lines[1].find("\"pose3d\":[").unwrap();
        let end = lines[1][start..].find("],").unwrap() + start + 2;
        lines[1] = format!(
            "{}\"pose3d\":null,{}",
            &lines[1][..start],
            &lines[1][end..]
        );
        fs::write(&path, lines.join("\n")).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("pose3d is null"), "{err}");
    }
}
