use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Label;

/// Dataset role of a manifest row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub id: String,
    pub path: PathBuf,
    pub label: Label,
    pub split: Split,
    /// Filled in by [`probe_record`](super::probe_record).
    pub duration_s: Option<f64>,
}

impl VideoRecord {
    pub fn new(id: impl Into<String>, path: impl Into<PathBuf>, label: Label) -> Self {
        VideoRecord {
            id: id.into(),
            path: path.into(),
            label,
            split: Split::Unassigned,
            duration_s: None,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    id: String,
    path: PathBuf,
    label: String,
    #[serde(default)]
    split: Option<String>,
}

#[derive(Serialize)]
struct OutRow<'a> {
    id: &'a str,
    path: &'a Path,
    label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<&'static str>,
}

/// Loads a JSON-lines manifest. Relative media paths are resolved against the
/// manifest's directory. Blank lines are ignored.
pub fn load_manifest(path: &Path) -> Result<Vec<VideoRecord>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    parse_manifest(&text, path)
}

/// Parses manifest text; `origin` is used for error messages and to resolve
/// relative media paths.
pub fn parse_manifest(text: &str, origin: &Path) -> Result<Vec<VideoRecord>> {
    let base = origin.parent().unwrap_or_else(|| Path::new(""));
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRow = serde_json::from_str(line).map_err(|e| Error::ManifestParse {
            path: origin.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.id.is_empty() {
            return Err(Error::ManifestParse {
                path: origin.to_path_buf(),
                line: line_no,
                message: "empty id".into(),
            });
        }
        let label = Label::parse(&raw.label).ok_or_else(|| Error::UnknownLabel {
            path: origin.to_path_buf(),
            line: line_no,
            label: raw.label.clone(),
        })?;
        let split = match raw.split.as_deref() {
            None => Split::Unassigned,
            Some("train") => Split::Train,
            Some("test") => Split::Test,
            Some(other) => {
                return Err(Error::ManifestParse {
                    path: origin.to_path_buf(),
                    line: line_no,
                    message: format!("unknown split {other:?} (expected \"train\" or \"test\")"),
                })
            }
        };
        if let Some(&first_line) = seen.get(&raw.id) {
            return Err(Error::DuplicateId {
                path: origin.to_path_buf(),
                line: line_no,
                first_line,
                id: raw.id,
            });
        }
        seen.insert(raw.id.clone(), line_no);
        let media = if raw.path.is_absolute() {
            raw.path
        } else {
            base.join(raw.path)
        };
        records.push(VideoRecord {
            id: raw.id,
            path: media,
            label,
            split,
            duration_s: None,
        });
    }

    if records.is_empty() {
        log::warn!("manifest {} contains no records", origin.display());
    }
    Ok(records)
}

/// Serializes records back to the manifest format (absolute paths as stored).
pub fn write_manifest(path: &Path, records: &[VideoRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        let row = OutRow {
            id: &r.id,
            path: &r.path,
            label: r.label,
            split: match r.split {
                Split::Train => Some("train"),
                Split::Test => Some("test"),
                Split::Unassigned => None,
            },
        };
        out.push_str(&serde_json::to_string(&row)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing manifest {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<VideoRecord>> {
        parse_manifest(text, Path::new("/data/manifest.jsonl"))
    }

    #[test]
    fn two_valid_lines() {
        let recs = parse(
            "{\"id\":\"a\",\"path\":\"a.mp4\",\"label\":\"sensitive\",\"split\":\"train\"}\n\
             {\"id\":\"b\",\"path\":\"/abs/b.mp4\",\"label\":\"non_sensitive\"}\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].path, PathBuf::from("/data/a.mp4"));
        assert_eq!(recs[0].split, Split::Train);
        assert_eq!(recs[1].path, PathBuf::from("/abs/b.mp4"));
        assert_eq!(recs[1].label, Label::NonSensitive);
        assert_eq!(recs[1].split, Split::Unassigned);
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n\n").unwrap().is_empty());
    }

    #[test]
    fn unknown_label_names_line() {
        let err = parse(
            "{\"id\":\"a\",\"path\":\"a.mp4\",\"label\":\"sensitive\"}\n\
             {\"id\":\"b\",\"path\":\"b.mp4\",\"label\":\"maybe\"}\n",
        )
        .unwrap_err();
        match &err {
            Error::UnknownLabel { line, label, .. } => {
                assert_eq!(*line, 2);
                assert_eq!(label, "maybe");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains(":2:"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = parse(
            "{\"id\":\"a\",\"path\":\"a.mp4\",\"label\":\"sensitive\"}\n\
             {\"id\":\"a\",\"path\":\"b.mp4\",\"label\":\"sensitive\"}\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateId { line: 2, first_line: 1, .. }));
    }

    #[test]
    fn parse_error_carries_line_number() {
        let err = parse("{\"id\":\"a\",\"path\":\"a.mp4\",\"label\":\"sensitive\"}\nnot json\n").unwrap_err();
        assert!(matches!(err, Error::ManifestParse { line: 2, .. }));
        let err = parse("{\"id\":\"a\",\"path\":\"a.mp4\"}\n").unwrap_err();
        assert!(matches!(err, Error::ManifestParse { line: 1, .. }));
    }

    #[test]
    fn bad_split_rejected() {
        let err = parse("{\"id\":\"a\",\"path\":\"a.mp4\",\"label\":\"sensitive\",\"split\":\"val\"}").unwrap_err();
        assert!(matches!(err, Error::ManifestParse { line: 1, .. }));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let recs = vec![
            VideoRecord::new("x", dir.path().join("x.mp4"), Label::Sensitive).with_split(Split::Test),
            VideoRecord::new("y", dir.path().join("y.mp4"), Label::NonSensitive),
        ];
        write_manifest(&path, &recs).unwrap();
        assert_eq!(load_manifest(&path).unwrap(), recs);
    }
}
