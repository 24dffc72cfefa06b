//! Reading and writing volume records as line-delimited text.
//!
//! Each record line is `study_id slice_count slice_index` followed by zero
//! or more boxes, whitespace separated. A box is `x1,y1,x2,y2` in truth
//! files and `x1,y1,x2,y2,score` or `x1,y1,x2,y2,score,track_id` in
//! detection files. Lines starting with `#` and blank lines are skipped.
//! A record with no boxes still declares its study and slice count.
//!
//! The serializer is canonical: studies sort by id, slices ascend, boxes
//! sort by descending score then coordinates, and every number is written
//! with six decimals. Serializing any parse of a canonical file reproduces
//! it byte for byte.

use crate::bytetrack::Detection;
use crate::geometry::BoundingBox;
use crate::pipeline::VolumeDetections;
use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Whether box entries carry a score (detections) or must not (truth).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    BoxesOnly,
    WithScores,
}

/// A fatal defect in record text, pinned to its 1-based line.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// A file-level failure: the underlying read/write, or a parse defect
/// with its path attached.
#[derive(Debug, Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{}", path.display(), source)]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

fn valid_study_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

fn parse_coord(token: &str, line: usize) -> Result<f64, ParseError> {
    token
        .parse::<f64>()
        .map_err(|_| err(line, format!("invalid number '{token}'")))
}

fn parse_box(token: &str, kind: RecordKind, slice_index: usize, line: usize) -> Result<Detection, ParseError> {
    let parts: Vec<&str> = token.split(',').collect();
    match (kind, parts.len()) {
        (RecordKind::BoxesOnly, 4) | (RecordKind::WithScores, 5 | 6) => {}
        (RecordKind::BoxesOnly, 5 | 6) => {
            return Err(err(line, format!("box '{token}' carries a score but this file holds plain boxes")));
        }
        (RecordKind::WithScores, 4) => {
            return Err(err(line, format!("box '{token}' is missing its score")));
        }
        _ => {
            return Err(err(line, format!("box '{token}' must have 4 to 6 comma-separated fields")));
        }
    }

    let x1 = parse_coord(parts[0], line)?;
    let y1 = parse_coord(parts[1], line)?;
    let x2 = parse_coord(parts[2], line)?;
    let y2 = parse_coord(parts[3], line)?;
    let bbox = BoundingBox::new(x1, y1, x2, y2)
        .map_err(|e| err(line, format!("box '{token}': {e}")))?;

    let score = if parts.len() >= 5 { parse_coord(parts[4], line)? } else { 1.0 };
    let mut det = Detection::new(bbox, score, slice_index)
        .map_err(|e| err(line, format!("box '{token}': {e}")))?;

    if parts.len() == 6 {
        let id: u64 = parts[5]
            .parse()
            .map_err(|_| err(line, format!("invalid track id '{}'", parts[5])))?;
        if id == 0 {
            return Err(err(line, "track id must be positive"));
        }
        det.track_id = Some(id);
    }
    Ok(det)
}

/// Parses record text into volumes, ordered by first appearance.
pub fn parse_text(text: &str, kind: RecordKind) -> Result<Vec<VolumeDetections>, ParseError> {
    let mut volumes: Vec<VolumeDetections> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen_slices: HashSet<(usize, usize)> = HashSet::new();

    for (line_no, raw) in text.lines().enumerate() {
        let line = line_no + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let study_id = tokens.next().expect("non-blank line has a first token");
        let count_tok = tokens
            .next()
            .ok_or_else(|| err(line, "record needs a slice count"))?;
        let index_tok = tokens
            .next()
            .ok_or_else(|| err(line, "record needs a slice index"))?;

        if !valid_study_id(study_id) {
            return Err(err(
                line,
                format!("study id '{study_id}' may only use letters, digits, '.', '_', '-'"),
            ));
        }
        let slice_count: usize = count_tok
            .parse()
            .map_err(|_| err(line, format!("invalid slice count '{count_tok}'")))?;
        if slice_count == 0 {
            return Err(err(line, "slice count must be at least 1"));
        }
        let slice_index: usize = index_tok
            .parse()
            .map_err(|_| err(line, format!("invalid slice index '{index_tok}'")))?;
        if slice_index >= slice_count {
            return Err(err(
                line,
                format!("slice index {slice_index} is out of range for {slice_count} slices"),
            ));
        }

        let vi = match index.get(study_id) {
            Some(&vi) => {
                if volumes[vi].slice_count() != slice_count {
                    return Err(err(
                        line,
                        format!(
                            "study '{study_id}' was declared with {} slices, not {slice_count}",
                            volumes[vi].slice_count()
                        ),
                    ));
                }
                vi
            }
            None => {
                let v = VolumeDetections::new(study_id.to_string(), slice_count)
                    .expect("id and count were validated");
                volumes.push(v);
                index.insert(study_id.to_string(), volumes.len() - 1);
                volumes.len() - 1
            }
        };
        if !seen_slices.insert((vi, slice_index)) {
            return Err(err(
                line,
                format!("slice {slice_index} of study '{study_id}' appears twice"),
            ));
        }

        for token in tokens {
            let det = parse_box(token, kind, slice_index, line)?;
            volumes[vi].push(det).expect("slice index was validated");
        }
    }
    Ok(volumes)
}

fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.6}")
}

/// Renders volumes in canonical form. `mode_note` adds a `# mode:` header
/// recording how detections were produced.
pub fn serialize(volumes: &[VolumeDetections], kind: RecordKind, mode_note: Option<&str>) -> String {
    let mut out = String::new();
    out.push_str("# slicetrack records: study_id slice_count slice_index box*\n");
    out.push_str(match kind {
        RecordKind::BoxesOnly => "# box: x1,y1,x2,y2\n",
        RecordKind::WithScores => "# box: x1,y1,x2,y2,score[,track_id]\n",
    });
    if let Some(note) = mode_note {
        writeln!(out, "# mode: {note}").unwrap();
    }

    let mut order: Vec<&VolumeDetections> = volumes.iter().collect();
    order.sort_by(|a, b| a.study_id().cmp(b.study_id()));
    for v in order {
        let mut wrote_any = false;
        for s in 0..v.slice_count() {
            let mut boxes: Vec<&Detection> = v.slice(s).iter().collect();
            if boxes.is_empty() {
                continue;
            }
            boxes.sort_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.bbox.x1().total_cmp(&b.bbox.x1()))
                    .then(a.bbox.y1().total_cmp(&b.bbox.y1()))
                    .then(a.bbox.x2().total_cmp(&b.bbox.x2()))
                    .then(a.bbox.y2().total_cmp(&b.bbox.y2()))
                    .then(a.track_id.cmp(&b.track_id))
            });
            write!(out, "{} {} {}", v.study_id(), v.slice_count(), s).unwrap();
            for d in boxes {
                write!(
                    out,
                    " {},{},{},{}",
                    fmt_num(d.bbox.x1()),
                    fmt_num(d.bbox.y1()),
                    fmt_num(d.bbox.x2()),
                    fmt_num(d.bbox.y2())
                )
                .unwrap();
                if kind == RecordKind::WithScores {
                    write!(out, ",{}", fmt_num(d.score)).unwrap();
                    if let Some(id) = d.track_id {
                        write!(out, ",{id}").unwrap();
                    }
                }
            }
            out.push('\n');
            wrote_any = true;
        }
        if !wrote_any {
            // Keep empty volumes visible so their studies survive a round
            // trip.
            writeln!(out, "{} {} 0", v.study_id(), v.slice_count()).unwrap();
        }
    }
    out
}

/// Reads and parses one record file.
pub fn read_file(path: &Path, kind: RecordKind) -> Result<Vec<VolumeDetections>, FileError> {
    let text = std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_text(&text, kind).map_err(|source| FileError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes canonical record text to `path` through a same-directory
/// temporary file, so a crash never leaves a half-written output.
pub fn write_file(
    path: &Path,
    volumes: &[VolumeDetections],
    kind: RecordKind,
    mode_note: Option<&str>,
) -> Result<(), FileError> {
    let text = serialize(volumes, kind, mode_note);
    write_text_atomic(path, &text)
}

/// Same temp-and-rename discipline for arbitrary text outputs.
pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), FileError> {
    let io_err = |source| FileError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    std::fs::write(tmp.path(), text).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
