//! Tabular news corpus: record schema, CSV loading and writing, and the
//! text-only view consumed by the classifiers.
//!
//! On disk a split is a UTF-8 CSV file with a header row. Columns may appear
//! in any order; empty cells mean the value is missing.

mod report;
mod synthetic;

pub use report::{missingness_report, Field, MissingnessReport};
pub use synthetic::{
    generate_synthetic_corpus, synthetic_vectors, synthetic_word_lexicon, BACKGROUND_SIZE,
    RUMOR_LEXICON,
};

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Canonical column order used when writing.
pub const CANONICAL_HEADER: [&str; 9] = [
    "id",
    "user_id",
    "post_message",
    "timestamp_post",
    "num_like_post",
    "num_comment_post",
    "num_share_post",
    "label",
    "image",
];

/// Class 0: reliable, class 1: unreliable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Reliable = 0,
    Unreliable = 1,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Reliable),
            1 => Some(Label::Unreliable),
            _ => None,
        }
    }

    pub fn as_index(self) -> usize {
        self as usize
    }

    pub fn is_positive(self) -> bool {
        self == Label::Unreliable
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PostRecord {
    pub id: String,
    pub user_id: Option<String>,
    pub message: Option<String>,
    /// Raw epoch seconds, never converted to a calendar date.
    pub timestamp: Option<i64>,
    pub num_like: Option<u64>,
    pub num_comment: Option<u64>,
    pub num_share: Option<u64>,
    pub label: Option<Label>,
    pub image: Option<String>,
}

impl PostRecord {
    pub fn new(id: impl Into<String>) -> Self {
        PostRecord {
            id: id.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitName {
    Train,
    PublicTest,
    PrivateTest,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::PublicTest => "public_test",
            SplitName::PrivateTest => "private_test",
        }
    }

    /// Column title used in the rendered missingness table.
    pub fn title(self) -> &'static str {
        match self {
            SplitName::Train => "Train set",
            SplitName::PublicTest => "Public test set",
            SplitName::PrivateTest => "Private test set",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "public_test" => Ok(SplitName::PublicTest),
            "private_test" => Ok(SplitName::PrivateTest),
            other => Err(Error::Config(format!("unknown split name {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub name: SplitName,
    pub records: Vec<PostRecord>,
}

impl Split {
    pub fn new(name: SplitName, records: Vec<PostRecord>) -> Self {
        Split { name, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// True when every record carries a label.
    pub fn is_labelled(&self) -> bool {
        self.records.iter().all(|r| r.label.is_some())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Id,
    UserId,
    Message,
    Timestamp,
    Like,
    Comment,
    Share,
    Label,
    Image,
}

fn column_for(header: &str) -> Option<Column> {
    Some(match header.trim() {
        "id" => Column::Id,
        // Both names occur for the same field in the wild.
        "user_id" | "user_name" => Column::UserId,
        "post_message" => Column::Message,
        "timestamp_post" => Column::Timestamp,
        "num_like_post" => Column::Like,
        "num_comment_post" => Column::Comment,
        "num_share_post" => Column::Share,
        "label" => Column::Label,
        "image" => Column::Image,
        _ => return None,
    })
}

fn cell(s: &str) -> Option<&str> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

/// Parses an integer cell. Integral floats such as `45.0` are accepted since
/// spreadsheet exports commonly write counts that way.
fn parse_int(s: &str) -> Option<i64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<i64>() {
        return Some(v);
    }
    let f: f64 = t.parse().ok()?;
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15 {
        Some(f as i64)
    } else {
        None
    }
}

/// Loads one split from a CSV file.
///
/// With `has_labels` every row must carry a label; otherwise the label column
/// may be absent or partly empty.
pub fn load_split(path: impl AsRef<Path>, name: SplitName, has_labels: bool) -> Result<Split> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_split(file, path, name, has_labels)
}

/// Same as [`load_split`] but reads from any reader; `path` is used for messages.
pub fn read_split<R: std::io::Read>(
    reader: R,
    path: &Path,
    name: SplitName,
    has_labels: bool,
) -> Result<Split> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();

    let header = match rows.next() {
        None => return Ok(Split::new(name, Vec::new())),
        Some(h) => h.map_err(|e| Error::parse(path, 1, e.to_string()))?,
    };
    let mut columns = Vec::with_capacity(header.len());
    let mut seen = HashSet::new();
    for (i, h) in header.iter().enumerate() {
        // Tolerate a UTF-8 BOM on the first header cell.
        let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { h };
        let col = column_for(h)
            .ok_or_else(|| Error::parse(path, 1, format!("unknown column {h:?}")))?;
        if !seen.insert(col as u8) {
            return Err(Error::parse(path, 1, format!("duplicate column {h:?}")));
        }
        columns.push(col);
    }
    for required in [
        Column::Id,
        Column::UserId,
        Column::Message,
        Column::Timestamp,
        Column::Like,
        Column::Comment,
        Column::Share,
        Column::Image,
    ] {
        if !columns.contains(&required) {
            return Err(Error::parse(
                path,
                1,
                format!("missing column for {required:?}"),
            ));
        }
    }
    if has_labels && !columns.contains(&Column::Label) {
        return Err(Error::parse(path, 1, "missing label column"));
    }

    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (row_idx, row) in rows.enumerate() {
        let line = row_idx + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if row.len() != columns.len() {
            return Err(Error::parse(
                path,
                line,
                format!(
                    "row {} has {} columns, header has {}",
                    row_idx,
                    row.len(),
                    columns.len()
                ),
            ));
        }
        let mut rec = PostRecord::default();
        for (col, raw) in columns.iter().zip(row.iter()) {
            let value = cell(raw);
            let count = |field: &str| -> Result<Option<u64>> {
                match value {
                    None => Ok(None),
                    Some(v) => match parse_int(v) {
                        Some(n) if n >= 0 => Ok(Some(n as u64)),
                        _ => Err(Error::Validation(format!(
                            "row {row_idx}: {field} must be a non-negative integer, got {v:?}"
                        ))),
                    },
                }
            };
            match col {
                Column::Id => rec.id = raw.to_string(),
                Column::UserId => rec.user_id = value.map(str::to_string),
                Column::Message => rec.message = value.map(str::to_string),
                Column::Timestamp => {
                    rec.timestamp = match value {
                        None => None,
                        Some(v) => Some(parse_int(v).ok_or_else(|| {
                            Error::Validation(format!(
                                "row {row_idx}: timestamp_post is not an integer: {v:?}"
                            ))
                        })?),
                    }
                }
                Column::Like => rec.num_like = count("num_like_post")?,
                Column::Comment => rec.num_comment = count("num_comment_post")?,
                Column::Share => rec.num_share = count("num_share_post")?,
                Column::Label => {
                    rec.label = match value {
                        None => None,
                        Some(v) => {
                            let parsed = parse_int(v)
                                .and_then(|n| u8::try_from(n).ok())
                                .and_then(Label::from_u8);
                            Some(parsed.ok_or_else(|| {
                                Error::Validation(format!(
                                    "row {row_idx}: label must be 0 or 1, got {v:?}"
                                ))
                            })?)
                        }
                    }
                }
                Column::Image => rec.image = value.map(str::to_string),
            }
        }
        if rec.id.is_empty() {
            return Err(Error::Validation(format!("row {row_idx}: empty id")));
        }
        if !ids.insert(rec.id.clone()) {
            return Err(Error::Validation(format!(
                "row {row_idx}: duplicate id {:?}",
                rec.id
            )));
        }
        if has_labels && rec.label.is_none() {
            return Err(Error::Validation(format!(
                "row {row_idx}: label missing in a labelled split"
            )));
        }
        records.push(rec);
    }
    Ok(Split::new(name, records))
}

/// Writes a split in canonical column order; missing values become empty cells.
pub fn write_split(split: &Split, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_split_to(split, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_split_to<W: std::io::Write>(split: &Split, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(writer);
    let csv_err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    wtr.write_record(CANONICAL_HEADER).map_err(csv_err)?;
    for r in &split.records {
        let opt = |v: Option<String>| v.unwrap_or_default();
        wtr.write_record([
            r.id.clone(),
            opt(r.user_id.clone()),
            opt(r.message.clone()),
            opt(r.timestamp.map(|v| v.to_string())),
            opt(r.num_like.map(|v| v.to_string())),
            opt(r.num_comment.map(|v| v.to_string())),
            opt(r.num_share.map(|v| v.to_string())),
            opt(r.label.map(|l| l.as_index().to_string())),
            opt(r.image.clone()),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// How records with a missing message are treated by [`text_view`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    Drop,
    EmptyString,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextItem {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

pub fn text_view(split: &Split, policy: MissingPolicy) -> Vec<TextItem> {
    split
        .records
        .iter()
        .filter_map(|r| {
            let text = match (&r.message, policy) {
                (Some(m), _) => m.clone(),
                (None, MissingPolicy::EmptyString) => String::new(),
                (None, MissingPolicy::Drop) => return None,
            };
            Some(TextItem {
                id: r.id.clone(),
                text,
                label: r.label,
            })
        })
        .collect()
}
