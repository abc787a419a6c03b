use std::fmt::Write as _;

use super::{PostRecord, Split, SplitName};

/// Schema fields in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
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

impl Field {
    pub const ALL: [Field; 9] = [
        Field::Id,
        Field::UserId,
        Field::Message,
        Field::Timestamp,
        Field::Like,
        Field::Comment,
        Field::Share,
        Field::Label,
        Field::Image,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Field::Id => "id",
            Field::UserId => "user_id",
            Field::Message => "post_message",
            Field::Timestamp => "timestamp_post",
            Field::Like => "num_like_post",
            Field::Comment => "num_comment_post",
            Field::Share => "num_share_post",
            Field::Label => "label",
            Field::Image => "image",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Field::Id => "Id",
            Field::UserId => "User name",
            Field::Message => "Post message",
            Field::Timestamp => "Timestamp post",
            Field::Like => "Number of like",
            Field::Comment => "Number of comment",
            Field::Share => "Number of share",
            Field::Label => "Label",
            Field::Image => "Image",
        }
    }

    pub fn is_missing(self, r: &PostRecord) -> bool {
        match self {
            Field::Id => r.id.is_empty(),
            Field::UserId => r.user_id.is_none(),
            Field::Message => r.message.is_none(),
            Field::Timestamp => r.timestamp.is_none(),
            Field::Like => r.num_like.is_none(),
            Field::Comment => r.num_comment.is_none(),
            Field::Share => r.num_share.is_none(),
            Field::Label => r.label.is_none(),
            Field::Image => r.image.is_none(),
        }
    }
}

/// Missing-value counts: one row per schema field, one column per split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingnessReport {
    pub splits: Vec<SplitName>,
    pub sizes: Vec<usize>,
    /// `counts[split][field]`, fields in [`Field::ALL`] order.
    pub counts: Vec<[usize; 9]>,
}

pub fn missingness_report(splits: &[Split]) -> MissingnessReport {
    let mut counts = Vec::with_capacity(splits.len());
    for split in splits {
        let mut row = [0usize; 9];
        for rec in &split.records {
            for (slot, field) in row.iter_mut().zip(Field::ALL) {
                *slot += usize::from(field.is_missing(rec));
            }
        }
        counts.push(row);
    }
    MissingnessReport {
        splits: splits.iter().map(|s| s.name).collect(),
        sizes: splits.iter().map(Split::len).collect(),
        counts,
    }
}

/// `3085` -> `3,085`.
pub(crate) fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

impl MissingnessReport {
    pub fn count(&self, split: SplitName, field: Field) -> Option<usize> {
        let col = self.splits.iter().position(|s| *s == split)?;
        let row = Field::ALL.iter().position(|f| *f == field)?;
        Some(self.counts[col][row])
    }

    /// Plain-text table with left-aligned feature names and right-aligned counts.
    pub fn render_table(&self) -> String {
        let mut header = vec!["Feature name".to_string()];
        header.extend(self.splits.iter().map(|s| s.title().to_string()));
        let mut rows = vec![header];
        for (fi, field) in Field::ALL.iter().enumerate() {
            let mut row = vec![field.title().to_string()];
            row.extend(self.counts.iter().map(|c| thousands(c[fi])));
            rows.push(row);
        }
        let ncol = rows[0].len();
        let widths: Vec<usize> = (0..ncol)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let total: usize = widths.iter().sum::<usize>() + 2 * (ncol - 1);

        let mut out = String::new();
        for (ri, row) in rows.iter().enumerate() {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                let pad = widths[c] - cell.chars().count();
                if c == 0 {
                    line.push_str(cell);
                    line.push_str(&" ".repeat(pad));
                } else {
                    line.push_str("  ");
                    line.push_str(&" ".repeat(pad));
                    line.push_str(cell);
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
            if ri == 0 {
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }

    /// `split.field = count` lines plus `split.records = n`.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (col, split) in self.splits.iter().enumerate() {
            let _ = writeln!(out, "{split}.records = {}", self.sizes[col]);
            for (fi, field) in Field::ALL.iter().enumerate() {
                let _ = writeln!(out, "{split}.{} = {}", field.key(), self.counts[col][fi]);
            }
        }
        out
    }
}
