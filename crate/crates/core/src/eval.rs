//! Prediction sets, rank-based AUC and probability averaging.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    /// Probability of the unreliable class.
    pub prob: f64,
    pub label: Option<u8>,
}

/// Ordered predictions with unique ids; either every entry has a label or none does.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    entries: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(entries: Vec<Prediction>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !(0.0..=1.0).contains(&e.prob) {
                return Err(Error::Validation(format!(
                    "probability for id {} is {}, outside [0, 1]",
                    e.id, e.prob
                )));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id {}", e.id)));
            }
            if let Some(l) = e.label {
                if l > 1 {
                    return Err(Error::Validation(format!("label {l} for id {} is not 0 or 1", e.id)));
                }
            }
        }
        let labelled = entries.iter().filter(|e| e.label.is_some()).count();
        if labelled != 0 && labelled != entries.len() {
            return Err(Error::Validation(format!(
                "{labelled} of {} predictions carry labels; expected all or none",
                entries.len()
            )));
        }
        Ok(PredictionSet { entries })
    }

    /// Unlabelled set from parallel id and probability lists.
    pub fn from_probs<S: Into<String>>(ids: impl IntoIterator<Item = S>, probs: &[f64]) -> Result<Self> {
        let ids: Vec<S> = ids.into_iter().collect();
        if ids.len() != probs.len() {
            return Err(Error::Input(format!("{} ids but {} probabilities", ids.len(), probs.len())));
        }
        let entries = ids
            .into_iter()
            .zip(probs)
            .map(|(id, &prob)| Prediction {
                id: id.into(),
                prob,
                label: None,
            })
            .collect();
        Self::new(entries)
    }

    pub fn entries(&self) -> &[Prediction] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.prob).collect()
    }

    pub fn is_labelled(&self) -> bool {
        !self.entries.is_empty() && self.entries[0].label.is_some()
    }

    /// Attaches gold labels by id. Every prediction needs a label and every
    /// gold id needs a prediction.
    pub fn with_labels(&self, gold: &HashMap<String, u8>) -> Result<Self> {
        let ids: HashSet<&str> = self.entries.iter().map(|e| e.id.as_str()).collect();
        let gold_ids: HashSet<&str> = gold.keys().map(String::as_str).collect();
        let diff = symmetric_difference(&ids, &gold_ids);
        if !diff.is_empty() {
            return Err(Error::Alignment(diff));
        }
        let entries = self
            .entries
            .iter()
            .map(|e| Prediction {
                label: Some(gold[&e.id]),
                ..e.clone()
            })
            .collect();
        Self::new(entries)
    }
}

fn symmetric_difference(a: &HashSet<&str>, b: &HashSet<&str>) -> Vec<String> {
    let diff: BTreeSet<&str> = a.symmetric_difference(b).copied().collect();
    diff.into_iter().map(String::from).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucResult {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Positive/negative pairs with equal scores.
    pub tie_pairs: usize,
}

impl fmt::Display for AucResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AUC: {:.6}", self.auc)
    }
}

impl AucResult {
    pub fn to_kv(&self) -> String {
        format!(
            "auc = {:.6}\nn_pos = {}\nn_neg = {}\ntie_pairs = {}\n",
            self.auc, self.n_pos, self.n_neg, self.tie_pairs
        )
    }
}

/// Mann-Whitney AUC in O(n log n). Counts are kept in half-pair units so the
/// result is bit-identical to the pairwise definition.
pub fn auc_scores(scores: &[f64], labels: &[u8]) -> Result<AucResult> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Numeric(format!("score {bad} cannot be ranked")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut half_units: u64 = 0;
    let mut tie_pairs = 0usize;
    let mut neg_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] == 1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        half_units += pos_here * (2 * neg_below + neg_here);
        tie_pairs += (pos_here * neg_here) as usize;
        neg_below += neg_here;
        i = j;
    }
    let auc = (half_units as f64 * 0.5) / (n_pos * n_neg) as f64;
    Ok(AucResult {
        auc,
        n_pos,
        n_neg,
        tie_pairs,
    })
}

/// AUC of a labelled prediction set.
pub fn auc(preds: &PredictionSet) -> Result<AucResult> {
    if !preds.is_labelled() {
        return Err(Error::Validation("AUC needs a labelled prediction set".into()));
    }
    let labels: Vec<u8> = preds.entries.iter().map(|e| e.label.unwrap_or(0)).collect();
    auc_scores(&preds.probs(), &labels)
}

/// Weighted mean of the positive-class probability per id, in the first
/// set's order. Uniform weights when `weights` is `None`.
pub fn ensemble_average(sets: &[PredictionSet], weights: Option<&[f64]>) -> Result<PredictionSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::Input("ensemble needs at least one prediction set".into()))?;
    let weights: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != sets.len() {
                return Err(Error::Input(format!(
                    "{} weights for {} prediction sets",
                    w.len(),
                    sets.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Validation(format!(
                    "weights must be non-negative with a positive sum, got {w:?}"
                )));
            }
            w.to_vec()
        }
        None => vec![1.0; sets.len()],
    };
    let total: f64 = weights.iter().sum();

    let first_ids: HashSet<&str> = first.entries.iter().map(|e| e.id.as_str()).collect();
    let mut lookups = Vec::with_capacity(sets.len());
    for s in sets {
        let ids: HashSet<&str> = s.entries.iter().map(|e| e.id.as_str()).collect();
        let diff = symmetric_difference(&first_ids, &ids);
        if !diff.is_empty() {
            return Err(Error::Alignment(diff));
        }
        let map: HashMap<&str, f64> = s.entries.iter().map(|e| (e.id.as_str(), e.prob)).collect();
        lookups.push(map);
    }

    let entries = first
        .entries
        .iter()
        .map(|e| {
            let mut acc = 0.0;
            for (map, w) in lookups.iter().zip(&weights) {
                if *w != 0.0 {
                    acc += w * map[e.id.as_str()];
                }
            }
            // keep the mean inside the hull of the inputs despite rounding
            let (lo, hi) = lookups.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                let p = m[e.id.as_str()];
                (lo.min(p), hi.max(p))
            });
            Prediction {
                id: e.id.clone(),
                prob: (acc / total).clamp(lo, hi),
                label: e.label,
            }
        })
        .collect();
    PredictionSet::new(entries)
}

/// Writes `id,prob` with six decimals.
pub fn write_submission(preds: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(err) => Error::io(path, err),
        other => Error::Input(format!("{}: {other:?}", path.display())),
    };
    wtr.write_record(["id", "prob"]).map_err(io)?;
    for e in &preds.entries {
        wtr.write_record([e.id.as_str(), &format!("{:.6}", e.prob)]).map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Reads an `id,prob` file written by [`write_submission`].
pub fn read_submission(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["id", "prob"] {
        return Err(Error::parse(path, 1, "expected header id,prob"));
    }
    let mut entries = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        if row.len() != 2 {
            return Err(Error::parse(path, line, format!("expected 2 fields, got {}", row.len())));
        }
        let prob: f64 = row[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad probability {:?}", &row[1])))?;
        entries.push(Prediction {
            id: row[0].to_string(),
            prob,
            label: None,
        });
    }
    PredictionSet::new(entries)
}
