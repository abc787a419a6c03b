use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training examples.
    pub train_loss: f64,
    /// `None` when the validation split lacks one of the classes.
    pub valid_auc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub epochs: Vec<EpochStats>,
    pub checkpoint: Option<PathBuf>,
    /// Set when the run aborted; `epochs` then holds the completed ones.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn failed(config: ExperimentConfig, message: String) -> Self {
        RunRecord {
            config,
            epochs: Vec::new(),
            checkpoint: None,
            failure: Some(message),
        }
    }

    /// Validation AUC after the last epoch.
    pub fn final_auc(&self) -> Option<f64> {
        if self.failure.is_some() {
            return None;
        }
        self.epochs.last().and_then(|e| e.valid_auc)
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }

    /// Config echo plus outcome. Timings live in the per-epoch CSV only.
    pub fn to_kv(&self) -> String {
        let mut out = self.config.to_kv();
        let _ = writeln!(out, "completed_epochs = {}", self.epochs.len());
        match self.final_auc() {
            Some(a) => {
                let _ = writeln!(out, "final_valid_auc = {a}");
            }
            None => out.push_str("final_valid_auc = none\n"),
        }
        if let Some(p) = &self.checkpoint {
            let _ = writeln!(out, "checkpoint = {}", p.display());
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(out, "failure = {}", f.replace('\n', " "));
        }
        out
    }

    /// `epoch,train_loss,valid_auc,seconds`; floats use shortest round-trip form.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,valid_auc,seconds\n");
        for e in &self.epochs {
            let auc = e.valid_auc.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:.3}", e.epoch, e.train_loss, auc, e.seconds);
        }
        out
    }
}

/// Reads the per-epoch CSV written by [`RunRecord::epochs_csv`].
pub fn read_epochs_csv(path: impl AsRef<Path>) -> Result<Vec<EpochStats>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let field = |k: usize| row.get(k).unwrap_or("");
        let bad = |what: &str| Error::parse(path, line, format!("bad {what}"));
        out.push(EpochStats {
            epoch: field(0).parse().map_err(|_| bad("epoch"))?,
            train_loss: field(1).parse().map_err(|_| bad("train_loss"))?,
            valid_auc: match field(2) {
                "" => None,
                v => Some(v.parse().map_err(|_| bad("valid_auc"))?),
            },
            seconds: field(3).parse().map_err(|_| bad("seconds"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::ModelKind;

    #[test]
    fn epochs_csv_round_trips_losses_exactly() {
        let rec = RunRecord {
            config: ExperimentConfig::new(ModelKind::BiLstm),
            epochs: vec![
                EpochStats { epoch: 1, train_loss: 0.6931471805599453, valid_auc: Some(0.5), seconds: 1.25 },
                EpochStats { epoch: 2, train_loss: 1.0 / 3.0, valid_auc: None, seconds: 0.5 },
            ],
            checkpoint: None,
            failure: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("epochs.csv");
        std::fs::write(&p, rec.epochs_csv()).unwrap();
        let back = read_epochs_csv(&p).unwrap();
        assert_eq!(back[0].train_loss, rec.epochs[0].train_loss);
        assert_eq!(back[1].train_loss, 1.0 / 3.0);
        assert_eq!(back[1].valid_auc, None);
        assert!(rec.to_kv().contains("final_valid_auc = none"));
    }
}
