//! Seeded mini-batch training with Adam, validation AUC per epoch, sweeps
//! over configurations and checkpoint-based prediction.
//!
//! Every random choice comes from [`rng::stream`] keyed by the run seed:
//! initialization, the per-epoch shuffle, dropout masks (one stream per
//! example slot) and the validation carve. Per-example gradients may be
//! computed in parallel, but they are reduced in a fixed order, so a run is
//! bit-for-bit reproducible.

mod config;
mod record;

pub use config::{AdamSettings, ExperimentConfig, ModelKind, CONFIG_KEYS};
pub use record::{read_epochs_csv, EpochStats, RunRecord};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::corpus::{synthetic_vectors, text_view, MissingPolicy, Split, TextItem};
use crate::embeddings::{embed_sequence, load_vectors, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{auc_scores, PredictionSet};
use crate::models::checkpoint::Checkpoint;
use crate::models::{zeros_like, BaselineInput, BiLstm, Classifier, Parameters, TextCnn, TransformerClassifier};
use crate::rng::{self, domain};
use crate::tokenization::{Lexicon, TokenizedExample, Tokenizer};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TOKENIZER_DIR: &str = "tokenizer";
pub const RECORD_FILE: &str = "run.kv";
pub const EPOCHS_FILE: &str = "epochs.csv";

/// Examples handled by one worker before its gradient joins the batch sum.
const GRAD_CHUNK: usize = 4;

/// Text-to-input conversion fitted on the training split.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub tokenizer: Tokenizer,
    /// Static word vectors; baselines only.
    pub vectors: Option<EmbeddingTable>,
}

fn load_lexicon(config: &ExperimentConfig) -> Result<Lexicon> {
    match &config.lexicon {
        None => Ok(Lexicon::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(Lexicon::new(text.lines().filter(|l| !l.trim().is_empty())))
        }
    }
}

fn load_table(config: &ExperimentConfig) -> Result<Option<EmbeddingTable>> {
    if config.model == ModelKind::Transformer {
        return Ok(None);
    }
    Ok(Some(match &config.embeddings {
        Some(p) => load_vectors(p)?,
        None => synthetic_vectors(config.embedding_dim, config.vectors_seed),
    }))
}

impl Pipeline {
    pub fn fit<S: AsRef<str>>(config: &ExperimentConfig, texts: &[S]) -> Result<Self> {
        let tokenizer = Tokenizer::train(config.tokenizer, texts, load_lexicon(config)?)?;
        Ok(Pipeline {
            tokenizer,
            vectors: load_table(config)?,
        })
    }

    /// Tokenizer saved under `dir`; vectors as named by `config`.
    pub fn load(config: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<Self> {
        Ok(Pipeline {
            tokenizer: Tokenizer::load(dir)?,
            vectors: load_table(config)?,
        })
    }

    pub fn encode(&self, text: &str) -> TokenizedExample {
        self.tokenizer.encode(text)
    }

    pub fn embed(&self, text: &str) -> Result<BaselineInput> {
        let table = self
            .vectors
            .as_ref()
            .ok_or_else(|| Error::Config("baseline pipeline has no word vectors".into()))?;
        let max_len = self.tokenizer.spec.max_len;
        let tokens = self.tokenizer.tokens(text);
        let n = tokens.len().min(max_len);
        let mut mask = vec![1u8; n];
        mask.resize(max_len, 0);
        Ok(BaselineInput {
            matrix: embed_sequence(&tokens, table, max_len),
            mask,
        })
    }
}

/// A trained classifier of any supported kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Transformer(TransformerClassifier),
    TextCnn(TextCnn),
    BiLstm(BiLstm),
}

impl Model {
    /// Freshly initialized from the `INIT` stream of the run seed.
    pub fn init(config: &ExperimentConfig, pipeline: &Pipeline) -> Result<Self> {
        let mut r = rng::stream(config.seed, domain::INIT, 0);
        Ok(match config.model {
            ModelKind::Transformer => {
                let enc = config.encoder_config(pipeline.tokenizer.vocab.len());
                Model::Transformer(TransformerClassifier::new(enc, config.head_dropout, &mut r)?)
            }
            ModelKind::TextCnn | ModelKind::BiLstm => {
                let dim = pipeline
                    .vectors
                    .as_ref()
                    .map(EmbeddingTable::dim)
                    .ok_or_else(|| Error::Config("baseline pipeline has no word vectors".into()))?;
                let bc = config.baseline_config(dim);
                if config.model == ModelKind::TextCnn {
                    Model::TextCnn(TextCnn::new(bc, &mut r)?)
                } else {
                    Model::BiLstm(BiLstm::new(bc, &mut r)?)
                }
            }
        })
    }

    /// Positive-class probabilities with dropout off, in input order.
    pub fn predict<S: AsRef<str> + Sync>(&self, pipeline: &Pipeline, texts: &[S]) -> Result<Vec<f64>> {
        match self {
            Model::Transformer(m) => texts
                .par_iter()
                .map(|t| m.positive_probability(&pipeline.encode(t.as_ref())))
                .collect(),
            Model::TextCnn(m) => texts
                .par_iter()
                .map(|t| m.positive_probability(&pipeline.embed(t.as_ref())?))
                .collect(),
            Model::BiLstm(m) => texts
                .par_iter()
                .map(|t| m.positive_probability(&pipeline.embed(t.as_ref())?))
                .collect(),
        }
    }

    pub fn checkpoint(&self, config: &ExperimentConfig) -> Checkpoint {
        let pairs = config.to_pairs();
        match self {
            Model::Transformer(m) => Checkpoint::from_params(pairs, m),
            Model::TextCnn(m) => Checkpoint::from_params(pairs, m),
            Model::BiLstm(m) => Checkpoint::from_params(pairs, m),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint, config: &ExperimentConfig, pipeline: &Pipeline) -> Result<Self> {
        let mut model = Model::init(config, pipeline)?;
        match &mut model {
            Model::Transformer(m) => ck.load_into(m)?,
            Model::TextCnn(m) => ck.load_into(m)?,
            Model::BiLstm(m) => ck.load_into(m)?,
        }
        Ok(model)
    }

    pub fn num_params(&self) -> usize {
        match self {
            Model::Transformer(m) => m.num_params(),
            Model::TextCnn(m) => m.num_params(),
            Model::BiLstm(m) => m.num_params(),
        }
    }
}

pub struct TrainOutcome {
    pub model: Model,
    pub pipeline: Pipeline,
    pub record: RunRecord,
}

impl TrainOutcome {
    /// Writes the checkpoint, tokenizer, run record and per-epoch CSV into `dir`.
    pub fn save(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ck = dir.join(CHECKPOINT_FILE);
        self.model.checkpoint(&self.record.config).save(&ck)?;
        self.pipeline.tokenizer.save(dir.join(TOKENIZER_DIR))?;
        self.record.checkpoint = Some(PathBuf::from(CHECKPOINT_FILE));
        write_record(&self.record, dir)
    }
}

pub fn write_record(record: &RunRecord, dir: &Path) -> Result<()> {
    let p = dir.join(RECORD_FILE);
    std::fs::write(&p, record.to_kv()).map_err(|e| Error::io(&p, e))?;
    let p = dir.join(EPOCHS_FILE);
    std::fs::write(&p, record.epochs_csv()).map_err(|e| Error::io(&p, e))
}

fn labelled_items(split: &Split) -> Result<Vec<TextItem>> {
    let items = text_view(split, MissingPolicy::EmptyString);
    if let Some(bad) = items.iter().find(|i| i.label.is_none()) {
        return Err(Error::Validation(format!(
            "{} record {} has no label; training needs labelled data",
            split.name, bad.id
        )));
    }
    Ok(items)
}

/// Seeded hold-out of `fraction` of the items (at least one when fraction > 0).
fn carve(items: Vec<TextItem>, fraction: f64, seed: u64) -> (Vec<TextItem>, Vec<TextItem>) {
    if fraction <= 0.0 || items.len() < 2 {
        return (items, Vec::new());
    }
    let n_valid = ((items.len() as f64 * fraction).ceil() as usize).clamp(1, items.len() - 1);
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng::stream(seed, domain::CARVE, 0));
    let mut is_valid = vec![false; items.len()];
    for &i in &order[..n_valid] {
        is_valid[i] = true;
    }
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (i, item) in items.into_iter().enumerate() {
        if is_valid[i] {
            valid.push(item);
        } else {
            train.push(item);
        }
    }
    (train, valid)
}

/// Trains `config.model` on `train`. Without `valid`, a seeded
/// `valid_fraction` slice of `train` is held out for validation.
pub fn train(config: &ExperimentConfig, train: &Split, valid: Option<&Split>) -> Result<TrainOutcome> {
    config.validate()?;
    let items = labelled_items(train)?;
    if items.is_empty() {
        return Err(Error::Validation("training split is empty".into()));
    }
    let (train_items, valid_items) = match valid {
        Some(v) => (items, labelled_items(v)?),
        None => carve(items, config.valid_fraction, config.seed),
    };
    let texts: Vec<&str> = train_items.iter().map(|i| i.text.as_str()).collect();
    let pipeline = Pipeline::fit(config, &texts)?;
    let label = |i: &TextItem| i.label.map(|l| l.as_index()).unwrap_or(0);

    let (model, epochs) = match Model::init(config, &pipeline)? {
        Model::Transformer(m) => {
            let tr = train_items.iter().map(|i| (pipeline.encode(&i.text), label(i))).collect();
            let va = valid_items.iter().map(|i| (pipeline.encode(&i.text), label(i) as u8)).collect();
            let (m, e) = fit(m, config, tr, va)?;
            (Model::Transformer(m), e)
        }
        Model::TextCnn(m) => {
            let (tr, va) = embed_all(&pipeline, &train_items, &valid_items)?;
            let (m, e) = fit(m, config, tr, va)?;
            (Model::TextCnn(m), e)
        }
        Model::BiLstm(m) => {
            let (tr, va) = embed_all(&pipeline, &train_items, &valid_items)?;
            let (m, e) = fit(m, config, tr, va)?;
            (Model::BiLstm(m), e)
        }
    };
    Ok(TrainOutcome {
        model,
        pipeline,
        record: RunRecord {
            config: config.clone(),
            epochs,
            checkpoint: None,
            failure: None,
        },
    })
}

type Labelled<I> = Vec<(I, usize)>;
type Scored<I> = Vec<(I, u8)>;

fn embed_all(
    pipeline: &Pipeline,
    train: &[TextItem],
    valid: &[TextItem],
) -> Result<(Labelled<BaselineInput>, Scored<BaselineInput>)> {
    let label = |i: &TextItem| i.label.map(|l| l.as_index()).unwrap_or(0);
    let tr = train
        .iter()
        .map(|i| Ok((pipeline.embed(&i.text)?, label(i))))
        .collect::<Result<_>>()?;
    let va = valid
        .iter()
        .map(|i| Ok((pipeline.embed(&i.text)?, label(i) as u8)))
        .collect::<Result<_>>()?;
    Ok((tr, va))
}

struct Adam {
    settings: AdamSettings,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize, settings: AdamSettings) -> Self {
        Adam {
            settings,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        let AdamSettings { beta1, beta2, eps } = self.settings;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

fn validation_auc<C: Classifier>(model: &C, valid: &[(C::Input, u8)]) -> Result<Option<f64>> {
    if valid.is_empty() {
        return Ok(None);
    }
    let scores: Vec<f64> = valid
        .par_iter()
        .map(|(x, _)| model.positive_probability(x))
        .collect::<Result<_>>()?;
    let labels: Vec<u8> = valid.iter().map(|(_, l)| *l).collect();
    match auc_scores(&scores, &labels) {
        Ok(r) => Ok(Some(r.auc)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// The optimization loop shared by all classifiers.
pub fn fit<C: Classifier>(
    mut model: C,
    config: &ExperimentConfig,
    train: Vec<(C::Input, usize)>,
    valid: Vec<(C::Input, u8)>,
) -> Result<(C, Vec<EpochStats>)> {
    let n = train.len();
    let mut adam = Adam::new(model.num_params(), config.adam);
    let mut stats = Vec::with_capacity(config.epochs);
    let diag = |epoch: usize, batch: usize, msg: String| {
        Error::Numeric(format!(
            "run {} (model {}, seed {}, learning_rate {}): epoch {epoch}, batch {batch}: {msg}",
            config.name, config.model, config.seed, config.learning_rate
        ))
    };
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(config.seed, domain::SHUFFLE, epoch as u64));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let slot0 = (epoch * n + b * config.batch_size) as u64;
            let parts: Vec<Result<(f64, C)>> = batch
                .par_chunks(GRAD_CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut grads = zeros_like(&model);
                    let mut loss = 0.0;
                    for (k, &i) in chunk.iter().enumerate() {
                        let slot = slot0 + (c * GRAD_CHUNK + k) as u64;
                        let mut r = rng::stream(config.seed, domain::DROPOUT, slot);
                        let (x, y) = &train[i];
                        loss += model.accumulate_gradient(x, *y, Some(&mut r), &mut grads)?;
                    }
                    Ok((loss, grads))
                })
                .collect();
            let scale = 1.0 / batch.len() as f64;
            let mut grad = vec![0.0; adam.m.len()];
            let mut batch_loss = 0.0;
            for part in parts {
                let (loss, g) = part.map_err(|e| diag(epoch + 1, b, e.to_string()))?;
                batch_loss += loss;
                for (acc, v) in grad.iter_mut().zip(g.flatten()) {
                    *acc += v;
                }
            }
            grad.iter_mut().for_each(|g| *g *= scale);
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(diag(epoch + 1, b, "non-finite loss or gradient".into()));
            }
            if config.clip_norm > 0.0 {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > config.clip_norm {
                    let s = config.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= s);
                }
            }
            let mut flat = model.flatten();
            adam.step(&mut flat, &grad, config.learning_rate);
            model.assign_flat(&flat);
            epoch_loss += batch_loss;
        }
        stats.push(EpochStats {
            epoch: epoch + 1,
            train_loss: epoch_loss / n as f64,
            valid_auc: validation_auc(&model, &valid)?,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, stats))
}

/// Trains every config in order. A failing run is recorded and the sweep
/// continues. When `out_dir` is given, run `i` is saved under `run-{i:02}`.
pub fn sweep(
    grid: &[ExperimentConfig],
    train_split: &Split,
    valid: Option<&Split>,
    out_dir: Option<&Path>,
) -> Result<Vec<RunRecord>> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut records = Vec::with_capacity(grid.len());
    for (i, config) in grid.iter().enumerate() {
        let record = match train(config, train_split, valid) {
            Ok(mut outcome) => {
                if let Some(dir) = out_dir {
                    let run_dir = dir.join(format!("run-{i:02}"));
                    outcome.save(&run_dir)?;
                    outcome.record.checkpoint = Some(run_dir.join(CHECKPOINT_FILE));
                }
                outcome.record
            }
            Err(e) => {
                let rec = RunRecord::failed(config.clone(), e.to_string());
                if let Some(dir) = out_dir {
                    let run_dir = dir.join(format!("run-{i:02}"));
                    std::fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
                    write_record(&rec, &run_dir)?;
                }
                rec
            }
        };
        records.push(record);
    }
    Ok(records)
}

/// Sorted by final validation AUC, best first; ties and failed runs keep
/// config order, failed runs last.
pub fn rank_records(records: &[RunRecord]) -> Vec<RunRecord> {
    let mut ranked = records.to_vec();
    ranked.sort_by(|a, b| match (a.final_auc(), b.final_auc()) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    ranked
}

/// Reads the config stored in a checkpoint.
pub fn checkpoint_config(ck: &Checkpoint, path: &Path) -> Result<ExperimentConfig> {
    let text: String = ck.config.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    // paths in the echo are already resolved
    let kv = crate::kv::parse(&text, Path::new("/"))?;
    ExperimentConfig::from_kv(&kv, &[]).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Loads a saved run directory.
pub fn load_run(dir: impl AsRef<Path>) -> Result<(Model, Pipeline, ExperimentConfig)> {
    let dir = dir.as_ref();
    let ck_path = dir.join(CHECKPOINT_FILE);
    if !ck_path.exists() {
        return Err(Error::Config(format!("missing checkpoint {}", ck_path.display())));
    }
    let ck = Checkpoint::load(&ck_path)?;
    let config = checkpoint_config(&ck, &ck_path)?;
    let pipeline = Pipeline::load(&config, dir.join(TOKENIZER_DIR))?;
    let model = Model::from_checkpoint(&ck, &config, &pipeline)?;
    Ok((model, pipeline, config))
}

/// One probability per record of `split`, in order; missing messages score as empty text.
pub fn predict(run_dir: impl AsRef<Path>, split: &Split) -> Result<PredictionSet> {
    let (model, pipeline, _) = load_run(run_dir)?;
    predict_with(&model, &pipeline, split)
}

pub fn predict_with(model: &Model, pipeline: &Pipeline, split: &Split) -> Result<PredictionSet> {
    let items = text_view(split, MissingPolicy::EmptyString);
    let texts: Vec<&str> = items.iter().map(|i| i.text.as_str()).collect();
    let probs = model.predict(pipeline, &texts)?;
    PredictionSet::from_probs(items.into_iter().map(|i| i.id), &probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, PostRecord, SplitName};

    fn tiny(model: ModelKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(model);
        c.epochs = 2;
        c.batch_size = 8;
        c.hidden = 8;
        c.heads = 2;
        c.ffn = 16;
        c.maps_per_window = 4;
        c.lstm_hidden = 4;
        c.embedding_dim = 4;
        c.tokenizer.vocab_size = 260;
        c
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let data = generate_synthetic_corpus(40, 1.0, 1).unwrap();
        for kind in [ModelKind::Transformer, ModelKind::TextCnn, ModelKind::BiLstm] {
            let mut c = tiny(kind);
            c.learning_rate = 0.0;
            let out = train(&c, &data, None).unwrap();
            assert_eq!(out.model, Model::init(&c, &out.pipeline).unwrap(), "{kind}");
            let aucs: Vec<_> = out.record.epochs.iter().map(|e| e.valid_auc).collect();
            assert!(aucs.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn shuffle_and_carve_depend_only_on_seed() {
        let data = generate_synthetic_corpus(50, 1.0, 2).unwrap();
        let items = labelled_items(&data).unwrap();
        let (a_tr, a_va) = carve(items.clone(), 0.1, 9);
        let (b_tr, b_va) = carve(items.clone(), 0.1, 9);
        assert_eq!((a_tr, a_va.clone()), (b_tr, b_va));
        assert_eq!(a_va.len(), 5);
        let (_, c_va) = carve(items, 0.1, 10);
        assert_ne!(a_va, c_va);
    }

    #[test]
    fn duplicated_batch_has_the_single_example_loss() {
        let data = generate_synthetic_corpus(4, 1.0, 3).unwrap();
        let mut c = tiny(ModelKind::BiLstm);
        c.baseline_dropout = 0.0;
        let texts: Vec<String> = data.records.iter().map(|r| r.message.clone().unwrap()).collect();
        let p = Pipeline::fit(&c, &texts).unwrap();
        let Model::BiLstm(m) = Model::init(&c, &p).unwrap() else { unreachable!() };
        let x = p.embed(&texts[0]).unwrap();
        let single = m.loss(&x, 1).unwrap();
        let mut g = zeros_like(&m);
        let mut total = 0.0;
        for _ in 0..3 {
            total += m.accumulate_gradient(&x, 1, None, &mut g).unwrap();
        }
        assert!((total / 3.0 - single).abs() < 1e-15);
    }

    #[test]
    fn unlabelled_training_data_is_rejected() {
        let mut rec = PostRecord::new("1");
        rec.message = Some("tin".into());
        let split = Split::new(SplitName::Train, vec![rec]);
        let c = tiny(ModelKind::TextCnn);
        assert!(matches!(train(&c, &split, None), Err(Error::Validation(_))));
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let data = generate_synthetic_corpus(30, 1.0, 4).unwrap();
        let good = tiny(ModelKind::TextCnn);
        let mut bad = good.clone();
        bad.embeddings = Some(PathBuf::from("/nonexistent/vectors.txt"));
        let recs = sweep(&[bad, good], &data, None, None).unwrap();
        assert!(recs[0].failure.is_some());
        assert!(recs[1].failure.is_none());
        assert_eq!(rank_records(&recs)[1].failure, recs[0].failure);
        assert!(sweep(&[], &data, None, None).is_err());
    }

    #[test]
    fn predictions_cover_records_with_missing_text() {
        let mut data = generate_synthetic_corpus(30, 1.0, 5).unwrap();
        data.records[3].message = None;
        data.records[7].message = data.records[8].message.clone();
        let c = tiny(ModelKind::Transformer);
        let out = train(&c, &data, None).unwrap();
        let preds = predict_with(&out.model, &out.pipeline, &data).unwrap();
        assert_eq!(preds.len(), data.len());
        assert_eq!(preds.entries()[7].prob, preds.entries()[8].prob);
        let empty = Split::new(SplitName::PrivateTest, vec![]);
        assert!(predict_with(&out.model, &out.pipeline, &empty).unwrap().is_empty());
    }

    #[test]
    fn saved_run_predicts_identically() {
        let data = generate_synthetic_corpus(30, 1.0, 6).unwrap();
        let c = tiny(ModelKind::BiLstm);
        let mut out = train(&c, &data, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        out.save(dir.path()).unwrap();
        let direct = predict_with(&out.model, &out.pipeline, &data).unwrap();
        assert_eq!(predict(dir.path(), &data).unwrap(), direct);

        std::fs::remove_file(dir.path().join(TOKENIZER_DIR).join("vocab.txt")).unwrap();
        assert!(matches!(predict(dir.path(), &data), Err(Error::Config(_))));
    }
}
