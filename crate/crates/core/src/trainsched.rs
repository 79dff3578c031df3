//! Alternating-epoch training on original and pitch-augmented data.
//!
//! Even epochs (0-based) train on the original dataset with teacher-forced durations and
//! pitch and update on mel, duration and pitch losses. Odd epochs train on the augmented
//! dataset: the predictors are neither used nor updated, the decoder is conditioned on
//! the shifted pitch, and only the mel loss is applied.
//!
//! [`ToyModel`] is a small linear stand-in for an acoustic model with the same parameter
//! groups, so the schedule can be run and checked without a neural framework.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio_io::load_wav;
use crate::augment::{attach_pitch, Manifest};
use crate::error::{Error, Result};
use crate::pitch::Semitones;
use crate::spectral::{mel_project, stft};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    EncoderDecoder,
    DurationPredictor,
    PitchPredictor,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 3] = [Self::EncoderDecoder, Self::DurationPredictor, Self::PitchPredictor];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "mel_loss")]
    Mel,
    #[serde(rename = "duration_loss")]
    Duration,
    #[serde(rename = "pitch_loss")]
    Pitch,
}

pub const ORIG_LOSSES: [LossKind; 3] = [LossKind::Mel, LossKind::Duration, LossKind::Pitch];
pub const AUG_LOSSES: [LossKind; 1] = [LossKind::Mel];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub mel: f64,
    pub duration: Option<f64>,
    pub pitch: Option<f64>,
}

/// One utterance ready for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    /// Character tokens.
    pub tokens: Vec<usize>,
    /// Frames per character.
    pub durations: Vec<usize>,
    /// Pitch of the original recording per character in semitones; `None` is unvoiced.
    pub pitch: Vec<Option<f64>>,
    /// Offset of this example's audio relative to `pitch`; zero for originals.
    pub alpha: Semitones,
    /// Target frames, `[sum(durations)][n_mels]`.
    pub mel: Vec<Vec<f64>>,
}

impl TrainingExample {
    fn check(&self, n_mels: usize) -> Result<()> {
        let fail = |m: String| Err(Error::ShapeMismatch(format!("example `{}`: {m}", self.id)));
        if self.tokens.len() != self.durations.len() || self.pitch.len() != self.durations.len() {
            return fail(format!(
                "{} tokens, {} durations, {} pitches",
                self.tokens.len(),
                self.durations.len(),
                self.pitch.len()
            ));
        }
        let total: usize = self.durations.iter().sum();
        if total != self.mel.len() {
            return Err(Error::DurationMismatch {
                expected: self.mel.len(),
                got: total,
            });
        }
        if self.mel.iter().any(|f| f.len() != n_mels) {
            return fail(format!("mel frames must have {n_mels} channels"));
        }
        Ok(())
    }
}

/// Operations the scheduler needs from a model.
pub trait TrainableModel {
    /// Runs a teacher-forced forward pass and keeps the gradients for [`update`].
    ///
    /// With `use_predictors` false the duration and pitch predictors are skipped and
    /// their losses are `None`. `pitch_offsets` holds one offset per example, added to
    /// the voiced pitch that conditions the decoder.
    ///
    /// [`update`]: TrainableModel::update
    fn forward_teacher_forced(
        &mut self,
        batch: &[TrainingExample],
        use_predictors: bool,
        pitch_offsets: &[Semitones],
    ) -> Result<Losses>;

    /// Applies one optimizer step using only the selected losses of the last forward.
    fn update(&mut self, losses: &[LossKind]) -> Result<()>;

    /// Digest of the parameters in `group`.
    fn parameter_fingerprint(&self, group: ParamGroup) -> String;
}

/// Character `i`'s vector repeated `durations[i]` times.
pub fn length_regulate<T: Clone>(h: &[T], durations: &[usize]) -> Vec<T> {
    h.iter()
        .zip(durations)
        .flat_map(|(v, &d)| std::iter::repeat_n(v, d).cloned())
        .collect()
}

pub const TOY_VOCAB: usize = 256;
/// Decoder pitch inputs are semitones divided by this.
pub const PITCH_INPUT_SCALE: f64 = 4.0;
pub const DEFAULT_LEARNING_RATE: f64 = 0.4;

/// Token id of a character in the toy vocabulary.
pub fn token_of(c: char) -> usize {
    c as usize % TOY_VOCAB
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    dim: usize,
    n_mels: usize,
}

impl Layout {
    fn emb(&self) -> usize {
        0
    }
    fn w_enc(&self) -> usize {
        TOY_VOCAB * self.dim
    }
    fn b_enc(&self) -> usize {
        self.w_enc() + self.dim * self.dim
    }
    fn w_dec(&self) -> usize {
        self.b_enc() + self.dim
    }
    fn b_dec(&self) -> usize {
        self.w_dec() + self.n_mels * (self.dim + 1)
    }
    fn w_dur(&self) -> usize {
        self.b_dec() + self.n_mels
    }
    fn w_pitch(&self) -> usize {
        self.w_dur() + self.dim + 1
    }
    fn len(&self) -> usize {
        self.w_pitch() + self.dim + 1
    }
    fn group(&self, g: ParamGroup) -> std::ops::Range<usize> {
        match g {
            ParamGroup::EncoderDecoder => 0..self.w_dur(),
            ParamGroup::DurationPredictor => self.w_dur()..self.w_pitch(),
            ParamGroup::PitchPredictor => self.w_pitch()..self.len(),
        }
    }
}

/// Linear toy acoustic model.
///
/// Embedding and linear encoder give `h`; scalar heads on `h` predict `ln(1 + duration)`
/// and pitch per character; the length-regulated `h` concatenated with the upsampled
/// (offset) pitch feeds a linear decoder. All losses are mean squared errors, gradients
/// are analytic and the optimizer is plain gradient descent.
#[derive(Debug, Clone)]
pub struct ToyModel {
    layout: Layout,
    params: Vec<f64>,
    grads: BTreeMap<LossKind, Vec<f64>>,
    pub learning_rate: f64,
}

pub fn toy_model(dim: usize, n_mels: usize, seed: u64) -> Result<ToyModel> {
    if dim == 0 || n_mels == 0 {
        return Err(Error::InvalidConfig("toy model needs dim >= 1 and n_mels >= 1".into()));
    }
    let layout = Layout { dim, n_mels };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let params = (0..layout.len()).map(|_| rng.random_range(-scale..scale)).collect();
    Ok(ToyModel {
        layout,
        params,
        grads: BTreeMap::new(),
        learning_rate: DEFAULT_LEARNING_RATE,
    })
}

/// Intermediate values of one example's forward pass.
struct Pass {
    inputs: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl ToyModel {
    pub fn n_mels(&self) -> usize {
        self.layout.n_mels
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn group_range(&self, g: ParamGroup) -> std::ops::Range<usize> {
        self.layout.group(g)
    }

    /// Gradient of `kind` from the last forward pass, if it was computed.
    pub fn gradient(&self, kind: LossKind) -> Option<&[f64]> {
        self.grads.get(&kind).map(Vec::as_slice)
    }

    fn dot(&self, at: usize, x: &[f64]) -> f64 {
        self.params[at..at + x.len()].iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn run(&self, ex: &TrainingExample, offset: Semitones) -> Pass {
        let Layout { dim, n_mels } = self.layout;
        let inputs: Vec<Vec<f64>> = ex
            .tokens
            .iter()
            .map(|&t| {
                let at = self.layout.emb() + (t % TOY_VOCAB) * dim;
                self.params[at..at + dim].to_vec()
            })
            .collect();
        let h: Vec<Vec<f64>> = inputs
            .iter()
            .map(|e| {
                (0..dim)
                    .map(|r| self.dot(self.layout.w_enc() + r * dim, e) + self.params[self.layout.b_enc() + r])
                    .collect()
            })
            .collect();
        let cond: Vec<f64> = ex
            .pitch
            .iter()
            .map(|p| p.map_or(0.0, |p| (p + offset.0) / PITCH_INPUT_SCALE))
            .collect();
        let per_char: Vec<Vec<f64>> = h
            .iter()
            .zip(&cond)
            .map(|(h, &q)| h.iter().copied().chain([q]).collect())
            .collect();
        let z = length_regulate(&per_char, &ex.durations);
        let y = z
            .iter()
            .map(|z| {
                (0..n_mels)
                    .map(|m| self.dot(self.layout.w_dec() + m * (dim + 1), z) + self.params[self.layout.b_dec() + m])
                    .collect()
            })
            .collect();
        Pass { inputs, h, z, y }
    }

    /// Propagates per-character gradients on `h` into the encoder and embeddings.
    fn backprop_encoder(&self, ex: &TrainingExample, pass: &Pass, g_h: &[Vec<f64>], grad: &mut [f64]) {
        let dim = self.layout.dim;
        for ((e, g), &t) in pass.inputs.iter().zip(g_h).zip(&ex.tokens) {
            for r in 0..dim {
                grad[self.layout.b_enc() + r] += g[r];
                for c in 0..dim {
                    grad[self.layout.w_enc() + r * dim + c] += g[r] * e[c];
                    grad[self.layout.emb() + (t % TOY_VOCAB) * dim + c] +=
                        g[r] * self.params[self.layout.w_enc() + r * dim + c];
                }
            }
        }
    }

    /// Mean squared error of a scalar head over the characters selected by `targets`.
    fn head_loss(&self, at: usize, pass: &Pass, targets: &[Option<f64>], grad: Option<&mut Vec<f64>>) -> (f64, Vec<Vec<f64>>) {
        let dim = self.layout.dim;
        let count = targets.iter().flatten().count();
        let mut g_h = vec![vec![0.0; dim]; pass.h.len()];
        if count == 0 {
            return (0.0, g_h);
        }
        let mut loss = 0.0;
        let mut grad = grad;
        for (i, (h, target)) in pass.h.iter().zip(targets).enumerate() {
            let Some(target) = target else { continue };
            let err = self.dot(at, h) + self.params[at + dim] - target;
            loss += err * err / count as f64;
            let g = 2.0 * err / count as f64;
            if let Some(grad) = grad.as_deref_mut() {
                for c in 0..dim {
                    grad[at + c] += g * h[c];
                    g_h[i][c] += g * self.params[at + c];
                }
                grad[at + dim] += g;
            }
        }
        (loss, g_h)
    }

    fn mel_loss_of(&self, pass: &Pass, ex: &TrainingExample, grad: Option<&mut Vec<f64>>) -> (f64, Vec<Vec<f64>>) {
        let Layout { dim, n_mels } = self.layout;
        let norm = (ex.mel.len() * n_mels).max(1) as f64;
        let mut loss = 0.0;
        let mut g_h = vec![vec![0.0; dim]; pass.h.len()];
        let mut grad = grad;
        let owners: Vec<usize> = length_regulate(&(0..ex.durations.len()).collect::<Vec<_>>(), &ex.durations);
        for ((y, target), (z, &owner)) in pass.y.iter().zip(&ex.mel).zip(pass.z.iter().zip(&owners)) {
            for m in 0..n_mels {
                let err = y[m] - target[m];
                loss += err * err / norm;
                let g = 2.0 * err / norm;
                if let Some(grad) = grad.as_deref_mut() {
                    let row = self.layout.w_dec() + m * (dim + 1);
                    for c in 0..=dim {
                        grad[row + c] += g * z[c];
                    }
                    grad[self.layout.b_dec() + m] += g;
                    for c in 0..dim {
                        g_h[owner][c] += g * self.params[row + c];
                    }
                }
            }
        }
        (loss, g_h)
    }

    fn check_batch(&self, batch: &[TrainingExample], pitch_offsets: &[Semitones]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        if batch.len() != pitch_offsets.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} examples but {} pitch offsets",
                batch.len(),
                pitch_offsets.len()
            )));
        }
        batch.iter().try_for_each(|ex| ex.check(self.layout.n_mels))
    }

    /// Batch-mean losses without touching stored gradients.
    pub fn evaluate(&self, batch: &[TrainingExample], use_predictors: bool, pitch_offsets: &[Semitones]) -> Result<Losses> {
        self.check_batch(batch, pitch_offsets)?;
        let n = batch.len() as f64;
        let mut out = Losses {
            mel: 0.0,
            duration: use_predictors.then_some(0.0),
            pitch: use_predictors.then_some(0.0),
        };
        for (ex, &offset) in batch.iter().zip(pitch_offsets) {
            let pass = self.run(ex, offset);
            out.mel += self.mel_loss_of(&pass, ex, None).0 / n;
            if use_predictors {
                let (d, p) = self.predictor_losses(ex, &pass, None, None);
                *out.duration.as_mut().unwrap() += d / n;
                *out.pitch.as_mut().unwrap() += p / n;
            }
        }
        Ok(out)
    }

    fn predictor_losses(
        &self,
        ex: &TrainingExample,
        pass: &Pass,
        dur_grad: Option<&mut Vec<f64>>,
        pitch_grad: Option<&mut Vec<f64>>,
    ) -> (f64, f64) {
        let dur_targets: Vec<Option<f64>> = ex.durations.iter().map(|&d| Some((1.0 + d as f64).ln())).collect();
        let pitch_targets: Vec<Option<f64>> = ex.pitch.iter().map(|p| p.map(|p| p / PITCH_INPUT_SCALE)).collect();
        let head = |at, targets: &[Option<f64>], grad: Option<&mut Vec<f64>>| match grad {
            Some(grad) => {
                let (loss, g_h) = self.head_loss(at, pass, targets, Some(&mut *grad));
                self.backprop_encoder(ex, pass, &g_h, grad);
                loss
            }
            None => self.head_loss(at, pass, targets, None).0,
        };
        let d = head(self.layout.w_dur(), &dur_targets, dur_grad);
        let p = head(self.layout.w_pitch(), &pitch_targets, pitch_grad);
        (d, p)
    }
}

impl TrainableModel for ToyModel {
    fn forward_teacher_forced(
        &mut self,
        batch: &[TrainingExample],
        use_predictors: bool,
        pitch_offsets: &[Semitones],
    ) -> Result<Losses> {
        self.check_batch(batch, pitch_offsets)?;
        self.grads.clear();
        let n = batch.len() as f64;
        let len = self.layout.len();
        let mut mel_grad = vec![0.0; len];
        let mut dur_grad = vec![0.0; len];
        let mut pitch_grad = vec![0.0; len];
        let mut out = Losses {
            mel: 0.0,
            duration: use_predictors.then_some(0.0),
            pitch: use_predictors.then_some(0.0),
        };
        for (ex, &offset) in batch.iter().zip(pitch_offsets) {
            let pass = self.run(ex, offset);
            let mut g = vec![0.0; len];
            let (loss, g_h) = self.mel_loss_of(&pass, ex, Some(&mut g));
            self.backprop_encoder(ex, &pass, &g_h, &mut g);
            out.mel += loss / n;
            mel_grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / n);
            if use_predictors {
                let mut gd = vec![0.0; len];
                let mut gp = vec![0.0; len];
                let (d, p) = self.predictor_losses(ex, &pass, Some(&mut gd), Some(&mut gp));
                *out.duration.as_mut().unwrap() += d / n;
                *out.pitch.as_mut().unwrap() += p / n;
                dur_grad.iter_mut().zip(&gd).for_each(|(a, b)| *a += b / n);
                pitch_grad.iter_mut().zip(&gp).for_each(|(a, b)| *a += b / n);
            }
        }
        self.grads.insert(LossKind::Mel, mel_grad);
        if use_predictors {
            self.grads.insert(LossKind::Duration, dur_grad);
            self.grads.insert(LossKind::Pitch, pitch_grad);
        }
        Ok(out)
    }

    fn update(&mut self, losses: &[LossKind]) -> Result<()> {
        let mut step = vec![0.0; self.layout.len()];
        for kind in losses {
            let g = self
                .grads
                .get(kind)
                .ok_or_else(|| Error::ShapeMismatch(format!("no gradient for {kind:?} from the last forward pass")))?;
            step.iter_mut().zip(g).for_each(|(s, g)| *s += g);
        }
        // Parameters outside the groups a loss reaches keep their exact bits.
        for (p, s) in self.params.iter_mut().zip(&step) {
            if *s != 0.0 {
                *p -= self.learning_rate * s;
            }
        }
        self.grads.clear();
        Ok(())
    }

    fn parameter_fingerprint(&self, group: ParamGroup) -> String {
        let mut hasher = Sha256::new();
        for p in &self.params[self.layout.group(group)] {
            hasher.update(p.to_bits().to_le_bytes());
        }
        hasher.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Orig,
    Aug,
}

impl Dataset {
    pub fn for_epoch(epoch: usize) -> Self {
        if epoch.is_multiple_of(2) {
            Self::Orig
        } else {
            Self::Aug
        }
    }
}

/// A training run with both datasets loaded into memory.
#[derive(Debug, Clone)]
pub struct TrainingPlan {
    pub epochs: usize,
    pub d_orig: Vec<TrainingExample>,
    pub d_aug: Vec<TrainingExample>,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be at least 1".into()));
        }
        if self.d_orig.is_empty() {
            return Err(Error::EmptyManifest("original dataset".into()));
        }
        if self.d_aug.is_empty() {
            return Err(Error::EmptyManifest("augmented dataset".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub dataset: Dataset,
    /// Example indices in the order they were visited.
    pub order: Vec<usize>,
    pub losses_applied: Vec<LossKind>,
    /// Batch-averaged losses over the epoch.
    pub mel_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_loss: Option<f64>,
    pub fingerprints_before: BTreeMap<ParamGroup, String>,
    pub fingerprints_after: BTreeMap<ParamGroup, String>,
}

fn fingerprints(model: &impl TrainableModel) -> BTreeMap<ParamGroup, String> {
    ParamGroup::ALL
        .into_iter()
        .map(|g| (g, model.parameter_fingerprint(g)))
        .collect()
}

/// Runs the alternating schedule and returns one log entry per epoch.
///
/// Batches are formed from a per-epoch permutation drawn from a ChaCha8 generator
/// seeded with `plan.seed`. An augmented epoch that changes a predictor fingerprint is
/// reported as a model failure.
pub fn run_training(model: &mut impl TrainableModel, plan: &TrainingPlan) -> Result<Vec<EpochLog>> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut logs = Vec::with_capacity(plan.epochs);
    for epoch in 0..plan.epochs {
        let dataset = Dataset::for_epoch(epoch);
        let (data, use_predictors, applied): (_, _, &[LossKind]) = match dataset {
            Dataset::Orig => (&plan.d_orig, true, &ORIG_LOSSES),
            Dataset::Aug => (&plan.d_aug, false, &AUG_LOSSES),
        };
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let before = fingerprints(model);
        let fail = |message: String| Error::ModelFailure { epoch, message };

        let mut sums = [0.0; 3];
        let mut batches = 0usize;
        for chunk in order.chunks(plan.batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let offsets: Vec<Semitones> = match dataset {
                Dataset::Orig => vec![Semitones::ZERO; batch.len()],
                Dataset::Aug => batch.iter().map(|ex| ex.alpha).collect(),
            };
            let losses = model
                .forward_teacher_forced(&batch, use_predictors, &offsets)
                .map_err(|e| fail(e.to_string()))?;
            if ![Some(losses.mel), losses.duration, losses.pitch].iter().flatten().all(|l| l.is_finite()) {
                return Err(fail(format!("non-finite loss {losses:?}")));
            }
            model.update(applied).map_err(|e| fail(e.to_string()))?;
            sums[0] += losses.mel;
            sums[1] += losses.duration.unwrap_or(0.0);
            sums[2] += losses.pitch.unwrap_or(0.0);
            batches += 1;
        }

        let after = fingerprints(model);
        if dataset == Dataset::Aug {
            for g in [ParamGroup::DurationPredictor, ParamGroup::PitchPredictor] {
                if before[&g] != after[&g] {
                    return Err(fail(format!("{g:?} changed during an augmented epoch")));
                }
            }
        }
        let mean = |s: f64| s / batches as f64;
        logs.push(EpochLog {
            epoch,
            dataset,
            order,
            losses_applied: applied.to_vec(),
            mel_loss: mean(sums[0]),
            duration_loss: use_predictors.then(|| mean(sums[1])),
            pitch_loss: use_predictors.then(|| mean(sums[2])),
            fingerprints_before: before,
            fingerprints_after: after,
        });
        log::debug!("epoch {epoch} ({dataset:?}): mel loss {:.6}", mean(sums[0]));
    }
    Ok(logs)
}

/// Loads training examples from a manifest.
///
/// Every record needs durations, one per character of its text. Character pitch comes
/// from [`attach_pitch`]; for augmented records the original's pitch is kept and the
/// record's alpha becomes the offset. Targets are natural-log mel frames.
pub fn examples_from_manifest(manifest: &Manifest, originals: Option<&Manifest>) -> Result<Vec<TrainingExample>> {
    if manifest.records.is_empty() {
        return Err(Error::EmptyManifest("no records".into()));
    }
    let with_pitch = attach_pitch(manifest, originals)?;
    with_pitch
        .records
        .iter()
        .map(|r| {
            let durations = r
                .durations
                .clone()
                .ok_or_else(|| Error::Manifest(format!("record `{}` has no durations", r.id)))?;
            let tokens: Vec<usize> = r.text.chars().map(token_of).collect();
            if tokens.len() != durations.len() {
                return Err(Error::Manifest(format!(
                    "record `{}`: {} characters but {} durations",
                    r.id,
                    tokens.len(),
                    durations.len()
                )));
            }
            let pitch = r
                .char_pitch
                .as_ref()
                .map(|p| p.iter().map(|p| p.map(|p| (p - r.alpha).0)).collect())
                .unwrap_or_else(|| vec![None; durations.len()]);
            let w = load_wav(manifest.resolve(r))?;
            let (spec, _) = stft(&w, &manifest.analysis)?;
            let mel = mel_project(&spec, &manifest.analysis)?
                .mels
                .into_iter()
                .map(|f| f.into_iter().map(|v| v.max(1e-5).ln()).collect())
                .collect();
            let ex = TrainingExample {
                id: r.id.clone(),
                tokens,
                durations,
                pitch,
                alpha: r.alpha,
                mel,
            };
            ex.check(manifest.analysis.n_mels)?;
            Ok(ex)
        })
        .collect()
}

/// Three renditions of one text at character pitches -3, 0 and +3 semitones.
///
/// The 0 ST rendition is the original; the others are its augmented copies with alpha
/// -3 and +3. Targets come from a fixed random linear teacher that depends on both the
/// character and the pitch, so one model must use the pitch input to fit all three.
pub fn toy_task(n_mels: usize, seed: u64) -> (Vec<TrainingExample>, Vec<TrainingExample>) {
    let text = "pitch";
    let durations = vec![3, 5, 2, 4, 3];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table: BTreeMap<char, Vec<f64>> = BTreeMap::new();
    for c in text.chars() {
        table.entry(c).or_insert_with(|| (0..n_mels).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let slope: Vec<f64> = (0..n_mels).map(|_| rng.random_range(-1.0..1.0)).collect();
    let make = |alpha: f64| {
        let per_char: Vec<Vec<f64>> = text
            .chars()
            .map(|c| table[&c].iter().zip(&slope).map(|(t, s)| t + s * alpha / 3.0).collect())
            .collect();
        TrainingExample {
            id: if alpha == 0.0 {
                "toy".to_string()
            } else {
                crate::augment::derived_id("toy", Semitones(alpha))
            },
            tokens: text.chars().map(token_of).collect(),
            durations: durations.clone(),
            pitch: vec![Some(0.0); durations.len()],
            alpha: Semitones(alpha),
            mel: length_regulate(&per_char, &durations),
        }
    };
    (vec![make(0.0)], vec![make(-3.0), make(3.0)])
}
