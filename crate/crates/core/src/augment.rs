//! Dataset manifests and the batch pitch-augmentation pipeline.
//!
//! A manifest is a JSON-lines file. An optional first line carries the analysis
//! configuration and reference pitch (`{"analysis": {...}, "ref_f0": 248.0}`); every other
//! line is one [`UtteranceRecord`]. Relative WAV paths resolve against the manifest's
//! directory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::audio_io::{load_wav, quantize_sample, save_wav, Waveform};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_shift, AcceptancePolicy, EvalReport};
use crate::pitch::{char_level_pitch, track_pitch, Semitones, REFERENCE_F0_HZ};
use crate::shift::{shift, ShiftMethod, ShiftRequest, MAX_ABS_ALPHA_ST};
use crate::spectral::AnalysisConfig;

/// File name of the per-candidate report written by [`write_report`].
pub const REPORT_FILE: &str = "report.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub wav_path: PathBuf,
    pub text: String,
    /// Frames per character.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub durations: Option<Vec<usize>>,
    /// Pitch offset applied to the source; zero for originals.
    #[serde(default)]
    pub alpha: Semitones,
    /// Id of the original; defaults to `id` when absent from the file.
    #[serde(default)]
    pub source_id: String,
    /// Mean pitch per character in semitones against the manifest's reference; `None`
    /// marks an unvoiced character. Filled by [`attach_pitch`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub char_pitch: Option<Vec<Option<Semitones>>>,
}

impl UtteranceRecord {
    pub fn original(id: impl Into<String>, wav_path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            source_id: id.clone(),
            id,
            wav_path: wav_path.into(),
            text: text.into(),
            durations: None,
            alpha: Semitones::ZERO,
            char_pitch: None,
        }
    }

    pub fn is_original(&self) -> bool {
        self.alpha.0 == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestHeader {
    #[serde(default)]
    analysis: AnalysisConfig,
    #[serde(default = "default_ref_f0")]
    ref_f0: f64,
}

fn default_ref_f0() -> f64 {
    REFERENCE_F0_HZ
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Header(ManifestHeader),
    Record(UtteranceRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<UtteranceRecord>,
    pub analysis: AnalysisConfig,
    pub ref_f0: f64,
    /// Directory that relative WAV paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(records: Vec<UtteranceRecord>, analysis: AnalysisConfig, ref_f0: f64, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            records,
            analysis,
            ref_f0,
            base_dir: base_dir.into(),
        }
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(line)
                .map_err(|e| Error::Manifest(format!("line {}: {e}", n + 1)))?;
            match parsed {
                Line::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
                Line::Header(_) => {
                    return Err(Error::Manifest(format!("line {}: header must be the first line", n + 1)))
                }
                Line::Record(mut r) => {
                    if r.source_id.is_empty() {
                        r.source_id = r.id.clone();
                    }
                    records.push(r);
                }
            }
        }
        let header = header.unwrap_or(ManifestHeader {
            analysis: AnalysisConfig::default(),
            ref_f0: REFERENCE_F0_HZ,
        });
        let m = Self::new(records, header.analysis, header.ref_f0, base_dir);
        m.analysis.validate()?;
        if !(m.ref_f0 > 0.0 && m.ref_f0.is_finite()) {
            return Err(Error::NonPositiveFrequency(m.ref_f0));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Header line followed by one line per record.
    pub fn to_jsonl(&self) -> Result<String> {
        let header = ManifestHeader {
            analysis: self.analysis.clone(),
            ref_f0: self.ref_f0,
        };
        let mut out = serde_json::to_string(&header)?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn resolve(&self, record: &UtteranceRecord) -> PathBuf {
        if record.wav_path.is_absolute() {
            record.wav_path.clone()
        } else {
            self.base_dir.join(&record.wav_path)
        }
    }

    pub fn get(&self, id: &str) -> Option<&UtteranceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Checks unique ids, the alpha/source-id rule, and that every `source_id`
    /// resolves within this manifest or `originals`.
    pub fn validate(&self, originals: Option<&Manifest>) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate id `{}`", r.id)));
            }
            if r.is_original() != (r.source_id == r.id) {
                return Err(Error::Manifest(format!(
                    "record `{}`: alpha is {} but source_id is `{}`",
                    r.id, r.alpha, r.source_id
                )));
            }
        }
        for r in self.records.iter().filter(|r| !r.is_original()) {
            let local = self.get(&r.source_id).is_some_and(UtteranceRecord::is_original);
            let parent = originals
                .and_then(|o| o.get(&r.source_id))
                .is_some_and(UtteranceRecord::is_original);
            if !local && !parent {
                return Err(Error::Manifest(format!(
                    "record `{}`: source `{}` not found",
                    r.id, r.source_id
                )));
            }
        }
        Ok(())
    }
}

/// `"<id>_st<±alpha>"`, e.g. `utt1_st+3` or `utt1_st-2.5`.
pub fn derived_id(id: &str, alpha: Semitones) -> String {
    format!("{id}_st{:+}", alpha.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Accepted,
    Rejected,
    Failed,
}

/// Outcome of one (record, alpha) candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub id: String,
    pub source_id: String,
    pub alpha: Semitones,
    pub method: ShiftMethod,
    pub status: CandidateStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AugmentOutcome {
    pub manifest: Manifest,
    pub report: Vec<CandidateReport>,
}

pub fn write_report(path: impl AsRef<Path>, report: &[CandidateReport]) -> Result<()> {
    let mut out = Vec::new();
    for c in report {
        serde_json::to_writer(&mut out, c)?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// The waveform as it reads back after a 16-bit save.
fn as_stored(w: Waveform) -> Waveform {
    let samples = w.samples.iter().map(|&s| f64::from(quantize_sample(s)) / 32768.0).collect();
    Waveform::new(samples, w.sample_rate)
}

fn check_alphas(alphas: &[Semitones]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::InvalidConfig("alpha grid is empty".into()));
    }
    let mut seen = Vec::new();
    for a in alphas {
        if a.0 == 0.0 || !a.0.is_finite() {
            return Err(Error::InvalidConfig(format!("augmentation alpha must be nonzero, got {a}")));
        }
        if seen.contains(&a.0) {
            return Err(Error::InvalidConfig(format!("duplicate alpha {a}")));
        }
        seen.push(a.0);
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Shifts, evaluates and (if accepted) writes every candidate of one original.
fn augment_record(
    manifest: &Manifest,
    record: &UtteranceRecord,
    alphas: &[Semitones],
    method: ShiftMethod,
    policy: &AcceptancePolicy,
    out_dir: &Path,
) -> Vec<(CandidateReport, Option<UtteranceRecord>)> {
    let candidate = |alpha: Semitones, status, report, error| CandidateReport {
        id: derived_id(&record.id, alpha),
        source_id: record.id.clone(),
        alpha,
        method,
        status,
        report,
        error,
    };
    let orig = match load_wav(manifest.resolve(record)) {
        Ok(w) => w,
        Err(e) => {
            log::warn!("{}: {e}", record.id);
            return alphas
                .iter()
                .map(|&a| (candidate(a, CandidateStatus::Failed, None, Some(e.to_string())), None))
                .collect();
        }
    };
    alphas
        .iter()
        .map(|&alpha| {
            let id = derived_id(&record.id, alpha);
            let attempt = || -> Result<(EvalReport, Option<UtteranceRecord>)> {
                let shifted = as_stored(shift(&orig, &ShiftRequest { alpha, method }, &manifest.analysis)?);
                let report = evaluate_shift(&orig, &shifted, alpha, policy, &manifest.analysis)?;
                if !report.accepted {
                    return Ok((report, None));
                }
                let file = PathBuf::from(format!("{id}.wav"));
                save_wav(out_dir.join(&file), &shifted)?;
                let rec = UtteranceRecord {
                    id: id.clone(),
                    wav_path: file,
                    text: record.text.clone(),
                    durations: record.durations.clone(),
                    alpha,
                    source_id: record.id.clone(),
                    char_pitch: None,
                };
                Ok((report, Some(rec)))
            };
            match attempt() {
                Ok((report, rec)) => {
                    let status = if rec.is_some() {
                        CandidateStatus::Accepted
                    } else {
                        CandidateStatus::Rejected
                    };
                    (candidate(alpha, status, Some(report), None), rec)
                }
                Err(e) => {
                    log::warn!("{id}: {e}");
                    (candidate(alpha, CandidateStatus::Failed, None, Some(e.to_string())), None)
                }
            }
        })
        .collect()
}

/// Builds the augmented dataset from the originals of `manifest`.
///
/// Every original is shifted by every alpha. Accepted candidates are written to
/// `out_dir/<derived id>.wav` and listed, with paths relative to `out_dir`, in the
/// returned manifest; the report lists every candidate. Records are processed on `jobs`
/// threads but output keeps input order. Fails with `EmptyResult` when nothing passes.
pub fn build_augmented(
    manifest: &Manifest,
    alphas: &[Semitones],
    method: ShiftMethod,
    policy: &AcceptancePolicy,
    out_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<AugmentOutcome> {
    use rayon::prelude::*;

    check_alphas(alphas)?;
    policy.validate()?;
    manifest.validate(None)?;
    let originals: Vec<&UtteranceRecord> = manifest.records.iter().filter(|r| r.is_original()).collect();
    if originals.is_empty() {
        return Err(Error::EmptyManifest("no original records to augment".into()));
    }
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;

    let per_record: Vec<_> = pool(jobs)?.install(|| {
        originals
            .par_iter()
            .map(|r| augment_record(manifest, r, alphas, method, policy, out_dir))
            .collect()
    });

    let mut records = Vec::new();
    let mut report = Vec::new();
    for (c, rec) in per_record.into_iter().flatten() {
        report.push(c);
        records.extend(rec);
    }
    if records.is_empty() {
        return Err(Error::EmptyResult(Box::new(report)));
    }
    let aug = Manifest::new(records, manifest.analysis.clone(), manifest.ref_f0, out_dir);
    Ok(AugmentOutcome { manifest: aug, report })
}

/// Fills `char_pitch` for every record with durations.
///
/// Originals are tracked and aggregated per character against `ref_f0`. Augmented
/// records take their original's character pitch plus their alpha; the original is
/// looked up in this manifest first, then in `originals`. Records without durations are
/// skipped with a warning.
pub fn attach_pitch(manifest: &Manifest, originals: Option<&Manifest>) -> Result<Manifest> {
    let mut cache: HashMap<String, Vec<Option<Semitones>>> = HashMap::new();
    let mut pitch_of = |owner: &Manifest, r: &UtteranceRecord| -> Result<Vec<Option<Semitones>>> {
        if let Some(p) = cache.get(&r.id) {
            return Ok(p.clone());
        }
        let durations = r
            .durations
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("original `{}` has no durations", r.id)))?;
        let w = load_wav(owner.resolve(r))?;
        let track = track_pitch(&w, &owner.analysis)?;
        let p = char_level_pitch(&track, durations, owner.ref_f0)?;
        cache.insert(r.id.clone(), p.clone());
        Ok(p)
    };

    let mut out = manifest.clone();
    for r in &mut out.records {
        let Some(durations) = &r.durations else {
            log::warn!("record `{}` has no durations; character pitch skipped", r.id);
            continue;
        };
        let pitch = if r.is_original() {
            pitch_of(manifest, r)?
        } else {
            let (owner, src) = manifest
                .get(&r.source_id)
                .map(|s| (manifest, s))
                .or_else(|| originals.and_then(|o| o.get(&r.source_id).map(|s| (o, s))))
                .ok_or_else(|| Error::Manifest(format!("record `{}`: source `{}` not found", r.id, r.source_id)))?;
            let base = pitch_of(owner, src)?;
            if base.len() != durations.len() {
                return Err(Error::DurationMismatch {
                    expected: base.len(),
                    got: durations.len(),
                });
            }
            let alpha = r.alpha;
            base.into_iter().map(|p| p.map(|p| p + alpha)).collect()
        };
        r.char_pitch = Some(pitch);
    }
    Ok(out)
}

/// Wraps `s` in single quotes for `sh`.
fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

pub const PLACEHOLDERS: [&str; 3] = ["{wav}", "{id}", "{alpha}"];

/// Per-record scores from an external command, plus the records whose command failed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExternalScores {
    pub scores: BTreeMap<String, f64>,
    pub failures: BTreeMap<String, String>,
}

fn run_scorer(command: &str) -> Result<f64> {
    let output = Command::new("sh").arg("-c").arg(command).output()?;
    if !output.status.success() {
        return Err(Error::ExternalCommandFailed(format!(
            "`{command}` exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    let mut tokens = stdout.split_whitespace();
    match (tokens.next().map(str::parse::<f64>), tokens.next()) {
        (Some(Ok(v)), None) if v.is_finite() => Ok(v),
        _ => Err(Error::ExternalCommandFailed(format!(
            "`{command}` must print a single number, got `{}`",
            stdout.trim()
        ))),
    }
}

/// Runs `template` through `sh -c` once per record and parses one number from stdout.
///
/// `{wav}`, `{id}` and `{alpha}` are replaced by the shell-quoted resolved WAV path,
/// record id and alpha. A template without placeholders runs unchanged for every
/// record. Failing records are left out of `scores` and listed in `failures`.
pub fn external_score_hook(manifest: &Manifest, template: &str) -> Result<ExternalScores> {
    if template.trim().is_empty() {
        return Err(Error::InvalidConfig("scorer template is empty".into()));
    }
    if !PLACEHOLDERS.iter().any(|p| template.contains(p)) {
        log::warn!("scorer template has no placeholder; every record gets the same command");
    }
    let mut out = ExternalScores::default();
    for r in &manifest.records {
        let command = template
            .replace("{wav}", &shell_quote(&manifest.resolve(r).to_string_lossy()))
            .replace("{id}", &shell_quote(&r.id))
            .replace("{alpha}", &shell_quote(&format!("{:+}", r.alpha.0)));
        match run_scorer(&command) {
            Ok(v) => {
                out.scores.insert(r.id.clone(), v);
            }
            Err(e) => {
                log::warn!("{}: {e}", r.id);
                out.failures.insert(r.id.clone(), e.to_string());
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alpha: Semitones,
    pub candidates: usize,
    pub accepted: usize,
    /// Worst external score among the candidates, if any was scored.
    pub max_score: Option<f64>,
    pub unscored: usize,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaStarReport {
    /// Largest |alpha| whose every grid point at or below it passes; `None` if even the
    /// smallest fails or the grid is empty.
    pub alpha_star: Option<f64>,
    pub rows: Vec<AlphaRow>,
}

/// Explores the maximum usable pitch adjustment.
///
/// For every grid alpha, each original is shifted, evaluated against `policy` and scored
/// by the external command. An alpha passes when every candidate is accepted, scored, and
/// scores at most `policy.max_external_score`. Shifted audio goes to `work_dir`.
pub fn alpha_star(
    manifest: &Manifest,
    grid: &[Semitones],
    method: ShiftMethod,
    policy: &AcceptancePolicy,
    template: &str,
    work_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<AlphaStarReport> {
    if grid.is_empty() {
        return Ok(AlphaStarReport {
            alpha_star: None,
            rows: Vec::new(),
        });
    }
    check_alphas(grid)?;
    policy.validate()?;
    let work_dir = work_dir.as_ref();
    fs::create_dir_all(work_dir)?;
    let originals: Vec<UtteranceRecord> = manifest.records.iter().filter(|r| r.is_original()).cloned().collect();
    if originals.is_empty() {
        return Err(Error::EmptyManifest("no original records".into()));
    }

    let mut rows = Vec::new();
    for &alpha in grid {
        // the range limit is applied below, so out-of-range shifts are still scored
        let scoring_policy = AcceptancePolicy {
            max_abs_alpha_st: MAX_ABS_ALPHA_ST,
            ..policy.clone()
        };
        let outcome = match build_augmented(manifest, &[alpha], method, &scoring_policy, work_dir, jobs) {
            Ok(o) => Some(o),
            Err(Error::EmptyResult(_)) => None,
            Err(e) => return Err(e),
        };
        let scored = match &outcome {
            Some(o) => external_score_hook(&o.manifest, template)?,
            None => ExternalScores::default(),
        };
        let candidates = originals.len();
        let in_range = alpha.0.abs() <= policy.max_abs_alpha_st;
        let accepted = if in_range {
            outcome.as_ref().map_or(0, |o| o.manifest.records.len())
        } else {
            0
        };
        let max_score = scored.scores.values().copied().reduce(f64::max);
        let unscored = candidates - scored.scores.len();
        let passes = accepted == candidates
            && unscored == 0
            && max_score.is_some_and(|s| s <= policy.max_external_score);
        rows.push(AlphaRow {
            alpha,
            candidates,
            accepted,
            max_score,
            unscored,
            passes,
        });
    }

    let mut magnitudes: Vec<f64> = grid.iter().map(|a| a.0.abs()).collect();
    magnitudes.sort_by(f64::total_cmp);
    magnitudes.dedup();
    let mut star = None;
    for m in magnitudes {
        if rows.iter().filter(|r| r.alpha.0.abs() == m).all(|r| r.passes) {
            star = Some(m);
        } else {
            break;
        }
    }
    Ok(AlphaStarReport { alpha_star: star, rows })
}
