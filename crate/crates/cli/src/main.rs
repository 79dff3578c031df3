use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use pitchforge::augment::{self, Manifest, REPORT_FILE};
use pitchforge::fixtures::{self, FixtureKind};
use pitchforge::metrics::{evaluate_shift, AcceptancePolicy};
use pitchforge::pitch::{pitch_stats, track_pitch};
use pitchforge::shift::{make_vocgan_ps_inputs, shift, ShiftMethod, ShiftRequest};
use pitchforge::spectral::{mel_project, stft, write_melspec, AnalysisConfig};
use pitchforge::trainsched::{examples_from_manifest, run_training, toy_model, TrainingPlan};
use pitchforge::{load_wav, save_wav, Error, Semitones};

const LOG_ENV: &str = "PITCHFORGE_LOG";

#[derive(Parser)]
#[command(name = "pitchforge", version, about = "Pitch shifting, evaluation and augmentation for TTS data")]
struct Cli {
    /// JSON file with analysis overrides, a policy path, an output directory and verbosity.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print a single JSON document on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for per-record work.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the mel spectrogram, pitch track and pitch statistics of a WAV file.
    Analyze {
        wav: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Generate a synthetic test signal.
    Fixture {
        /// sine, pulse_train or vowel
        kind: FixtureKind,
        #[arg(long)]
        f0: f64,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pitch-shift a WAV file.
    Shift {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, default_value = "source_filter")]
        method: ShiftMethod,
        input: PathBuf,
        output: PathBuf,
    },
    /// Write the source-path and filter-path mel inputs of a two-path vocoder.
    MakeInputs {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        input: PathBuf,
        source: PathBuf,
        filter: PathBuf,
    },
    /// Compare an original and a shifted WAV against the acceptance policy.
    Eval {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        orig: PathBuf,
        shifted: PathBuf,
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Build a pitch-augmented dataset from a manifest.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated semitone offsets.
        #[arg(long, allow_hyphen_values = true, default_value = "-3,-2,2,3")]
        alphas: String,
        #[arg(long, default_value = "source_filter")]
        method: ShiftMethod,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Also compute per-character pitch for records with durations.
        #[arg(long)]
        attach_pitch: bool,
    },
    /// Train the toy model with the alternating original/augmented schedule.
    Schedule {
        #[arg(long)]
        epochs: usize,
        #[arg(long)]
        orig: PathBuf,
        #[arg(long)]
        aug: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 1)]
        batch_size: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        /// Gradient-descent step. Log-mel targets of real audio are much larger than the
        /// unit-scale synthetic task, so the default is lower than the library's.
        #[arg(long, default_value_t = 0.03)]
        learning_rate: f64,
    },
    /// Find the largest pitch offset for which every constraint holds.
    AlphaStar {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated semitone offsets.
        #[arg(long, allow_hyphen_values = true, default_value = "-4,-3,-2,2,3,4")]
        grid: String,
        /// Shell command printing one score; `{wav}`, `{id}` and `{alpha}` are substituted.
        #[arg(long)]
        scorer: String,
        #[arg(long, default_value = "source_filter")]
        method: ShiftMethod,
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        work_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CliConfig {
    analysis: AnalysisConfig,
    policy: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    verbosity: Option<String>,
}

impl CliConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: CliConfig =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        cfg.analysis.validate()?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.policy = cfg.policy.map(|p| base.join(p));
        cfg.out_dir = cfg.out_dir.map(|p| base.join(p));
        Ok(cfg)
    }

    fn policy(&self, flag: Option<&Path>) -> Result<AcceptancePolicy> {
        let policy = match flag.or(self.policy.as_deref()) {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading policy {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("policy {}: {e}", path.display())))?
            }
            None => AcceptancePolicy::default(),
        };
        policy.validate()?;
        Ok(policy)
    }

    fn out_dir(&self, flag: Option<PathBuf>, what: &str) -> Result<PathBuf> {
        flag.or_else(|| self.out_dir.clone())
            .ok_or_else(|| usage(format!("{what} needs --out-dir or `out_dir` in the config")))
    }
}

/// Failure outside the library's own error type, with its exit code.
#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow!(CliError {
        code: 2,
        message: message.into(),
    })
}

fn empty(message: impl Into<String>) -> anyhow::Error {
    anyhow!(CliError {
        code: 4,
        message: message.into(),
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::EmptyResult(_) => 4,
                Error::NoVoicedFrames
                | Error::SignalTooShort { .. }
                | Error::NonPositiveFrequency(_)
                | Error::DurationMismatch { .. }
                | Error::AlphaOutOfRange(_)
                | Error::TrackMismatch(_)
                | Error::FrameCountMismatch { .. }
                | Error::SampleRateMismatch { .. }
                | Error::ExternalCommandFailed(_)
                | Error::ModelFailure { .. } => 3,
                _ => 2,
            };
        }
    }
    2
}

fn parse_alphas(list: &str) -> Result<Vec<Semitones>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map(Semitones)
                .map_err(|_| usage(format!("`{s}` is not a number of semitones")))
        })
        .collect()
}

fn emit(json_mode: bool, value: serde_json::Value, human: impl FnOnce() -> String) -> Result<()> {
    let mut out = std::io::stdout().lock();
    if json_mode {
        serde_json::to_writer_pretty(&mut out, &value)?;
        writeln!(out)?;
    } else {
        writeln!(out, "{}", human())?;
    }
    Ok(())
}

fn check_wav_rate(sample_rate: u32, cfg: &AnalysisConfig) -> Result<()> {
    if sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            a: sample_rate,
            b: cfg.sample_rate,
        }
        .into());
    }
    Ok(())
}

fn run(cli: Cli, cfg: CliConfig) -> Result<()> {
    let analysis = &cfg.analysis;
    if cli.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    match cli.command {
        Command::Analyze { wav, out_dir } => {
            let w = load_wav(&wav)?;
            check_wav_rate(w.sample_rate, analysis)?;
            let (spec, _) = stft(&w, analysis)?;
            let mel = mel_project(&spec, analysis)?;
            let track = track_pitch(&w, analysis)?;
            let stats = pitch_stats([&track])?;
            let dir = match out_dir.or_else(|| cfg.out_dir.clone()) {
                Some(d) => d,
                None => wav.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            fs::create_dir_all(&dir)?;
            let stem = wav.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            let mel_path = dir.join(format!("{stem}.mel"));
            let csv_path = dir.join(format!("{stem}.pitch.csv"));
            let stats_path = dir.join(format!("{stem}.stats.json"));
            write_melspec(&mel_path, &mel.to_file())?;
            track.write_csv(fs::File::create(&csv_path)?)?;
            fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")?;
            emit(
                cli.json,
                json!({
                    "mel": mel_path, "pitch": csv_path, "stats_file": stats_path,
                    "frames": mel.n_frames(), "stats": stats,
                }),
                || {
                    format!(
                        "{} frames, mean f0 {:.2} Hz over {} voiced frames\nwrote {}, {}, {}",
                        mel.n_frames(),
                        stats.mean_f0,
                        stats.voiced_frames,
                        mel_path.display(),
                        csv_path.display(),
                        stats_path.display()
                    )
                },
            )
        }
        Command::Fixture { kind, f0, seconds, out } => {
            if !(50.0..=600.0).contains(&f0) {
                return Err(usage(format!("--f0 must be within 50..=600 Hz, got {f0}")));
            }
            if !(seconds > 0.0 && seconds <= 600.0) {
                return Err(usage(format!("--seconds must be within (0, 600], got {seconds}")));
            }
            let w = fixtures::generate(kind, f0, seconds, analysis.sample_rate);
            save_wav(&out, &w)?;
            emit(
                cli.json,
                json!({ "output": out, "kind": kind, "f0": f0, "samples": w.len(), "sample_rate": w.sample_rate }),
                || format!("wrote {} ({} samples)", out.display(), w.len()),
            )
        }
        Command::Shift {
            alpha,
            method,
            input,
            output,
        } => {
            let w = load_wav(&input)?;
            check_wav_rate(w.sample_rate, analysis)?;
            let shifted = shift(
                &w,
                &ShiftRequest {
                    alpha: Semitones(alpha),
                    method,
                },
                analysis,
            )?;
            save_wav(&output, &shifted)?;
            emit(
                cli.json,
                json!({ "input": input, "output": output, "alpha": alpha, "method": method, "samples": shifted.len() }),
                || format!("wrote {} ({method}, {alpha:+} ST)", output.display()),
            )
        }
        Command::MakeInputs {
            alpha,
            input,
            source,
            filter,
        } => {
            let w = load_wav(&input)?;
            check_wav_rate(w.sample_rate, analysis)?;
            let (src, filt) = make_vocgan_ps_inputs(&w, Semitones(alpha), analysis)?;
            write_melspec(&source, &src.to_file())?;
            write_melspec(&filter, &filt.to_file())?;
            emit(
                cli.json,
                json!({ "source": source, "filter": filter, "frames": src.n_frames(), "alpha": alpha }),
                || format!("wrote {} and {}", source.display(), filter.display()),
            )
        }
        Command::Eval {
            alpha,
            orig,
            shifted,
            policy,
        } => {
            let policy = cfg.policy(policy.as_deref())?;
            let a = load_wav(&orig)?;
            let b = load_wav(&shifted)?;
            check_wav_rate(a.sample_rate, analysis)?;
            let report = evaluate_shift(&a, &b, Semitones(alpha), &policy, analysis)?;
            emit(cli.json, serde_json::to_value(&report)?, || {
                format!(
                    "mcd {:.3} dB, delta pitch {:+.3} ST, envelope mcd {:.3} dB: {}",
                    report.mcd_db,
                    report.delta_p_st,
                    report.envelope_mcd_db,
                    if report.accepted {
                        "accepted".to_string()
                    } else {
                        format!("rejected ({})", report.reasons.join(", "))
                    }
                )
            })
        }
        Command::Augment {
            manifest,
            alphas,
            method,
            out_dir,
            policy,
            attach_pitch,
        } => {
            let policy = cfg.policy(policy.as_deref())?;
            let out_dir = cfg.out_dir(out_dir, "augment")?;
            let alphas = parse_alphas(&alphas)?;
            let m = Manifest::load(&manifest)?;
            let report_path = out_dir.join(REPORT_FILE);
            let outcome = match augment::build_augmented(&m, &alphas, method, &policy, &out_dir, cli.jobs) {
                Ok(o) => o,
                Err(Error::EmptyResult(report)) => {
                    augment::write_report(&report_path, &report)?;
                    return Err(empty(format!(
                        "no candidate was accepted ({} evaluated); see {}",
                        report.len(),
                        report_path.display()
                    )));
                }
                Err(e) => return Err(e.into()),
            };
            augment::write_report(&report_path, &outcome.report)?;
            let aug = if attach_pitch {
                augment::attach_pitch(&outcome.manifest, Some(&m))?
            } else {
                outcome.manifest
            };
            let manifest_path = out_dir.join("aug.jsonl");
            aug.save(&manifest_path)?;
            let count = |s| outcome.report.iter().filter(|c| c.status == s).count();
            use augment::CandidateStatus::*;
            let (accepted, rejected, failed) = (count(Accepted), count(Rejected), count(Failed));
            emit(
                cli.json,
                json!({
                    "manifest": manifest_path, "report": report_path,
                    "candidates": outcome.report.len(), "accepted": accepted,
                    "rejected": rejected, "failed": failed,
                }),
                || {
                    format!(
                        "{accepted} accepted, {rejected} rejected, {failed} failed\nwrote {} and {}",
                        manifest_path.display(),
                        report_path.display()
                    )
                },
            )
        }
        Command::Schedule {
            epochs,
            orig,
            aug,
            seed,
            log,
            batch_size,
            dim,
            learning_rate,
        } => {
            if !(learning_rate > 0.0 && learning_rate.is_finite()) {
                return Err(usage(format!("--learning-rate must be positive, got {learning_rate}")));
            }
            let d_orig = Manifest::load(&orig)?;
            let d_aug = Manifest::load(&aug)?;
            let plan = TrainingPlan {
                epochs,
                d_orig: examples_from_manifest(&d_orig, None)?,
                d_aug: examples_from_manifest(&d_aug, Some(&d_orig))?,
                batch_size,
                seed,
            };
            let mut model = toy_model(dim, d_orig.analysis.n_mels, seed)?;
            model.learning_rate = learning_rate;
            let logs = run_training(&mut model, &plan)?;
            let mut text = String::new();
            for entry in &logs {
                text.push_str(&serde_json::to_string(entry)?);
                text.push('\n');
            }
            fs::write(&log, text)?;
            let first = logs.first().map(|l| l.mel_loss);
            let last = logs.last().map(|l| l.mel_loss);
            emit(
                cli.json,
                json!({ "epochs": logs.len(), "log": log, "first_mel_loss": first, "last_mel_loss": last }),
                || {
                    format!(
                        "{} epochs, mel loss {:.5} -> {:.5}\nwrote {}",
                        logs.len(),
                        first.unwrap_or(f64::NAN),
                        last.unwrap_or(f64::NAN),
                        log.display()
                    )
                },
            )
        }
        Command::AlphaStar {
            manifest,
            grid,
            scorer,
            method,
            policy,
            work_dir,
        } => {
            let policy = cfg.policy(policy.as_deref())?;
            let grid = parse_alphas(&grid)?;
            let work_dir = cfg.out_dir(work_dir, "alpha-star")?;
            let m = Manifest::load(&manifest)?;
            let report = augment::alpha_star(&m, &grid, method, &policy, &scorer, &work_dir, cli.jobs)?;
            emit(cli.json, serde_json::to_value(&report)?, || {
                let mut s = String::new();
                for r in &report.rows {
                    s += &format!(
                        "alpha {:+}: {}/{} accepted, max score {}: {}\n",
                        r.alpha.0,
                        r.accepted,
                        r.candidates,
                        r.max_score.map_or("-".into(), |v| format!("{v}")),
                        if r.passes { "pass" } else { "fail" }
                    );
                }
                match report.alpha_star {
                    Some(a) => s + &format!("alpha* = {a}"),
                    None => s + "no alpha qualifies",
                }
            })?;
            if report.alpha_star.is_none() {
                bail!(empty("no alpha in the grid satisfies every constraint"));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = CliConfig::load(cli.config.as_deref());
    let default_level = cfg
        .as_ref()
        .ok()
        .and_then(|c| c.verbosity.clone())
        .unwrap_or_else(|| "warn".to_string());
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, default_level))
        .target(env_logger::Target::Stderr)
        .init();
    match cfg.and_then(|cfg| run(cli, cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
