//! Command-line front end. `run` returns the process exit code:
//! 0 on success, 1 when a check or run fails, 2 on usage or config errors.

use crate::autonn::NnError;
use crate::check::{self, Suite};
use crate::data::{self, build_manifest, synth_corpus, CorpusConfig, DataError, Manifest, Split, MANIFEST_FILE};
use crate::dsp::StftPlan;
use crate::trainer::{self, ablate, evaluate, load_checkpoint, load_examples, write_eval_csv, GeneratorEnhancer, Mode, TrainConfig, TrainError};
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scpgan", version, about = "Self-correcting, consistency-preserving metric GAN toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesise a corpus and write its mixture manifest.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Training clips; the test split gets a fifth as many.
        #[arg(long, default_value_t = 200)]
        clips: usize,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long, default_value_t = 16000)]
        sr: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train one configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a checkpoint on one split of a manifest.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every ablation mode for each seed.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the randomised property suites.
    Check {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    let result = match cli.command {
        Command::GenData {
            out,
            clips,
            seconds,
            sr,
            seed,
        } => gen_data(&out, clips, seconds, sr, seed),
        Command::Train { config, mode, seed } => train(&config, mode, seed),
        Command::Eval {
            ckpt,
            manifest,
            split,
            out,
        } => eval(&ckpt, &manifest, split, &out),
        Command::Ablate { config, seeds, out } => run_ablate(&config, &seeds, &out),
        Command::Check { suite, seed } => return run_check(suite, seed),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("SCPGAN_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn is_not_found(e: &TrainError) -> bool {
    match e {
        TrainError::Io(io) | TrainError::Data(DataError::Io(io)) | TrainError::Nn(NnError::Io(io)) => {
            io.kind() == std::io::ErrorKind::NotFound
        }
        _ => false,
    }
}

fn exit_code(e: &TrainError) -> i32 {
    match e {
        TrainError::Config(_) | TrainError::Data(DataError::InvalidConfig(_)) => EXIT_USAGE,
        _ if is_not_found(e) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn gen_data(out: &Path, clips: usize, seconds: f64, sr: u32, seed: u64) -> Result<(), TrainError> {
    let cfg = CorpusConfig {
        n_clips: clips,
        duration_s: seconds,
        sample_rate: sr,
        seed,
    };
    let info = synth_corpus(out, &cfg)?;
    let manifest = build_manifest(out, &data::TRAIN_SNRS, &data::TEST_SNRS, seed)?;
    let bytes = std::fs::read(out.join(MANIFEST_FILE))?;
    let n_train = manifest.split(Split::Train).count();
    let n_test = manifest.split(Split::Test).count();
    println!(
        "wrote {n_train} train / {n_test} test clips, {:.1} s total audio, manifest sha256 {}",
        info.clips.len() as f64 * info.duration_s,
        hex::encode(Sha256::digest(&bytes))
    );
    Ok(())
}

fn train(config: &Path, mode: Option<Mode>, seed: Option<u64>) -> Result<(), TrainError> {
    let mut cfg = TrainConfig::load(config)?;
    if let Some(m) = mode {
        cfg.apply_mode(m);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = trainer::train(&cfg)?;
    let m = &report.best.mean;
    println!(
        "best epoch {}: test SSNR {:.3} dB vs noisy {:.3} dB ({:+.3} dB); outputs in {}",
        report.best_epoch,
        m.ssnr_enh,
        m.ssnr_noisy,
        report.best_improvement_db(),
        report.out_dir.display()
    );
    Ok(())
}

fn eval(ckpt: &Path, manifest: &Path, split: Split, out: &Path) -> Result<(), TrainError> {
    let (gen, cfg) = load_checkpoint(ckpt)?;
    let manifest = Manifest::load(manifest)?;
    let plan = Arc::new(StftPlan::new(cfg.stft)?);
    let c = cfg.gen_loss.mag_compression;
    let examples = load_examples(&manifest, split, &plan, c, &cfg.ssnr)?;
    if examples.is_empty() {
        return Err(DataError::EmptyCorpus.into());
    }
    let enhancer = GeneratorEnhancer {
        gen: &gen,
        plan,
        compression: c,
    };
    let table = evaluate(&enhancer, &examples, &cfg.ssnr)?;
    write_eval_csv(out, &table)?;
    println!(
        "{} {} clips: SSNR {:.3} dB vs noisy {:.3} dB ({:+.3} dB)",
        split.as_str(),
        table.rows.len(),
        table.mean.ssnr_enh,
        table.mean.ssnr_noisy,
        table.improvement_db()
    );
    Ok(())
}

fn run_ablate(config: &Path, seeds: &[u64], out: &Path) -> Result<(), TrainError> {
    let cfg = TrainConfig::load(config)?;
    let summary = ablate(&cfg, seeds, out)?;
    println!("{:<10} {:>4} {:>10} {:>10} {:>8}", "mode", "ok", "ssnr", "std", "gain");
    for r in &summary.rows {
        println!(
            "{:<10} {:>4} {:>10.3} {:>10.3} {:>+8.3}",
            r.mode, r.runs_ok, r.ssnr_enh_mean, r.ssnr_enh_std, r.improvement_mean
        );
    }
    let failed: usize = summary.rows.iter().map(|r| r.runs_failed).sum();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see {}", out.join(trainer::RUNS_CSV).display());
    }
    Ok(())
}

fn run_check(suite: Suite, seed: u64) -> i32 {
    let reports = check::run(suite, seed);
    let mut code = EXIT_OK;
    for r in &reports {
        print!("{r}");
        if !r.passed() {
            code = EXIT_FAILURE;
        }
    }
    code
}
