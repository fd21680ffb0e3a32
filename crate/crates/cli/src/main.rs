//! `sfd`: source-filter decomposition of chromatic instrument spectra.

mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sfd_core::apply::{hybridize, predict_spectrum, render_wav, PredictedSpectrum};
use sfd_core::decompose::{read_model, solve_system, write_model, DecompositionModel, SolverConfig};
use sfd_core::grid::{assemble_system, build_grid, rank_oracle, DesignSystem, Weighting};
use sfd_core::spectra::{
    apply_truncation, parse_canonical, parse_sharc_instrument, AmpUnit, InstrumentSeries,
    PhaseUnit, TruncationPolicy, UniformSeries, DEFAULT_FLOOR_REL,
};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_SIZE_GUARD: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sfd", version, about = "Source-filter decomposition of instrument spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a decomposition model to an instrument series.
    Analyze(AnalyzeArgs),
    /// Export excitation, filter and residual tables from a model.
    Plotdata {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Predict the spectrum of a note at a new fundamental.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        note: NoteArgs,
        /// Output CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict with one model's excitation and another's filter.
    Hybrid {
        #[arg(long)]
        excitation: PathBuf,
        #[arg(long)]
        filter: PathBuf,
        #[command(flatten)]
        note: NoteArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Additively resynthesize a spectrum to a 16-bit mono WAV file.
    Render {
        /// Predicted-spectrum CSV.
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        spectrum: Option<PathBuf>,
        /// Model to predict from (with --f0).
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        note: NoteArgs,
        #[arg(long, default_value_t = 1.0)]
        seconds: f64,
        #[arg(long, default_value_t = 44100)]
        rate: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact rank of the design matrix.
    Rank(InputArgs),
    /// Parse, validate and truncate an input without fitting.
    Validate(InputArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    /// SHARC instrument directory or canonical JSON file.
    input: PathBuf,
    /// Truncation policy as SAMPLES,PARTIALS.
    #[arg(long, default_value_t = TruncationPolicy::STANDARD)]
    policy: TruncationPolicy,
    /// Relative magnitude floor below which partials are left out.
    #[arg(long, default_value_t = DEFAULT_FLOOR_REL)]
    floor: f64,
    /// Amplitude column unit of SHARC files (required for SHARC input).
    #[arg(long)]
    sharc_amp: Option<AmpUnit>,
    /// Phase column unit of SHARC files.
    #[arg(long, default_value = "rad")]
    sharc_phase: PhaseUnit,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Row weighting: uniform, magnitude or power.
    #[arg(long, default_value_t = Weighting::Magnitude)]
    weighting: Weighting,
    /// Relative metric change that ends the iteration.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Sweep limit; reaching it exits with status 2.
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Model output file (default: NAME.model.json).
    #[arg(long, conflicts_with = "all")]
    out: Option<PathBuf>,
    /// Analyze every instrument found in the input directory.
    #[arg(long, requires = "out_dir")]
    all: bool,
    /// Output directory for --all.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NoteArgs {
    /// Target fundamental in Hz.
    #[arg(long)]
    f0: f64,
    /// Number of partials (default: all known to the excitation).
    #[arg(long)]
    partials: Option<usize>,
    /// Overall level in dB.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    amp_db: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let guard = e
                .chain()
                .any(|c| matches!(c.downcast_ref(), Some(sfd_core::Error::SizeGuard { .. })));
            ExitCode::from(if guard { EXIT_SIZE_GUARD } else { EXIT_INPUT })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Analyze(args) if args.all => analyze_all(&args),
        Command::Analyze(args) => analyze(&args),
        Command::Plotdata { model, out_dir } => plotdata(&resolve(&model)?, &absolute(&out_dir)?),
        Command::Predict { model, note, out } => {
            let model = load_model(&model)?;
            let out = out.as_deref().map(absolute).transpose()?;
            emit(&predict(&model, &note)?.to_csv(), out.as_deref())
        }
        Command::Hybrid {
            excitation,
            filter,
            note,
            out,
        } => {
            let (e, f) = (load_model(&excitation)?, load_model(&filter)?);
            let out = out.as_deref().map(absolute).transpose()?;
            emit(&predict(&hybridize(&e, &f), &note)?.to_csv(), out.as_deref())
        }
        Command::Render {
            spectrum,
            model,
            note,
            seconds,
            rate,
            out,
        } => {
            let out = absolute(&out)?;
            let spec = match (spectrum, model) {
                (Some(path), _) => {
                    let path = resolve(&path)?;
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    PredictedSpectrum::from_csv(&text, note.f0)
                        .with_context(|| format!("{}", path.display()))?
                }
                (None, Some(model)) => predict(&load_model(&model)?, &note)?,
                (None, None) => bail!("render needs --spectrum or --model"),
            };
            let dropped = render_wav(&spec, seconds, rate, &out)?;
            if !dropped.is_empty() {
                eprintln!("dropped partials above Nyquist: {dropped:?}");
            }
            Ok(0)
        }
        Command::Rank(args) => {
            let sys = system(&load_uniform(&args)?, Weighting::default());
            let rank = rank_oracle(&sys)?;
            println!(
                "rows={} cols={} rank={} deficiency={}",
                sys.row_count(),
                sys.col_count(),
                rank,
                sys.col_count() - rank
            );
            Ok(0)
        }
        Command::Validate(args) => {
            let path = resolve(&args.input)?;
            let series = load_series(&path, &args)?;
            let u = apply_truncation(&series, args.policy, args.floor)?;
            println!(
                "ok: {} ({} notes from {} Hz); policy {} keeps S={} K={} with {} usable entries",
                series.name,
                series.notes.len(),
                series.f0_lowest_hz,
                args.policy,
                u.notes(),
                u.partials(),
                u.usable_count()
            );
            Ok(0)
        }
    }
}

fn absolute(path: &Path) -> anyhow::Result<PathBuf> {
    std::path::absolute(path).with_context(|| format!("resolving {}", path.display()))
}

/// Resolves an input path that must exist.
fn resolve(path: &Path) -> anyhow::Result<PathBuf> {
    fs::canonicalize(path).with_context(|| format!("{}: cannot open input", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<DecompositionModel> {
    Ok(read_model(&resolve(path)?)?)
}

fn load_series(path: &Path, args: &InputArgs) -> anyhow::Result<InstrumentSeries> {
    if path.is_dir() {
        let Some(amp) = args.sharc_amp else {
            bail!(
                "{}: SHARC directory input needs --sharc-amp db|linear",
                path.display()
            );
        };
        Ok(parse_sharc_instrument(path, amp, args.sharc_phase)?)
    } else {
        Ok(parse_canonical(path)?)
    }
}

fn load_uniform(args: &InputArgs) -> anyhow::Result<UniformSeries> {
    let series = load_series(&resolve(&args.input)?, args)?;
    Ok(apply_truncation(&series, args.policy, args.floor)?)
}

fn system(u: &UniformSeries, weighting: Weighting) -> DesignSystem {
    assemble_system(u, &build_grid(u), weighting)
}

fn solver_config(args: &AnalyzeArgs) -> anyhow::Result<SolverConfig> {
    let cfg = SolverConfig {
        max_iterations: args.max_iters,
        rel_tolerance: args.tol,
        weighting: args.weighting,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn fit(path: &Path, args: &AnalyzeArgs, cfg: &SolverConfig) -> anyhow::Result<(DecompositionModel, DesignSystem)> {
    let series = load_series(path, &args.input)?;
    let u = apply_truncation(&series, args.input.policy, args.input.floor)?;
    let sys = system(&u, cfg.weighting);
    let model = solve_system(&sys, cfg)?;
    Ok((model, sys))
}

fn exit_for(model: &DecompositionModel) -> u8 {
    if model.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn analyze(args: &AnalyzeArgs) -> anyhow::Result<u8> {
    let cfg = solver_config(args)?;
    let input = resolve(&args.input.input)?;
    let out = args.out.as_deref().map(absolute).transpose()?;
    let (model, sys) = fit(&input, args, &cfg)?;
    let out = match out {
        Some(p) => p,
        None => absolute(Path::new(&format!("{}.model.json", file_safe(&model.name))))?,
    };
    write_model(&model, &out)?;
    print!("{}", report::analysis(&model, &sys, report::use_color()));
    println!("{:<14}{}", "model", out.display());
    if !model.converged {
        eprintln!(
            "warning: no convergence within {} iterations; model written anyway",
            model.iterations_used
        );
    }
    Ok(exit_for(&model))
}

/// Each instrument directory or JSON file under the input is fitted
/// independently; reports are printed in name order.
fn analyze_all(args: &AnalyzeArgs) -> anyhow::Result<u8> {
    let cfg = solver_config(args)?;
    let root = resolve(&args.input.input)?;
    let out_dir = absolute(args.out_dir.as_deref().expect("clap requires --out-dir"))?;
    let mut inputs: Vec<PathBuf> = fs::read_dir(&root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let hidden = p
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with('.'));
            !hidden && (p.is_dir() || p.extension().is_some_and(|x| x == "json"))
        })
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        bail!("{}: no instruments found", root.display());
    }
    fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let results: Vec<_> = inputs
        .par_iter()
        .map(|path| {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instrument");
            let out = out_dir.join(format!("{}.model.json", file_safe(stem)));
            let (model, sys) = fit(path, args, &cfg)?;
            write_model(&model, &out)?;
            anyhow::Ok((model, sys, out))
        })
        .collect();

    let color = report::use_color();
    let mut code = 0;
    for (path, result) in inputs.iter().zip(results) {
        match result {
            Ok((model, sys, out)) => {
                print!("{}", report::analysis(&model, &sys, color));
                println!("{:<14}{}\n", "model", out.display());
                code = code.max(exit_for(&model));
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                code = code.max(EXIT_INPUT);
            }
        }
    }
    // Input errors outrank non-convergence.
    Ok(if code == EXIT_NOT_CONVERGED || code == 0 { code } else { EXIT_INPUT })
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn plotdata(model_path: &Path, out_dir: &Path) -> anyhow::Result<u8> {
    let model = read_model(model_path)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (name, body) in [
        ("excitation.csv", report::excitation_csv(&model)),
        ("filter.csv", report::filter_csv(&model)),
        ("residuals.csv", report::residuals_csv(&model)),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn predict(model: &DecompositionModel, note: &NoteArgs) -> anyhow::Result<PredictedSpectrum> {
    let partials = note.partials.unwrap_or(model.partials);
    Ok(predict_spectrum(
        model,
        note.f0,
        partials,
        report::db_to_ln(note.amp_db),
    )?)
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<u8> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(0)
}
