use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use corrconv::equivalence::{run_suite, sweep, SweepSize, Tolerances};
use corrconv::labels::{gaussian_label, validate_label, LabelSpec};
use corrconv::oracle::{build_dense, compare, dense_solve};
use corrconv::random::random_sample;
use corrconv::solver::{filter_to_spatial, solve_filter, SolveSpec, DEFAULT_LAMBDA};
use corrconv::spectral::response;
use corrconv::tensorio::{
    read_pgm, read_sample_file, read_spectral_file, write_pgm, write_sample_file,
    write_spectral_file, MAGIC_SPECTRAL,
};
use corrconv::tracker::{
    records_to_csv, track_sequence, BlobSequence, BoundingBox, FeatureSet, TrackerConfig,
};
use corrconv::{Error, FilterBank, Mode, MultiChannelSample};

#[derive(Parser)]
#[command(
    name = "corrconv",
    version,
    about = "Correlation and convolution filters solved per frequency bin",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Correlation,
    Convolution,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Correlation => Mode::Correlation,
            ModeArg::Convolution => Mode::Convolution,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Small,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturesArg {
    Gray,
    Gradients,
}

#[derive(Subcommand)]
enum Command {
    /// Write a centrosymmetric Gaussian label as a single-channel MCT1 file.
    Label {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for the optimal filter from MCT1 samples and a label.
    Learn {
        #[arg(long, num_args = 1.., required = true)]
        samples: Vec<PathBuf>,
        #[arg(long)]
        label: PathBuf,
        /// Comma-separated sample weights; uniform 1/t when omitted.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out_spectral: Option<PathBuf>,
        #[arg(long)]
        out_spatial: Option<PathBuf>,
    },
    /// Apply a filter (MCT1 spatial or MCTC spectral) to a sample.
    Detect {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        filter: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check conjugation, flip symmetry and MSE equality over a seeded sweep.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "small")]
        sweep: SweepArg,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        /// Label bandwidth; min(m,n)/8 per instance when omitted.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        tol_conj: Option<f64>,
        #[arg(long)]
        tol_flip: Option<f64>,
        #[arg(long)]
        tol_mse: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Add an instance with a non-centrosymmetric label; the suite must fail.
        #[arg(long)]
        negative_control: bool,
    },
    /// Compare the spectral solver against the dense spatial least-squares solution.
    Oracle {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "correlation")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Track a target through a directory of PGM frames.
    Track {
        #[arg(long)]
        frames: PathBuf,
        /// Initial box "x,y,w,h" (top-left corner and size).
        #[arg(long)]
        init: String,
        #[arg(long, value_enum, default_value = "correlation")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.025)]
        eta: f64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_enum, default_value = "gray")]
        features: FeaturesArg,
        #[arg(long)]
        no_hann: bool,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Directory for per-frame response grids (MCT1).
        #[arg(long)]
        responses: Option<PathBuf>,
    },
    /// Write a synthetic moving-blob sequence as PGM frames.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
}

/// Failed check: reported on stdout/report already, exit 1 without a second message.
#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn write_json(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_weights(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad weight {w:?}: {e}")).into())
        })
        .collect()
}

fn read_filter(path: &Path) -> Result<FilterBank> {
    let head = fs::read(path)
        .map_err(|e| Error::Io { path: path.into(), source: e })?;
    if head.starts_with(MAGIC_SPECTRAL) {
        Ok(FilterBank::Spectral(read_spectral_file(path)?))
    } else {
        Ok(FilterBank::Spatial(read_sample_file(path)?.into_channels()))
    }
}

fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.into(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!(Error::InvalidParameter(format!("no .pgm frames in {}", dir.display())));
    }
    Ok(paths)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Label { m, n, sigma, out } => {
            let y = gaussian_label(&LabelSpec::new(m, n, sigma))?;
            write_sample_file(&MultiChannelSample::single(y.clone()), &out)?;
            let report = validate_label(&y, 1e-12);
            write_json(&json!({ "m": m, "n": n, "sigma": sigma, "validation": report }), None)
        }
        Command::Learn {
            samples,
            label,
            weights,
            lambda,
            mode,
            out_spectral,
            out_spatial,
        } => {
            let samples = samples
                .iter()
                .map(read_sample_file)
                .collect::<corrconv::Result<Vec<_>>>()?;
            let label = read_sample_file(&label)?;
            if label.depth() != 1 {
                bail!(Error::Shape(format!("label file has {} channels, expected 1", label.depth())));
            }
            let label = label.into_channels().remove(0);
            let t = samples.len();
            let weights = match weights {
                Some(w) => parse_weights(&w)?,
                None => vec![1.0 / t as f64; t],
            };
            let spec = SolveSpec::new(label, weights, lambda, mode.into());
            let fhat = solve_filter(&samples, &spec)?;
            let hermitian = fhat
                .spectral()?
                .iter()
                .map(|c| c.hermitian_residue())
                .fold(0.0, f64::max);
            if let Some(p) = &out_spectral {
                write_spectral_file(fhat.spectral()?, p)?;
            }
            if let Some(p) = &out_spatial {
                let spatial = filter_to_spatial(&fhat, 1e-9)?;
                write_sample_file(&spatial.to_sample()?, p)?;
            }
            let (m, n) = fhat.shape();
            write_json(
                &json!({
                    "mode": spec.mode,
                    "d": fhat.depth(), "m": m, "n": n, "t": t,
                    "lambda": lambda,
                    "hermitian_residue": hermitian,
                }),
                None,
            )
        }
        Command::Detect {
            sample,
            filter,
            mode,
            out,
        } => {
            let sample = read_sample_file(&sample)?;
            let filter = read_filter(&filter)?;
            let r = response(&sample, &filter, mode.into())?;
            write_sample_file(&MultiChannelSample::single(r.clone()), &out)?;
            let peak = r.argmax();
            let (m, n) = r.shape();
            write_json(
                &json!({
                    "peak": peak,
                    "displacement": peak.displacement(m, n),
                    "score": r[(peak.row, peak.col)],
                }),
                None,
            )
        }
        Command::Verify {
            seed,
            sweep: size,
            lambda,
            sigma,
            tol_conj,
            tol_flip,
            tol_mse,
            report,
            negative_control,
        } => {
            if !(lambda > 0.0) {
                bail!(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
            }
            let defaults = Tolerances::default();
            let tol = Tolerances {
                conj: tol_conj.unwrap_or(defaults.conj),
                flip: tol_flip.unwrap_or(defaults.flip),
                mse: tol_mse.unwrap_or(defaults.mse),
                ..defaults
            };
            let size = match size {
                SweepArg::Small => SweepSize::Small,
                SweepArg::Full => SweepSize::Full,
            };
            let mut specs = sweep(seed, size, lambda, sigma);
            if negative_control {
                specs.push(specs[0].negative_control());
            }
            let suite = run_suite(&specs, &tol);
            let s = &suite.summary;
            eprintln!(
                "verify: {}/{} passed; max conj {:.3e}, flip {:.3e}, mse gap {:.3e}, normal {:.3e}",
                s.passed, s.total, s.max_conj_residue, s.max_flip_residue, s.max_mse_gap, s.max_normal_residual
            );
            let value = serde_json::to_value(&suite)?;
            match &report {
                Some(p) => write_json(&value, Some(p))?,
                None => write_json(&serde_json::to_value(&suite.summary)?, None)?,
            }
            if !s.all_passed {
                return Err(CheckFailed(format!("{} of {} instances failed", s.failed, s.total)).into());
            }
            Ok(())
        }
        Command::Oracle {
            m,
            n,
            d,
            t,
            seed,
            lambda,
            mode,
            tol,
            report,
        } => {
            if m == 0 || n == 0 || d == 0 || t == 0 {
                bail!(Error::InvalidParameter("m, n, d, t must be positive".into()));
            }
            let sigma = m.min(n) as f64 / 8.0;
            let label = gaussian_label(&LabelSpec::new(m, n, sigma))?;
            let samples: Vec<_> = (0..t)
                .map(|k| random_sample(seed.wrapping_add(k as u64), d, m, n))
                .collect();
            let spec = SolveSpec::uniform(label, t, lambda, mode.into());
            let dense = dense_solve(&build_dense(&samples, &spec)?)?;
            let spectral = filter_to_spatial(&solve_filter(&samples, &spec)?, 1e-9)?;
            let cmp = compare(&dense, &spectral, tol)?;
            write_json(
                &json!({
                    "m": m, "n": n, "d": d, "t": t, "seed": seed,
                    "lambda": lambda, "sigma": sigma, "mode": spec.mode, "tol": tol,
                    "comparison": cmp,
                }),
                report.as_deref(),
            )?;
            if !cmp.pass {
                return Err(CheckFailed(format!("oracle mismatch: max_rel {:e}", cmp.max_rel)).into());
            }
            Ok(())
        }
        Command::Track {
            frames,
            init,
            mode,
            eta,
            lambda,
            sigma,
            features,
            no_hann,
            out_csv,
            responses,
        } => {
            let init: BoundingBox = init.parse()?;
            let config = TrackerConfig {
                mode: mode.into(),
                eta,
                lambda,
                sigma,
                features: match features {
                    FeaturesArg::Gray => FeatureSet::Gray,
                    FeaturesArg::Gradients => FeatureSet::GrayGradients,
                },
                hann: !no_hann,
                ..TrackerConfig::default()
            };
            config.validate()?;
            let grids = frame_paths(&frames)?
                .iter()
                .map(read_pgm)
                .collect::<corrconv::Result<Vec<_>>>()?;
            if let Some(dir) = &responses {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mut write_err = None;
            let records = track_sequence(&grids, init, config, |k, out| {
                if let (Some(dir), None) = (&responses, &write_err) {
                    let path = dir.join(format!("response_{k:05}.mct"));
                    if let Err(e) = write_sample_file(&MultiChannelSample::single(out.response.clone()), path) {
                        write_err = Some(e);
                    }
                }
            })?;
            if let Some(e) = write_err {
                return Err(e.into());
            }
            let csv = records_to_csv(&records);
            match &out_csv {
                Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Synth {
            out,
            seed,
            frames,
            noise,
        } => {
            let seq = BlobSequence {
                frames,
                noise_std: noise,
                ..BlobSequence::standard(seed)
            };
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (k, f) in seq.render().iter().enumerate() {
                write_pgm(f, out.join(format!("frame_{k:05}.pgm")))?;
            }
            let b = seq.initial_box(16.0, 16.0);
            println!("{},{},{},{}", b.x, b.y, b.w, b.h);
            Ok(())
        }
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Format { .. } => "format",
        Error::Io { .. } => "io",
        Error::Shape(_) => "shape",
        Error::InvalidParameter(_) => "invalid-parameter",
        Error::ImaginaryResidue { .. } => "numerical",
        Error::NotPositiveDefinite { .. } => "numerical",
        Error::TooLarge(_) => "too-large",
        Error::TrackingLost(_) => "tracking-lost",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(c) = err.downcast_ref::<CheckFailed>() {
                eprintln!("error[check-failed]: {c}");
                return ExitCode::from(1);
            }
            let (kind, code, msg) = match err.downcast_ref::<Error>() {
                Some(e @ Error::InvalidParameter(_)) => (error_kind(e), 2, e.to_string()),
                Some(e) => (error_kind(e), 1, e.to_string()),
                None => ("io", 1, format!("{err:#}")),
            };
            let msg = msg.replace('\n', " ");
            eprintln!("error[{kind}]: {msg}");
            ExitCode::from(code)
        }
    }
}
