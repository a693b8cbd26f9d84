use std::error::Error;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use framekit::canon::CanonMethod;
use framekit::diagnostics::{
    probe_frame_continuity, probe_operator_continuity, random_direction, ProbeSchedule,
};
use framekit::frames::{separated_collection, FrameKind, FrameMap, WeightedFrame, DEFAULT_ETA};
use framekit::harness::{dataset_for, run_experiment, ExperimentConfig, MlpModel};
use framekit::project::{
    builtin_cloud, builtin_scalar, integrate_equivariant, integrate_invariant, project_invariant,
    DEFAULT_QUADRATURE,
};
use framekit::PointCloud;

type CliResult<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "framekit",
    version,
    about = "Weighted frames, canonicalizations and averaging operators for point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Inv,
    Equiv,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize a cloud.
    Canon {
        #[arg(long)]
        method: CanonMethod,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the weighted frame of a cloud.
    Frame {
        #[arg(long)]
        kind: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        /// Sample count of the Monte-Carlo argsort frame.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Seed of the Monte-Carlo frame and of the separated direction collection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average a function over a frame.
    Project {
        #[arg(long)]
        frame: PathBuf,
        /// `builtin:<name>` or `mlp:<weights.json>`.
        #[arg(long = "fn")]
        function: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "inv")]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Continuity probe along `X + 2^-k Δ`.
    Probe {
        /// `frame:<kind>`, `canon:<method>` or `op:<kind>:<builtin>`.
        #[arg(long)]
        target: String,
        #[arg(long)]
        at: PathBuf,
        /// Perturbation direction; a seeded random unit direction when omitted.
        #[arg(long)]
        delta: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0.5)]
        decay: f64,
        #[arg(long, default_value_t = DEFAULT_QUADRATURE)]
        quadrature: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train and evaluate the classifier under every invariance method.
    Experiment {
        /// JSON config; missing keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use the small smoke configuration as the base.
        #[arg(long)]
        smoke: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the dataset of the first seed as CSV.
        #[arg(long)]
        dataset_csv: Option<PathBuf>,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

/// Frame kinds by name; the separated frame draws a collection for the
/// shape of `x`.
fn frame_kind(
    name: &str,
    x: &PointCloud,
    eta: f64,
    samples: usize,
    seed: u64,
) -> CliResult<FrameKind> {
    Ok(match name {
        "separated" => FrameKind::Separated(separated_collection(
            x.n(),
            x.d(),
            &mut ChaCha8Rng::seed_from_u64(seed),
        )?),
        "argsort-mc" => FrameKind::ArgsortMc { samples, seed },
        "so2" => FrameKind::So2 { eta },
        "so2-stable" => FrameKind::So2Stable { eta },
        other => other.parse()?,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Canon { method, input, out } => {
            let x: PointCloud = read_json(&input)?;
            write_json(out.as_deref(), &method.apply(&x)?)
        }
        Command::Frame {
            kind,
            input,
            eta,
            samples,
            seed,
            out,
        } => {
            let x: PointCloud = read_json(&input)?;
            let frame = frame_kind(&kind, &x, eta, samples, seed)?.frame(&x)?;
            write_json(out.as_deref(), &frame)
        }
        Command::Project {
            frame,
            function,
            input,
            mode,
            out,
        } => {
            let mu: WeightedFrame = read_json(&frame)?;
            let x: PointCloud = read_json(&input)?;
            let value = project(&mu, &function, &x, mode)?;
            write_json(out.as_deref(), &value)
        }
        Command::Probe {
            target,
            at,
            delta,
            steps,
            decay,
            quadrature,
            seed,
            report,
        } => {
            let x: PointCloud = read_json(&at)?;
            let delta = match delta {
                Some(p) => read_json(&p)?,
                None => random_direction(x.d(), x.n(), &mut ChaCha8Rng::seed_from_u64(seed)),
            };
            let sched = ProbeSchedule::with_steps(x.clone(), delta, steps, decay)?;
            let result = probe(&target, &x, &sched, quadrature, seed)?;
            eprintln!(
                "{target}: {:?}, final distance {:.3e}",
                result.verdict,
                result.distances.last().copied().unwrap_or(f64::NAN)
            );
            write_json(report.as_deref(), &result)
        }
        Command::Experiment {
            config,
            smoke,
            out,
            dataset_csv,
        } => {
            let config = match (config, smoke) {
                (Some(p), false) => read_json(&p)?,
                (Some(p), true) => {
                    let mut base = serde_json::to_value(ExperimentConfig::smoke())?;
                    let user: serde_json::Value = read_json(&p)?;
                    if let (Some(b), Some(u)) = (base.as_object_mut(), user.as_object()) {
                        b.extend(u.clone());
                    }
                    serde_json::from_value(base)?
                }
                (None, true) => ExperimentConfig::smoke(),
                (None, false) => ExperimentConfig::default(),
            };
            if let Some(path) = dataset_csv {
                config.validate()?;
                let seed = config.seeds.first().copied().unwrap_or(0);
                dataset_for(&config, seed)?.write_csv(BufWriter::new(File::create(path)?))?;
            }
            let results = run_experiment(&config)?;
            for m in &results.means {
                eprintln!(
                    "{:<18} samples {:>3}  accuracy {:.3}",
                    m.method.name(),
                    m.samples,
                    m.accuracy
                );
            }
            if let Some(o) = &results.ordering {
                eprintln!("ordering: {}", if o.passed() { "PASS" } else { "FAIL" });
            }
            write_json(out.as_deref(), &results)
        }
    }
}

fn project(
    mu: &WeightedFrame,
    function: &str,
    x: &PointCloud,
    mode: Mode,
) -> CliResult<serde_json::Value> {
    if let Some(name) = function.strip_prefix("builtin:") {
        return Ok(match mode {
            Mode::Inv => json!({ "value": integrate_invariant(mu, builtin_scalar(name)?, x)? }),
            Mode::Equiv => json!({ "value": integrate_equivariant(mu, builtin_cloud(name)?, x)? }),
        });
    }
    let Some(path) = function.strip_prefix("mlp:") else {
        return Err(format!("--fn must start with builtin: or mlp:, got {function:?}").into());
    };
    let model: MlpModel = read_json(Path::new(path))?;
    if model.input_size() != x.d() * x.n() {
        return Err(format!(
            "model takes {} inputs, cloud has {}",
            model.input_size(),
            x.d() * x.n()
        )
        .into());
    }
    let mut acc = vec![0.0; model.output_size()];
    for atom in mu.atoms() {
        let out = model.forward(&atom.element.act_inverse(x)?.flatten());
        let out = match mode {
            Mode::Inv => out.iter().copied().collect::<Vec<f64>>(),
            Mode::Equiv => {
                if out.len() != x.d() * x.n() {
                    return Err("equivariant mode needs a model with d*n outputs".into());
                }
                let y = PointCloud::from_matrix(nalgebra::DMatrix::from_column_slice(
                    x.d(),
                    x.n(),
                    out.as_slice(),
                ))?;
                atom.element.act(&y)?.flatten()
            }
        };
        for (a, o) in acc.iter_mut().zip(out) {
            *a += atom.weight * o;
        }
    }
    Ok(match mode {
        Mode::Inv => json!({ "value": acc }),
        Mode::Equiv => {
            json!({ "value": PointCloud::from_matrix(nalgebra::DMatrix::from_column_slice(x.d(), x.n(), &acc))? })
        }
    })
}

fn probe(
    target: &str,
    x: &PointCloud,
    sched: &ProbeSchedule,
    quadrature: usize,
    seed: u64,
) -> CliResult<framekit::diagnostics::DiagnosticReport> {
    let (kind, rest) = target
        .split_once(':')
        .ok_or("target must be frame:<kind>, canon:<method> or op:<kind>:<fn>")?;
    Ok(match kind {
        "frame" => {
            let frames = frame_kind(rest, x, DEFAULT_ETA, 10_000, seed)?;
            probe_frame_continuity(&frames, sched, quadrature)?
        }
        "canon" => {
            let c: CanonMethod = rest.parse()?;
            probe_operator_continuity(|y| Ok(c.apply(y)?.flatten()), sched)?
        }
        "op" => {
            let (frame, f) = rest
                .split_once(':')
                .ok_or("op target is op:<frame kind>:<builtin scalar>")?;
            let frames = frame_kind(frame, x, DEFAULT_ETA, 10_000, seed)?;
            let f = builtin_scalar(f)?;
            probe_operator_continuity(|y| Ok(vec![project_invariant(&frames, &f, y)?]), sched)?
        }
        other => return Err(format!("unknown target kind {other:?}").into()),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
