//! Command-line front end. Every command is a pure function of its flags,
//! input files and seed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detector::TrainConfig;
use crate::error::{Error, Result};
use crate::features::{pca_decode, pca_encode, pca_fit};
use crate::io::{self, Counts, DatasetManifest, FileRef, Manifest, Method, SamplerParameters};
use crate::metrics::{normalized_distance_report, GroundMetric};
use crate::pipeline::{self, PipelineConfig};
use crate::points::PointSet;
use crate::rng::{domain, RandomStream};
use crate::sampling::{
    gho_generate, BrownianSampler, GhoConfig, RhoForm, SboConfig, DEFAULT_KAPPA, DEFAULT_MAX_STEPS,
};
use crate::synth::{gen_gaussian, gen_moons, gen_sine_id, gen_sine_o3d, ParamConvention, SineConfig};

#[derive(Debug, Parser)]
#[command(name = "oodgen", version, about = "Generate and evaluate out-of-distribution samples")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Sample OOD points around an ID set.
    Sample(SampleArgs),
    /// Fit or apply the PCA encoder.
    Encode(EncodeArgs),
    /// Map latent points back to input space.
    Decode(DecodeArgs),
    /// Pairwise Wasserstein distances between datasets.
    EvalDist(EvalDistArgs),
    /// Train detectors on ID against OOD data over several seeds.
    TrainEval(TrainEvalArgs),
    /// Sweep SBO softness and record achieved boundary distances.
    CalibrateRho(CalibrateArgs),
    /// Run the full time-series experiment.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Gaussian,
    Moons,
    SineId,
    SineO3d,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: DatasetKind,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Dimension (gaussian only).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Noise standard deviation (moons only).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, env = "OODGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Series length (sine kinds).
    #[arg(long)]
    pub t_len: Option<usize>,
    /// Frequency spread parameter (sine kinds).
    #[arg(long)]
    pub f_param: Option<f64>,
    /// Additive noise parameter (sine kinds).
    #[arg(long)]
    pub noise_param: Option<f64>,
    /// Whether the sine parameters are variances or standard deviations.
    #[arg(long, value_enum)]
    pub param_convention: Option<ParamConvention>,
    /// Tail threshold in standard deviations (sine-o3d).
    #[arg(long)]
    pub tail_k: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub id: PathBuf,
    /// Minimum distance to the ID set (d⁻).
    #[arg(long)]
    pub d_min: Option<f64>,
    /// Offset step scale (d⁺).
    #[arg(long)]
    pub d_off: Option<f64>,
    #[arg(long)]
    pub softness: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, value_enum)]
    pub rho_form: Option<RhoForm>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Mean radius (gho).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Radius spread (gho).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, env = "OODGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Fit a new model on the input and write it to --model.
    #[arg(long, requires = "k")]
    pub fit: bool,
    /// Latent dimension when fitting.
    #[arg(long, requires = "fit")]
    pub k: Option<usize>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDistArgs {
    /// Comma-separated dataset CSVs; names are the file stems.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub datasets: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = GroundMetric::Dtw)]
    pub metric: GroundMetric,
    #[arg(long, default_value_t = 0)]
    pub subsample_seed: u64,
    /// Upper bound on the common subsample size.
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainEvalArgs {
    #[arg(long)]
    pub id: PathBuf,
    #[arg(long)]
    pub ood: PathBuf,
    #[arg(long)]
    pub baseline_ood: Option<PathBuf>,
    /// Number of trials; trial t uses seed + t.
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    #[arg(long, env = "OODGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [64, 32])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RhoFormChoice {
    AsPrinted,
    TextConsistent,
    Both,
}

impl RhoFormChoice {
    fn forms(self) -> Vec<RhoForm> {
        match self {
            RhoFormChoice::AsPrinted => vec![RhoForm::AsPrinted],
            RhoFormChoice::TextConsistent => vec![RhoForm::TextConsistent],
            RhoFormChoice::Both => vec![RhoForm::AsPrinted, RhoForm::TextConsistent],
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub id: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
    pub softness_grid: Vec<f64>,
    #[arg(long, value_enum, default_value_t = RhoFormChoice::Both)]
    pub rho_form: RhoFormChoice,
    #[arg(long)]
    pub d_min: f64,
    #[arg(long)]
    pub d_off: f64,
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    pub kappa: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: usize,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, env = "OODGEN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Upper edge of the histogram range (defaults to 3 d⁻).
    #[arg(long)]
    pub hist_max: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// JSON pipeline configuration; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    /// Output directory.
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::invalid("--workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => synth(a),
        Command::Sample(a) => sample(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::EvalDist(a) => eval_dist(a),
        Command::TrainEval(a) => train_eval(a),
        Command::CalibrateRho(a) => calibrate(a),
        Command::Reproduce(a) => reproduce(a),
    })
}

/// `dir/stem.csv` → `dir/stem.<suffix>`
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn reject(flag: &str, present: bool, kind: &str) -> Result<()> {
    if present {
        Err(Error::invalid(format!("--{flag} does not apply to {kind}")))
    } else {
        Ok(())
    }
}

fn require<T>(flag: &str, value: Option<T>, kind: &str) -> Result<T> {
    value.ok_or_else(|| Error::invalid(format!("{kind} requires --{flag}")))
}

#[derive(Serialize)]
struct SineParameters {
    t_len: usize,
    f_param: f64,
    noise_param: f64,
    param_convention: ParamConvention,
    tail_k: f64,
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind = a.kind.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let sine_flags = a.t_len.is_some()
        || a.f_param.is_some()
        || a.noise_param.is_some()
        || a.param_convention.is_some()
        || a.tail_k.is_some();
    let mut rng = RandomStream::new(a.seed, domain::SYNTH);
    let mut labels_file = None;
    let (set, parameters) = match a.kind {
        DatasetKind::Gaussian => {
            reject("noise", a.noise.is_some(), &kind)?;
            reject("<sine flags>", sine_flags, &kind)?;
            let dim = require("dim", a.dim, &kind)?;
            (gen_gaussian(a.n, dim, &mut rng)?, serde_json::json!({ "dim": dim }))
        }
        DatasetKind::Moons => {
            reject("dim", a.dim.is_some(), &kind)?;
            reject("<sine flags>", sine_flags, &kind)?;
            let noise = a.noise.unwrap_or(0.0);
            (gen_moons(a.n, noise, &mut rng)?, serde_json::json!({ "noise": noise }))
        }
        DatasetKind::SineId | DatasetKind::SineO3d => {
            reject("dim", a.dim.is_some(), &kind)?;
            reject("noise", a.noise.is_some(), &kind)?;
            let d = SineConfig::default();
            let config = SineConfig {
                n: a.n,
                t_len: a.t_len.unwrap_or(d.t_len),
                f_param: a.f_param.unwrap_or(d.f_param),
                noise_param: a.noise_param.unwrap_or(d.noise_param),
                param_convention: a.param_convention.unwrap_or(d.param_convention),
                tail_k: a.tail_k.unwrap_or(d.tail_k),
            };
            let ts = if a.kind == DatasetKind::SineId {
                gen_sine_id(&config, &mut rng)?
            } else {
                gen_sine_o3d(&config, &mut rng)?
            };
            let labels_path = sidecar(&a.out, "labels.csv");
            io::write_labels(&labels_path, &ts.labels)?;
            io::write_file(&sidecar(&a.out, "freq.csv"), &io::column_to_csv("frequency", &ts.frequencies))?;
            labels_file = Some(file_name(&labels_path));
            let parameters = SineParameters {
                t_len: config.t_len,
                f_param: config.f_param,
                noise_param: config.noise_param,
                param_convention: config.param_convention,
                tail_k: config.tail_k,
            };
            (ts.series, serde_json::to_value(parameters).map_err(|e| Error::Manifest(e.to_string()))?)
        }
    };
    io::write_points(&a.out, &set)?;
    let manifest = DatasetManifest {
        schema_version: io::SCHEMA_VERSION,
        tool_version: io::TOOL_VERSION.into(),
        kind,
        seed: a.seed,
        parameters,
        count: set.len(),
        dim: set.dim(),
        output: FileRef {
            path: file_name(&a.out),
            sha256: io::dataset_checksum(&set),
        },
        labels: labels_file,
    };
    io::write_json(&sidecar(&a.out, "manifest.json"), &manifest)
}

/// Path of `target` as recorded in a manifest stored next to `out`: the bare
/// file name when both share a directory, otherwise absolute.
fn manifest_path_for(target: &Path, out: &Path) -> Result<String> {
    let dir_of = |p: &Path| {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::canonicalize(parent).map_err(|e| Error::io(parent, e))
    };
    if dir_of(target)? == dir_of(out)? {
        Ok(file_name(target))
    } else {
        let abs = std::fs::canonicalize(target).map_err(|e| Error::io(target, e))?;
        Ok(abs.to_string_lossy().into_owned())
    }
}

fn sample(a: SampleArgs) -> Result<()> {
    let kind = a.method.name();
    let id = io::read_points(&a.id)?;
    let rng = RandomStream::new(a.seed, domain::SAMPLER);
    let (points, parameters) = match a.method {
        Method::Gho => {
            for (flag, present) in [
                ("d-min", a.d_min.is_some()),
                ("d-off", a.d_off.is_some()),
                ("softness", a.softness.is_some()),
                ("kappa", a.kappa.is_some()),
                ("rho-form", a.rho_form.is_some()),
                ("max-steps", a.max_steps.is_some()),
            ] {
                reject(flag, present, kind)?;
            }
            let config = GhoConfig {
                mu: require("mu", a.mu, kind)?,
                sigma: require("sigma", a.sigma, kind)?,
            };
            let params = SamplerParameters {
                mu: Some(config.mu),
                sigma: Some(config.sigma),
                ..Default::default()
            };
            (gho_generate(&id, &config, a.n, &rng)?, params)
        }
        Method::Sbo | Method::Hbo => {
            reject("mu", a.mu.is_some(), kind)?;
            reject("sigma", a.sigma.is_some(), kind)?;
            let softness = if a.method == Method::Hbo {
                match a.softness {
                    Some(s) if s != 0.0 => {
                        return Err(Error::invalid(format!("hbo is the hard boundary; --softness must be 0, got {s}")))
                    }
                    _ => 0.0,
                }
            } else {
                require("softness", a.softness, kind)?
            };
            let config = SboConfig {
                d_minus: require("d-min", a.d_min, kind)?,
                d_plus: require("d-off", a.d_off, kind)?,
                softness,
                kappa: a.kappa.unwrap_or(DEFAULT_KAPPA),
                rho_form: a.rho_form.unwrap_or_default(),
                max_steps: a.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
            };
            let points = BrownianSampler::new(&id)?.generate(&config, a.n, &rng)?.points;
            (points, pipeline::sbo_parameters(&config))
        }
    };
    io::write_points(&a.out, &points)?;
    let manifest = Manifest {
        schema_version: io::SCHEMA_VERSION,
        tool_version: io::TOOL_VERSION.into(),
        seed: a.seed,
        method: a.method,
        parameters,
        counts: Counts {
            id_count: id.len(),
            output_count: points.len(),
            dim: points.dim(),
        },
        source: FileRef {
            path: manifest_path_for(&a.id, &a.out)?,
            sha256: io::dataset_checksum(&id),
        },
        output: FileRef {
            path: file_name(&a.out),
            sha256: io::dataset_checksum(&points),
        },
    };
    io::write_manifest(&sidecar(&a.out, "manifest.json"), &manifest)
}

fn encode(a: EncodeArgs) -> Result<()> {
    let data = io::read_points(&a.input)?;
    let model = match (a.fit, a.k) {
        (true, Some(k)) => {
            let model = pca_fit(&data, k)?;
            io::write_pca(&a.model, &model)?;
            model
        }
        _ if !a.model.exists() => {
            return Err(Error::invalid(format!(
                "no fitted model at {}; fit one with --fit --k",
                a.model.display()
            )))
        }
        _ => io::read_pca(&a.model)?,
    };
    io::write_points(&a.out, &pca_encode(&model, &data)?)
}

fn decode(a: DecodeArgs) -> Result<()> {
    let model = io::read_pca(&a.model)?;
    let latent = io::read_points(&a.input)?;
    io::write_points(&a.out, &pca_decode(&model, &latent)?)
}

fn eval_dist(a: EvalDistArgs) -> Result<()> {
    if a.datasets.len() < 2 {
        return Err(Error::invalid("eval-dist needs at least two datasets"));
    }
    let named: Vec<(String, PointSet)> = a
        .datasets
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, io::read_points(p)?))
        })
        .collect::<Result<_>>()?;
    let report = normalized_distance_report(&named, a.metric, a.subsample_seed, a.max_samples)?;
    io::write_report(&a.out, &report)
}

fn train_eval(a: TrainEvalArgs) -> Result<()> {
    let id = io::read_points(&a.id)?;
    let ood = io::read_points(&a.ood)?;
    let baseline = a.baseline_ood.as_deref().map(io::read_points).transpose()?;
    let config = TrainConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let summary = pipeline::train_eval(&id, &ood, baseline.as_ref(), a.seeds, &config)?;
    io::write_file(&a.out.join("results.csv"), &pipeline::train_eval_to_csv(&summary))?;
    io::write_json(&a.out.join("summary.json"), &summary)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let id = io::read_points(&a.id)?;
    let hist_max = a.hist_max.unwrap_or(3.0 * a.d_min);
    let base = SboConfig {
        kappa: a.kappa,
        max_steps: a.max_steps,
        ..SboConfig::new(a.d_min, a.d_off, 0.0)
    };
    let runs = pipeline::calibrate_rho(
        &id,
        &base,
        &a.softness_grid,
        &a.rho_form.forms(),
        a.n,
        a.seed,
        a.bins,
        hist_max,
    )?;
    let mut summary = String::from("softness,rho_form,fraction_inside,mean_distance,histogram\n");
    for run in &runs {
        let name = format!("hist_softness{}_{}.csv", run.softness, run.rho_form.name());
        io::write_file(&a.out.join(&name), &pipeline::histogram_to_csv(run, hist_max))?;
        summary.push_str(&format!(
            "{},{},{},{},{name}\n",
            io::fmt_real(run.softness),
            run.rho_form.name(),
            io::fmt_real(run.fraction_inside),
            io::fmt_real(run.mean_distance),
        ));
    }
    io::write_file(&a.out.join("summary.csv"), summary.as_bytes())
}

fn reproduce(a: ReproduceArgs) -> Result<()> {
    let config = match &a.config {
        Some(path) => PipelineConfig::from_json(&io::read_file(path)?)?,
        None => PipelineConfig::default(),
    };
    if a.print_config {
        let bytes = io::to_json_bytes(&config)?;
        print!("{}", String::from_utf8_lossy(&bytes));
        return Ok(());
    }
    let out = a.out.expect("clap requires --out without --print-config");
    let summary = pipeline::reproduce(&config, &out)?;
    for score in &summary.scores {
        println!(
            "{:<4} mean F1 {:.4}  AUROC {:.4}  F1-hat {:+.4}",
            score.dataset,
            score.summary.mean_f1,
            score.summary.mean_auroc,
            score.summary.mean_f1_hat.unwrap_or(0.0)
        );
    }
    println!(
        "W(ID,SBO) > W(ID,O3D): {}",
        if summary.sbo_further_than_o3d { "yes" } else { "no" }
    );
    Ok(())
}
