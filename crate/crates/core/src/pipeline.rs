//! End-to-end experiment: sine ID data and the tail-frequency baseline, PCA
//! latent space, GHO/SBO/HBO generation, DTW Wasserstein report and detector
//! trials.
//!
//! Every stage is a function of the [`PipelineConfig`] alone; parallel stages
//! draw from per-item streams, so outputs do not depend on the thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{train_detector, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{pca_decode, pca_encode, pca_fit, PcaModel};
use crate::io::{self, Counts, FileRef, Manifest, Method, SamplerParameters};
use crate::metrics::{f1_hat, normalized_distance_report, DistanceReport, GroundMetric};
use crate::points::PointSet;
use crate::rng::{domain, RandomStream};
use crate::sampling::{gho_generate, BrownianSampler, GhoConfig, RhoForm, SboConfig};
use crate::synth::{gen_sine_id, gen_sine_o3d, SineConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HboConfig {
    pub d_minus: f64,
    pub d_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub sine: SineConfig,
    pub latent_dim: usize,
    /// OOD samples generated per method.
    pub samples: usize,
    pub gho: GhoConfig,
    pub hbo: HboConfig,
    pub sbo: SboConfig,
    pub eval_metric: GroundMetric,
    /// Cap on the per-dataset subsample used for the distance report.
    pub eval_max_samples: Option<usize>,
    pub trials: usize,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: io::SCHEMA_VERSION,
            seed: 0,
            sine: SineConfig::default(),
            latent_dim: 20,
            samples: 2000,
            gho: GhoConfig { mu: 9.0, sigma: 0.8 },
            hbo: HboConfig {
                d_minus: 2.0,
                d_plus: 2.0,
            },
            sbo: SboConfig::new(2.0, 2.0, 1.0),
            eval_metric: GroundMetric::Dtw,
            eval_max_samples: Some(200),
            trials: 10,
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        io::parse_versioned(bytes)
    }
}

/// Every dataset the experiment produces, in input space unless noted.
#[derive(Clone, Debug)]
pub struct Datasets {
    pub id: PointSet,
    pub o3d: PointSet,
    pub pca: PcaModel,
    pub latent_id: PointSet,
    /// `(method, latent samples, decoded samples)` for GHO, SBO, HBO.
    pub generated: Vec<(Method, PointSet, PointSet)>,
}

impl Datasets {
    pub fn generated(&self, method: Method) -> &PointSet {
        &self
            .generated
            .iter()
            .find(|(m, _, _)| *m == method)
            .expect("every method is generated")
            .2
    }

    /// `(name, set)` pairs in report order: ID, O3D, GHO, SBO, HBO.
    pub fn named(&self) -> Vec<(String, PointSet)> {
        let mut out = vec![("ID".to_string(), self.id.clone()), ("O3D".to_string(), self.o3d.clone())];
        for (m, _, decoded) in &self.generated {
            out.push((m.name().to_uppercase(), decoded.clone()));
        }
        out
    }
}

const METHODS: [Method; 3] = [Method::Gho, Method::Sbo, Method::Hbo];

fn method_stream(seed: u64, method: Method) -> RandomStream {
    let slot = METHODS.iter().position(|m| *m == method).unwrap_or(0) as u64;
    RandomStream::new(seed, domain::SAMPLER + (slot << 32))
}

/// Sampler parameters as recorded in manifests.
pub fn method_parameters(config: &PipelineConfig, method: Method) -> SamplerParameters {
    match method {
        Method::Gho => SamplerParameters {
            mu: Some(config.gho.mu),
            sigma: Some(config.gho.sigma),
            ..Default::default()
        },
        Method::Sbo => sbo_parameters(&config.sbo),
        Method::Hbo => sbo_parameters(&SboConfig::hard(config.hbo.d_minus, config.hbo.d_plus)),
    }
}

pub fn sbo_parameters(c: &SboConfig) -> SamplerParameters {
    SamplerParameters {
        d_minus: Some(c.d_minus),
        d_plus: Some(c.d_plus),
        softness: Some(c.softness),
        kappa: Some(c.kappa),
        rho_form: Some(c.rho_form),
        max_steps: Some(c.max_steps),
        ..Default::default()
    }
}

/// Synthesizes the sine datasets, fits the latent space and runs the three
/// generators in it.
pub fn generate_datasets(config: &PipelineConfig) -> Result<Datasets> {
    let id = gen_sine_id(&config.sine, &mut RandomStream::new(config.seed, domain::SYNTH))?.series;
    let o3d = gen_sine_o3d(&config.sine, &mut RandomStream::new(config.seed, domain::SYNTH + 1))?.series;
    let pca = pca_fit(&id, config.latent_dim)?;
    let latent_id = pca_encode(&pca, &id)?;

    let sampler = BrownianSampler::new(&latent_id)?;
    let mut generated = Vec::with_capacity(3);
    for method in METHODS {
        let rng = method_stream(config.seed, method);
        let latent = match method {
            Method::Gho => gho_generate(&latent_id, &config.gho, config.samples, &rng)?,
            Method::Sbo => sampler.generate(&config.sbo, config.samples, &rng)?.points,
            Method::Hbo => {
                let hard = SboConfig {
                    kappa: config.sbo.kappa,
                    max_steps: config.sbo.max_steps,
                    ..SboConfig::hard(config.hbo.d_minus, config.hbo.d_plus)
                };
                sampler.generate(&hard, config.samples, &rng)?.points
            }
        };
        let decoded = pca_decode(&pca, &latent)?;
        generated.push((method, latent, decoded));
    }
    Ok(Datasets {
        id,
        o3d,
        pca,
        latent_id,
        generated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub f1: f64,
    pub auroc: f64,
    pub f1_baseline: Option<f64>,
    pub f1_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainEvalSummary {
    pub trials: Vec<TrialResult>,
    pub mean_f1: f64,
    pub mean_auroc: f64,
    pub mean_f1_baseline: Option<f64>,
    pub mean_f1_hat: Option<f64>,
}

fn labelled(id: &PointSet, ood: &PointSet) -> Result<(PointSet, Vec<u8>)> {
    let data = id.concat(ood)?;
    let mut labels = vec![0u8; id.len()];
    labels.resize(id.len() + ood.len(), 1);
    Ok((data, labels))
}

/// Seed of trial `t`, shared by the candidate and the baseline detector.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

/// Trains one detector per trial on `id` (label 0) plus `ood` (label 1) and,
/// if given, one on `id` plus `baseline` with the same seed, reporting the
/// relative F1 change against the baseline.
pub fn train_eval(
    id: &PointSet,
    ood: &PointSet,
    baseline: Option<&PointSet>,
    trials: usize,
    train: &TrainConfig,
) -> Result<TrainEvalSummary> {
    Ok(train_eval_many(id, &[ood], baseline, trials, train)?.remove(0))
}

/// [`train_eval`] for several OOD candidates; each trial trains the baseline
/// detector once and compares every candidate against it.
pub fn train_eval_many(
    id: &PointSet,
    oods: &[&PointSet],
    baseline: Option<&PointSet>,
    trials: usize,
    train: &TrainConfig,
) -> Result<Vec<TrainEvalSummary>> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if oods.is_empty() {
        return Err(Error::invalid("at least one OOD dataset is required"));
    }
    train.validate()?;
    let sets: Vec<(PointSet, Vec<u8>)> = oods.iter().map(|o| labelled(id, o)).collect::<Result<_>>()?;
    let base = baseline.map(|b| labelled(id, b)).transpose()?;

    // rows[trial][candidate]
    let rows: Vec<Result<Vec<TrialResult>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let config = TrainConfig {
                seed: trial_seed(train.seed, trial),
                ..train.clone()
            };
            let f1_baseline = match &base {
                Some((bdata, blabels)) => Some(train_detector(bdata, blabels, &config)?.1.f1_test),
                None => None,
            };
            sets.iter()
                .map(|(data, labels)| {
                    let (_, report) = train_detector(data, labels, &config)?;
                    Ok(TrialResult {
                        trial,
                        seed: config.seed,
                        f1: report.f1_test,
                        auroc: report.auroc_test,
                        f1_baseline,
                        f1_hat: f1_baseline.map(|b| f1_hat(report.f1_test, b)).transpose()?,
                    })
                })
                .collect()
        })
        .collect();
    let rows: Vec<Vec<TrialResult>> = rows.into_iter().collect::<Result<_>>()?;

    let has_baseline = baseline.is_some();
    Ok((0..oods.len())
        .map(|c| {
            let trials: Vec<TrialResult> = rows.iter().map(|r| r[c].clone()).collect();
            let mean = |f: &dyn Fn(&TrialResult) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
            TrainEvalSummary {
                mean_f1: mean(&|t| t.f1),
                mean_auroc: mean(&|t| t.auroc),
                mean_f1_baseline: has_baseline.then(|| mean(&|t| t.f1_baseline.unwrap_or(0.0))),
                mean_f1_hat: has_baseline.then(|| mean(&|t| t.f1_hat.unwrap_or(0.0))),
                trials,
            }
        })
        .collect())
}

pub fn train_eval_to_csv(summary: &TrainEvalSummary) -> Vec<u8> {
    let opt = |v: Option<f64>| v.map(io::fmt_real).unwrap_or_default();
    let mut out = String::from("trial,seed,f1,auroc,f1_baseline,f1_hat\n");
    for t in &summary.trials {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.trial,
            t.seed,
            io::fmt_real(t.f1),
            io::fmt_real(t.auroc),
            opt(t.f1_baseline),
            opt(t.f1_hat)
        ));
    }
    out.push_str(&format!(
        "mean,,{},{},{},{}\n",
        io::fmt_real(summary.mean_f1),
        io::fmt_real(summary.mean_auroc),
        opt(summary.mean_f1_baseline),
        opt(summary.mean_f1_hat)
    ));
    out.into_bytes()
}

/// Detector results for the baseline and every generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub dataset: String,
    pub summary: TrainEvalSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub report: DistanceReport,
    pub scores: Vec<MethodScore>,
    /// Whether the SBO set is further from ID than the tail baseline is.
    pub sbo_further_than_o3d: bool,
}

pub fn evaluate(config: &PipelineConfig, data: &Datasets) -> Result<PipelineSummary> {
    let report = normalized_distance_report(
        &data.named(),
        config.eval_metric,
        config.seed,
        config.eval_max_samples,
    )?;
    let names = ["O3D", "GHO", "SBO", "HBO"];
    let candidates = [
        &data.o3d,
        data.generated(Method::Gho),
        data.generated(Method::Sbo),
        data.generated(Method::Hbo),
    ];
    let summaries = train_eval_many(&data.id, &candidates, Some(&data.o3d), config.trials, &config.train)?;
    let scores = names
        .iter()
        .zip(summaries)
        .map(|(name, summary)| MethodScore {
            dataset: name.to_string(),
            summary,
        })
        .collect();
    let sbo_further_than_o3d = report.raw("ID", "SBO") > report.raw("ID", "O3D");
    Ok(PipelineSummary {
        report,
        scores,
        sbo_further_than_o3d,
    })
}

/// Runs the whole experiment and writes every artefact into `out`.
pub fn reproduce(config: &PipelineConfig, out: &Path) -> Result<PipelineSummary> {
    let data = generate_datasets(config)?;
    io::write_json(&out.join("config.json"), config)?;
    io::write_points(&out.join("id.csv"), &data.id)?;
    io::write_labels(&out.join("id.labels.csv"), &vec![0; data.id.len()])?;
    io::write_points(&out.join("o3d.csv"), &data.o3d)?;
    io::write_labels(&out.join("o3d.labels.csv"), &vec![1; data.o3d.len()])?;
    io::write_pca(&out.join("pca.txt"), &data.pca)?;
    io::write_points(&out.join("latent_id.csv"), &data.latent_id)?;

    let source = FileRef {
        path: "latent_id.csv".into(),
        sha256: io::dataset_checksum(&data.latent_id),
    };
    for (method, latent, decoded) in &data.generated {
        let name = method.name();
        io::write_points(&out.join(format!("latent_{name}.csv")), latent)?;
        io::write_points(&out.join(format!("{name}.csv")), decoded)?;
        let manifest = Manifest {
            schema_version: io::SCHEMA_VERSION,
            tool_version: io::TOOL_VERSION.into(),
            seed: config.seed,
            method: *method,
            parameters: method_parameters(config, *method),
            counts: Counts {
                id_count: data.latent_id.len(),
                output_count: latent.len(),
                dim: latent.dim(),
            },
            source: source.clone(),
            output: FileRef {
                path: format!("latent_{name}.csv"),
                sha256: io::dataset_checksum(latent),
            },
        };
        io::write_manifest(&out.join(format!("latent_{name}.manifest.json")), &manifest)?;
    }

    let summary = evaluate(config, &data)?;
    io::write_report(&out.join("distances"), &summary.report)?;
    for score in &summary.scores {
        io::write_file(
            &out.join(format!("train_eval_{}.csv", score.dataset.to_lowercase())),
            &train_eval_to_csv(&score.summary),
        )?;
    }
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// One softness/form configuration of the calibration sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub softness: f64,
    pub rho_form: RhoForm,
    pub fraction_inside: f64,
    pub mean_distance: f64,
    pub histogram: Vec<usize>,
}

/// Runs SBO for every `(softness, form)` pair and histograms the achieved
/// minimum distances over `[0, hist_max)` (values beyond land in the last
/// bin).
pub fn calibrate_rho(
    id: &PointSet,
    base: &SboConfig,
    softness_grid: &[f64],
    forms: &[RhoForm],
    count: usize,
    seed: u64,
    bins: usize,
    hist_max: f64,
) -> Result<Vec<CalibrationRun>> {
    if bins == 0 || !(hist_max > 0.0) {
        return Err(Error::invalid("histogram needs at least one bin and a positive range"));
    }
    let sampler = BrownianSampler::new(id)?;
    let rng = RandomStream::new(seed, domain::SAMPLER);
    let mut runs = Vec::new();
    for &softness in softness_grid {
        for &rho_form in forms {
            let config = SboConfig {
                softness,
                rho_form,
                ..*base
            };
            let out = sampler.generate(&config, count, &rng)?;
            let mut histogram = vec![0usize; bins];
            for d in &out.distances {
                let b = ((d / hist_max) * bins as f64) as usize;
                histogram[b.min(bins - 1)] += 1;
            }
            let inside = out.distances.iter().filter(|d| **d < config.d_minus).count();
            runs.push(CalibrationRun {
                softness,
                rho_form,
                fraction_inside: inside as f64 / count as f64,
                mean_distance: out.distances.iter().sum::<f64>() / count as f64,
                histogram,
            });
        }
    }
    Ok(runs)
}

pub fn histogram_to_csv(run: &CalibrationRun, hist_max: f64) -> Vec<u8> {
    let bins = run.histogram.len();
    let width = hist_max / bins as f64;
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in run.histogram.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{c}\n",
            io::fmt_real(i as f64 * width),
            io::fmt_real((i + 1) as f64 * width)
        ));
    }
    out.into_bytes()
}
