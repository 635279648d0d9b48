//! Acceptance criteria, run in order by a plain `main` so the timed criteria
//! do not compete with each other for cores and every PASS/FAIL line reaches
//! the output. The process exits nonzero if any criterion fails.

mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use oodgen::detector::{gradient_check, DetectorModel, TrainConfig};
use oodgen::features::pca_fit;
use oodgen::index::NeighborIndex;
use oodgen::metrics::{auroc, dtw_distance, wasserstein_assignment, CostMatrix};
use oodgen::pipeline::{self, PipelineConfig};
use oodgen::rng::domain;
use oodgen::sampling::{hbo_generate, rho, BrownianSampler, RhoForm, SboConfig};
use oodgen::synth::{gen_gaussian, gen_moons, SineConfig};
use oodgen::{PointSet, RandomStream};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn moons(seed: u64) -> PointSet {
    gen_moons(1000, 0.05, &mut RandomStream::new(seed, domain::SYNTH)).unwrap()
}

fn hard_boundary() -> Outcome {
    let mut worst = Duration::ZERO;
    let mut violations = 0usize;
    for seed in 0..5 {
        let id = moons(seed);
        let start = Instant::now();
        let out = hbo_generate(&id, 0.25, 0.25, 2000, &RandomStream::new(seed, domain::SAMPLER)).unwrap();
        worst = worst.max(start.elapsed());
        violations += out.rows().filter(|y| support::scan_min_distance(&id, y) < 0.25).count();
    }
    outcome(
        violations == 0 && worst < Duration::from_secs(10),
        format!("{violations} violations over 5 seeds; slowest seed {worst:.2?}"),
    )
}

fn soft_boundary() -> Outcome {
    let grid = [0.0, 0.5, 1.0];
    let mut sums = [0.0; 3];
    let mut zero_at_hard = true;
    let mut positive_at_one = true;
    for seed in 0..20 {
        let id = moons(seed);
        let sampler = BrownianSampler::new(&id).unwrap();
        for (slot, &softness) in grid.iter().enumerate() {
            let config = SboConfig::new(0.25, 0.25, softness);
            let out = sampler.generate(&config, 2000, &RandomStream::new(seed, domain::SAMPLER)).unwrap();
            let inside = out.distances.iter().filter(|d| **d < 0.25).count() as f64 / 2000.0;
            sums[slot] += inside;
            if softness == 0.0 && inside != 0.0 {
                zero_at_hard = false;
            }
            if softness == 1.0 && inside <= 0.0 {
                positive_at_one = false;
            }
        }
    }
    let means = sums.map(|s| s / 20.0);
    let monotone = means.windows(2).all(|w| w[0] <= w[1]);
    outcome(
        zero_at_hard && positive_at_one && monotone,
        format!("mean fraction below d- at softness 0/0.5/1: {:.4}/{:.4}/{:.4}", means[0], means[1], means[2]),
    )
}

fn detector_table(summary: &pipeline::PipelineSummary, elapsed: Duration) -> Outcome {
    let mut pass = elapsed < Duration::from_secs(300);
    let mut parts = Vec::new();
    for score in &summary.scores {
        let hat = score.summary.mean_f1_hat.unwrap();
        let ok = if score.dataset == "O3D" {
            score.summary.trials.iter().all(|t| t.f1_hat == Some(0.0))
        } else {
            (-0.10..=0.05).contains(&hat)
        };
        pass &= ok;
        parts.push(format!("{} {:+.4}", score.dataset, hat));
    }
    outcome(pass, format!("mean F1-hat {}; {elapsed:.1?}", parts.join(", ")))
}

fn distance_table(summary: &pipeline::PipelineSummary) -> Outcome {
    let r = &summary.report;
    let n = r.dataset_ids.len();
    let mut pass = n == 5 && !r.degenerate;
    for i in 0..n {
        pass &= r.normalized[i][i] == 0.0 && r.matrix[i][i] == 0.0;
        for j in 0..n {
            pass &= (r.normalized[i][j] - r.normalized[j][i]).abs() <= 1e-12;
        }
    }
    pass &= r.max_normalized_off_diagonal() == 1.0;
    let idx = |name: &str| r.dataset_ids.iter().position(|d| d == name).unwrap();
    outcome(
        pass,
        format!(
            "ids {:?}; subsample {}; info: normalized W(ID,SBO) = {:.3}, W(ID,O3D) = {:.3}, SBO further = {}",
            r.dataset_ids,
            r.sample_size,
            r.normalized[idx("ID")][idx("SBO")],
            r.normalized[idx("ID")][idx("O3D")],
            summary.sbo_further_than_o3d
        ),
    )
}

fn oracle_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = RandomStream::new(2024, domain::CHECK);

    let set = gen_gaussian(2000, 4, &mut rng).unwrap();
    let index = NeighborIndex::build(&set).unwrap();
    let queries = gen_gaussian(1000, 4, &mut rng).unwrap();
    let tree_ok = queries.rows().all(|q| {
        let (a, b) = (index.min_distance(q).unwrap(), support::scan_min_distance(&set, q));
        (a - b).abs() <= 1e-12 * b.max(f64::MIN_POSITIVE)
    });

    let mut dtw_ok = true;
    for _ in 0..200 {
        let n = 1 + rng.index(6);
        let m = 1 + rng.index(6);
        let a: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.standard_normal()).collect();
        dtw_ok &= dtw_distance(&a, &b).unwrap() == support::dtw_enumerate(&a, &b);
    }

    let mut assign_ok = true;
    for trial in 0..100 {
        let n = 1 + trial % 7;
        let costs: Vec<f64> = (0..n * n).map(|_| rng.uniform() * 10.0).collect();
        let got = wasserstein_assignment(&CostMatrix::new(n, n, costs.clone()).unwrap()).unwrap();
        assign_ok &= got == support::assignment_brute_force(n, &costs);
    }

    let mut pca_ok = true;
    for trial in 0..40 {
        let d = 1 + trial % 4;
        let raw = gen_gaussian(50 + trial, d, &mut rng).unwrap();
        let scales: Vec<f64> = (0..d).map(|_| 0.5 + 3.0 * rng.uniform()).collect();
        let data = PointSet::from_flat(
            d,
            raw.as_flat().iter().enumerate().map(|(i, x)| x * scales[i % d]).collect(),
        )
        .unwrap();
        let model = pca_fit(&data, d).unwrap();
        let (vals, vecs) = support::jacobi_eigen(d, &support::covariance(&data));
        for i in 0..d {
            pca_ok &= (model.explained_variance()[i] - vals[i]).abs() <= 1e-8;
            let expected = support::canonical_sign(&vecs[i]);
            pca_ok &= model.component(i).iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-8);
        }
    }

    let elapsed = start.elapsed();
    outcome(
        tree_ok && dtw_ok && assign_ok && pca_ok && elapsed < Duration::from_secs(60),
        format!("tree {tree_ok}, dtw {dtw_ok}, assignment {assign_ok}, pca {pca_ok}; {elapsed:.2?}"),
    )
}

fn gradients() -> Outcome {
    let mut rng = RandomStream::new(77, domain::CHECK);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let input = [2, 5, 17, 63, 126][trial % 5];
        let sizes = [input, 4 + rng.index(28), 2 + rng.index(14), 1];
        let model = DetectorModel::new(&sizes, &mut rng).unwrap();
        let batch = gen_gaussian(16, input, &mut rng).unwrap();
        let labels: Vec<u8> = (0..16).map(|_| (rng.uniform() < 0.5) as u8).collect();
        worst = worst.max(gradient_check(&model, &batch, &labels, &mut rng).unwrap());
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.3e} over 20 models"))
}

fn rho_values() -> Outcome {
    let printed = rho(2.0, &SboConfig::new(2.0, 2.0, 1.0)).unwrap();
    let reference = support::rho_as_printed(2.0, 2.0, 1.0, 7.0);
    let text = rho(
        0.0,
        &SboConfig {
            rho_form: RhoForm::TextConsistent,
            ..SboConfig::new(2.0, 2.0, 1.0)
        },
    )
    .unwrap();
    outcome(
        (printed - reference).abs() <= 1e-9 && text > 0.999,
        format!("as-printed rho(2) = {printed:.10}, scalar {reference:.10}; text-consistent rho(0) = {text:.6}"),
    )
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = PipelineConfig {
        seed: 5,
        sine: SineConfig {
            n: 200,
            ..SineConfig::default()
        },
        latent_dim: 8,
        samples: 200,
        eval_max_samples: Some(30),
        trials: 3,
        train: TrainConfig {
            epochs: 5,
            hidden: vec![16],
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    };
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, oodgen::io::to_json_bytes(&config).unwrap()).unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_oodgen"))
            .args(["reproduce", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        read_tree(&out)
    };
    let a = run("first", "1");
    let b = run("second", "1");
    let c = run("wide", "8");
    outcome(
        !a.is_empty() && a == b && a == c,
        format!("{} files identical across two runs and 1 vs 8 workers", a.len()),
    )
}

fn auroc_sanity() -> Outcome {
    let scores: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let labels: Vec<u8> = (0..100).map(|i| (i >= 50) as u8).collect();
    let perfect = auroc(&scores, &labels).unwrap();

    let mut rng = RandomStream::new(9, domain::CHECK);
    let scores: Vec<f64> = (0..1000).map(|_| rng.uniform()).collect();
    let labels: Vec<u8> = (0..1000).map(|_| (rng.uniform() < 0.5) as u8).collect();
    let shuffled = auroc(&scores, &labels).unwrap();
    outcome(
        perfect == 1.0 && (shuffled - 0.5).abs() <= 0.05,
        format!("separated {perfect}; shuffled labels {shuffled:.4}"),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "hard boundary keeps every sample outside d-", hard_boundary()));
    results.push((2, "soft boundary lets samples creep in as softness grows", soft_boundary()));

    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let summary = pipeline::reproduce(&PipelineConfig::default(), dir.path()).unwrap();
    let elapsed = start.elapsed();
    results.push((3, "relative F1 of generated OOD sets vs the tail baseline", detector_table(&summary, elapsed)));
    results.push((4, "normalized DTW Wasserstein report structure", distance_table(&summary)));

    results.push((5, "oracle equivalence", oracle_suite()));
    results.push((6, "gradient check", gradients()));
    results.push((7, "boundary likelihood values", rho_values()));
    results.push((8, "reproduce is byte-identical across runs and worker counts", determinism()));
    results.push((9, "AUROC sanity", auroc_sanity()));
    results.push((
        10,
        "out of scope",
        outcome(
            true,
            "image-domain AUROC tables and the cyclist intersection figures are not reproduced; \
             they need external data and convolutional/VAE training",
        ),
    ));

    for (id, name, o) in &results {
        println!("criterion {id:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
