//! Synthetic datasets: Gaussian clouds, two moons, and sine-wave series with
//! a tail-frequency OOD baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::rng::RandomStream;

/// How the second argument of `N(0, x)` is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ParamConvention {
    #[default]
    Variance,
    Stddev,
}

impl ParamConvention {
    pub fn stddev(self, param: f64) -> f64 {
        match self {
            ParamConvention::Variance => param.sqrt(),
            ParamConvention::Stddev => param,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SineConfig {
    pub n: usize,
    pub t_len: usize,
    pub f_param: f64,
    pub noise_param: f64,
    pub param_convention: ParamConvention,
    pub tail_k: f64,
}

impl Default for SineConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            t_len: 126,
            f_param: 35.0,
            noise_param: 1e-1,
            param_convention: ParamConvention::Variance,
            tail_k: 2.0,
        }
    }
}

impl SineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("series count must be at least 1"));
        }
        if self.t_len < 2 {
            return Err(Error::invalid("series length must be at least 2"));
        }
        if !(self.f_param.is_finite() && self.f_param > 0.0) {
            return Err(Error::invalid("frequency parameter must be > 0"));
        }
        if !(self.noise_param.is_finite() && self.noise_param >= 0.0) {
            return Err(Error::invalid("noise parameter must be >= 0"));
        }
        if !(self.tail_k.is_finite() && self.tail_k > 0.0) {
            return Err(Error::invalid("tail threshold must be > 0"));
        }
        Ok(())
    }

    pub fn frequency_std(&self) -> f64 {
        self.param_convention.stddev(self.f_param)
    }

    pub fn noise_std(&self) -> f64 {
        self.param_convention.stddev(self.noise_param)
    }
}

/// Fixed-length series with their generating frequencies and 0/1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesSet {
    pub series: PointSet,
    pub frequencies: Vec<f64>,
    pub labels: Vec<u8>,
}

impl TimeSeriesSet {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn t_len(&self) -> usize {
        self.series.dim()
    }
}

/// `n` independent standard-normal vectors.
pub fn gen_gaussian(n: usize, dim: usize, rng: &mut RandomStream) -> Result<PointSet> {
    if n == 0 || dim == 0 {
        return Err(Error::invalid("gaussian cloud needs n >= 1 and dim >= 1"));
    }
    let data = (0..n * dim).map(|_| rng.standard_normal()).collect();
    PointSet::from_flat(dim, data)
}

/// Two interleaving half circles. The first `ceil(n/2)` points lie on the
/// upper unit arc, the rest on the lower arc shifted by `(1, -0.5)`. With
/// `noise == 0` no random numbers are drawn.
pub fn gen_moons(n: usize, noise: f64, rng: &mut RandomStream) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::invalid("two moons need at least 2 points"));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::invalid(format!("noise must be >= 0, got {noise}")));
    }
    let outer = n.div_ceil(2);
    let inner = n - outer;
    let mut data = Vec::with_capacity(2 * n);
    for theta in linspace_pi(outer) {
        data.extend([theta.cos(), theta.sin()]);
    }
    for theta in linspace_pi(inner) {
        data.extend([1.0 - theta.cos(), 0.5 - theta.sin()]);
    }
    if noise > 0.0 {
        for v in data.iter_mut() {
            *v += noise * rng.standard_normal();
        }
    }
    PointSet::from_flat(2, data)
}

fn linspace_pi(count: usize) -> impl Iterator<Item = f64> {
    let step = if count > 1 {
        std::f64::consts::PI / (count - 1) as f64
    } else {
        0.0
    };
    (0..count).map(move |i| i as f64 * step)
}

/// In-distribution sine series `sin(2 pi f t_k) + eps_k`, `t_k = k / (T - 1)`.
pub fn gen_sine_id(config: &SineConfig, rng: &mut RandomStream) -> Result<TimeSeriesSet> {
    config.validate()?;
    let f_std = config.frequency_std();
    gen_sine(config, rng, 0, |rng| f_std * rng.standard_normal())
}

/// Sine series whose frequencies come only from the two tails
/// `|f| > tail_k * std(f)` of the generating law; all labelled OOD.
pub fn gen_sine_o3d(config: &SineConfig, rng: &mut RandomStream) -> Result<TimeSeriesSet> {
    config.validate()?;
    let f_std = config.frequency_std();
    let bound = config.tail_k * f_std;
    gen_sine(config, rng, 1, |rng| draw_tail_frequency(rng, f_std, bound).0)
}

/// Rejection-samples `N(0, std^2)` until `|f| > bound`; also returns the
/// number of raw draws.
pub(crate) fn draw_tail_frequency(rng: &mut RandomStream, std: f64, bound: f64) -> (f64, usize) {
    let mut draws = 0;
    loop {
        draws += 1;
        let f = std * rng.standard_normal();
        if f.abs() > bound {
            return (f, draws);
        }
    }
}

fn gen_sine(
    config: &SineConfig,
    rng: &mut RandomStream,
    label: u8,
    mut frequency: impl FnMut(&mut RandomStream) -> f64,
) -> Result<TimeSeriesSet> {
    let t_len = config.t_len;
    let noise_std = config.noise_std();
    let mut data = Vec::with_capacity(config.n * t_len);
    let mut frequencies = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let f = frequency(rng);
        frequencies.push(f);
        for k in 0..t_len {
            let t = k as f64 / (t_len - 1) as f64;
            data.push(sine_value(f, t) + noise_std * rng.standard_normal());
        }
    }
    Ok(TimeSeriesSet {
        series: PointSet::from_flat(t_len, data)?,
        frequencies,
        labels: vec![label; config.n],
    })
}

fn sine_value(f: f64, t: f64) -> f64 {
    (std::f64::consts::TAU * f * t).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> RandomStream {
        RandomStream::new(seed, crate::rng::domain::SYNTH)
    }

    #[test]
    fn gaussian_shapes_and_errors() {
        let one = gen_gaussian(1, 2, &mut rng(0)).unwrap();
        assert_eq!((one.len(), one.dim()), (1, 2));
        assert!(gen_gaussian(0, 2, &mut rng(0)).is_err());
        assert!(gen_gaussian(3, 0, &mut rng(0)).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let n = 100_000;
        let set = gen_gaussian(n, 2, &mut rng(1)).unwrap();
        for d in 0..2 {
            let mean = set.rows().map(|r| r[d]).sum::<f64>() / n as f64;
            let var = set.rows().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((0.97..=1.03).contains(&var), "var {var}");
        }
    }

    #[test]
    fn two_point_moons() {
        let m = gen_moons(2, 0.0, &mut rng(0)).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 0.5]);
        assert!(gen_moons(1, 0.0, &mut rng(0)).is_err());
    }

    #[test]
    fn noiseless_moons_lie_on_arcs() {
        let mut r = rng(3);
        let m = gen_moons(1000, 0.0, &mut r).unwrap();
        assert_eq!(r.position(), 0);
        for (i, p) in m.rows().enumerate() {
            let center = if i < 500 { [0.0, 0.0] } else { [1.0, 0.5] };
            let radius = ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            assert!((radius - 1.0).abs() < 1e-12);
            assert!(radius <= 1.12);
            if i < 500 {
                assert!(p[1] >= 0.0);
            } else {
                assert!(p[1] <= 0.5);
            }
        }
        let mut min_gap = f64::INFINITY;
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                min_gap = min_gap.min(crate::points::squared_distance(m.row(i), m.row(j)));
            }
        }
        assert!(min_gap > 0.0);
        assert_eq!(m, gen_moons(1000, 0.0, &mut rng(99)).unwrap());
    }

    #[test]
    fn default_sine_shape() {
        let set = gen_sine_id(&SineConfig::default(), &mut rng(7)).unwrap();
        assert_eq!(set.len(), 2000);
        assert_eq!(set.t_len(), 126);
        assert!(set.labels.iter().all(|l| *l == 0));
        let bound = 1.0 + 6.0 * SineConfig::default().noise_std();
        assert!(set.series.as_flat().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn degenerate_frequency_gives_flat_series() {
        let c = SineConfig {
            n: 3,
            f_param: 1e-300,
            noise_param: 0.0,
            ..SineConfig::default()
        };
        let set = gen_sine_id(&c, &mut rng(1)).unwrap();
        assert!(set.series.as_flat().iter().all(|v| v.abs() < 1e-100));
    }

    #[test]
    fn noiseless_series_match_formula() {
        let c = SineConfig {
            n: 4,
            noise_param: 0.0,
            ..SineConfig::default()
        };
        let set = gen_sine_id(&c, &mut rng(5)).unwrap();
        for (row, f) in set.series.rows().zip(&set.frequencies) {
            for (k, v) in row.iter().enumerate() {
                let t = k as f64 / 125.0;
                let expect = (2.0 * std::f64::consts::PI * f * t).sin();
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conventions() {
        let var = SineConfig::default();
        assert!((var.frequency_std() - 35f64.sqrt()).abs() < 1e-15);
        let sd = SineConfig {
            param_convention: ParamConvention::Stddev,
            ..var
        };
        assert_eq!(sd.frequency_std(), 35.0);
        assert_eq!(sd.noise_std(), 0.1);
    }

    #[test]
    fn o3d_samples_only_tails() {
        let c = SineConfig {
            n: 10_000,
            t_len: 2,
            ..SineConfig::default()
        };
        let set = gen_sine_o3d(&c, &mut rng(2)).unwrap();
        let bound = 2.0 * c.frequency_std();
        assert!(set.frequencies.iter().all(|f| f.abs() > bound));
        assert!(set.labels.iter().all(|l| *l == 1));
    }

    #[test]
    fn tail_acceptance_rate() {
        // two-sided tail mass 2 * Phi(-2) = 0.0455003
        let mut r = rng(4);
        let raw: usize = (0..10_000)
            .map(|_| draw_tail_frequency(&mut r, 1.0, 2.0).1)
            .sum();
        let rate = 10_000.0 / raw as f64;
        assert!((rate - 0.045_500_3).abs() < 0.003, "{rate}");
    }

    #[test]
    fn same_seed_same_bits() {
        let c = SineConfig {
            n: 50,
            ..SineConfig::default()
        };
        assert_eq!(gen_sine_id(&c, &mut rng(8)).unwrap(), gen_sine_id(&c, &mut rng(8)).unwrap());
        assert_eq!(gen_sine_o3d(&c, &mut rng(8)).unwrap(), gen_sine_o3d(&c, &mut rng(8)).unwrap());
    }

    #[test]
    fn invalid_config() {
        let bad = SineConfig {
            t_len: 1,
            ..SineConfig::default()
        };
        assert!(gen_sine_id(&bad, &mut rng(0)).is_err());
        let bad = SineConfig {
            tail_k: 0.0,
            ..SineConfig::default()
        };
        assert!(gen_sine_o3d(&bad, &mut rng(0)).is_err());
    }
}
