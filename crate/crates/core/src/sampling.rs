//! OOD generators: Gaussian hyperspheric offset (GHO), soft Brownian offset
//! (SBO) and its hard special case (HBO).
//!
//! Every generator produces sample `i` from the stream
//! `(rng.seed(), rng.stream_id() + i)`, so the output is identical however
//! the samples are spread over worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_radius, gho_offset_into};
use crate::index::NeighborIndex;
use crate::points::PointSet;
use crate::rng::RandomStream;

pub const DEFAULT_KAPPA: f64 = 7.0;
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Which closed form of the early-stop likelihood to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RhoForm {
    /// `1 / (1 + exp((d + d_minus) / (softness * d_minus * kappa)))`
    #[default]
    AsPrinted,
    /// `1 / (1 + exp(kappa * (d - d_minus) / (softness * d_minus)))`, which is
    /// close to 1 at `d = 0` and exactly 1/2 at `d = d_minus`.
    TextConsistent,
}

impl RhoForm {
    pub fn name(self) -> &'static str {
        match self {
            RhoForm::AsPrinted => "as-printed",
            RhoForm::TextConsistent => "text-consistent",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SboConfig {
    pub d_minus: f64,
    pub d_plus: f64,
    pub softness: f64,
    pub kappa: f64,
    pub rho_form: RhoForm,
    pub max_steps: usize,
}

impl SboConfig {
    /// Defaults for `kappa`, `rho_form` and `max_steps`.
    pub fn new(d_minus: f64, d_plus: f64, softness: f64) -> Self {
        Self {
            d_minus,
            d_plus,
            softness,
            kappa: DEFAULT_KAPPA,
            rho_form: RhoForm::AsPrinted,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    /// The hard variant: no probabilistic early stop.
    pub fn hard(d_minus: f64, d_plus: f64) -> Self {
        Self::new(d_minus, d_plus, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_minus.is_finite() && self.d_minus > 0.0) {
            return Err(Error::invalid(format!("d_minus must be > 0, got {}", self.d_minus)));
        }
        if !(self.d_plus.is_finite() && self.d_plus > 0.0) {
            return Err(Error::invalid(format!("d_plus must be > 0, got {}", self.d_plus)));
        }
        if !(0.0..=1.0).contains(&self.softness) {
            return Err(Error::invalid(format!(
                "softness must lie in [0, 1], got {}",
                self.softness
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhoConfig {
    pub mu: f64,
    pub sigma: f64,
}

impl GhoConfig {
    pub fn validate(&self) -> Result<()> {
        check_radius(self.mu, self.sigma)
    }
}

/// Early-stop likelihood for a walker at minimum distance `d_star`.
///
/// Zero softness has no early stop at all and is rejected here.
pub fn rho(d_star: f64, config: &SboConfig) -> Result<f64> {
    if !(config.softness > 0.0) {
        return Err(Error::invalid("rho is undefined for softness 0"));
    }
    if !(d_star >= 0.0) {
        return Err(Error::invalid(format!("d_star must be >= 0, got {d_star}")));
    }
    Ok(rho_unchecked(d_star, config))
}

fn rho_unchecked(d_star: f64, c: &SboConfig) -> f64 {
    let exponent = match c.rho_form {
        RhoForm::AsPrinted => (d_star + c.d_minus) / (c.softness * c.d_minus * c.kappa),
        RhoForm::TextConsistent => c.kappa * (d_star - c.d_minus) / (c.softness * c.d_minus),
    };
    1.0 / (1.0 + exponent.exp())
}

/// Generated points with the final minimum distance and step count of each.
#[derive(Clone, Debug)]
pub struct WalkOutput {
    pub points: PointSet,
    pub distances: Vec<f64>,
    pub steps: Vec<usize>,
}

/// Brownian-offset sampler over a fixed in-distribution set. Distances are
/// always measured against the in-distribution set, never against earlier
/// outputs.
pub struct BrownianSampler<'a> {
    id_set: &'a PointSet,
    index: NeighborIndex,
}

impl<'a> BrownianSampler<'a> {
    pub fn new(id_set: &'a PointSet) -> Result<Self> {
        id_set.require_nonempty("in-distribution set")?;
        Ok(Self {
            id_set,
            index: NeighborIndex::build(id_set)?,
        })
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    pub fn generate(&self, config: &SboConfig, count: usize, rng: &RandomStream) -> Result<WalkOutput> {
        config.validate()?;
        if count == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let walks: Vec<Result<(Vec<f64>, f64, usize)>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut stream = rng.substream(rng.stream_id().wrapping_add(i as u64));
                self.walk(config, i, &mut stream)
            })
            .collect();

        let dim = self.id_set.dim();
        let mut flat = Vec::with_capacity(count * dim);
        let mut distances = Vec::with_capacity(count);
        let mut steps = Vec::with_capacity(count);
        for walk in walks {
            let (y, d, s) = walk?;
            flat.extend_from_slice(&y);
            distances.push(d);
            steps.push(s);
        }
        Ok(WalkOutput {
            points: PointSet::from_flat(dim, flat)?,
            distances,
            steps,
        })
    }

    fn walk(&self, config: &SboConfig, sample: usize, rng: &mut RandomStream) -> Result<(Vec<f64>, f64, usize)> {
        let start = rng.index(self.id_set.len());
        let mut y = self.id_set.row(start).to_vec();
        let mut offset = vec![0.0; y.len()];
        let soft = config.softness > 0.0;

        for step in 1..=config.max_steps {
            gho_offset_into(1.0, 1.0, rng, &mut offset);
            for (v, o) in y.iter_mut().zip(&offset) {
                *v += config.d_plus * o;
            }
            let d_star = self.index.min_distance(&y)?;
            if d_star >= config.d_minus {
                return Ok((y, d_star, step));
            }
            if soft && rng.uniform() < rho_unchecked(d_star, config) {
                return Ok((y, d_star, step));
            }
        }
        Err(Error::StepLimit {
            index: sample,
            max_steps: config.max_steps,
        })
    }
}

/// Soft Brownian offset sampling of `count` points.
pub fn sbo_generate(id_set: &PointSet, config: &SboConfig, count: usize, rng: &RandomStream) -> Result<PointSet> {
    Ok(BrownianSampler::new(id_set)?
        .generate(config, count, rng)?
        .points)
}

/// Hard Brownian offset: every output is at least `d_minus` from the set.
pub fn hbo_generate(
    id_set: &PointSet,
    d_minus: f64,
    d_plus: f64,
    count: usize,
    rng: &RandomStream,
) -> Result<PointSet> {
    sbo_generate(id_set, &SboConfig::hard(d_minus, d_plus), count, rng)
}

/// Points on a Gaussian-blurred hypersphere around the mean of `id_set`.
pub fn gho_generate(id_set: &PointSet, config: &GhoConfig, count: usize, rng: &RandomStream) -> Result<PointSet> {
    id_set.require_nonempty("in-distribution set")?;
    config.validate()?;
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let center = id_set.mean();
    let dim = center.len();
    let rows: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng.substream(rng.stream_id().wrapping_add(i as u64));
            let mut out = vec![0.0; dim];
            gho_offset_into(config.mu, config.sigma, &mut stream, &mut out);
            out.iter_mut().zip(&center).for_each(|(o, c)| *o += c);
            out
        })
        .collect();
    PointSet::from_flat(dim, rows.concat())
}
