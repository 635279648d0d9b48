//! Random offsets on and around hyperspheres.

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Raw normal draws shorter than this are discarded before normalizing.
const MIN_RAW_NORM: f64 = 1e-30;

/// A point drawn uniformly from the surface of the unit sphere in `dim`
/// dimensions, obtained by normalizing a standard-normal vector.
pub fn sample_unit_sphere(dim: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::invalid("sphere dimension must be at least 1"));
    }
    let mut out = vec![0.0; dim];
    unit_sphere_into(rng, &mut out);
    Ok(out)
}

/// The Gaussian hyperspheric offset `mu * s/|s| + sigma * n` with
/// independent standard-normal vectors `s` and `n`.
pub fn gho_offset(mu: f64, sigma: f64, dim: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::invalid("offset dimension must be at least 1"));
    }
    check_radius(mu, sigma)?;
    let mut out = vec![0.0; dim];
    gho_offset_into(mu, sigma, rng, &mut out);
    Ok(out)
}

pub(crate) fn check_radius(mu: f64, sigma: f64) -> Result<()> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::invalid(format!("mu must be finite and >= 0, got {mu}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    Ok(())
}

pub(crate) fn unit_sphere_into(rng: &mut RandomStream, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.standard_normal();
        }
        let norm = crate::points::norm(out);
        if norm >= MIN_RAW_NORM {
            out.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

/// Fills `out` with an offset; the noise vector is always drawn so the
/// number of draws does not depend on `sigma`.
pub(crate) fn gho_offset_into(mu: f64, sigma: f64, rng: &mut RandomStream, out: &mut [f64]) {
    unit_sphere_into(rng, out);
    for v in out.iter_mut() {
        let noise = rng.standard_normal();
        *v = mu * *v + sigma * noise;
    }
}
