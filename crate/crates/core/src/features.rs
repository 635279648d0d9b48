//! Linear representation stage: PCA fit, encode and decode.
//!
//! The latent space produced here is where the OOD samplers run; decoding maps
//! generated latents back to the input space.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::points::PointSet;

/// Eigenvalues at or below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `k` rows of length `D`, orthonormal, by descending variance.
    components: Vec<f64>,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    /// Assembles a model from stored parts, checking shapes.
    pub fn from_parts(mean: Vec<f64>, components: Vec<f64>, explained_variance: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        let k = explained_variance.len();
        if d == 0 || k == 0 || k > d {
            return Err(Error::invalid(format!("invalid PCA shape D={d}, k={k}")));
        }
        if components.len() != d * k {
            return Err(Error::invalid(format!(
                "expected {} component values, got {}",
                d * k,
                components.len()
            )));
        }
        let all = mean.iter().chain(&components).chain(&explained_variance);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::invalid("PCA model contains non-finite values"));
        }
        Ok(Self {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.explained_variance.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn component(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.components[i * d..(i + 1) * d]
    }

    pub fn components_flat(&self) -> &[f64] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }
}

/// Fits the top-`k` principal directions of `data`'s sample covariance.
///
/// Each direction is flipped so its largest-magnitude coordinate is positive.
pub fn pca_fit(data: &PointSet, k: usize) -> Result<PcaModel> {
    let n = data.len();
    let d = data.dim();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least 2 samples"));
    }
    let max_k = d.min(n - 1);
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!(
            "latent dimension k={k} must lie in 1..={max_k}"
        )));
    }

    let mean = data.mean();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in data.rows() {
        for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let largest = eigen.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .take_while(|&&i| eigen.eigenvalues[i] > largest * RANK_TOLERANCE && eigen.eigenvalues[i] > 0.0)
        .count();
    if k > rank {
        return Err(Error::invalid(format!(
            "latent dimension k={k} exceeds the data rank {rank}"
        )));
    }

    let mut components = Vec::with_capacity(k * d);
    let mut explained = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eigen.eigenvectors.column(i).iter().copied().collect();
        canonicalize_sign(&mut v);
        components.extend(v);
        explained.push(eigen.eigenvalues[i].max(0.0));
    }
    PcaModel::from_parts(mean, components, explained)
}

fn canonicalize_sign(v: &mut [f64]) {
    let mut lead = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Rows `(x - mean) . components^T`.
pub fn pca_encode(model: &PcaModel, data: &PointSet) -> Result<PointSet> {
    let d = model.input_dim();
    let k = model.latent_dim();
    if data.dim() != d {
        return Err(Error::invalid(format!(
            "data has dimension {}, model expects {d}",
            data.dim()
        )));
    }
    let mut out = Vec::with_capacity(data.len() * k);
    let mut centered = vec![0.0; d];
    for row in data.rows() {
        for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(&model.mean)) {
            *c = x - m;
        }
        for j in 0..k {
            out.push(dot(&centered, model.component(j)));
        }
    }
    PointSet::from_flat(k, out)
}

/// Rows `mean + z . components`.
pub fn pca_decode(model: &PcaModel, latent: &PointSet) -> Result<PointSet> {
    let d = model.input_dim();
    let k = model.latent_dim();
    if latent.dim() != k {
        return Err(Error::invalid(format!(
            "latent has dimension {}, model expects {k}",
            latent.dim()
        )));
    }
    let mut out = Vec::with_capacity(latent.len() * d);
    for z in latent.rows() {
        let mut x = model.mean.clone();
        for (j, zj) in z.iter().enumerate() {
            for (xi, ci) in x.iter_mut().zip(model.component(j)) {
                *xi += zj * ci;
            }
        }
        out.extend(x);
    }
    PointSet::from_flat(d, out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use crate::synth::gen_gaussian;

    fn random_set(n: usize, d: usize, seed: u64) -> PointSet {
        let mut rng = RandomStream::new(seed, 0);
        let base = gen_gaussian(n, d, &mut rng).unwrap();
        // anisotropic scaling so the spectrum is well separated
        let data = base
            .as_flat()
            .iter()
            .enumerate()
            .map(|(i, v)| v * (1.0 + (i % d) as f64 * 1.5) + 0.3 * (i % d) as f64)
            .collect();
        PointSet::from_flat(d, data).unwrap()
    }

    fn recon_error(a: &PointSet, b: &PointSet) -> f64 {
        a.as_flat()
            .iter()
            .zip(b.as_flat())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn line_component() {
        let data = PointSet::from_rows(&[[-1.0, -2.0], [0.0, 0.0], [1.0, 2.0]]).unwrap();
        let m = pca_fit(&data, 1).unwrap();
        let s = 5f64.sqrt();
        assert!((m.component(0)[0] - 1.0 / s).abs() < 1e-12);
        assert!((m.component(0)[1] - 2.0 / s).abs() < 1e-12);
        // covariance [[1,2],[2,4]] has eigenvalue 5
        assert!((m.explained_variance()[0] - 5.0).abs() < 1e-12);
        match pca_fit(&data, 2) {
            Err(Error::Validation(msg)) => assert!(msg.contains("rank 1"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn k_range() {
        let data = random_set(5, 3, 1);
        assert!(pca_fit(&data, 0).is_err());
        assert!(pca_fit(&data, 4).is_err());
        let two = random_set(2, 3, 1);
        assert!(pca_fit(&two, 2).is_err());
        assert!(pca_fit(&PointSet::from_rows(&[[1.0]]).unwrap(), 1).is_err());
    }

    #[test]
    fn full_rank_round_trip() {
        let data = random_set(50, 4, 2);
        let m = pca_fit(&data, 4).unwrap();
        let z = pca_encode(&m, &data).unwrap();
        let back = pca_decode(&m, &z).unwrap();
        assert!(recon_error(&data, &back) < 1e-8);
        for (x, zr) in data.rows().zip(z.rows()) {
            let dx: f64 = x.iter().zip(m.mean()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dz: f64 = zr.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((dx - dz).abs() < 1e-8);
        }
    }

    #[test]
    fn orthonormal_and_ordered() {
        let data = random_set(200, 6, 3);
        let m = pca_fit(&data, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let g = dot(m.component(i), m.component(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-8);
            }
            let c = m.component(i);
            let lead = c.iter().cloned().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(lead > 0.0);
        }
        assert!(m.explained_variance().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn latent_moments_match_explained_variance() {
        let data = random_set(300, 5, 4);
        let m = pca_fit(&data, 3).unwrap();
        let z = pca_encode(&m, &data).unwrap();
        let n = z.len() as f64;
        for j in 0..3 {
            let mean = z.rows().map(|r| r[j]).sum::<f64>() / n;
            let var = z.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 1e-10);
            assert!((var - m.explained_variance()[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn mean_maps_to_origin() {
        let data = random_set(40, 3, 5);
        let m = pca_fit(&data, 2).unwrap();
        let z = pca_encode(&m, &PointSet::from_rows(&[m.mean().to_vec()]).unwrap()).unwrap();
        assert!(z.row(0).iter().all(|v| v.abs() < 1e-12));
        let x = pca_decode(&m, &PointSet::from_rows(&[[0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(x.row(0), m.mean());
    }

    #[test]
    fn reconstruction_error_nonincreasing_in_k() {
        let data = random_set(120, 5, 6);
        let mut last = f64::INFINITY;
        for k in 1..=5 {
            let m = pca_fit(&data, k).unwrap();
            let back = pca_decode(&m, &pca_encode(&m, &data).unwrap()).unwrap();
            let err: f64 = data
                .as_flat()
                .iter()
                .zip(back.as_flat())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            assert!(err <= last + 1e-9);
            last = err;
        }
    }

    #[test]
    fn first_component_beats_random_directions() {
        let data = random_set(200, 3, 7);
        let m = pca_fit(&data, 1).unwrap();
        let err_for = |u: &[f64]| -> f64 {
            data.rows()
                .map(|x| {
                    let c: Vec<f64> = x.iter().zip(m.mean()).map(|(a, b)| a - b).collect();
                    let p = dot(&c, u);
                    c.iter().zip(u).map(|(ci, ui)| (ci - p * ui).powi(2)).sum::<f64>()
                })
                .sum()
        };
        let best = err_for(m.component(0));
        let mut rng = RandomStream::new(70, 0);
        for _ in 0..1000 {
            let u = crate::geometry::sample_unit_sphere(3, &mut rng).unwrap();
            assert!(best <= err_for(&u) + 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let data = random_set(20, 3, 8);
        let m = pca_fit(&data, 2).unwrap();
        assert!(pca_encode(&m, &random_set(5, 4, 1)).is_err());
        assert!(pca_decode(&m, &random_set(5, 3, 1)).is_err());
    }
}
