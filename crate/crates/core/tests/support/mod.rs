//! Independent reference implementations used to cross-check the library.
#![allow(dead_code)]

use oodgen::PointSet;

/// Nearest Euclidean distance by linear scan.
pub fn scan_min_distance(points: &PointSet, q: &[f64]) -> f64 {
    points
        .rows()
        .map(|p| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// DTW by enumerating every monotone warping path from (0,0) to (n-1,m-1)
/// with steps (1,0), (0,1), (1,1). Costs are accumulated from the start.
pub fn dtw_enumerate(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

/// Minimum over all n! permutations of the mean matched cost, summed in row
/// order. `costs` is row-major n×n.
pub fn assignment_brute_force(n: usize, costs: &[f64]) -> f64 {
    fn rec(n: usize, costs: &[f64], row: usize, used: &mut Vec<bool>, picks: &mut Vec<usize>, best: &mut f64) {
        if row == n {
            let total = picks.iter().enumerate().fold(0.0, |s, (i, j)| s + costs[i * n + j]);
            *best = best.min(total);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                picks.push(j);
                rec(n, costs, row + 1, used, picks, best);
                picks.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(n, costs, 0, &mut vec![false; n], &mut Vec::new(), &mut best);
    best / n as f64
}

/// Cyclic Jacobi eigen-decomposition of a symmetric d×d matrix (row-major).
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue.
pub fn jacobi_eigen(d: usize, m: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = m.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| (a[j * d + j], (0..d).map(|i| v[i * d + j]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs.into_iter().unzip()
}

/// Flips `v` so that its largest-magnitude coordinate (first on ties) is
/// positive.
pub fn canonical_sign(v: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter().map(|x| -x).collect()
    } else {
        v.to_vec()
    }
}

/// Sample covariance (n - 1 denominator), row-major d×d.
pub fn covariance(data: &PointSet) -> Vec<f64> {
    let d = data.dim();
    let n = data.len() as f64;
    let mut mean = vec![0.0; d];
    for r in data.rows() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / n;
        }
    }
    let mut c = vec![0.0; d * d];
    for r in data.rows() {
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c.iter().map(|x| x / (n - 1.0)).collect()
}

/// Rank-sum-free AUROC: the fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
pub fn auroc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut good = 0.0;
    let mut total = 0.0;
    for (sp, lp) in scores.iter().zip(labels) {
        if *lp != 1 {
            continue;
        }
        for (sn, ln) in scores.iter().zip(labels) {
            if *ln != 0 {
                continue;
            }
            total += 1.0;
            if sp > sn {
                good += 1.0;
            } else if sp == sn {
                good += 0.5;
            }
        }
    }
    good / total
}

/// Both forms of the boundary likelihood, written out independently.
pub fn rho_as_printed(d: f64, d_minus: f64, softness: f64, kappa: f64) -> f64 {
    1.0 / (1.0 + ((d + d_minus) / (softness * d_minus * kappa)).exp())
}

pub fn rho_text_consistent(d: f64, d_minus: f64, softness: f64, kappa: f64) -> f64 {
    1.0 / (1.0 + (kappa * (d - d_minus) / (softness * d_minus)).exp())
}
