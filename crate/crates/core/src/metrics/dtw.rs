use crate::error::{Error, Result};

/// Dynamic time warping distance between two 1-D series with local cost
/// `|a_i - b_j|`, the symmetric match/insert/delete step pattern, no window,
/// and both ends anchored.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    dtw_by(a.len(), b.len(), |i, j| (a[i] - b[j]).abs())
}

/// DTW over an arbitrary local cost `cost(i, j)` for sequences of length
/// `n` and `m`.
pub fn dtw_by(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("DTW needs two nonempty sequences"));
    }
    let mut prev = vec![f64::INFINITY; m];
    let mut curr = vec![f64::INFINITY; m];
    for i in 0..n {
        for j in 0..m {
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let left = if j > 0 { curr[j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            curr[j] = best + cost(i, j);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}
