//! Dynamic time warping between two scalar series of possibly different length.
//!
//! The accumulated cost matrix uses the usual virtual border: the cell before
//! `(0, 0)` costs zero and every other border cell is infinite, so the first
//! real cell holds `|r[0] - l[0]|` and every admissible path starts at
//! `(0, 0)` and ends at `(n - 1, m - 1)`. Element distance is the absolute
//! difference.
//!
//! Indices in [`WarpResult::path`] are zero-based.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtwError {
    #[error("DTW needs two non-empty sequences")]
    EmptySequence,
    #[error("sequence contains a non-finite value at position {0}")]
    NonFinite(usize),
    #[error("brute-force DTW limited to n*m <= {limit}, got {n}x{m}")]
    TooLarge { n: usize, m: usize, limit: usize },
}

/// Largest `n * m` accepted by [`dtw_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub distance: f64,
    pub path: Vec<(usize, usize)>,
}

fn validate(r: &[f64], l: &[f64]) -> Result<(), DtwError> {
    if r.is_empty() || l.is_empty() {
        return Err(DtwError::EmptySequence);
    }
    if let Some(pos) = r.iter().chain(l).position(|v| !v.is_finite()) {
        return Err(DtwError::NonFinite(pos));
    }
    Ok(())
}

/// Full DTW with the optimal warping path.
///
/// Ties among predecessor cells resolve diagonal first, then `(i - 1, j)`,
/// then `(i, j - 1)`, so paths are reproducible.
pub fn dtw_distance(r: &[f64], l: &[f64]) -> Result<WarpResult, DtwError> {
    validate(r, l)?;
    let (n, m) = (r.len(), l.len());
    // (n + 1) x (m + 1) with the virtual border in row/column 0.
    let width = m + 1;
    let mut acc = vec![f64::INFINITY; (n + 1) * width];
    acc[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = acc[(i - 1) * width + j - 1]
                .min(acc[(i - 1) * width + j])
                .min(acc[i * width + j - 1]);
            acc[i * width + j] = (r[i - 1] - l[j - 1]).abs() + best;
        }
    }

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    loop {
        path.push((i - 1, j - 1));
        if i == 1 && j == 1 {
            break;
        }
        let diag = acc[(i - 1) * width + j - 1];
        let up = acc[(i - 1) * width + j];
        let left = acc[i * width + j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();

    Ok(WarpResult {
        distance: acc[n * width + m],
        path,
    })
}

/// Distance-only DTW in O(m) memory. Bit-identical to
/// `dtw_distance(r, l)?.distance`.
pub fn dtw_cost(r: &[f64], l: &[f64]) -> Result<f64, DtwError> {
    validate(r, l)?;
    let m = l.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &ri in r {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = (ri - l[j - 1]).abs() + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Minimum path cost by enumerating every monotone path from `(0, 0)` to
/// `(n - 1, m - 1)` with steps `(1, 0)`, `(0, 1)`, `(1, 1)`.
///
/// Exponential; only intended as a reference for tiny inputs.
pub fn dtw_bruteforce(r: &[f64], l: &[f64]) -> Result<f64, DtwError> {
    validate(r, l)?;
    let (n, m) = (r.len(), l.len());
    if n * m > BRUTEFORCE_LIMIT {
        return Err(DtwError::TooLarge {
            n,
            m,
            limit: BRUTEFORCE_LIMIT,
        });
    }

    fn walk(r: &[f64], l: &[f64], i: usize, j: usize, sofar: f64, best: &mut f64) {
        let cost = sofar + (r[i] - l[j]).abs();
        if i + 1 == r.len() && j + 1 == l.len() {
            if cost < *best {
                *best = cost;
            }
            return;
        }
        if i + 1 < r.len() {
            walk(r, l, i + 1, j, cost, best);
        }
        if j + 1 < l.len() {
            walk(r, l, i, j + 1, cost, best);
        }
        if i + 1 < r.len() && j + 1 < l.len() {
            walk(r, l, i + 1, j + 1, cost, best);
        }
    }

    let mut best = f64::INFINITY;
    walk(r, l, 0, 0, 0.0, &mut best);
    Ok(best)
}
