//! Choice of the neighbour order `K` from the classification entropy curve.
//!
//! For each candidate `K` the mixture is fitted and the separation entropy of
//! the feature posteriors is recorded. The entropy typically rises with `K`
//! and then levels off; the levelling-off point is located by a one-break
//! segmented regression whose second segment is constrained to be flat.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{em_fit, EmConfig, MixtureFit};
use crate::pattern::{knn_distances, PointPattern};

/// Largest neighbour order examined by default.
pub const DEFAULT_K_MAX: usize = 35;

/// Separation entropy `-sum delta_i log2(delta_i)`, with `0 log 0 = 0`.
///
/// Only the feature posterior enters the sum, not `1 - delta_i`.
pub fn entropy(delta: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (index, &v) in delta.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { index, value: v });
        }
        if v > 0.0 {
            s -= v * v.log2();
        }
    }
    Ok(s)
}

/// `{1, ..., 35}` restricted to `K <= n - 2`.
pub fn default_k_set(n: usize) -> Vec<usize> {
    (1..=DEFAULT_K_MAX.min(n.saturating_sub(2))).collect()
}

/// Entropy as a function of the neighbour order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub k_set: Vec<usize>,
    pub s: Vec<f64>,
    /// Why the fit failed at a given `K`, if it did. Such entries carry `s = 0`.
    pub diagnostics: Vec<Option<String>>,
}

impl EntropyCurve {
    pub fn len(&self) -> usize {
        self.k_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_set.is_empty()
    }

    /// Sum of the entropies over the whole candidate set.
    pub fn total(&self) -> f64 {
        self.s.iter().sum()
    }

    pub fn degenerate_count(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.is_some()).count()
    }
}

pub(crate) fn validate_k_set(k_set: &[usize], n: usize) -> Result<()> {
    if k_set.is_empty() || k_set[0] < 1 || k_set.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidKSet);
    }
    let max_k = *k_set.last().unwrap();
    if max_k >= n {
        return Err(Error::KSetTooLarge { max_k, n });
    }
    Ok(())
}

/// Entropy curve together with the mixture fit behind each entry.
pub(crate) fn entropy_sweep(
    pattern: &PointPattern,
    k_set: &[usize],
    config: &EmConfig,
) -> Result<(EntropyCurve, Vec<Option<MixtureFit>>)> {
    validate_k_set(k_set, pattern.len())?;
    let results: Vec<Result<MixtureFit>> = k_set
        .par_iter()
        .map(|&k| {
            let d = knn_distances(pattern, k)?;
            em_fit(&d, None, config)
        })
        .collect();

    let mut s = Vec::with_capacity(k_set.len());
    let mut diagnostics = Vec::with_capacity(k_set.len());
    let mut fits = Vec::with_capacity(k_set.len());
    for r in results {
        match r {
            Ok(fit) => {
                s.push(entropy(&fit.delta)?);
                diagnostics.push(None);
                fits.push(Some(fit));
            }
            Err(
                e @ (Error::DegenerateComponent { .. }
                | Error::NonFinite { .. }
                | Error::DegenerateDistances),
            ) => {
                s.push(0.0);
                diagnostics.push(Some(e.to_string()));
                fits.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((
        EntropyCurve {
            k_set: k_set.to_vec(),
            s,
            diagnostics,
        },
        fits,
    ))
}

/// Fits the mixture at every `K` of `k_set` and records the entropy of the
/// posteriors. A `K` at which EM collapses is recorded with entropy zero and
/// a diagnostic rather than aborting the curve.
pub fn entropy_curve(
    pattern: &PointPattern,
    k_set: &[usize],
    config: &EmConfig,
) -> Result<EntropyCurve> {
    entropy_sweep(pattern, k_set, config).map(|(curve, _)| curve)
}

/// One-break segmented line with a flat second segment:
/// `y = alpha + beta * min(x, psi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit {
    pub psi: f64,
    pub alpha: f64,
    /// Slope before the break; the slope after it is zero.
    pub beta: f64,
    pub rss: f64,
    pub k_hat: usize,
    /// No candidate break improves on a single flat line.
    pub flat: bool,
}

impl SegmentedFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.alpha + self.beta * x.min(self.psi)
    }
}

/// Closed-form least squares of `y` on `min(x, psi)`; returns (alpha, beta, rss).
fn fit_at(x: &[f64], y: &[f64], psi: f64) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let z: Vec<f64> = x.iter().map(|&v| v.min(psi)).collect();
    let zbar = z.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let szz: f64 = z.iter().map(|&v| (v - zbar) * (v - zbar)).sum();
    let szy: f64 = z
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - zbar) * (b - ybar))
        .sum();
    let beta = if szz > 0.0 { szy / szz } else { 0.0 };
    let alpha = ybar - beta * zbar;
    let rss = z
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - alpha - beta * a;
            r * r
        })
        .sum();
    (alpha, beta, rss)
}

/// Locates the levelling-off point of an entropy curve.
///
/// Every `K` of the curve and every midpoint between consecutive values is
/// tried as the break `psi`; the global RSS minimum wins and ties go to the
/// smaller `psi`. `k_hat` is the candidate `K` closest to `psi`, ties toward
/// the larger `K`. Since `psi = min(K)` is a flat line, the fit is never worse
/// than the best constant.
pub fn fit_segmented(curve: &EntropyCurve) -> Result<SegmentedFit> {
    let m = curve.len();
    if m < 4 {
        return Err(Error::TooFewPoints { n: m, k: 3 });
    }
    let x: Vec<f64> = curve.k_set.iter().map(|&k| k as f64).collect();
    let y = &curve.s;

    let mut candidates = Vec::with_capacity(2 * m - 1);
    for i in 0..m {
        candidates.push(x[i]);
        if i + 1 < m {
            candidates.push(0.5 * (x[i] + x[i + 1]));
        }
    }

    let (a0, b0, flat_rss) = fit_at(&x, y, x[0]);
    let mut best = (x[0], a0, b0, flat_rss);
    // guards the tie rule against rounding noise
    let tie = 1e-12 * y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    for &psi in &candidates[1..] {
        let (alpha, beta, rss) = fit_at(&x, y, psi);
        if rss < best.3 - tie {
            best = (psi, alpha, beta, rss);
        }
    }
    let (psi, alpha, beta, rss) = best;
    let flat = psi == x[0];

    let k_hat = nearest_k(&curve.k_set, psi);
    Ok(SegmentedFit {
        psi,
        alpha,
        beta,
        rss,
        k_hat,
        flat,
    })
}

fn nearest_k(k_set: &[usize], psi: f64) -> usize {
    let mut best = k_set[0];
    let mut best_dist = (best as f64 - psi).abs();
    for &k in &k_set[1..] {
        let dist = (k as f64 - psi).abs();
        if dist <= best_dist {
            best = k;
            best_dist = dist;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k_hat: usize,
    pub curve: EntropyCurve,
    pub segmented: SegmentedFit,
    /// Mixture fitted at `k_hat`, if EM did not collapse there.
    pub fit: Option<MixtureFit>,
    pub(crate) fits: Vec<Option<MixtureFit>>,
}

impl KSelection {
    /// Mixture fit for any `K` of the candidate set.
    pub fn fit_for(&self, k: usize) -> Option<&MixtureFit> {
        let i = self.curve.k_set.iter().position(|&v| v == k)?;
        self.fits[i].as_ref()
    }
}

/// Entropy curve over `k_set` followed by the segmented fit.
pub fn select_k(pattern: &PointPattern, k_set: &[usize], config: &EmConfig) -> Result<KSelection> {
    let (curve, fits) = entropy_sweep(pattern, k_set, config)?;
    let segmented = fit_segmented(&curve)?;
    let k_hat = segmented.k_hat;
    let i = curve
        .k_set
        .iter()
        .position(|&k| k == k_hat)
        .expect("k_hat is drawn from k_set");
    Ok(KSelection {
        k_hat,
        fit: fits[i].clone(),
        curve,
        segmented,
        fits,
    })
}
