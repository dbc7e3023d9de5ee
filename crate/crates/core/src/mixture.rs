//! Two-component mixture of Kth nearest-neighbour distance laws.
//!
//! For a homogeneous Poisson process of intensity `lambda`, the squared Kth
//! nearest-neighbour distance is Gamma(K, lambda * pi). A superposition of a
//! dense feature process and a sparse clutter process therefore yields
//! distances distributed as a two-component mixture of that law with a common
//! `K`. Component 1 is always the denser one (the feature).

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::pattern::KnnDistances;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnDensityParams {
    pub k: usize,
    pub lambda: f64,
}

impl NnDensityParams {
    pub fn new(k: usize, lambda: f64) -> Result<Self> {
        let params = Self { k, lambda };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParams(format!("k = {} must be >= 1", self.k)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "intensity {} must be positive and finite",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Density of the Kth nearest-neighbour distance at `x`:
/// `2 (lambda pi)^K x^(2K-1) exp(-lambda pi x^2) / (K-1)!`.
///
/// Evaluated in the log domain so that large `K` does not overflow.
pub fn nn_density(x: f64, params: NnDensityParams) -> Result<f64> {
    params.validate()?;
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParams(format!("distance {x} must be >= 0")));
    }
    Ok(ln_nn_density(x, params.k, params.lambda).exp())
}

fn ln_nn_density(x: f64, k: usize, lambda: f64) -> f64 {
    let kf = k as f64;
    let rate = lambda * PI;
    LN_2 + kf * rate.ln() + (2.0 * kf - 1.0) * x.ln() - rate * x * x - ln_gamma(kf)
}

/// Maximum likelihood intensity `n K / (pi sum d_i^2)`.
pub fn lambda_mle(d: &KnnDistances) -> Result<f64> {
    weighted_mle(d.k, d.d.iter().map(|&x| (x, 1.0)))
}

/// `K sum w_i / (pi sum w_i d_i^2)`, the weighted form used by the M step.
fn weighted_mle(k: usize, it: impl Iterator<Item = (f64, f64)>) -> Result<f64> {
    let (mut sw, mut swd2) = (0.0, 0.0);
    for (x, w) in it {
        sw += w;
        swd2 += w * x * x;
    }
    if swd2 <= 0.0 {
        return Err(Error::DegenerateDistances);
    }
    Ok(k as f64 * sw / (PI * swd2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureInit {
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
}

impl MixtureInit {
    /// Splits the sorted distances at the median; the lower half seeds the
    /// feature intensity and the upper half the clutter intensity.
    pub fn from_median_split(d: &KnnDistances) -> Result<Self> {
        let mut sorted = d.d.clone();
        sorted.sort_by(f64::total_cmp);
        let half = sorted.len() / 2;
        let lambda1 = weighted_mle(d.k, sorted[..half].iter().map(|&x| (x, 1.0)))?;
        let lambda2 = weighted_mle(d.k, sorted[half..].iter().map(|&x| (x, 1.0)))?;
        Ok(Self {
            lambda1,
            lambda2,
            p: 0.5,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop once the largest relative parameter change falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub k: usize,
    /// Feature intensity; never smaller than `lambda2`.
    pub lambda1: f64,
    /// Clutter intensity.
    pub lambda2: f64,
    /// Weight of the feature component.
    pub p: f64,
    /// Posterior probability that each point belongs to the feature.
    pub delta: Vec<f64>,
    /// Mixture log-likelihood before each M step and at the final estimate.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
}

impl MixtureFit {
    pub fn loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Posterior feature probability for one distance.
///
/// Written as a logistic of the log density ratio. The `x^(2K-1)` factor and
/// the normalising constants cancel, so `x = 0` yields the limit
/// `p l1^K / (p l1^K + (1-p) l2^K)` instead of `0/0`.
#[inline]
fn posterior(x: f64, k: f64, lambda1: f64, lambda2: f64, p: f64) -> f64 {
    let log_ratio =
        p.ln() - (1.0 - p).ln() + k * (lambda1 / lambda2).ln() - PI * x * x * (lambda1 - lambda2);
    1.0 / (1.0 + (-log_ratio).exp())
}

/// E step: posterior feature probabilities under `(lambda1, lambda2, p)`.
pub fn e_step(d: &KnnDistances, lambda1: f64, lambda2: f64, p: f64) -> Vec<f64> {
    let k = d.k as f64;
    d.d.iter()
        .map(|&x| posterior(x, k, lambda1, lambda2, p))
        .collect()
}

/// Mixture log-likelihood. For zero distances only the parameter-dependent
/// part of the log density is counted (the `ln x` term diverges but does not
/// depend on the parameters).
pub fn mixture_loglik(d: &KnnDistances, lambda1: f64, lambda2: f64, p: f64) -> f64 {
    let kf = d.k as f64;
    let (r1, r2) = (lambda1 * PI, lambda2 * PI);
    let (lr1, lr2) = (kf * r1.ln(), kf * r2.ln());
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let constant = LN_2 - ln_gamma(kf);
    d.d.iter()
        .map(|&x| {
            let x2 = x * x;
            let a = lp + lr1 - r1 * x2;
            let b = lq + lr2 - r2 * x2;
            let m = a.max(b);
            let lse = m + ((a - m).exp() + (b - m).exp()).ln();
            if x > 0.0 {
                lse + constant + (2.0 * kf - 1.0) * x.ln()
            } else {
                lse
            }
        })
        .sum()
}

/// Fits the two-component mixture by EM.
///
/// Without `init` the median split of [`MixtureInit::from_median_split`] is
/// used. The output is ordered so that `lambda1 >= lambda2`; if EM ends with
/// the components the other way round, they are swapped together with `p`
/// and `delta`.
pub fn em_fit(
    d: &KnnDistances,
    init: Option<MixtureInit>,
    config: &EmConfig,
) -> Result<MixtureFit> {
    let n = d.len();
    if n < 4 {
        return Err(Error::TooFewPoints { n, k: d.k });
    }
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "EM tolerance {} must be positive",
            config.tol
        )));
    }
    let init = match init {
        Some(init) => init,
        None => MixtureInit::from_median_split(d)?,
    };
    let MixtureInit {
        mut lambda1,
        mut lambda2,
        mut p,
    } = init;
    if !(lambda1 > 0.0 && lambda2 > 0.0 && (0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidParams(format!(
            "initial values lambda1 = {lambda1}, lambda2 = {lambda2}, p = {p}"
        )));
    }

    let eps = 1e-10 * n as f64;
    let mut loglik_trace = Vec::new();
    let mut converged = false;
    let mut n_iter = 0;
    let mut delta = e_step(d, lambda1, lambda2, p);

    while n_iter < config.max_iter {
        loglik_trace.push(mixture_loglik(d, lambda1, lambda2, p));
        let s1: f64 = delta.iter().sum();
        let s2: f64 = delta.iter().map(|&v| 1.0 - v).sum();
        if s1 < eps || s2 < eps {
            return Err(Error::DegenerateComponent { iter: n_iter });
        }
        n_iter += 1;

        let pairs = || d.d.iter().copied().zip(delta.iter().copied());
        let new1 = weighted_mle(d.k, pairs());
        let new2 = weighted_mle(d.k, pairs().map(|(x, w)| (x, 1.0 - w)));
        let (new1, new2) = match (new1, new2) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(Error::NonFinite { iter: n_iter }),
        };
        let new_p = s1 / n as f64;
        if !(new1.is_finite() && new2.is_finite() && new_p.is_finite()) {
            return Err(Error::NonFinite { iter: n_iter });
        }

        let change = rel_change(lambda1, new1)
            .max(rel_change(lambda2, new2))
            .max(rel_change(p, new_p));
        lambda1 = new1;
        lambda2 = new2;
        p = new_p;
        delta = e_step(d, lambda1, lambda2, p);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    loglik_trace.push(mixture_loglik(d, lambda1, lambda2, p));

    if lambda1 < lambda2 {
        std::mem::swap(&mut lambda1, &mut lambda2);
        p = 1.0 - p;
        delta.iter_mut().for_each(|v| *v = 1.0 - *v);
    }

    Ok(MixtureFit {
        k: d.k,
        lambda1,
        lambda2,
        p,
        delta,
        loglik_trace,
        converged,
        n_iter,
    })
}

fn rel_change(old: f64, new: f64) -> f64 {
    let scale = old.abs().max(f64::MIN_POSITIVE);
    (new - old).abs() / scale
}

/// Hard feature/clutter labels, index-aligned with the classified pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub is_feature: Vec<bool>,
}

impl Labels {
    pub fn len(&self) -> usize {
        self.is_feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_feature.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.is_feature.iter().filter(|&&f| f).count()
    }
}

/// Feature iff the posterior is at least one half.
pub fn classify(fit: &MixtureFit) -> Labels {
    Labels {
        is_feature: fit.delta.iter().map(|&v| v >= 0.5).collect(),
    }
}
