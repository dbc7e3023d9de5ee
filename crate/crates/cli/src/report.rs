//! JSON run reports.

use knnclutter::{HaltReason, IterationRecord, KMode, MixtureFit, SegmentedFit};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    pub psi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rss: f64,
    pub flat: bool,
}

impl From<&SegmentedFit> for Changepoint {
    fn from(s: &SegmentedFit) -> Self {
        Changepoint {
            psi: s.psi,
            alpha: s.alpha,
            beta: s.beta,
            rss: s.rss,
            flat: s.flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub n: usize,
    pub k_used: usize,
    /// Overall entropy over the candidate set, when the sweep was run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_j: Option<f64>,
    pub feature_count: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub p: f64,
    pub loglik: f64,
    pub em_iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_k_entropy: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changepoint: Option<Changepoint>,
}

impl IterationSummary {
    pub fn from_fit(iteration: usize, k_used: usize, fit: &MixtureFit) -> Self {
        IterationSummary {
            iteration,
            n: fit.delta.len(),
            k_used,
            s_j: None,
            feature_count: fit.delta.iter().filter(|&&d| d >= 0.5).count(),
            lambda1: fit.lambda1,
            lambda2: fit.lambda2,
            p: fit.p,
            loglik: fit.loglik(),
            em_iterations: fit.n_iter,
            converged: fit.converged,
            per_k_entropy: Vec::new(),
            changepoint: None,
        }
    }

    pub fn from_record(r: &IterationRecord, changepoint: Option<Changepoint>) -> Self {
        IterationSummary {
            s_j: Some(r.s_j),
            per_k_entropy: r.per_k_entropy.s.clone(),
            changepoint,
            ..Self::from_fit(r.iteration, r.k_used, &r.fit)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub input_sha256: String,
    pub n: usize,
    pub k_mode: KMode,
    pub k_set: Vec<usize>,
    pub iterations: Vec<IterationSummary>,
    pub j_hat: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<HaltReason>,
    pub final_feature_count: usize,
    /// Only present when timing was requested, so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn s_sequence(&self) -> Vec<f64> {
        self.iterations.iter().filter_map(|r| r.s_j).collect()
    }
}
