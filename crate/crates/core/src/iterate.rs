//! Repeated classification with the overall-entropy stopping rule.
//!
//! Each iteration classifies the current pattern and keeps only its feature
//! points for the next one. The overall entropy of an iteration is the sum of
//! the separation entropies over a fixed candidate set of `K`; iteration `J`
//! is selected as soon as iteration `J + 1` has a larger overall entropy.
//! Removal is irrevocable: a point labelled clutter never comes back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kselect::{default_k_set, entropy_sweep, fit_segmented, validate_k_set, EntropyCurve};
use crate::mixture::{classify, em_fit, EmConfig, Labels, MixtureFit};
use crate::pattern::{knn_distances, PointPattern};

/// How the neighbour order is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KMode {
    Fixed(usize),
    /// Re-estimated on every iteration's pattern from its entropy curve.
    Auto,
}

impl fmt::Display for KMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KMode::Fixed(k) => write!(f, "{k}"),
            KMode::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for KMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KMode::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(KMode::Fixed(k)),
            _ => Err(format!(
                "invalid k mode '{s}' (expected a positive integer or 'auto')"
            )),
        }
    }
}

impl Serialize for KMode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KMode::Fixed(k) => serializer.serialize_u64(*k as u64),
            KMode::Auto => serializer.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for KMode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(k) if k >= 1 => Ok(KMode::Fixed(k as usize)),
            Repr::Int(k) => Err(serde::de::Error::custom(format!(
                "invalid k mode {k} (k must be >= 1)"
            ))),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub k_mode: KMode,
    /// Candidate orders for the overall entropy and for automatic selection.
    pub k_set: Vec<usize>,
    pub max_iter: usize,
    /// Defaults to `max(k_set) + 2`.
    pub min_points: Option<usize>,
    pub em: EmConfig,
}

impl IterationConfig {
    pub const DEFAULT_MAX_ITER: usize = 10;

    /// Defaults for a pattern of `n` points.
    pub fn for_size(k_mode: KMode, n: usize) -> Self {
        Self {
            k_mode,
            k_set: default_k_set(n),
            max_iter: Self::DEFAULT_MAX_ITER,
            min_points: None,
            em: EmConfig::default(),
        }
    }

    pub fn effective_min_points(&self) -> usize {
        self.min_points
            .unwrap_or_else(|| self.k_set.last().copied().unwrap_or(0) + 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub n: usize,
    pub k_used: usize,
    /// Labels of this iteration's points.
    pub labels: Labels,
    pub fit: MixtureFit,
    /// Overall entropy: the sum of `per_k_entropy.s`.
    pub s_j: f64,
    pub per_k_entropy: EntropyCurve,
    /// Index in the original pattern of each point of this iteration.
    pub original_index: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    /// The next iteration's overall entropy exceeded the current one.
    EntropyIncrease,
    MaxIter,
    /// The surviving feature set fell below the minimum pattern size.
    MinPoints,
    /// An iteration removed no points, so the next one would repeat it.
    Stalled,
    /// The mixture collapsed to a single component on the surviving points.
    Degenerate,
}

impl HaltReason {
    pub fn criterion_triggered(self) -> bool {
        self == HaltReason::EntropyIncrease
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    /// Selected iteration, 1-based.
    pub j_hat: usize,
    pub halt: HaltReason,
    /// Labels on the original pattern.
    pub final_labels: Labels,
}

impl IterationTrace {
    pub fn selected(&self) -> &IterationRecord {
        &self.records[self.j_hat - 1]
    }

    pub fn s_sequence(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.s_j).collect()
    }
}

/// Maps the labels of iteration `j_hat` back to the original pattern: a point
/// is feature iff it survived every iteration up to and including `j_hat`.
pub fn compose_labels(trace: &IterationTrace) -> Labels {
    let n0 = trace.records[0].n;
    let mut is_feature = vec![false; n0];
    let rec = &trace.records[trace.j_hat - 1];
    for (&orig, &f) in rec.original_index.iter().zip(&rec.labels.is_feature) {
        is_feature[orig] = f;
    }
    Labels { is_feature }
}

fn classify_once(
    pattern: &PointPattern,
    config: &IterationConfig,
) -> Result<(usize, MixtureFit, EntropyCurve)> {
    let (curve, fits) = entropy_sweep(pattern, &config.k_set, &config.em)?;
    let k_used = match config.k_mode {
        KMode::Fixed(k) => k,
        KMode::Auto => fit_segmented(&curve)?.k_hat,
    };
    let fit = match config.k_set.iter().position(|&k| k == k_used) {
        Some(i) => match &fits[i] {
            Some(fit) => fit.clone(),
            None => {
                return Err(Error::DegenerateComponent {
                    iter: config.em.max_iter,
                })
            }
        },
        None => em_fit(&knn_distances(pattern, k_used)?, None, &config.em)?,
    };
    Ok((k_used, fit, curve))
}

/// Classifies, keeps the features, and repeats until the overall entropy rises.
///
/// Deciding that iteration `J` is final requires computing iteration `J + 1`,
/// so a trace stopped by the criterion holds `j_hat + 1` records. When
/// `max_iter`, `min_points`, a stalled iteration or a collapsed mixture stops
/// the loop first, `j_hat` is the last completed iteration.
pub fn run_iterative(pattern: &PointPattern, config: &IterationConfig) -> Result<IterationTrace> {
    if config.max_iter < 1 {
        return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
    }
    let min_points = config.effective_min_points();
    let max_k = config.k_set.last().copied().unwrap_or(0);
    if min_points <= max_k {
        return Err(Error::InvalidConfig(format!(
            "min_points {min_points} must exceed the largest candidate k {max_k}"
        )));
    }
    if let KMode::Fixed(k) = config.k_mode {
        if k >= min_points {
            return Err(Error::InvalidConfig(format!(
                "fixed k {k} must be below min_points {min_points}"
            )));
        }
    }
    if pattern.len() < min_points {
        return Err(Error::PatternTooSmall {
            n: pattern.len(),
            min_points,
        });
    }
    validate_k_set(&config.k_set, pattern.len())?;

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut current = pattern.clone();
    let mut original_index: Vec<usize> = (0..pattern.len()).collect();

    let (j_hat, halt) = loop {
        let j = records.len() + 1;
        let (k_used, fit, curve) = match classify_once(&current, config) {
            Ok(v) => v,
            Err(e) if j == 1 => return Err(e),
            Err(_) => break (j - 1, HaltReason::Degenerate),
        };
        let labels = classify(&fit);
        let s_j = curve.total();
        let keep = labels.is_feature.clone();
        records.push(IterationRecord {
            iteration: j,
            n: current.len(),
            k_used,
            labels,
            fit,
            s_j,
            per_k_entropy: curve,
            original_index: original_index.clone(),
        });

        if j >= 2 && records[j - 1].s_j > records[j - 2].s_j {
            break (j - 1, HaltReason::EntropyIncrease);
        }
        if j >= config.max_iter {
            break (j, HaltReason::MaxIter);
        }
        let next = current.subset(&keep)?;
        if next.len() < min_points {
            break (j, HaltReason::MinPoints);
        }
        if next.len() == current.len() {
            break (j, HaltReason::Stalled);
        }
        original_index = next
            .parent_index()
            .iter()
            .map(|&i| original_index[i])
            .collect();
        current = next;
    };

    let mut trace = IterationTrace {
        records,
        j_hat,
        halt,
        final_labels: Labels { is_feature: vec![] },
    };
    trace.final_labels = compose_labels(&trace);
    Ok(trace)
}

/// Applies the classification exactly `depth` times without any stopping
/// rule and returns the composed labels on the original pattern after each
/// depth.
///
/// When the surviving set becomes too small to classify again (fewer than
/// `K + 2` points for a fixed `K`, fewer than four candidate orders in auto
/// mode) or the mixture collapses, the remaining depths repeat the last labels.
pub fn run_fixed_depth(
    pattern: &PointPattern,
    k_mode: KMode,
    k_set: &[usize],
    depth: usize,
    em: &EmConfig,
) -> Result<Vec<Labels>> {
    let n0 = pattern.len();
    let mut out: Vec<Labels> = Vec::with_capacity(depth);
    let mut current = pattern.clone();
    let mut original_index: Vec<usize> = (0..n0).collect();
    let mut survivors = Labels {
        is_feature: vec![true; n0],
    };

    for j in 0..depth {
        let fit = match k_mode {
            KMode::Fixed(k) => {
                if current.len() < k + 2 {
                    None
                } else {
                    em_fit(&knn_distances(&current, k)?, None, em).ok()
                }
            }
            KMode::Auto => {
                let max_k = current.len().saturating_sub(2);
                let ks: Vec<usize> = k_set.iter().copied().filter(|&k| k <= max_k).collect();
                if ks.len() < 4 {
                    None
                } else {
                    let (curve, fits) = entropy_sweep(&current, &ks, em)?;
                    let k_hat = fit_segmented(&curve)?.k_hat;
                    let i = ks.iter().position(|&k| k == k_hat).expect("k_hat in k_set");
                    fits[i].clone()
                }
            }
        };
        let Some(fit) = fit else {
            if j == 0 {
                // nothing could be classified at all
                return Err(Error::TooFewPoints {
                    n: current.len(),
                    k: match k_mode {
                        KMode::Fixed(k) => k,
                        KMode::Auto => 4,
                    },
                });
            }
            while out.len() < depth {
                out.push(survivors.clone());
            }
            break;
        };
        let labels = classify(&fit);
        for (&orig, &f) in original_index.iter().zip(&labels.is_feature) {
            survivors.is_feature[orig] = f;
        }
        out.push(survivors.clone());
        let next = current.subset(&labels.is_feature)?;
        original_index = next
            .parent_index()
            .iter()
            .map(|&i| original_index[i])
            .collect();
        current = next;
    }
    Ok(out)
}
