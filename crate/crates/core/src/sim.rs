//! Simulation scenarios, classification rates and the Monte-Carlo harness.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterate::{run_fixed_depth, KMode};
use crate::kselect::DEFAULT_K_MAX;
use crate::mixture::{EmConfig, Labels};
use crate::pattern::{Label, Point, PointPattern, Window};

/// Generator used for every simulation in this crate.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `master`.
pub fn child_rng(master: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean.is_nan() || mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng);
    draw as usize
}

fn uniform_points<R: Rng + ?Sized>(window: &Window, n: usize, rng: &mut R) -> Vec<Point> {
    (0..n)
        .map(|_| {
            Point::new(
                window.xmin() + window.width() * rng.random::<f64>(),
                window.ymin() + window.height() * rng.random::<f64>(),
            )
        })
        .collect()
}

/// Homogeneous Poisson process with `expected_n` points on average. Every
/// point is labelled `label`.
pub fn sim_poisson<R: Rng + ?Sized>(
    window: &Window,
    expected_n: f64,
    label: Label,
    rng: &mut R,
) -> Result<PointPattern> {
    if !(expected_n > 0.0 && expected_n.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "expected count {expected_n} must be positive"
        )));
    }
    let n = poisson_count(expected_n, rng);
    let points = uniform_points(window, n, rng);
    PointPattern::new(points, *window)?.with_truth(vec![label; n])
}

/// Poisson cluster process: parents with intensity `kappa` on `window`, each
/// with exactly `u` offspring uniform in the disc of `radius` around it.
///
/// Offspring falling outside `window` are kept; the returned pattern's window
/// is enlarged to cover them. All points are labelled feature.
pub fn sim_cluster<R: Rng + ?Sized>(
    window: &Window,
    kappa: f64,
    u: usize,
    radius: f64,
    rng: &mut R,
) -> Result<PointPattern> {
    if !(kappa > 0.0 && radius > 0.0 && u >= 1) {
        return Err(Error::InvalidConfig(format!(
            "cluster process needs kappa > 0, radius > 0, u >= 1 (got {kappa}, {radius}, {u})"
        )));
    }
    let parents = uniform_points(window, poisson_count(kappa * window.area(), rng), rng);
    let mut points = Vec::with_capacity(parents.len() * u);
    for parent in &parents {
        for _ in 0..u {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            points.push(Point::new(
                parent.x + r * theta.cos(),
                parent.y + r * theta.sin(),
            ));
        }
    }
    let out = if points.is_empty() {
        *window
    } else {
        window.union(&Window::bounding(&points)?)
    };
    let n = points.len();
    PointPattern::new(points, out)?.with_truth(vec![Label::Feature; n])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum FeatureSpec {
    Poisson {
        window: Window,
        expected: f64,
    },
    Cluster {
        window: Window,
        kappa: f64,
        u: usize,
        radius: f64,
    },
}

impl FeatureSpec {
    pub fn window(&self) -> &Window {
        match self {
            FeatureSpec::Poisson { window, .. } | FeatureSpec::Cluster { window, .. } => window,
        }
    }

    pub fn expected_count(&self) -> f64 {
        match *self {
            FeatureSpec::Poisson { expected, .. } => expected,
            FeatureSpec::Cluster {
                window, kappa, u, ..
            } => kappa * window.area() * u as f64,
        }
    }
}

/// The four simulation scenarios: clutter with 300 expected points on the
/// unit square plus
///
/// 1. clusters, `kappa = 7.5`, 20 points in discs of radius 0.2;
/// 2. clusters, `kappa = 15`, 10 points in discs of radius 0.2;
/// 3. Poisson with 150 expected points on `[0, 0.5]^2`;
/// 4. Poisson with 20 expected points on `[0.25, 0.5]^2`.
///
/// `Aggregate` is the single-aggregate design: clutter with 200 expected
/// points on `[0, 10]^2` and a Poisson feature with 100 expected points on
/// the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioId {
    One,
    Two,
    Three,
    Four,
    Aggregate,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::One,
        ScenarioId::Two,
        ScenarioId::Three,
        ScenarioId::Four,
        ScenarioId::Aggregate,
    ];
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioId::One => "1",
            ScenarioId::Two => "2",
            ScenarioId::Three => "3",
            ScenarioId::Four => "4",
            ScenarioId::Aggregate => "aggregate",
        })
    }
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "1" => Ok(ScenarioId::One),
            "2" => Ok(ScenarioId::Two),
            "3" => Ok(ScenarioId::Three),
            "4" => Ok(ScenarioId::Four),
            "aggregate" => Ok(ScenarioId::Aggregate),
            other => Err(format!(
                "unknown scenario id '{other}' (expected 1, 2, 3, 4 or aggregate)"
            )),
        }
    }
}

impl Serialize for ScenarioId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScenarioId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        let s = match Repr::deserialize(d)? {
            Repr::Int(i) => i.to_string(),
            Repr::Str(s) => s,
        };
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub clutter_window: Window,
    pub clutter_expected: f64,
    pub feature: FeatureSpec,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn preset(id: ScenarioId, seed: u64) -> Self {
        let unit = Window::unit();
        let sq = |lo, hi| Window::square(lo, hi).expect("valid square");
        let (clutter_window, clutter_expected, feature) = match id {
            ScenarioId::One => (
                unit,
                300.0,
                FeatureSpec::Cluster {
                    window: unit,
                    kappa: 7.5,
                    u: 20,
                    radius: 0.2,
                },
            ),
            ScenarioId::Two => (
                unit,
                300.0,
                FeatureSpec::Cluster {
                    window: unit,
                    kappa: 15.0,
                    u: 10,
                    radius: 0.2,
                },
            ),
            ScenarioId::Three => (
                unit,
                300.0,
                FeatureSpec::Poisson {
                    window: sq(0.0, 0.5),
                    expected: 150.0,
                },
            ),
            ScenarioId::Four => (
                unit,
                300.0,
                FeatureSpec::Poisson {
                    window: sq(0.25, 0.5),
                    expected: 20.0,
                },
            ),
            ScenarioId::Aggregate => (
                sq(0.0, 10.0),
                200.0,
                FeatureSpec::Poisson {
                    window: unit,
                    expected: 100.0,
                },
            ),
        };
        Self {
            clutter_window,
            clutter_expected,
            feature,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0;
        if !positive(self.clutter_expected) || !positive(self.feature.expected_count()) {
            return Err(Error::InvalidConfig(
                "expected counts must be positive".into(),
            ));
        }
        if !self.clutter_window.contains_window(self.feature.window()) {
            return Err(Error::InvalidConfig(
                "feature window must lie inside the clutter window".into(),
            ));
        }
        Ok(())
    }
}

/// Superposition of clutter and feature with truth labels, in random order.
pub fn make_scenario(spec: &ScenarioSpec) -> Result<PointPattern> {
    spec.validate()?;
    let mut rng = SimRng::seed_from_u64(spec.seed);
    let clutter = sim_poisson(
        &spec.clutter_window,
        spec.clutter_expected,
        Label::Clutter,
        &mut rng,
    )?;
    let feature = match spec.feature {
        FeatureSpec::Poisson { window, expected } => {
            sim_poisson(&window, expected, Label::Feature, &mut rng)?
        }
        FeatureSpec::Cluster {
            window,
            kappa,
            u,
            radius,
        } => sim_cluster(&window, kappa, u, radius, &mut rng)?,
    };
    let mut pairs: Vec<(Point, Label)> = clutter
        .points()
        .iter()
        .map(|&p| (p, Label::Clutter))
        .chain(feature.points().iter().map(|&p| (p, Label::Feature)))
        .collect();
    pairs.shuffle(&mut rng);
    let window = spec.clutter_window.union(feature.window());
    let (points, truth): (Vec<Point>, Vec<Label>) = pairs.into_iter().unzip();
    PointPattern::new(points, window)?.with_truth(truth)
}

/// Feature is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRates {
    pub tpr: f64,
    /// `fp / (fp + tn)`.
    pub fpr: f64,
    pub acc: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// TPR, FPR and accuracy of `pred` against `truth`. Rates with an empty
/// denominator are reported as 0.
pub fn rates(pred: &Labels, truth: Option<&[Label]>) -> Result<ConfusionRates> {
    let truth = truth.ok_or(Error::MissingTruth)?;
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.is_feature.iter().zip(truth) {
        match (p, t.is_feature()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionRates {
        tpr: ratio(tp, tp + fn_),
        fpr: ratio(fp, fp + tn),
        acc: ratio(tp + tn, truth.len()),
        tp,
        fp,
        tn,
        fn_,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub scenarios: Vec<ScenarioId>,
    pub k_modes: Vec<KMode>,
    /// Deepest iteration reported; rows are emitted for depths `1..=iterations`.
    pub iterations: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Candidate orders for automatic selection; defaults to `1..=35`.
    #[serde(default)]
    pub k_set: Option<Vec<usize>>,
    #[serde(default)]
    pub em: Option<EmConfig>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("scenarios: must not be empty".into()));
        }
        if self.k_modes.is_empty() {
            return Err(Error::InvalidConfig("k_modes: must not be empty".into()));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations: must be >= 1".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates: must be >= 1".into()));
        }
        if let Some(ks) = &self.k_set {
            if ks.is_empty() || ks[0] < 1 || ks.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "k_set: must be non-empty, positive and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: ScenarioId,
    pub k_mode: KMode,
    pub iteration: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub acc: f64,
    pub se_tpr: f64,
    pub se_fpr: f64,
    pub se_acc: f64,
    pub replicates: usize,
    pub seed: u64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-replicate rates for every (k mode, depth): `[mode][depth]`.
fn replicate_rates(
    pattern: &PointPattern,
    config: &BenchConfig,
    k_set: &[usize],
    em: &EmConfig,
) -> Result<Vec<Vec<ConfusionRates>>> {
    config
        .k_modes
        .iter()
        .map(|&mode| {
            run_fixed_depth(pattern, mode, k_set, config.iterations, em)?
                .iter()
                .map(|labels| rates(labels, pattern.truth()))
                .collect()
        })
        .collect()
}

/// Mean classification rates over `replicates` simulated patterns for each
/// scenario, k mode and iteration depth.
///
/// Replicate `r` of every scenario is simulated from stream `r` of the master
/// seed, so all k modes see the same patterns. Each depth forces exactly that
/// many classification rounds.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let k_set: Vec<usize> = config
        .k_set
        .clone()
        .unwrap_or_else(|| (1..=DEFAULT_K_MAX).collect());
    let em = config.em.unwrap_or_default();
    let mut rows = Vec::new();
    for &scenario in &config.scenarios {
        let per_rep: Vec<Vec<Vec<ConfusionRates>>> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let seed = child_rng(config.seed, r).random::<u64>();
                let pattern = make_scenario(&ScenarioSpec::preset(scenario, seed))?;
                replicate_rates(&pattern, config, &k_set, &em)
            })
            .collect::<Result<_>>()?;
        for (m, &k_mode) in config.k_modes.iter().enumerate() {
            for depth in 0..config.iterations {
                let pick = |f: fn(&ConfusionRates) -> f64| -> Vec<f64> {
                    per_rep.iter().map(|rep| f(&rep[m][depth])).collect()
                };
                let (tpr, se_tpr) = mean_se(&pick(|r| r.tpr));
                let (fpr, se_fpr) = mean_se(&pick(|r| r.fpr));
                let (acc, se_acc) = mean_se(&pick(|r| r.acc));
                rows.push(BenchRow {
                    scenario,
                    k_mode,
                    iteration: depth + 1,
                    tpr,
                    fpr,
                    acc,
                    se_tpr,
                    se_fpr,
                    se_acc,
                    replicates: config.replicates,
                    seed: config.seed,
                });
            }
        }
    }
    Ok(rows)
}
