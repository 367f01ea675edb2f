//! Combined saturation/distractor stress test.
//!
//! Target function `y = 1 - relu(1 - z)` over a z grid, two-dimensional
//! inputs `x = s + d` where the signal `s = (z, 0)` co-varies with the
//! target and the distractor `d = (eps, eps)` is pure noise, and an
//! analytically constructed two-layer model that cancels the distractor
//! exactly. The comparison runs integrated gradients, pattern attribution
//! and the pattern-guided path method over every dataset point.

use crate::attribution::{self, AttributionMap, Baseline, MethodConfig};
use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network, OutputMode};
use crate::patterns::{attach_patterns, LayerPatterns, PatternSet};
use crate::rng::RandomSource;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct StressConfig {
    pub z_start: f64,
    pub z_end: f64,
    pub z_step: f64,
    /// Distractor noise parameters; the noise scale is chosen so the
    /// distractor is clearly visible without dominating the signal.
    pub noise_mu: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Path steps for the two path methods.
    pub steps: usize,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            z_start: -2.0,
            z_end: 2.0,
            z_step: 0.01,
            noise_mu: 0.0,
            noise_sigma: 0.25,
            seed: 42,
            steps: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StressPoint {
    pub z: f64,
    /// Target 1 - relu(1 - z).
    pub y: f64,
    /// One noise draw; the distractor is (eps, eps).
    pub eps: f64,
    pub signal: Tensor,
    pub distractor: Tensor,
    /// signal + distractor.
    pub input: Tensor,
}

#[derive(Debug, Clone)]
pub struct StressDataset {
    points: Vec<StressPoint>,
}

impl StressDataset {
    pub fn points(&self) -> &[StressPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The target function.
pub fn target(z: f64) -> f64 {
    1.0 - (1.0 - z).max(0.0)
}

/// The analytic two-layer model: weights (-1, 1) with unit bias and ReLU,
/// then weight (-1) with unit bias, raw output. Computes
/// `1 - relu(1 - (x1 - x2))`, so `f(s + d) = 1 - relu(1 - z)` for any
/// distractor `(eps, eps)`.
pub fn build_stress_model() -> Network {
    let first = Layer::new(
        Tensor::matrix(1, 2, vec![-1.0, 1.0]).expect("static shape"),
        Tensor::vector(vec![1.0]).expect("static shape"),
        Activation::Relu,
    )
    .expect("static layer");
    let second = Layer::new(
        Tensor::matrix(1, 1, vec![-1.0]).expect("static shape"),
        Tensor::vector(vec![1.0]).expect("static shape"),
        Activation::Linear,
    )
    .expect("static layer");
    Network::new(vec![first, second], OutputMode::Raw).expect("static network")
}

/// Closed-form patterns of the stress model: (-1, 0) for the first layer
/// and (-1) for the second. Both satisfy `w^T p = 1`.
pub fn analytic_patterns() -> PatternSet {
    let first = LayerPatterns::new(
        Tensor::matrix(1, 2, vec![-1.0, 0.0]).expect("static shape"),
        vec![true],
    )
    .expect("static patterns");
    let second = LayerPatterns::new(
        Tensor::matrix(1, 1, vec![-1.0]).expect("static shape"),
        vec![true],
    )
    .expect("static patterns");
    PatternSet::new(vec![first, second])
}

/// The stress model with its analytic patterns attached.
pub fn stress_model_with_patterns() -> Network {
    attach_patterns(&build_stress_model(), &analytic_patterns()).expect("static shapes agree")
}

/// Generates the z grid (endpoint inclusive) with one independent noise
/// draw per point.
pub fn generate_dataset(cfg: &StressConfig, rng: &mut RandomSource) -> Result<StressDataset> {
    if cfg.z_step <= 0.0 {
        return Err(Error::Argument(format!(
            "z_step must be > 0, got {}",
            cfg.z_step
        )));
    }
    if cfg.noise_sigma < 0.0 {
        return Err(Error::Argument(format!(
            "noise_sigma must be >= 0, got {}",
            cfg.noise_sigma
        )));
    }
    let count = ((cfg.z_end - cfg.z_start) / cfg.z_step).round() as usize + 1;
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let z = cfg.z_start + k as f64 * cfg.z_step;
        let eps = rng.gaussian(cfg.noise_mu, cfg.noise_sigma);
        let signal = Tensor::vector(vec![z, 0.0])?;
        let distractor = Tensor::vector(vec![eps, eps])?;
        let input = signal.add(&distractor)?;
        points.push(StressPoint {
            z,
            y: target(z),
            eps,
            signal,
            distractor,
            input,
        });
    }
    Ok(StressDataset { points })
}

/// Per-point attribution values of one method, split by feature.
#[derive(Debug, Clone, Default)]
pub struct MethodSeries {
    /// Feature 1 (the signal dimension).
    pub signal: Vec<f64>,
    /// Feature 2 (the distractor dimension).
    pub distractor: Vec<f64>,
}

impl MethodSeries {
    fn push(&mut self, map: &AttributionMap) {
        self.signal.push(map.values().get(0));
        self.distractor.push(map.values().get(1));
    }

    pub fn mean_abs_signal(&self) -> f64 {
        mean_abs(&self.signal)
    }

    pub fn mean_abs_distractor(&self) -> f64 {
        mean_abs(&self.distractor)
    }
}

fn mean_abs(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone)]
pub struct StressComparison {
    pub dataset: StressDataset,
    pub ig: MethodSeries,
    pub pa: MethodSeries,
    pub pgig: MethodSeries,
}

/// Runs the three-method comparison over a freshly generated dataset.
///
/// Path methods use a zero baseline; integrated gradients seeds the
/// backward pass with 1.0, pattern attribution with the output value.
pub fn run_stress_comparison(cfg: &StressConfig) -> Result<StressComparison> {
    let mut rng = RandomSource::new(cfg.seed);
    let dataset = generate_dataset(cfg, &mut rng)?;
    let net = stress_model_with_patterns();
    let method_cfg = MethodConfig {
        baseline: Baseline::Zero,
        steps: cfg.steps,
        ..MethodConfig::default()
    };

    let mut ig = MethodSeries::default();
    let mut pa = MethodSeries::default();
    let mut pgig = MethodSeries::default();
    for point in &dataset.points {
        ig.push(&attribution::integrated_gradients(
            &net,
            &point.input,
            None,
            &method_cfg,
        )?);
        pa.push(&attribution::pattern_attribution(
            &net,
            &point.input,
            None,
            &method_cfg,
        )?);
        pgig.push(&attribution::pgig(&net, &point.input, None, &method_cfg)?);
    }
    Ok(StressComparison {
        dataset,
        ig,
        pa,
        pgig,
    })
}

/// Correlation between the signal-feature series of the pattern-guided
/// method and z, restricted to the open ramp (-1, 1); used by the
/// reporting layer and the test suite.
pub fn ramp_correlation(comparison: &StressComparison) -> f64 {
    let pairs: Vec<(f64, f64)> = comparison
        .dataset
        .points
        .iter()
        .zip(&comparison.pgig.signal)
        .filter(|(p, _)| p.z > -1.0 && p.z < 1.0)
        .map(|(p, phi)| (p.z, *phi))
        .collect();
    correlation(&pairs)
}

/// Pearson correlation of (x, y) pairs.
pub fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return 0.0;
    }
    let mean_x = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in pairs {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x) * (x - mean_x);
        var_y += (y - mean_y) * (y - mean_y);
    }
    if var_x == 0.0 || var_y == 0.0 {
        return 0.0;
    }
    cov / (var_x.sqrt() * var_y.sqrt())
}

/// Checks the model identity f((z,0) + (e,e)) = 1 - relu(1 - z) over the
/// whole grid with random noise; used by construction tests.
pub fn verify_model_identity(cfg: &StressConfig, rng: &mut RandomSource) -> Result<f64> {
    let net = build_stress_model();
    let dataset = generate_dataset(cfg, rng)?;
    let mut worst: f64 = 0.0;
    for point in dataset.points() {
        let out = net.forward(&point.input)?.output().get(0);
        worst = worst.max((out - point.y).abs());
    }
    Ok(worst)
}
