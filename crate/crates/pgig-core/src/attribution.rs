//! The eleven attribution methods behind one interface.
//!
//! Every method has the signature
//! `(net, x, target, config) -> AttributionMap` and returns per-feature
//! importance scores with the same shape as `x`. Multi-output networks are
//! explained for one target class; the seeding convention is centralized in
//! [`Network::output_grad_seed`]: one-hot 1.0 for standard and guided
//! backward passes, one-hot output value for pattern mode. Path methods can
//! optionally run the pattern backward with per-point output-value seeds
//! via [`MethodConfig::pgig_seed`]; the default keeps unit seeds so the
//! linear-case reduction to integrated gradients holds.
//!
//! Sample and path aggregation uses compensated (double-double) summation
//! with a single final rounding. Constant integrands therefore average
//! exactly, which is what makes the collapse identities (sigma = 0,
//! all-linear networks) hold bit for bit instead of merely approximately.
//! Zero-noise configurations short-circuit the sampling loop: the noise
//! term is identically zero, so one evaluation per point is the same
//! computation.

use crate::compensated::Dd;
use crate::error::{Error, Result};
use crate::network::{BackwardMode, Network};
use crate::rng::RandomSource;
use crate::tensor::Tensor;

/// Method registry. `Method::ALL` fixes the canonical ordering used by the
/// degradation benchmark and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    VanillaGradient,
    GradientTimesInput,
    IntegratedGradients,
    SmoothgradSquared,
    Vargrad,
    SmoothgradIg,
    ExpectedGradients,
    GuidedBackprop,
    PatternAttribution,
    Pgig,
    RandomBaseline,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::VanillaGradient,
        Method::GradientTimesInput,
        Method::IntegratedGradients,
        Method::SmoothgradSquared,
        Method::Vargrad,
        Method::SmoothgradIg,
        Method::ExpectedGradients,
        Method::GuidedBackprop,
        Method::PatternAttribution,
        Method::Pgig,
        Method::RandomBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::VanillaGradient => "vanilla_gradient",
            Method::GradientTimesInput => "gradient_times_input",
            Method::IntegratedGradients => "integrated_gradients",
            Method::SmoothgradSquared => "smoothgrad_squared",
            Method::Vargrad => "vargrad",
            Method::SmoothgradIg => "smoothgrad_ig",
            Method::ExpectedGradients => "expected_gradients",
            Method::GuidedBackprop => "guided_backprop",
            Method::PatternAttribution => "pattern_attribution",
            Method::Pgig => "pgig",
            Method::RandomBaseline => "random_baseline",
        }
    }

    pub fn from_name(name: &str) -> Result<Method> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == name)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!(
                    "unknown method {name:?}; valid methods: {}",
                    valid.join(", ")
                ))
            })
    }

    /// Pattern attribution and the pattern-guided path method need a
    /// pattern on every layer.
    pub fn requires_patterns(self) -> bool {
        matches!(self, Method::PatternAttribution | Method::Pgig)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum Baseline {
    /// All-zero reference input.
    Zero,
    /// Explicit reference; must match the input shape.
    Explicit(Tensor),
}

/// Backward seed used at each point of the pattern-guided path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSeed {
    /// One-hot 1.0, the convention of plain integrated gradients (default).
    Unit,
    /// One-hot output value at each path point, i.e. pattern attribution
    /// applied along the path.
    OutputValue,
}

#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub baseline: Baseline,
    /// Path steps `m` for the path methods.
    pub steps: usize,
    /// Noise samples `n` for the perturbation methods.
    pub samples: usize,
    pub noise_mu: f64,
    /// Noise standard deviation. The conventional noise level is quoted as
    /// a variance of 0.15, hence the default sqrt(0.15).
    pub noise_sigma: f64,
    /// Reference draws for expected gradients.
    pub baseline_draws: usize,
    pub random_seed: u64,
    /// Reference dataset for expected gradients.
    pub references: Option<Vec<Tensor>>,
    pub pgig_seed: PathSeed,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            baseline: Baseline::Zero,
            steps: 25,
            samples: 25,
            noise_mu: 0.0,
            noise_sigma: 0.15f64.sqrt(),
            baseline_draws: 49,
            random_seed: 0,
            references: None,
            pgig_seed: PathSeed::Unit,
        }
    }
}

impl MethodConfig {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Argument("steps must be >= 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Argument("samples must be >= 1".into()));
        }
        if self.baseline_draws == 0 {
            return Err(Error::Argument("baseline_draws must be >= 1".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Argument(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Per-feature importance scores for one input, plus provenance.
#[derive(Debug, Clone)]
pub struct AttributionMap {
    method: Method,
    values: Tensor,
    target: Option<usize>,
    params: Vec<(String, String)>,
}

impl AttributionMap {
    fn new(
        method: Method,
        values: Tensor,
        target: Option<usize>,
        params: Vec<(String, String)>,
    ) -> Result<Self> {
        values.ensure_finite(method.name())?;
        Ok(AttributionMap {
            method,
            values,
            target,
            params,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn target(&self) -> Option<usize> {
        self.target
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    /// Wraps raw values so ranking helpers can be tested directly.
    #[cfg(test)]
    pub(crate) fn for_tests(values: Tensor) -> AttributionMap {
        AttributionMap {
            method: Method::RandomBaseline,
            values,
            target: None,
            params: Vec::new(),
        }
    }
}

/// Dispatch by method.
pub fn explain(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    method: Method,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    match method {
        Method::VanillaGradient => vanilla_gradient(net, x, target, cfg),
        Method::GradientTimesInput => gradient_times_input(net, x, target, cfg),
        Method::IntegratedGradients => integrated_gradients(net, x, target, cfg),
        Method::SmoothgradSquared => smoothgrad_squared(net, x, target, cfg),
        Method::Vargrad => vargrad(net, x, target, cfg),
        Method::SmoothgradIg => smoothgrad_ig(net, x, target, cfg),
        Method::ExpectedGradients => expected_gradients(net, x, target, cfg),
        Method::GuidedBackprop => guided_backprop(net, x, target, cfg),
        Method::PatternAttribution => pattern_attribution(net, x, target, cfg),
        Method::Pgig => pgig(net, x, target, cfg),
        Method::RandomBaseline => random_baseline(net, x, target, cfg),
    }
}

// --- compensated accumulation -------------------------------------------

/// Mean of per-feature samples produced by `sample`, compensated.
fn compensated_mean(
    dim: usize,
    count: usize,
    mut sample: impl FnMut(usize) -> Result<Tensor>,
) -> Result<Vec<f64>> {
    let mut acc = vec![Dd::ZERO; dim];
    for j in 0..count {
        let g = sample(j)?;
        for (a, v) in acc.iter_mut().zip(g.data()) {
            *a = a.add(*v);
        }
    }
    let n = count as f64;
    Ok(acc.iter().map(|a| a.div_scalar(n).value()).collect())
}

// --- shared plumbing ------------------------------------------------------

fn validate_input(net: &Network, x: &Tensor) -> Result<()> {
    if x.rank() != 1 || x.len() != net.input_dim() {
        return Err(Error::Dimension {
            context: "attribution input",
            expected: vec![net.input_dim()],
            found: x.shape().to_vec(),
        });
    }
    Ok(())
}

fn resolve_baseline(x: &Tensor, cfg: &MethodConfig) -> Result<Tensor> {
    match &cfg.baseline {
        Baseline::Zero => Ok(Tensor::zeros(vec![x.len()])),
        Baseline::Explicit(b) => {
            if b.shape() != x.shape() {
                return Err(Error::Dimension {
                    context: "attribution baseline",
                    expected: x.shape().to_vec(),
                    found: b.shape().to_vec(),
                });
            }
            Ok(b.clone())
        }
    }
}

/// Adds method/step context to numeric failures, leaving other errors as-is.
fn step_context(err: Error, method: Method, step: &str) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!("{} {step}: {msg}", method.name())),
        other => other,
    }
}

/// Gradient of the explained output at `point` under `mode`, seeded by the
/// standard convention (`seed_mode` selects the unit vs output-value seed).
fn gradient_at(
    net: &Network,
    point: &Tensor,
    target: Option<usize>,
    mode: BackwardMode,
    seed_mode: BackwardMode,
) -> Result<Tensor> {
    let trace = net.forward(point)?;
    let seed = net.output_grad_seed(&trace, target, seed_mode)?;
    net.backward(&trace, &seed, mode)
}

fn path_point(x: &Tensor, baseline: &Tensor, t: f64) -> Result<Tensor> {
    Tensor::vector(
        baseline
            .data()
            .iter()
            .zip(x.data())
            .map(|(b, xv)| b + t * (xv - b))
            .collect(),
    )
}

/// Path aggregation common to the three path methods:
/// `phi_i = (x_i - baseline_i) * mean_k integrand(k)_i`, compensated.
fn path_sum(
    x: &Tensor,
    baseline: &Tensor,
    steps: usize,
    mut integrand: impl FnMut(usize, f64) -> Result<Tensor>,
) -> Result<Tensor> {
    let mut acc = vec![Dd::ZERO; x.len()];
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        let g = integrand(k, t)?;
        for (a, v) in acc.iter_mut().zip(g.data()) {
            *a = a.add(*v);
        }
    }
    let m = steps as f64;
    let values: Vec<f64> = acc
        .iter()
        .zip(x.data().iter().zip(baseline.data()))
        .map(|(a, (xv, bv))| a.div_scalar(m).mul_scalar(xv - bv).value())
        .collect();
    Tensor::vector(values)
}

/// Shared implementation of the path methods (standard or pattern mode);
/// the zero-noise collapse of the smoothed variant reuses it verbatim.
fn path_gradient_map(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
    mode: BackwardMode,
    seed_mode: BackwardMode,
    method: Method,
) -> Result<Tensor> {
    let baseline = resolve_baseline(x, cfg)?;
    path_sum(x, &baseline, cfg.steps, |k, t| {
        let point = path_point(x, &baseline, t)?;
        gradient_at(net, &point, target, mode, seed_mode)
            .map_err(|e| step_context(e, method, &format!("path step {k}")))
    })
}

fn base_params(cfg: &MethodConfig) -> Vec<(String, String)> {
    vec![("seed".into(), cfg.random_seed.to_string())]
}

// --- the eleven methods ---------------------------------------------------

/// Plain gradient at the input, one-hot seed.
pub fn vanilla_gradient(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let grad = gradient_at(net, x, target, BackwardMode::Standard, BackwardMode::Standard)
        .map_err(|e| step_context(e, Method::VanillaGradient, "gradient"))?;
    AttributionMap::new(Method::VanillaGradient, grad, target, Vec::new())
}

/// Gradient map multiplied elementwise by the input.
pub fn gradient_times_input(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    let grad = vanilla_gradient(net, x, target, cfg)?;
    let values = grad.values().hadamard(x)?;
    AttributionMap::new(Method::GradientTimesInput, values, target, Vec::new())
}

/// Path integral of standard gradients from the baseline to the input:
/// `phi_i = (x_i - b_i)/m * sum_k grad f(b + (k/m)(x - b))_i`.
pub fn integrated_gradients(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let values = path_gradient_map(
        net,
        x,
        target,
        cfg,
        BackwardMode::Standard,
        BackwardMode::Standard,
        Method::IntegratedGradients,
    )?;
    let mut params = base_params(cfg);
    params.push(("steps".into(), cfg.steps.to_string()));
    AttributionMap::new(Method::IntegratedGradients, values, target, params)
}

/// Mean of squared gradients at noise-perturbed inputs.
pub fn smoothgrad_squared(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let method = Method::SmoothgradSquared;
    let values = if cfg.noise_sigma == 0.0 {
        let g = gradient_at(net, x, target, BackwardMode::Standard, BackwardMode::Standard)
            .map_err(|e| step_context(e, method, "gradient"))?;
        g.hadamard(&g)?
    } else {
        let mut rng = RandomSource::new(cfg.random_seed);
        let mean = compensated_mean(x.len(), cfg.samples, |j| {
            let noisy = perturb_input(x, cfg, &mut rng)?;
            let g = gradient_at(net, &noisy, target, BackwardMode::Standard, BackwardMode::Standard)
                .map_err(|e| step_context(e, method, &format!("sample {j}")))?;
            g.hadamard(&g)
        })?;
        Tensor::vector(mean)?
    };
    let mut params = base_params(cfg);
    params.push(("samples".into(), cfg.samples.to_string()));
    params.push(("noise_sigma".into(), cfg.noise_sigma.to_string()));
    AttributionMap::new(method, values, target, params)
}

/// Per-feature sample variance of gradients at noise-perturbed inputs.
/// Degenerate configurations (sigma = 0 or a single sample) have no spread
/// and yield the zero map.
pub fn vargrad(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let method = Method::Vargrad;
    let values = if cfg.noise_sigma == 0.0 || cfg.samples < 2 {
        Tensor::zeros(vec![x.len()])
    } else {
        let mut rng = RandomSource::new(cfg.random_seed);
        let mut grads = Vec::with_capacity(cfg.samples);
        for j in 0..cfg.samples {
            let noisy = perturb_input(x, cfg, &mut rng)?;
            grads.push(
                gradient_at(net, &noisy, target, BackwardMode::Standard, BackwardMode::Standard)
                    .map_err(|e| step_context(e, method, &format!("sample {j}")))?,
            );
        }
        let mean = compensated_mean(x.len(), cfg.samples, |j| Ok(grads[j].clone()))?;
        let mut variance = vec![0.0; x.len()];
        for (i, slot) in variance.iter_mut().enumerate() {
            let mut acc = Dd::ZERO;
            for g in &grads {
                let d = g.get(i) - mean[i];
                acc = acc.add(d * d);
            }
            *slot = acc.div_scalar((cfg.samples - 1) as f64).value();
        }
        Tensor::vector(variance)?
    };
    let mut params = base_params(cfg);
    params.push(("samples".into(), cfg.samples.to_string()));
    params.push(("noise_sigma".into(), cfg.noise_sigma.to_string()));
    AttributionMap::new(method, values, target, params)
}

/// Integrated gradients with noise: fresh perturbed inputs are drawn for
/// every (path step, sample) pair and averaged inside each step. Zero noise
/// collapses to plain integrated gradients, the identical computation.
pub fn smoothgrad_ig(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let method = Method::SmoothgradIg;
    let values = if cfg.noise_sigma == 0.0 {
        path_gradient_map(
            net,
            x,
            target,
            cfg,
            BackwardMode::Standard,
            BackwardMode::Standard,
            method,
        )?
    } else {
        let baseline = resolve_baseline(x, cfg)?;
        let mut rng = RandomSource::new(cfg.random_seed);
        path_sum(x, &baseline, cfg.steps, |k, t| {
            let mean = compensated_mean(x.len(), cfg.samples, |j| {
                let noisy = perturb_input(x, cfg, &mut rng)?;
                let point = path_point(&noisy, &baseline, t)?;
                gradient_at(net, &point, target, BackwardMode::Standard, BackwardMode::Standard)
                    .map_err(|e| step_context(e, method, &format!("path step {k} sample {j}")))
            })?;
            Tensor::vector(mean)
        })?
    };
    let mut params = base_params(cfg);
    params.push(("steps".into(), cfg.steps.to_string()));
    params.push(("samples".into(), cfg.samples.to_string()));
    params.push(("noise_sigma".into(), cfg.noise_sigma.to_string()));
    AttributionMap::new(method, values, target, params)
}

/// Monte-Carlo expectation over reference baselines and path positions:
/// `E[(x_i - b_i) * grad f(b + alpha (x - b))_i]` with `b` drawn from the
/// reference dataset and alpha uniform on [0, 1).
pub fn expected_gradients(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let method = Method::ExpectedGradients;
    let references = cfg.references.as_ref().ok_or_else(|| {
        Error::Config("expected_gradients requires a reference dataset in the config".into())
    })?;
    if references.is_empty() {
        return Err(Error::Config(
            "expected_gradients reference dataset is empty".into(),
        ));
    }
    for r in references {
        if r.shape() != x.shape() {
            return Err(Error::Dimension {
                context: "expected_gradients reference",
                expected: x.shape().to_vec(),
                found: r.shape().to_vec(),
            });
        }
    }
    let mut rng = RandomSource::new(cfg.random_seed);
    let mean = compensated_mean(x.len(), cfg.baseline_draws, |j| {
        let reference = &references[rng.below(references.len())];
        let alpha = rng.uniform();
        let point = path_point(x, reference, alpha)?;
        let g = gradient_at(net, &point, target, BackwardMode::Standard, BackwardMode::Standard)
            .map_err(|e| step_context(e, method, &format!("draw {j}")))?;
        Tensor::vector(
            g.data()
                .iter()
                .zip(x.data().iter().zip(reference.data()))
                .map(|(gv, (xv, bv))| (xv - bv) * gv)
                .collect(),
        )
    })?;
    let mut params = base_params(cfg);
    params.push(("baseline_draws".into(), cfg.baseline_draws.to_string()));
    AttributionMap::new(method, Tensor::vector(mean)?, target, params)
}

/// Guided backward pass: ReLU stages zero upstream gradient entries with
/// non-positive pre-activations or negative incoming gradients.
pub fn guided_backprop(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let grad = gradient_at(net, x, target, BackwardMode::Guided, BackwardMode::Guided)
        .map_err(|e| step_context(e, Method::GuidedBackprop, "gradient"))?;
    AttributionMap::new(Method::GuidedBackprop, grad, target, Vec::new())
}

/// Pattern-modified backward pass at the input, seeded with the output
/// value.
pub fn pattern_attribution(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let grad = gradient_at(net, x, target, BackwardMode::Pattern, BackwardMode::Pattern)
        .map_err(|e| step_context(e, Method::PatternAttribution, "gradient"))?;
    AttributionMap::new(Method::PatternAttribution, grad, target, Vec::new())
}

/// Pattern-guided path method: the integrated-gradients path sum with the
/// pattern-modified backward at every path point.
pub fn pgig(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let seed_mode = match cfg.pgig_seed {
        PathSeed::Unit => BackwardMode::Standard,
        PathSeed::OutputValue => BackwardMode::Pattern,
    };
    let values = path_gradient_map(
        net,
        x,
        target,
        cfg,
        BackwardMode::Pattern,
        seed_mode,
        Method::Pgig,
    )?;
    let mut params = base_params(cfg);
    params.push(("steps".into(), cfg.steps.to_string()));
    AttributionMap::new(Method::Pgig, values, target, params)
}

/// Seeded i.i.d. uniform values on [0, 1); the reference ordering for the
/// degradation benchmark.
pub fn random_baseline(
    net: &Network,
    x: &Tensor,
    target: Option<usize>,
    cfg: &MethodConfig,
) -> Result<AttributionMap> {
    validate_input(net, x)?;
    cfg.validate()?;
    let mut rng = RandomSource::new(cfg.random_seed);
    let values = Tensor::vector((0..x.len()).map(|_| rng.uniform()).collect())?;
    AttributionMap::new(Method::RandomBaseline, values, target, base_params(cfg))
}

fn perturb_input(x: &Tensor, cfg: &MethodConfig, rng: &mut RandomSource) -> Result<Tensor> {
    Tensor::vector(
        x.data()
            .iter()
            .map(|v| v + rng.gaussian(cfg.noise_mu, cfg.noise_sigma))
            .collect(),
    )
}
