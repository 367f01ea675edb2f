//! Synthetic image task and a plain SGD trainer, so the degradation
//! benchmark explains a genuinely learned model.
//!
//! Images are square, single-channel, normalized within [-1, 1]. Each image
//! is a class template scaled by a per-image amplitude plus a structured
//! distractor: one noise value shared across all pixels (the analogue of a
//! distractor direction the model must cancel) and independent per-pixel
//! noise. Four classes: horizontal bar, vertical bar, cross, diagonal.
//!
//! Training is single-threaded minibatch gradient descent on cross-entropy
//! over softmax outputs, deterministic under the configured seed; the best
//! validation-accuracy network is returned. Weights initialize uniformly in
//! [-r, r] with r = sqrt(6 / (fan_in + fan_out)).

use crate::error::{Error, Result};
use crate::network::{Activation, Layer, Network, OutputMode};
use crate::patterns::{self, PatternSet};
use crate::rng::RandomSource;
use crate::tensor::Tensor;

pub const CLASS_NAMES: [&str; 4] = ["horizontal_bar", "vertical_bar", "cross", "diagonal"];

#[derive(Debug, Clone)]
pub struct TaskConfig {
    /// Image side length; patches and templates assume side >= 8.
    pub image_side: usize,
    /// Number of classes, 2..=4, drawn from the template list in order.
    pub class_count: usize,
    pub train_size: usize,
    pub val_size: usize,
    /// Per-image template amplitude is drawn from [1 - jitter, 1].
    pub amplitude_jitter: f64,
    /// Standard deviation of the noise value shared across all pixels.
    pub shared_noise_sigma: f64,
    /// Standard deviation of the independent per-pixel noise.
    pub pixel_noise_sigma: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            image_side: 16,
            class_count: 4,
            train_size: 2000,
            val_size: 500,
            amplitude_jitter: 0.25,
            shared_noise_sigma: 0.2,
            pixel_noise_sigma: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub label: usize,
    pub pixels: Tensor,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub config: TaskConfig,
    pub templates: Vec<Tensor>,
    pub train: Vec<LabeledImage>,
    pub val: Vec<LabeledImage>,
}

impl Task {
    pub fn class_count(&self) -> usize {
        self.templates.len()
    }

    pub fn pixel_count(&self) -> usize {
        self.config.image_side * self.config.image_side
    }
}

/// The four class templates as flat {0, 1} images.
pub fn class_templates(side: usize) -> Result<Vec<Tensor>> {
    if side < 8 {
        return Err(Error::Argument(format!(
            "image side must be >= 8, got {side}"
        )));
    }
    let bar_lo = side / 4;
    let bar_hi = bar_lo + 1;
    let cross_lo = (3 * side) / 4 - 1;
    let cross_hi = cross_lo + 1;
    let mut templates = Vec::with_capacity(4);
    for class in 0..4 {
        let mut pixels = vec![0.0; side * side];
        for r in 0..side {
            for c in 0..side {
                let on = match class {
                    0 => r == bar_lo || r == bar_hi,
                    1 => c == bar_lo || c == bar_hi,
                    2 => r == cross_lo || r == cross_hi || c == cross_lo || c == cross_hi,
                    _ => r == c || r == c + 1,
                };
                if on {
                    pixels[r * side + c] = 1.0;
                }
            }
        }
        templates.push(Tensor::vector(pixels)?);
    }
    Ok(templates)
}

/// Fraction of the smaller template covered by the overlap of two
/// templates; the classes are designed to keep this below 0.3.
pub fn template_overlap(a: &Tensor, b: &Tensor) -> f64 {
    let active_a = a.data().iter().filter(|v| **v != 0.0).count();
    let active_b = b.data().iter().filter(|v| **v != 0.0).count();
    let joint = a
        .data()
        .iter()
        .zip(b.data())
        .filter(|(x, y)| **x != 0.0 && **y != 0.0)
        .count();
    joint as f64 / active_a.min(active_b) as f64
}

/// Generates class-balanced train/val splits, fully determined by the
/// config seed.
pub fn generate_task(cfg: &TaskConfig) -> Result<Task> {
    if cfg.amplitude_jitter < 0.0 || cfg.amplitude_jitter > 1.0 {
        return Err(Error::Argument(format!(
            "amplitude_jitter must be in [0, 1], got {}",
            cfg.amplitude_jitter
        )));
    }
    if cfg.shared_noise_sigma < 0.0 || cfg.pixel_noise_sigma < 0.0 {
        return Err(Error::Argument("noise sigmas must be >= 0".into()));
    }
    if cfg.train_size == 0 || cfg.val_size == 0 {
        return Err(Error::Argument("split sizes must be positive".into()));
    }
    if !(2..=4).contains(&cfg.class_count) {
        return Err(Error::Argument(format!(
            "class_count must be in 2..=4, got {}",
            cfg.class_count
        )));
    }
    let mut templates = class_templates(cfg.image_side)?;
    templates.truncate(cfg.class_count);
    let mut rng = RandomSource::new(cfg.seed);
    let make_split = |count: usize, rng: &mut RandomSource| -> Result<Vec<LabeledImage>> {
        let mut images = Vec::with_capacity(count);
        for i in 0..count {
            let label = i % templates.len();
            let template = &templates[label];
            let amplitude = 1.0 - cfg.amplitude_jitter * rng.uniform();
            let shared = rng.gaussian(0.0, cfg.shared_noise_sigma);
            let pixels: Vec<f64> = template
                .data()
                .iter()
                .map(|t| {
                    let v = t * amplitude + shared + rng.gaussian(0.0, cfg.pixel_noise_sigma);
                    v.clamp(-1.0, 1.0)
                })
                .collect();
            images.push(LabeledImage {
                label,
                pixels: Tensor::vector(pixels)?,
            });
        }
        Ok(images)
    };
    let train = make_split(cfg.train_size, &mut rng)?;
    let val = make_split(cfg.val_size, &mut rng)?;
    Ok(Task {
        config: cfg.clone(),
        templates,
        train,
        val,
    })
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 32],
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            seed: 11,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::Argument("learning rate must be >= 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Argument(
                "epochs and batch size must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Argument("hidden sizes must be positive".into()));
        }
        Ok(())
    }
}

/// ReLU hidden layers, linear logits, softmax output; uniform init in
/// [-r, r] with r = sqrt(6 / (fan_in + fan_out)), zero biases.
pub fn init_network(
    input_dim: usize,
    hidden: &[usize],
    classes: usize,
    rng: &mut RandomSource,
) -> Result<Network> {
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(classes);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (idx, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = Tensor::matrix(
            fan_out,
            fan_in,
            (0..fan_in * fan_out)
                .map(|_| (2.0 * rng.uniform() - 1.0) * r)
                .collect(),
        )?;
        let bias = Tensor::vector(vec![0.0; fan_out])?;
        let activation = if idx + 1 == dims.len() - 1 {
            Activation::Linear
        } else {
            Activation::Relu
        };
        layers.push(Layer::new(weights, bias, activation)?);
    }
    Network::new(layers, OutputMode::Softmax)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
}

/// Fraction of examples whose argmax output matches the label.
pub fn evaluate_accuracy(net: &Network, data: &[LabeledImage]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("accuracy needs a non-empty split".into()));
    }
    let mut hits = 0usize;
    for example in data {
        let output = net.forward(&example.pixels)?;
        if argmax(output.output()) == example.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

pub fn argmax(t: &Tensor) -> usize {
    let mut best = 0;
    for (i, v) in t.data().iter().enumerate() {
        if *v > t.get(best) {
            best = i;
        }
    }
    best
}

/// Minibatch SGD on cross-entropy; returns the network with the best
/// validation accuracy seen (the initial network counts as epoch 0).
pub fn train(task: &Task, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let master = RandomSource::new(cfg.seed);
    let mut init_rng = master.derive(0);
    let mut shuffle_rng = master.derive(1);

    let mut net = init_network(
        task.pixel_count(),
        &cfg.hidden,
        task.class_count(),
        &mut init_rng,
    )?;

    let mut best_acc = evaluate_accuracy(&net, &task.val)?;
    let mut best_net = net.clone();
    let mut best_epoch = 0usize;

    let mut indices: Vec<usize> = (0..task.train.len()).collect();
    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut indices);
        for batch in indices.chunks(cfg.batch_size) {
            step_batch(&mut net, task, batch, cfg.learning_rate).map_err(|e| match e {
                Error::Numeric(msg) => Error::Training {
                    epoch,
                    message: msg,
                },
                Error::Training { message, .. } => Error::Training {
                    epoch,
                    message,
                },
                other => other,
            })?;
        }
        let acc = evaluate_accuracy(&net, &task.val).map_err(|e| match e {
            Error::Numeric(msg) => Error::Training {
                epoch,
                message: msg,
            },
            other => other,
        })?;
        if acc > best_acc {
            best_acc = acc;
            best_net = net.clone();
            best_epoch = epoch;
        }
    }
    Ok(TrainOutcome {
        network: best_net,
        best_val_accuracy: best_acc,
        best_epoch,
    })
}

/// One SGD step over a batch: gradients are averaged, then
/// `w -= lr * grad`.
fn step_batch(net: &mut Network, task: &Task, batch: &[usize], lr: f64) -> Result<()> {
    let layer_count = net.layers().len();
    let mut weight_grads: Vec<Vec<f64>> = net
        .layers()
        .iter()
        .map(|l| vec![0.0; l.out_dim() * l.in_dim()])
        .collect();
    let mut bias_grads: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.out_dim()]).collect();

    for &idx in batch {
        let example = &task.train[idx];
        let trace = net.forward(&example.pixels)?;
        let prob = trace.output().get(example.label);
        let loss = -prob.ln();
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch: 0,
                message: format!("non-finite cross-entropy loss {loss} (p = {prob})"),
            });
        }
        // d loss / d output = -1/p at the label, zero elsewhere; the
        // softmax Jacobian in the backward pass turns this into the usual
        // (softmax - one_hot) logits gradient.
        let mut seed = vec![0.0; net.output_dim()];
        seed[example.label] = -1.0 / prob;
        let seed = Tensor::vector(seed)?;
        let grads = net.parameter_gradients(&trace, &seed)?;
        for (layer_idx, (dw, db)) in grads.iter().enumerate() {
            for (acc, g) in weight_grads[layer_idx].iter_mut().zip(dw.data()) {
                *acc += g;
            }
            for (acc, g) in bias_grads[layer_idx].iter_mut().zip(db.data()) {
                *acc += g;
            }
        }
    }

    let scale = lr / batch.len() as f64;
    for layer_idx in 0..layer_count {
        let layer = &net.layers()[layer_idx];
        let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
        let new_weights: Vec<f64> = layer
            .weights()
            .data()
            .iter()
            .zip(&weight_grads[layer_idx])
            .map(|(w, g)| w - scale * g)
            .collect();
        let new_bias: Vec<f64> = layer
            .bias()
            .data()
            .iter()
            .zip(&bias_grads[layer_idx])
            .map(|(b, g)| b - scale * g)
            .collect();
        net.layers_mut()[layer_idx].set_parameters(
            Tensor::matrix(out_dim, in_dim, new_weights)?,
            Tensor::vector(new_bias)?,
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PatternSummary {
    /// (invalid, total) neuron counts per layer.
    pub per_layer: Vec<(usize, usize)>,
}

impl PatternSummary {
    pub fn invalid_total(&self) -> usize {
        self.per_layer.iter().map(|(inv, _)| inv).sum()
    }

    pub fn neuron_total(&self) -> usize {
        self.per_layer.iter().map(|(_, tot)| tot).sum()
    }
}

/// Estimates patterns over the training split and attaches them.
pub fn fit_patterns(net: &Network, task: &Task) -> Result<(Network, PatternSummary, PatternSet)> {
    let inputs: Vec<Tensor> = task.train.iter().map(|e| e.pixels.clone()).collect();
    let batch = patterns::collect_batch(net, &inputs)?;
    let set = patterns::estimate_patterns(&batch, net)?;
    let summary = PatternSummary {
        per_layer: set
            .layers()
            .iter()
            .map(|l| {
                (
                    l.valid().iter().filter(|v| !**v).count(),
                    l.valid().len(),
                )
            })
            .collect(),
    };
    let with_patterns = patterns::attach_patterns(net, &set)?;
    Ok((with_patterns, summary, set))
}
