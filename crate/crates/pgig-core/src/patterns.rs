//! Per-layer pattern estimation from recorded layer inputs and outputs.
//!
//! For a neuron with weight row `w`, the pattern row is
//!
//! ```text
//!   a = E+[x yhat] - E+[x] E[yhat],      p = a / (w^T a)
//! ```
//!
//! where the expectations run over the neuron's positive regime, the
//! examples with `w^T x + b > 0` (the set its ReLU actually fires on; the
//! bias is included deliberately). `yhat` is the pre-activation, which
//! coincides with the neuron output on the positive regime and is what `w`
//! defines. Whether `E[yhat]` is taken over the positive regime or the full
//! batch is configurable; the default is the positive regime, consistent
//! with the other two factors.
//!
//! Neurons with an empty regime or a vanishing denominator are flagged
//! invalid rather than zero-filled silently; attaching a pattern set to a
//! network substitutes an all-zero row for them so they contribute no
//! attribution.

use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::Tensor;

/// Recorded (input, pre-activation) pairs for every layer over a dataset.
#[derive(Debug, Clone)]
pub struct PatternBatch {
    pub(crate) layers: Vec<LayerBatch>,
    pub(crate) examples: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerBatch {
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) pre_activations: Vec<Tensor>,
}

impl PatternBatch {
    pub fn examples(&self) -> usize {
        self.examples
    }

    /// Recorded inputs of one layer, in dataset order.
    pub fn layer_inputs(&self, layer: usize) -> &[Tensor] {
        &self.layers[layer].inputs
    }

    pub fn layer_pre_activations(&self, layer: usize) -> &[Tensor] {
        &self.layers[layer].pre_activations
    }
}

/// Estimated patterns, shaped like the network's weights, one validity flag
/// per neuron.
#[derive(Debug, Clone)]
pub struct PatternSet {
    layers: Vec<LayerPatterns>,
}

#[derive(Debug, Clone)]
pub struct LayerPatterns {
    values: Tensor,
    valid: Vec<bool>,
}

impl LayerPatterns {
    pub fn new(values: Tensor, valid: Vec<bool>) -> Result<Self> {
        if values.rank() != 2 || valid.len() != values.rows() {
            return Err(Error::Dimension {
                context: "layer patterns",
                expected: values.shape().to_vec(),
                found: vec![valid.len()],
            });
        }
        Ok(LayerPatterns { values, valid })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }
}

impl PatternSet {
    pub fn new(layers: Vec<LayerPatterns>) -> Self {
        PatternSet { layers }
    }

    pub fn layers(&self) -> &[LayerPatterns] {
        &self.layers
    }

    pub fn layer(&self, idx: usize) -> &LayerPatterns {
        &self.layers[idx]
    }

    /// Total count of neurons flagged invalid.
    pub fn invalid_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.valid.iter().filter(|v| !**v).count())
            .sum()
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(|l| l.valid.len()).sum()
    }
}

/// Which set `E[yhat]` averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMean {
    /// Average over the positive regime, like the other factors (default).
    PositiveRegime,
    /// Average over the whole batch.
    FullBatch,
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub output_mean: OutputMean,
    /// Below this denominator magnitude a neuron is flagged invalid.
    pub denominator_tolerance: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            output_mean: OutputMean::PositiveRegime,
            denominator_tolerance: 1e-12,
        }
    }
}

/// Runs the network over the dataset and records per-layer inputs and
/// pre-activations, in dataset order.
pub fn collect_batch(net: &Network, dataset: &[Tensor]) -> Result<PatternBatch> {
    if dataset.is_empty() {
        return Err(Error::Argument(
            "pattern batch collection needs a non-empty dataset".into(),
        ));
    }
    let mut layers: Vec<LayerBatch> = (0..net.layers().len())
        .map(|_| LayerBatch {
            inputs: Vec::with_capacity(dataset.len()),
            pre_activations: Vec::with_capacity(dataset.len()),
        })
        .collect();
    for x in dataset {
        let trace = net.forward(x)?;
        for (k, layer_batch) in layers.iter_mut().enumerate() {
            layer_batch.inputs.push(trace.input(k).clone());
            layer_batch
                .pre_activations
                .push(trace.pre_activation(k).clone());
        }
    }
    Ok(PatternBatch {
        layers,
        examples: dataset.len(),
    })
}

/// Estimates patterns with default options.
pub fn estimate_patterns(batch: &PatternBatch, net: &Network) -> Result<PatternSet> {
    estimate_patterns_with(batch, net, &EstimateOptions::default())
}

pub fn estimate_patterns_with(
    batch: &PatternBatch,
    net: &Network,
    opts: &EstimateOptions,
) -> Result<PatternSet> {
    if batch.examples < 2 {
        return Err(Error::Argument(format!(
            "pattern estimation needs a batch of at least 2 examples, got {}",
            batch.examples
        )));
    }
    if batch.layers.len() != net.layers().len() {
        return Err(Error::Dimension {
            context: "pattern estimation",
            expected: vec![net.layers().len()],
            found: vec![batch.layers.len()],
        });
    }
    let mut layers = Vec::with_capacity(net.layers().len());
    for (layer_idx, layer) in net.layers().iter().enumerate() {
        let layer_batch = &batch.layers[layer_idx];
        let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
        let mut values = vec![0.0; out_dim * in_dim];
        let mut valid = vec![false; out_dim];
        for j in 0..out_dim {
            if let Some(row) = estimate_neuron(layer_batch, layer.weights(), j, opts) {
                values[j * in_dim..(j + 1) * in_dim].copy_from_slice(&row);
                valid[j] = true;
            }
        }
        layers.push(LayerPatterns::new(
            Tensor::matrix(out_dim, in_dim, values)?,
            valid,
        )?);
    }
    Ok(PatternSet::new(layers))
}

/// One neuron's pattern row, or None when the neuron is invalid.
fn estimate_neuron(
    batch: &LayerBatch,
    weights: &Tensor,
    neuron: usize,
    opts: &EstimateOptions,
) -> Option<Vec<f64>> {
    let in_dim = weights.cols();
    let n = batch.inputs.len();

    let regime: Vec<usize> = (0..n)
        .filter(|t| batch.pre_activations[*t].get(neuron) > 0.0)
        .collect();
    if regime.is_empty() {
        return None;
    }
    let regime_n = regime.len() as f64;

    // E+[x] and E+[x yhat], accumulated in example order.
    let mut mean_x = vec![0.0; in_dim];
    let mut mean_xy = vec![0.0; in_dim];
    for &t in &regime {
        let x = &batch.inputs[t];
        let y = batch.pre_activations[t].get(neuron);
        for i in 0..in_dim {
            mean_x[i] += x.get(i);
            mean_xy[i] += x.get(i) * y;
        }
    }
    for i in 0..in_dim {
        mean_x[i] /= regime_n;
        mean_xy[i] /= regime_n;
    }

    let mean_y = match opts.output_mean {
        OutputMean::PositiveRegime => {
            let mut acc = 0.0;
            for &t in &regime {
                acc += batch.pre_activations[t].get(neuron);
            }
            acc / regime_n
        }
        OutputMean::FullBatch => {
            let mut acc = 0.0;
            for pre in &batch.pre_activations {
                acc += pre.get(neuron);
            }
            acc / n as f64
        }
    };

    let numerator: Vec<f64> = (0..in_dim).map(|i| mean_xy[i] - mean_x[i] * mean_y).collect();
    let mut denominator = 0.0;
    for i in 0..in_dim {
        denominator += weights.get2(neuron, i) * numerator[i];
    }
    if denominator.abs() < opts.denominator_tolerance {
        return None;
    }
    Some(numerator.iter().map(|a| a / denominator).collect())
}

/// Returns a copy of the network with the pattern set attached; invalid
/// neurons get all-zero pattern rows so they contribute no attribution.
pub fn attach_patterns(net: &Network, set: &PatternSet) -> Result<Network> {
    if set.layers.len() != net.layers().len() {
        return Err(Error::Dimension {
            context: "pattern attach",
            expected: vec![net.layers().len()],
            found: vec![set.layers.len()],
        });
    }
    let mut out = net.clone();
    for (layer, patterns) in out.layers_mut().iter_mut().zip(&set.layers) {
        if patterns.values.shape() != layer.weights().shape() {
            return Err(Error::Dimension {
                context: "pattern attach",
                expected: layer.weights().shape().to_vec(),
                found: patterns.values.shape().to_vec(),
            });
        }
        let in_dim = layer.in_dim();
        let mut data = patterns.values.data().to_vec();
        for (j, ok) in patterns.valid.iter().enumerate() {
            if !ok {
                for v in &mut data[j * in_dim..(j + 1) * in_dim] {
                    *v = 0.0;
                }
            }
        }
        layer.set_pattern(Tensor::matrix(layer.out_dim(), in_dim, data)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer, Network, OutputMode};
    use crate::rng::RandomSource;
    use crate::stress;
    use crate::tensor::dot;

    fn identity_net() -> Network {
        let layer = Layer::new(
            Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::vector(vec![0.0, 0.0]).unwrap(),
            Activation::Linear,
        )
        .unwrap();
        Network::new(vec![layer], OutputMode::Raw).unwrap()
    }

    fn single_neuron_net(w: &[f64], b: f64) -> Network {
        let layer = Layer::new(
            Tensor::matrix(1, w.len(), w.to_vec()).unwrap(),
            Tensor::vector(vec![b]).unwrap(),
            Activation::Linear,
        )
        .unwrap();
        Network::new(vec![layer], OutputMode::Raw).unwrap()
    }

    #[test]
    fn collect_records_identity_inputs_verbatim() {
        let net = identity_net();
        let dataset = vec![
            Tensor::vector(vec![1.0, 2.0]).unwrap(),
            Tensor::vector(vec![3.0, 4.0]).unwrap(),
        ];
        let batch = collect_batch(&net, &dataset).unwrap();
        assert_eq!(batch.examples(), 2);
        assert_eq!(batch.layer_inputs(0)[0].data(), &[1.0, 2.0]);
        assert_eq!(batch.layer_inputs(0)[1].data(), &[3.0, 4.0]);
    }

    #[test]
    fn collect_chains_second_layer_inputs() {
        let net = stress::build_stress_model();
        let dataset = vec![
            Tensor::vector(vec![0.3, 0.1]).unwrap(),
            Tensor::vector(vec![-1.0, 0.4]).unwrap(),
            Tensor::vector(vec![1.7, -0.2]).unwrap(),
        ];
        let batch = collect_batch(&net, &dataset).unwrap();
        for (pre, input) in batch
            .layer_pre_activations(0)
            .iter()
            .zip(batch.layer_inputs(1))
        {
            let expected = pre.get(0).max(0.0);
            assert_eq!(input.data(), &[expected]);
        }
    }

    #[test]
    fn collect_rejects_empty_dataset() {
        let net = identity_net();
        assert!(matches!(
            collect_batch(&net, &[]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn estimate_rejects_single_example_batches() {
        let net = identity_net();
        let dataset = vec![Tensor::vector(vec![1.0, 2.0]).unwrap()];
        let batch = collect_batch(&net, &dataset).unwrap();
        assert!(matches!(
            estimate_patterns(&batch, &net),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn stress_data_recovers_analytic_patterns() {
        let cfg = stress::StressConfig::default();
        let mut rng = RandomSource::new(cfg.seed);
        let dataset = stress::generate_dataset(&cfg, &mut rng).unwrap();
        let inputs: Vec<Tensor> = dataset.points().iter().map(|p| p.input.clone()).collect();
        let net = stress::build_stress_model();
        let batch = collect_batch(&net, &inputs).unwrap();
        let set = estimate_patterns(&batch, &net).unwrap();

        let p1 = set.layer(0).values();
        assert!(set.layer(0).valid()[0]);
        assert!((p1.get2(0, 0) - (-1.0)).abs() < 0.05, "p1 = {:?}", p1.data());
        assert!(p1.get2(0, 1).abs() < 0.05, "p1 = {:?}", p1.data());

        // Single-input neuron: a/(w a) = 1/w exactly.
        let p2 = set.layer(1).values();
        assert!(set.layer(1).valid()[0]);
        assert_eq!(p2.get2(0, 0), -1.0);
    }

    #[test]
    fn linear_neuron_pattern_points_along_signal_base() {
        // x = a z for a grid of z, no distractor: the pattern must be
        // proportional to a with w^T p = 1.
        let a = [0.8, -0.3, 0.5];
        let w = [1.2, 0.4, -0.7];
        let net = single_neuron_net(&w, 0.05);
        let dataset: Vec<Tensor> = (0..200)
            .map(|k| {
                let z = -1.0 + 0.01 * k as f64;
                Tensor::vector(a.iter().map(|ai| ai * z).collect()).unwrap()
            })
            .collect();
        let batch = collect_batch(&net, &dataset).unwrap();
        let set = estimate_patterns(&batch, &net).unwrap();
        assert!(set.layer(0).valid()[0]);
        let p = set.layer(0).values();

        let w_t = Tensor::vector(w.to_vec()).unwrap();
        let p_row = Tensor::vector((0..3).map(|i| p.get2(0, i)).collect()).unwrap();
        assert!((dot(&w_t, &p_row).unwrap() - 1.0).abs() < 1e-9);

        // Collinearity with a: all 2x2 cross terms vanish.
        for i in 0..3 {
            for j in (i + 1)..3 {
                let cross = p.get2(0, i) * a[j] - p.get2(0, j) * a[i];
                assert!(cross.abs() < 1e-9, "cross term {cross}");
            }
        }
    }

    #[test]
    fn constant_output_flags_neuron_invalid() {
        // w orthogonal to the data direction: pre-activation is constant.
        let net = single_neuron_net(&[1.0, -1.0], 0.5);
        let dataset: Vec<Tensor> = (0..10)
            .map(|k| {
                let t = k as f64 * 0.1;
                Tensor::vector(vec![t, t]).unwrap()
            })
            .collect();
        let batch = collect_batch(&net, &dataset).unwrap();
        let set = estimate_patterns(&batch, &net).unwrap();
        assert!(!set.layer(0).valid()[0]);
        assert_eq!(set.invalid_count(), 1);
        // Invalid rows attach as zeros.
        let with = attach_patterns(&net, &set).unwrap();
        assert_eq!(with.layers()[0].pattern().unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn empty_regime_flags_neuron_invalid() {
        let net = single_neuron_net(&[1.0, 1.0], -100.0);
        let dataset: Vec<Tensor> = (0..10)
            .map(|k| Tensor::vector(vec![k as f64 * 0.1, 0.2]).unwrap())
            .collect();
        let batch = collect_batch(&net, &dataset).unwrap();
        let set = estimate_patterns(&batch, &net).unwrap();
        assert!(!set.layer(0).valid()[0]);
    }

    fn random_dense_net(rng: &mut RandomSource) -> Network {
        let dims = [2 + rng.below(4), 2 + rng.below(5), 1 + rng.below(3)];
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let weights = Tensor::matrix(
                w[1],
                w[0],
                (0..w[0] * w[1]).map(|_| rng.uniform() * 2.0 - 1.0).collect(),
            )
            .unwrap();
            let bias =
                Tensor::vector((0..w[1]).map(|_| rng.uniform() * 0.2 - 0.1).collect()).unwrap();
            layers.push(Layer::new(weights, bias, Activation::Relu).unwrap());
        }
        Network::new(layers, OutputMode::Raw).unwrap()
    }

    #[test]
    fn valid_neurons_are_normalized() {
        let mut rng = RandomSource::new(321);
        for _ in 0..10 {
            let net = random_dense_net(&mut rng);
            let dataset: Vec<Tensor> = (0..80)
                .map(|_| {
                    Tensor::vector(
                        (0..net.input_dim()).map(|_| rng.gaussian(0.0, 1.0)).collect(),
                    )
                    .unwrap()
                })
                .collect();
            let batch = collect_batch(&net, &dataset).unwrap();
            let set = estimate_patterns(&batch, &net).unwrap();
            for (layer, patterns) in net.layers().iter().zip(set.layers()) {
                for (j, ok) in patterns.valid().iter().enumerate() {
                    if !*ok {
                        continue;
                    }
                    let mut wp = 0.0;
                    for i in 0..layer.in_dim() {
                        wp += layer.weights().get2(j, i) * patterns.values().get2(j, i);
                    }
                    assert!((wp - 1.0).abs() < 1e-9, "w^T p = {wp}");
                }
            }
        }
    }

    #[test]
    fn patterns_invariant_under_output_scaling() {
        // Scaling every yhat by c > 0 cancels in the ratio.
        let net = single_neuron_net(&[0.9, -0.4], 0.1);
        let mut rng = RandomSource::new(5);
        let dataset: Vec<Tensor> = (0..100)
            .map(|_| {
                Tensor::vector(vec![rng.gaussian(0.2, 1.0), rng.gaussian(-0.1, 0.8)]).unwrap()
            })
            .collect();
        let batch = collect_batch(&net, &dataset).unwrap();
        let base = estimate_patterns(&batch, &net).unwrap();

        let c = 37.5;
        let mut scaled = batch.clone();
        for layer in &mut scaled.layers {
            for pre in &mut layer.pre_activations {
                *pre = pre.scale(c).unwrap();
            }
        }
        // The scaled pre-activations keep the same sign, so the regime and
        // the ratio are unchanged.
        let scaled_set = estimate_patterns(&scaled, &net).unwrap();
        for i in 0..2 {
            let a = base.layer(0).values().get2(0, i);
            let b = scaled_set.layer(0).values().get2(0, i);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn distractor_component_shrinks_with_batch_size() {
        // x = (z, 0) + (eps, eps); feature 2 is pure distractor. The
        // estimated |p_2| should halve (within noise) when the batch
        // grows by 4x; averaged over seeds to tame the variance.
        let net = single_neuron_net(&[1.0, -1.0], 0.8);
        let mean_abs_p2 = |batch_size: usize, seeds: std::ops::Range<u64>| -> f64 {
            let mut total = 0.0;
            let mut count = 0;
            for seed in seeds {
                let mut rng = RandomSource::new(seed);
                let dataset: Vec<Tensor> = (0..batch_size)
                    .map(|k| {
                        let z = -1.0 + 2.0 * (k as f64 + 0.5) / batch_size as f64;
                        let eps = rng.gaussian(0.0, 0.4);
                        Tensor::vector(vec![z + eps, eps]).unwrap()
                    })
                    .collect();
                let batch = collect_batch(&net, &dataset).unwrap();
                let set = estimate_patterns(&batch, &net).unwrap();
                if set.layer(0).valid()[0] {
                    total += set.layer(0).values().get2(0, 1).abs();
                    count += 1;
                }
            }
            total / count as f64
        };
        let small = mean_abs_p2(250, 0..24);
        let large = mean_abs_p2(1000, 100..124);
        assert!(
            large < 0.75 * small,
            "|p2| did not shrink: {small} -> {large}"
        );
    }

    #[test]
    fn output_mean_switch_keeps_stress_patterns() {
        let cfg = stress::StressConfig::default();
        let mut rng = RandomSource::new(9);
        let dataset = stress::generate_dataset(&cfg, &mut rng).unwrap();
        let inputs: Vec<Tensor> = dataset.points().iter().map(|p| p.input.clone()).collect();
        let net = stress::build_stress_model();
        let batch = collect_batch(&net, &inputs).unwrap();
        for output_mean in [OutputMean::PositiveRegime, OutputMean::FullBatch] {
            let opts = EstimateOptions {
                output_mean,
                ..EstimateOptions::default()
            };
            let set = estimate_patterns_with(&batch, &net, &opts).unwrap();
            let p1 = set.layer(0).values();
            assert!((p1.get2(0, 0) - (-1.0)).abs() < 0.08, "{output_mean:?}");
            assert!(p1.get2(0, 1).abs() < 0.08, "{output_mean:?}");
            assert_eq!(set.layer(1).values().get2(0, 0), -1.0);
        }
    }
}
