//! Feedforward dense network with recorded forward passes and three backward
//! modes: standard reverse-mode gradients, guided gradients (negative-signal
//! inhibition at ReLU stages), and pattern-modified gradients where every
//! layer's weights are replaced by `w ⊙ p` during the backward sweep only.
//!
//! Networks are immutable after construction; `forward`/`backward` are pure
//! functions of (network, input) and safe to call concurrently.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{matvec, matvec_transposed, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    fn tag(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "linear" => Some(Activation::Linear),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    Raw,
    Softmax,
}

impl OutputMode {
    fn tag(self) -> &'static str {
        match self {
            OutputMode::Raw => "raw",
            OutputMode::Softmax => "softmax",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "raw" => Some(OutputMode::Raw),
            "softmax" => Some(OutputMode::Softmax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardMode {
    Standard,
    Guided,
    Pattern,
}

/// One dense layer: `post = activation(weights * input + bias)`.
///
/// `pattern`, when present, has the same shape as `weights` and feeds the
/// pattern-modified backward mode.
#[derive(Debug, Clone)]
pub struct Layer {
    weights: Tensor,
    bias: Tensor,
    activation: Activation,
    pattern: Option<Tensor>,
}

impl Layer {
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.rank() != 2 || bias.rank() != 1 || bias.len() != weights.rows() {
            return Err(Error::Dimension {
                context: "layer construction",
                expected: weights.shape().to_vec(),
                found: bias.shape().to_vec(),
            });
        }
        Ok(Layer {
            weights,
            bias,
            activation,
            pattern: None,
        })
    }

    pub fn with_pattern(mut self, pattern: Tensor) -> Result<Self> {
        self.set_pattern(pattern)?;
        Ok(self)
    }

    pub fn set_pattern(&mut self, pattern: Tensor) -> Result<()> {
        if pattern.shape() != self.weights.shape() {
            return Err(Error::Dimension {
                context: "layer pattern",
                expected: self.weights.shape().to_vec(),
                found: pattern.shape().to_vec(),
            });
        }
        self.pattern = Some(pattern);
        Ok(())
    }

    pub fn clear_pattern(&mut self) {
        self.pattern = None;
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn pattern(&self) -> Option<&Tensor> {
        self.pattern.as_ref()
    }

    pub(crate) fn set_parameters(&mut self, weights: Tensor, bias: Tensor) -> Result<()> {
        if weights.shape() != self.weights.shape() || bias.shape() != self.bias.shape() {
            return Err(Error::Dimension {
                context: "layer parameter update",
                expected: self.weights.shape().to_vec(),
                found: weights.shape().to_vec(),
            });
        }
        self.weights = weights;
        self.bias = bias;
        Ok(())
    }
}

/// Recorded tensors from one forward pass: per-layer inputs, pre-activations
/// and post-activations, plus the final (possibly softmax-normalized) output.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Tensor>,
    pre_activations: Vec<Tensor>,
    post_activations: Vec<Tensor>,
    output: Tensor,
}

impl ForwardTrace {
    pub fn input(&self, layer: usize) -> &Tensor {
        &self.inputs[layer]
    }

    pub fn pre_activation(&self, layer: usize) -> &Tensor {
        &self.pre_activations[layer]
    }

    pub fn post_activation(&self, layer: usize) -> &Tensor {
        &self.post_activations[layer]
    }

    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    output_mode: OutputMode,
}

impl Network {
    pub fn new(layers: Vec<Layer>, output_mode: OutputMode) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension {
                    context: "network layer chaining",
                    expected: vec![pair[0].out_dim()],
                    found: vec![pair[1].in_dim()],
                });
            }
        }
        if output_mode == OutputMode::Softmax && layers.last().unwrap().out_dim() < 2 {
            return Err(Error::Argument(
                "softmax output requires at least 2 output units".into(),
            ));
        }
        Ok(Network {
            layers,
            output_mode,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output_mode
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn has_patterns(&self) -> bool {
        self.layers.iter().all(|l| l.pattern.is_some())
    }

    /// Runs the network on `x` and records every intermediate tensor.
    pub fn forward(&self, x: &Tensor) -> Result<ForwardTrace> {
        if x.rank() != 1 || x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "network forward",
                expected: vec![self.input_dim()],
                found: x.shape().to_vec(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut post_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let pre = matvec(&layer.weights, &current)?.add(&layer.bias)?;
            let post = match layer.activation {
                Activation::Linear => pre.clone(),
                Activation::Relu => Tensor::vector(
                    pre.data().iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect(),
                )?,
            };
            inputs.push(current);
            pre_activations.push(pre);
            current = post.clone();
            post_activations.push(post);
        }
        let output = match self.output_mode {
            OutputMode::Raw => current,
            OutputMode::Softmax => softmax(&current)?,
        };
        Ok(ForwardTrace {
            inputs,
            pre_activations,
            post_activations,
            output,
        })
    }

    /// Gradient of `seed · output` with respect to the input, under the
    /// chosen backward mode. Bias terms never contribute to input gradients.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        seed: &Tensor,
        mode: BackwardMode,
    ) -> Result<Tensor> {
        Ok(self.backward_stages(trace, seed, mode)?.input_gradient)
    }

    /// Seeding convention for explanations: one-hot 1.0 at the target for
    /// Standard/Guided modes, one-hot `output[target]` for Pattern mode.
    /// `target` is required when the output dimension exceeds 1.
    pub fn output_grad_seed(
        &self,
        trace: &ForwardTrace,
        target: Option<usize>,
        mode: BackwardMode,
    ) -> Result<Tensor> {
        let dim = self.output_dim();
        let index = match (dim, target) {
            (1, None) => 0,
            (1, Some(0)) => 0,
            (1, Some(t)) => {
                return Err(Error::Argument(format!(
                    "target {t} out of range for scalar output"
                )))
            }
            (_, None) => {
                return Err(Error::Argument(
                    "target class required for multi-output networks".into(),
                ))
            }
            (_, Some(t)) if t < dim => t,
            (_, Some(t)) => {
                return Err(Error::Argument(format!(
                    "target {t} out of range for output dimension {dim}"
                )))
            }
        };
        let mut data = vec![0.0; dim];
        data[index] = match mode {
            BackwardMode::Standard | BackwardMode::Guided => 1.0,
            BackwardMode::Pattern => trace.output().get(index),
        };
        Tensor::vector(data)
    }

    pub(crate) fn backward_stages(
        &self,
        trace: &ForwardTrace,
        seed: &Tensor,
        mode: BackwardMode,
    ) -> Result<BackwardStages> {
        if seed.rank() != 1 || seed.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "backward seed",
                expected: vec![self.output_dim()],
                found: seed.shape().to_vec(),
            });
        }
        if mode == BackwardMode::Pattern {
            for (i, layer) in self.layers.iter().enumerate() {
                if layer.pattern.is_none() {
                    return Err(Error::Config(format!(
                        "pattern-mode backward requires a pattern on every layer; layer {i} has none"
                    )));
                }
            }
        }
        let mut grad = match self.output_mode {
            OutputMode::Raw => seed.clone(),
            // The softmax stage carries no pattern; all modes use its exact
            // Jacobian.
            OutputMode::Softmax => softmax_backward(trace.output(), seed)?,
        };
        let mut gated_grads = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let pre = trace.pre_activation(idx);
            let gated = match (layer.activation, mode) {
                (Activation::Linear, _) => grad,
                (Activation::Relu, BackwardMode::Standard)
                | (Activation::Relu, BackwardMode::Pattern) => Tensor::vector(
                    grad.data()
                        .iter()
                        .zip(pre.data())
                        .map(|(g, p)| g * relu_subgradient(*p))
                        .collect(),
                )?,
                (Activation::Relu, BackwardMode::Guided) => Tensor::vector(
                    grad.data()
                        .iter()
                        .zip(pre.data())
                        .map(|(g, p)| if *p > 0.0 && *g >= 0.0 { *g } else { 0.0 })
                        .collect(),
                )?,
            };
            grad = match mode {
                BackwardMode::Pattern => {
                    let pattern = layer.pattern.as_ref().expect("checked above");
                    let modified = layer.weights.hadamard(pattern)?;
                    matvec_transposed(&modified, &gated)?
                }
                _ => matvec_transposed(&layer.weights, &gated)?,
            };
            gated_grads.push(gated);
        }
        gated_grads.reverse();
        Ok(BackwardStages {
            input_gradient: grad,
            gated_grads,
        })
    }

    /// Standard-mode weight and bias gradients for every layer, used by the
    /// trainer. Shares the backward sweep with [`Network::backward`].
    pub(crate) fn parameter_gradients(
        &self,
        trace: &ForwardTrace,
        seed: &Tensor,
    ) -> Result<Vec<(Tensor, Tensor)>> {
        let stages = self.backward_stages(trace, seed, BackwardMode::Standard)?;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let gated = &stages.gated_grads[idx];
            let input = trace.input(idx);
            let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
            let mut dw = vec![0.0; out_dim * in_dim];
            for r in 0..out_dim {
                let g = gated.get(r);
                for c in 0..in_dim {
                    dw[r * in_dim + c] = g * input.get(c);
                }
            }
            grads.push((Tensor::matrix(out_dim, in_dim, dw)?, gated.clone()));
        }
        Ok(grads)
    }
}

pub(crate) struct BackwardStages {
    pub input_gradient: Tensor,
    /// Per layer (front to back): the gradient after the activation gate,
    /// i.e. what flows into that layer's linear part.
    pub gated_grads: Vec<Tensor>,
}

/// ReLU derivative with the midpoint convention at the kink: path methods
/// whose grids land exactly on a kink then split the contribution evenly
/// between the two one-sided derivatives instead of biasing the Riemann sum
/// a full step to one side.
fn relu_subgradient(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else if pre == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// Numerically stable softmax; components sum to 1 within 1e-12.
fn softmax(logits: &Tensor) -> Result<Tensor> {
    let max = logits.data().iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let exps: Vec<f64> = logits.data().iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::vector(exps.iter().map(|e| e / total).collect())
}

/// Softmax Jacobian applied to an upstream gradient:
/// `d/dz (seed · softmax(z)) = s ⊙ (seed - s·seed)`.
fn softmax_backward(output: &Tensor, seed: &Tensor) -> Result<Tensor> {
    let mut inner = 0.0;
    for (s, g) in output.data().iter().zip(seed.data()) {
        inner += s * g;
    }
    Tensor::vector(
        output
            .data()
            .iter()
            .zip(seed.data())
            .map(|(s, g)| s * (g - inner))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Serialization: versioned plain-text format, value-exact round trips.
//
//   pgig-net v1
//   output <raw|softmax>
//   layers <count>
//   layer <out> <in> <linear|relu>
//   weights <out*in values, row-major>
//   bias <out values>
//   pattern <out*in values, row-major>      (optional per layer)
//   ...
//   end
//
// Values are written with 18 significant decimal digits, enough for any f64
// to parse back to the identical bit pattern.
// ---------------------------------------------------------------------------

const FORMAT_HEADER: &str = "pgig-net v1";

fn write_values(out: &mut impl Write, tag: &str, values: &[f64]) -> std::io::Result<()> {
    write!(out, "{tag}")?;
    for v in values {
        write!(out, " {v:.17e}")?;
    }
    writeln!(out)
}

impl Network {
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{FORMAT_HEADER}")?;
        writeln!(out, "output {}", self.output_mode.tag())?;
        writeln!(out, "layers {}", self.layers.len())?;
        for layer in &self.layers {
            writeln!(
                out,
                "layer {} {} {}",
                layer.out_dim(),
                layer.in_dim(),
                layer.activation.tag()
            )?;
            write_values(out, "weights", layer.weights.data())?;
            write_values(out, "bias", layer.bias.data())?;
            if let Some(pattern) = &layer.pattern {
                write_values(out, "pattern", pattern.data())?;
            }
        }
        writeln!(out, "end")?;
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = Vec::new();
        for line in reader.lines() {
            lines.push(line?);
        }
        parse_network(&lines)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        self.write_to(&mut file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = std::fs::File::open(path)?;
        Network::read_from(&mut file)
    }
}

struct LineCursor<'a> {
    lines: &'a [String],
    next: usize,
}

impl<'a> LineCursor<'a> {
    fn take(&mut self, what: &str) -> Result<(usize, &'a str)> {
        // Skip blank lines so hand-edited files stay parseable.
        while self.next < self.lines.len() && self.lines[self.next].trim().is_empty() {
            self.next += 1;
        }
        if self.next >= self.lines.len() {
            return Err(Error::Parse {
                line: self.lines.len(),
                message: format!("unexpected end of file, expected {what}"),
            });
        }
        self.next += 1;
        Ok((self.next, self.lines[self.next - 1].trim()))
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines[self.next..]
            .iter()
            .map(|l| l.trim())
            .find(|l| !l.is_empty())
    }
}

fn parse_values(line_no: usize, rest: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for token in rest.split_whitespace() {
        let v: f64 = token.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad float {token:?} in {what}"),
        })?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::Parse {
            line: line_no,
            message: format!(
                "{what} expects {expected} values, found {}",
                values.len()
            ),
        });
    }
    Ok(values)
}

fn parse_network(lines: &[String]) -> Result<Network> {
    let mut cursor = LineCursor { lines, next: 0 };

    let (line_no, header) = cursor.take("format header")?;
    if header != FORMAT_HEADER {
        return Err(Error::Parse {
            line: line_no,
            message: format!("unsupported format header {header:?}"),
        });
    }

    let (line_no, output_line) = cursor.take("output mode")?;
    let mode_tag = output_line.strip_prefix("output ").ok_or(Error::Parse {
        line: line_no,
        message: "expected `output <raw|softmax>`".into(),
    })?;
    let output_mode = OutputMode::from_tag(mode_tag.trim()).ok_or(Error::Parse {
        line: line_no,
        message: format!("unknown output mode {mode_tag:?}"),
    })?;

    let (line_no, layers_line) = cursor.take("layer count")?;
    let count: usize = layers_line
        .strip_prefix("layers ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or(Error::Parse {
            line: line_no,
            message: "expected `layers <count>`".into(),
        })?;

    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (line_no, layer_line) = cursor.take("layer declaration")?;
        let parts: Vec<&str> = layer_line.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "layer" {
            return Err(Error::Parse {
                line: line_no,
                message: "expected `layer <out> <in> <activation>`".into(),
            });
        }
        let out_dim: usize = parts[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad out-dimension {:?}", parts[1]),
        })?;
        let in_dim: usize = parts[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad in-dimension {:?}", parts[2]),
        })?;
        let activation = Activation::from_tag(parts[3]).ok_or(Error::Parse {
            line: line_no,
            message: format!("unknown activation {:?}", parts[3]),
        })?;

        let (line_no, weights_line) = cursor.take("weights")?;
        let rest = weights_line.strip_prefix("weights").ok_or(Error::Parse {
            line: line_no,
            message: "expected `weights ...`".into(),
        })?;
        let weights = Tensor::matrix(
            out_dim,
            in_dim,
            parse_values(line_no, rest, out_dim * in_dim, "weights")?,
        )?;

        let (line_no, bias_line) = cursor.take("bias")?;
        let rest = bias_line.strip_prefix("bias").ok_or(Error::Parse {
            line: line_no,
            message: "expected `bias ...`".into(),
        })?;
        let bias = Tensor::vector(parse_values(line_no, rest, out_dim, "bias")?)?;

        let mut layer = Layer::new(weights, bias, activation)?;
        if let Some(next) = cursor.peek() {
            if next.starts_with("pattern") {
                let (line_no, pattern_line) = cursor.take("pattern")?;
                let rest = pattern_line.strip_prefix("pattern").unwrap();
                let pattern = Tensor::matrix(
                    out_dim,
                    in_dim,
                    parse_values(line_no, rest, out_dim * in_dim, "pattern")?,
                )?;
                layer.set_pattern(pattern)?;
            }
        }
        layers.push(layer);
    }

    let (line_no, trailer) = cursor.take("end marker")?;
    if trailer != "end" {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected `end`, found {trailer:?}"),
        });
    }

    Network::new(layers, output_mode)
}
