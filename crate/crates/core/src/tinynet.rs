//! Small fully connected perceptron networks with per-sample backpropagation.
//!
//! Every non-input layer computes `activation(W x + b)`. Weights are stored
//! row-major with one row per neuron. The training objective is the
//! per-sample squared error `0.5 * sum((target - output)^2)` and each
//! [`Mlp::train_step`] applies one plain gradient-descent update scaled by the
//! network's learning rate.
//!
//! Trainable parameters have a fixed flat order used by [`Mlp::params`],
//! the gradient routines and the text format: layer by layer, neuron by
//! neuron, the neuron's incoming weights in input order followed by its bias
//! (biases are omitted when the network is built without them).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Half-width of the uniform initialization interval.
pub const INIT_RANGE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `(e^x - e^-x) / (e^x + e^-x)`
    Tanh,
    /// Identity.
    Linear,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output `y = eval(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Linear => "linear",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidNetwork(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major, `outputs x inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    #[inline]
    pub fn weight(&self, neuron: usize, input: usize) -> f64 {
        self.weights[neuron * self.inputs + input]
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
            out.push(self.activation.eval(z));
        }
    }
}

/// Per-layer outputs of one forward pass; entry 0 is the input itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub layers: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Outputs of every layer strictly between input and output.
    pub fn hidden(&self) -> &[Vec<f64>] {
        let n = self.layers.len();
        if n <= 2 {
            &[]
        } else {
            &self.layers[1..n - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<Layer>,
    learning_rate: f64,
    use_bias: bool,
}

fn validate_shape(widths: &[usize], activations: &[Activation], learning_rate: f64) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidNetwork(
            "need at least an input and an output layer".into(),
        ));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidNetwork(
            "layer widths must be positive".into(),
        ));
    }
    if activations.len() != widths.len() - 1 {
        return Err(Error::InvalidNetwork(format!(
            "{} activations for {} non-input layers",
            activations.len(),
            widths.len() - 1
        )));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(Error::InvalidNetwork(format!(
            "learning rate must be positive and finite, got {learning_rate}"
        )));
    }
    Ok(())
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::param(what, "non-finite value"))
    }
}

impl Mlp {
    /// Draws every weight and bias i.i.d. from `U[-0.5, 0.5)` using [`SimRng`].
    pub fn init(
        widths: &[usize],
        activations: &[Activation],
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::zeros(widths, activations, learning_rate)?;
        let mut rng = SimRng::new(seed);
        for layer in &mut net.layers {
            for n in 0..layer.outputs {
                for i in 0..layer.inputs {
                    layer.weights[n * layer.inputs + i] = rng.uniform(-INIT_RANGE, INIT_RANGE);
                }
                layer.biases[n] = rng.uniform(-INIT_RANGE, INIT_RANGE);
            }
        }
        Ok(net)
    }

    /// All weights and biases zero.
    pub fn zeros(widths: &[usize], activations: &[Activation], learning_rate: f64) -> Result<Self> {
        validate_shape(widths, activations, learning_rate)?;
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
                activation,
            })
            .collect();
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            learning_rate,
            use_bias: true,
        })
    }

    /// Drops the bias terms: they are zeroed and excluded from training.
    pub fn without_bias(mut self) -> Self {
        self.use_bias = false;
        for layer in &mut self.layers {
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
        self
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, learning_rate: f64) -> Result<()> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        self.learning_rate = learning_rate;
        Ok(())
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated non-empty")
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + if self.use_bias { l.biases.len() } else { 0 })
            .sum()
    }

    /// Trainable parameters in canonical order.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            for (n, row) in layer.weights.chunks_exact(layer.inputs).enumerate() {
                out.extend_from_slice(row);
                if self.use_bias {
                    out.push(layer.biases[n]);
                }
            }
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        check_finite(params, "params")?;
        let mut it = params.iter().copied();
        let use_bias = self.use_bias;
        for layer in &mut self.layers {
            for n in 0..layer.outputs {
                for i in 0..layer.inputs {
                    layer.weights[n * layer.inputs + i] = it.next().expect("length checked");
                }
                if use_bias {
                    layer.biases[n] = it.next().expect("length checked");
                }
            }
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        check_finite(input, "input")
    }

    pub fn forward(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        layers.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(layers.last().expect("non-empty"), &mut out);
            layers.push(out);
        }
        Ok(Trace { layers })
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.layers.pop().unwrap_or_default())
    }

    /// `0.5 * sum((target - output)^2)` at the current parameters.
    pub fn loss(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        self.check_target(target)?;
        let out = self.predict(input)?;
        Ok(half_squared_error(&out, target))
    }

    fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.output_width() {
            return Err(Error::DimensionMismatch {
                expected: self.output_width(),
                actual: target.len(),
            });
        }
        check_finite(target, "target")
    }

    /// Loss and its gradient with respect to [`Mlp::params`], by backpropagation.
    pub fn gradient(&self, input: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_target(target)?;
        let trace = self.forward(input)?;
        let loss = half_squared_error(trace.output(), target);

        // Output delta: (y - t) * F'(y).
        let last = self.layers.last().expect("validated");
        let mut delta: Vec<f64> = trace
            .output()
            .iter()
            .zip(target)
            .map(|(y, t)| (y - t) * last.activation.derivative_from_output(*y))
            .collect();

        let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let x = &trace.layers[li];
            let mut g = Vec::with_capacity(layer.weights.len() + layer.outputs);
            for d in &delta {
                g.extend(x.iter().map(|xi| d * xi));
                if self.use_bias {
                    g.push(*d);
                }
            }
            per_layer[li] = g;

            if li > 0 {
                let below = &self.layers[li - 1];
                delta = (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(n, d)| d * layer.weight(n, i))
                            .sum();
                        back * below.activation.derivative_from_output(x[i])
                    })
                    .collect();
            }
        }
        Ok((loss, per_layer.concat()))
    }

    /// One online gradient-descent update. Returns the loss before the update.
    pub fn train_step(&mut self, input: &[f64], target: &[f64]) -> Result<f64> {
        let (loss, grad) = self.gradient(input, target)?;
        let lr = self.learning_rate;
        let mut g = grad.into_iter();
        let use_bias = self.use_bias;
        for layer in &mut self.layers {
            for n in 0..layer.outputs {
                for i in 0..layer.inputs {
                    layer.weights[n * layer.inputs + i] -= lr * g.next().expect("sized");
                }
                if use_bias {
                    layer.biases[n] -= lr * g.next().expect("sized");
                }
            }
        }
        Ok(loss)
    }

    /// Central-difference estimate of the loss gradient; `self` is untouched.
    pub fn numeric_gradient(&self, input: &[f64], target: &[f64], h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param("h", "step must be positive"));
        }
        self.check_input(input)?;
        self.check_target(target)?;
        let base = self.params();
        let mut probe = self.clone();
        let mut shifted = base.clone();
        let mut grad = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            shifted[i] = base[i] + h;
            probe.set_params(&shifted)?;
            let plus = probe.loss(input, target)?;
            shifted[i] = base[i] - h;
            probe.set_params(&shifted)?;
            let minus = probe.loss(input, target)?;
            shifted[i] = base[i];
            grad.push((plus - minus) / (2.0 * h));
        }
        Ok(grad)
    }

    /// Plain-text form: a header line, then one parameter per line in
    /// canonical order with 17 significant digits.
    ///
    /// ```text
    /// mlp widths=2,3,1 activations=tanh,linear learning_rate=0.15 bias=true
    /// ```
    pub fn to_text(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(ToString::to_string).collect();
        let acts: Vec<&str> = self.layers.iter().map(|l| l.activation.name()).collect();
        let mut s = format!(
            "mlp widths={} activations={} learning_rate={:?} bias={}\n",
            widths.join(","),
            acts.join(","),
            self.learning_rate,
            self.use_bias
        );
        for p in self.params() {
            let _ = writeln!(s, "{p:.16e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad =
            |line: usize, reason: String| Error::InvalidNetwork(format!("line {line}: {reason}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("mlp") {
            return Err(bad(1, "missing `mlp` header".into()));
        }
        let (mut widths, mut acts, mut lr, mut bias) = (None, None, None, None);
        for f in fields {
            let (k, v) = f
                .split_once('=')
                .ok_or_else(|| bad(1, format!("malformed field `{f}`")))?;
            match k {
                "widths" => {
                    widths = Some(
                        v.split(',')
                            .map(|w| {
                                w.parse::<usize>()
                                    .map_err(|e| bad(1, format!("width `{w}`: {e}")))
                            })
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "activations" => {
                    acts = Some(
                        v.split(',')
                            .map(str::parse)
                            .collect::<Result<Vec<Activation>>>()?,
                    )
                }
                "learning_rate" => {
                    lr = Some(
                        v.parse::<f64>()
                            .map_err(|e| bad(1, format!("learning_rate: {e}")))?,
                    )
                }
                "bias" => {
                    bias = Some(
                        v.parse::<bool>()
                            .map_err(|e| bad(1, format!("bias: {e}")))?,
                    )
                }
                other => return Err(bad(1, format!("unknown field `{other}`"))),
            }
        }
        let widths = widths.ok_or_else(|| bad(1, "missing widths".into()))?;
        let acts = acts.ok_or_else(|| bad(1, "missing activations".into()))?;
        let lr = lr.ok_or_else(|| bad(1, "missing learning_rate".into()))?;
        let mut net = Self::zeros(&widths, &acts, lr)?;
        if !bias.ok_or_else(|| bad(1, "missing bias".into()))? {
            net = net.without_bias();
        }
        let params = lines
            .filter(|(_, l)| !l.is_empty())
            .map(|(n, l)| l.parse::<f64>().map_err(|e| bad(n, format!("`{l}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        net.set_params(&params)?;
        Ok(net)
    }
}

fn half_squared_error(output: &[f64], target: &[f64]) -> f64 {
    0.5 * output
        .iter()
        .zip(target)
        .map(|(y, t)| (t - y) * (t - y))
        .sum::<f64>()
}

/// Largest relative disagreement between two gradients, each entry measured
/// against `max(|analytic|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1e-8))
        .fold(0.0, f64::max)
}

/// Outcome of a finite-difference sweep over random networks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub trials: usize,
    pub max_relative_error: f64,
}

/// Compares backpropagation with central differences (`h = 1e-5`) on
/// `trials` random networks, alternating 2-3-1 and 3-3-1 topologies.
/// Parameters, inputs and targets are drawn uniformly from `[-1, 1]`.
pub fn gradient_check(seed: u64, trials: usize) -> Result<GradCheck> {
    const H: f64 = 1e-5;
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let mut rng = SimRng::new(seed);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let widths: &[usize] = if t % 2 == 0 { &[2, 3, 1] } else { &[3, 3, 1] };
        let mut net = Mlp::zeros(widths, &[Activation::Tanh, Activation::Linear], 0.15)?;
        let params: Vec<f64> = (0..net.param_count())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        net.set_params(&params)?;
        let input: Vec<f64> = (0..widths[0]).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let target = [rng.uniform(-1.0, 1.0)];
        let (_, analytic) = net.gradient(&input, &target)?;
        let numeric = net.numeric_gradient(&input, &target, H)?;
        worst = worst.max(max_relative_error(&analytic, &numeric));
    }
    Ok(GradCheck {
        trials,
        max_relative_error: worst,
    })
}
