//! Stacked LSTM with exact backpropagation through time.
//!
//! Each layer uses the standard cell without peepholes. With pre-activations
//! `a = W·x_t + U·h_{t-1} + b` split into gate blocks `(i, f, o, g)`:
//!
//! ```text
//! i = σ(a_i)   f = σ(a_f)   o = σ(a_o)   g = tanh(a_g)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! Pre-activations are clamped to ±50 before the nonlinearity; the clamp
//! passes zero gradient. The top layer's hidden state goes through a dense
//! projection and an output activation at every timestep. Initial hidden and
//! cell states are zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

pub const PREACTIVATION_CLAMP: f64 = 50.0;
pub const INIT_RANGE: f64 = 0.08;
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn clamp_pre(x: f64) -> f64 {
    x.clamp(-PREACTIVATION_CLAMP, PREACTIVATION_CLAMP)
}

/// One LSTM layer. Weight rows are stacked in gate order `i, f, o, g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4h × d`, row-major.
    pub input_weights: Vec<f64>,
    /// `4h × h`, row-major.
    pub recurrent_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = 4 * hidden_size;
        LstmLayerParams {
            input_size,
            hidden_size,
            input_weights: vec![0.0; g * input_size],
            recurrent_weights: vec![0.0; g * hidden_size],
            biases: vec![0.0; g],
        }
    }

    pub fn random<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input_size, hidden_size);
        for w in layer.input_weights.iter_mut().chain(layer.recurrent_weights.iter_mut()) {
            *w = rng.random_range(-INIT_RANGE..=INIT_RANGE);
        }
        for b in &mut layer.biases[hidden_size..2 * hidden_size] {
            *b = FORGET_BIAS;
        }
        layer
    }
}

/// Recurrent layers followed by a per-timestep dense output map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedLstm {
    pub layers: Vec<LstmLayerParams>,
    pub output_size: usize,
    /// `o × h_top`, row-major.
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
    pub output_activation: Activation,
}

/// Network shape used to build a [`StackedLstm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmShape {
    pub input_size: usize,
    pub hidden_size: usize,
    pub depth: usize,
    pub output_size: usize,
    pub output_activation: Activation,
}

impl StackedLstm {
    pub fn zeros(shape: LstmShape) -> Result<Self> {
        Self::build(shape, |d, h| LstmLayerParams::zeros(d, h), |_| 0.0)
    }

    /// Uniform `[-0.08, 0.08]` weights, forget-gate bias 1, other biases 0.
    pub fn random<R: Rng + ?Sized>(shape: LstmShape, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(shape.depth);
        Self::validate_shape(&shape)?;
        for k in 0..shape.depth {
            let d = if k == 0 { shape.input_size } else { shape.hidden_size };
            layers.push(LstmLayerParams::random(d, shape.hidden_size, rng));
        }
        let output_weights = (0..shape.output_size * shape.hidden_size)
            .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        Ok(StackedLstm {
            layers,
            output_size: shape.output_size,
            output_weights,
            output_bias: vec![0.0; shape.output_size],
            output_activation: shape.output_activation,
        })
    }

    fn validate_shape(shape: &LstmShape) -> Result<()> {
        if shape.depth == 0 || shape.hidden_size == 0 || shape.input_size == 0 || shape.output_size == 0
        {
            return Err(Error::invalid(format!("degenerate network shape {shape:?}")));
        }
        Ok(())
    }

    fn build(
        shape: LstmShape,
        mut layer: impl FnMut(usize, usize) -> LstmLayerParams,
        mut weight: impl FnMut(usize) -> f64,
    ) -> Result<Self> {
        Self::validate_shape(&shape)?;
        let layers = (0..shape.depth)
            .map(|k| layer(if k == 0 { shape.input_size } else { shape.hidden_size }, shape.hidden_size))
            .collect();
        Ok(StackedLstm {
            layers,
            output_size: shape.output_size,
            output_weights: (0..shape.output_size * shape.hidden_size).map(&mut weight).collect(),
            output_bias: vec![0.0; shape.output_size],
            output_activation: shape.output_activation,
        })
    }

    pub fn shape(&self) -> LstmShape {
        LstmShape {
            input_size: self.input_size(),
            hidden_size: self.top_hidden(),
            depth: self.layers.len(),
            output_size: self.output_size,
            output_activation: self.output_activation,
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    fn top_hidden(&self) -> usize {
        self.layers.last().map(|l| l.hidden_size).unwrap_or(0)
    }

    /// Parameter arrays in canonical order: per layer (input weights,
    /// recurrent weights, biases), then output weights and bias.
    pub fn param_arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.input_weights);
            out.push(&l.recurrent_weights);
            out.push(&l.biases);
        }
        out.push(&self.output_weights);
        out.push(&self.output_bias);
        out
    }

    pub fn param_arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.input_weights);
            out.push(&mut l.recurrent_weights);
            out.push(&mut l.biases);
        }
        out.push(&mut self.output_weights);
        out.push(&mut self.output_bias);
        out
    }

    pub fn n_params(&self) -> usize {
        self.param_arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.param_arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Runs the network over `sequence` (`L × d`), returning `L × o` outputs
    /// and the activations needed by [`StackedLstm::backward`].
    pub fn forward(&self, sequence: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if sequence.cols() != self.input_size() {
            return Err(Error::dims(format!(
                "sequence has {} columns, network expects {}",
                sequence.cols(),
                self.input_size()
            )));
        }
        if !sequence.is_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        let steps = sequence.rows();
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        let mut input = sequence.as_slice().to_vec();
        for layer in &self.layers {
            let cache = layer_forward(layer, input, steps);
            input = cache.hidden.clone();
            layer_caches.push(cache);
        }

        let h = self.top_hidden();
        let o = self.output_size;
        let top = &layer_caches.last().expect("depth >= 1").hidden;
        let mut outputs = Matrix::zeros(steps, o);
        for t in 0..steps {
            let ht = &top[t * h..(t + 1) * h];
            for k in 0..o {
                let z = dot(&self.output_weights[k * h..(k + 1) * h], ht) + self.output_bias[k];
                outputs[(t, k)] = self.output_activation.apply(z);
            }
        }
        let cache = ForwardCache { steps, layers: layer_caches, outputs: outputs.clone() };
        Ok((outputs, cache))
    }

    /// Convenience wrapper discarding the cache.
    pub fn predict(&self, sequence: &Matrix) -> Result<Matrix> {
        self.forward(sequence).map(|(out, _)| out)
    }

    /// Backpropagates `output_grads` (`∂loss/∂outputs`, `L × o`) through
    /// time. Returns parameter gradients and `∂loss/∂input` (`L × d`).
    pub fn backward(&self, cache: &ForwardCache, output_grads: &Matrix) -> Result<(GradientSet, Matrix)> {
        if cache.layers.len() != self.layers.len()
            || cache.layers.iter().zip(&self.layers).any(|(c, l)| {
                c.hidden.len() != cache.steps * l.hidden_size || c.input_size != l.input_size
            })
            || cache.outputs.cols() != self.output_size
        {
            return Err(Error::dims("forward cache does not match network"));
        }
        if output_grads.shape() != cache.outputs.shape() {
            return Err(Error::dims(format!(
                "output gradients {:?} vs outputs {:?}",
                output_grads.shape(),
                cache.outputs.shape()
            )));
        }
        let steps = cache.steps;
        let h_top = self.top_hidden();
        let o = self.output_size;
        let mut grads = GradientSet::zeros_like(self);
        let top_hidden = &cache.layers.last().expect("depth >= 1").hidden;

        // output projection
        let mut dh_above = vec![0.0; steps * h_top];
        {
            let (gw, gb) = grads.output_mut();
            for t in 0..steps {
                let ht = &top_hidden[t * h_top..(t + 1) * h_top];
                let dh = &mut dh_above[t * h_top..(t + 1) * h_top];
                for k in 0..o {
                    let y = cache.outputs[(t, k)];
                    let dz = output_grads[(t, k)] * self.output_activation.derivative_from_output(y);
                    if dz == 0.0 {
                        continue;
                    }
                    gb[k] += dz;
                    let wrow = &self.output_weights[k * h_top..(k + 1) * h_top];
                    let grow = &mut gw[k * h_top..(k + 1) * h_top];
                    for j in 0..h_top {
                        grow[j] += dz * ht[j];
                        dh[j] += dz * wrow[j];
                    }
                }
            }
        }

        for (idx, (layer, lc)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let lg = &mut grads.layers[idx];
            dh_above = layer_backward(layer, lc, steps, &dh_above, lg);
        }
        let input_grads = Matrix::from_vec(steps, self.input_size(), dh_above)?;
        Ok((grads, input_grads))
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input_size: usize,
    /// `L × d` layer inputs.
    inputs: Vec<f64>,
    /// `L × 4h` clamped pre-activations.
    pre: Vec<f64>,
    /// `L × 4h` gate values after their nonlinearity.
    gates: Vec<f64>,
    /// `L × h` cell states.
    cells: Vec<f64>,
    /// `L × h` tanh of cell states.
    cells_tanh: Vec<f64>,
    /// `L × h` hidden states.
    hidden: Vec<f64>,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    steps: usize,
    layers: Vec<LayerCache>,
    outputs: Matrix,
}

impl ForwardCache {
    pub fn outputs(&self) -> &Matrix {
        &self.outputs
    }
}

fn layer_forward(layer: &LstmLayerParams, inputs: Vec<f64>, steps: usize) -> LayerCache {
    let d = layer.input_size;
    let h = layer.hidden_size;
    let g4 = 4 * h;
    let mut pre = vec![0.0; steps * g4];
    let mut gates = vec![0.0; steps * g4];
    let mut cells = vec![0.0; steps * h];
    let mut cells_tanh = vec![0.0; steps * h];
    let mut hidden = vec![0.0; steps * h];
    let zero = vec![0.0; h];

    for t in 0..steps {
        let x = &inputs[t * d..(t + 1) * d];
        let (h_prev, c_prev) = if t == 0 {
            (&zero[..], &zero[..])
        } else {
            (&hidden[(t - 1) * h..t * h], &cells[(t - 1) * h..t * h])
        };
        let a = &mut pre[t * g4..(t + 1) * g4];
        for r in 0..g4 {
            let z = layer.biases[r]
                + dot(&layer.input_weights[r * d..(r + 1) * d], x)
                + dot(&layer.recurrent_weights[r * h..(r + 1) * h], h_prev);
            a[r] = z;
        }
        let gt = &mut gates[t * g4..(t + 1) * g4];
        for r in 0..g4 {
            let z = clamp_pre(a[r]);
            gt[r] = if r < 3 * h { sigmoid(z) } else { z.tanh() };
        }
        let mut c_new = vec![0.0; h];
        for j in 0..h {
            c_new[j] = gt[h + j] * c_prev[j] + gt[j] * gt[3 * h + j];
        }
        for j in 0..h {
            let tc = c_new[j].tanh();
            cells_tanh[t * h + j] = tc;
            hidden[t * h + j] = gt[2 * h + j] * tc;
        }
        cells[t * h..(t + 1) * h].copy_from_slice(&c_new);
    }
    LayerCache { input_size: d, inputs, pre, gates, cells, cells_tanh, hidden }
}

/// BPTT through one layer; returns `∂loss/∂inputs` (`L × d`).
fn layer_backward(
    layer: &LstmLayerParams,
    lc: &LayerCache,
    steps: usize,
    dh_above: &[f64],
    grads: &mut LayerGradients,
) -> Vec<f64> {
    let d = layer.input_size;
    let h = layer.hidden_size;
    let g4 = 4 * h;
    let mut dx = vec![0.0; steps * d];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; g4];
    let zero = vec![0.0; h];

    for t in (0..steps).rev() {
        let gt = &lc.gates[t * g4..(t + 1) * g4];
        let pre = &lc.pre[t * g4..(t + 1) * g4];
        let c_prev = if t == 0 { &zero[..] } else { &lc.cells[(t - 1) * h..t * h] };
        let h_prev = if t == 0 { &zero[..] } else { &lc.hidden[(t - 1) * h..t * h] };
        let tc = &lc.cells_tanh[t * h..(t + 1) * h];
        for j in 0..h {
            let (i, f, o, g) = (gt[j], gt[h + j], gt[2 * h + j], gt[3 * h + j]);
            let dh = dh_above[t * h + j] + dh_next[j];
            let d_o = dh * tc[j];
            let dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
            dc_next[j] = dc * f;
            da[j] = dc * g * i * (1.0 - i);
            da[h + j] = dc * c_prev[j] * f * (1.0 - f);
            da[2 * h + j] = d_o * o * (1.0 - o);
            da[3 * h + j] = dc * i * (1.0 - g * g);
        }
        for r in 0..g4 {
            if pre[r].abs() > PREACTIVATION_CLAMP {
                da[r] = 0.0;
            }
        }

        let x = &lc.inputs[t * d..(t + 1) * d];
        let dxt = &mut dx[t * d..(t + 1) * d];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..g4 {
            let dar = da[r];
            if dar == 0.0 {
                continue;
            }
            grads.biases[r] += dar;
            let wi = &layer.input_weights[r * d..(r + 1) * d];
            let gwi = &mut grads.input_weights[r * d..(r + 1) * d];
            for k in 0..d {
                gwi[k] += dar * x[k];
                dxt[k] += dar * wi[k];
            }
            let wr = &layer.recurrent_weights[r * h..(r + 1) * h];
            let gwr = &mut grads.recurrent_weights[r * h..(r + 1) * h];
            for k in 0..h {
                gwr[k] += dar * h_prev[k];
                dh_next[k] += dar * wr[k];
            }
        }
    }
    dx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGradients {
    pub input_weights: Vec<f64>,
    pub recurrent_weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients congruent with a [`StackedLstm`]'s parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSet {
    pub layers: Vec<LayerGradients>,
    pub output_weights: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &StackedLstm) -> Self {
        GradientSet {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    input_weights: vec![0.0; l.input_weights.len()],
                    recurrent_weights: vec![0.0; l.recurrent_weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
            output_weights: vec![0.0; net.output_weights.len()],
            output_bias: vec![0.0; net.output_bias.len()],
        }
    }

    fn output_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.output_weights, &mut self.output_bias)
    }

    /// Same ordering as [`StackedLstm::param_arrays`].
    pub fn arrays(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.input_weights);
            out.push(&l.recurrent_weights);
            out.push(&l.biases);
        }
        out.push(&self.output_weights);
        out.push(&self.output_bias);
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.input_weights);
            out.push(&mut l.recurrent_weights);
            out.push(&mut l.biases);
        }
        out.push(&mut self.output_weights);
        out.push(&mut self.output_bias);
        out
    }

    pub fn is_congruent(&self, net: &StackedLstm) -> bool {
        let a = self.arrays();
        let b = net.param_arrays();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.arrays_mut() {
            a.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.arrays().iter().flat_map(|a| a.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.arrays().iter().flat_map(|a| a.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(d: usize, h: usize, depth: usize, o: usize, act: Activation) -> LstmShape {
        LstmShape { input_size: d, hidden_size: h, depth, output_size: o, output_activation: act }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = StackedLstm::zeros(shape(3, 4, 2, 2, Activation::Identity)).unwrap();
        let seq = Matrix::filled(5, 3, 0.7);
        let out = net.predict(&seq).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_step_hand_computation() {
        let mut net = StackedLstm::zeros(shape(1, 1, 1, 1, Activation::Identity)).unwrap();
        let l = &mut net.layers[0];
        l.input_weights = vec![0.5, -0.3, 0.8, 1.2];
        l.biases = vec![0.1, 0.2, -0.1, 0.05];
        net.output_weights = vec![2.0];
        net.output_bias = vec![0.3];
        let x = 0.7;
        let out = net.predict(&Matrix::from_rows(&[[x]]).unwrap()).unwrap();

        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let i = s(0.5 * x + 0.1);
        let o = s(0.8 * x - 0.1);
        let g = (1.2 * x + 0.05).tanh();
        let c = i * g; // c_prev = 0, forget gate has no effect
        let expected = 2.0 * o * c.tanh() + 0.3;
        assert!((out[(0, 0)] - expected).abs() < 1e-15);
    }

    #[test]
    fn outputs_are_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = StackedLstm::random(shape(2, 5, 2, 2, Activation::Tanh), &mut rng).unwrap();
        let mut seq = Matrix::zeros(8, 2);
        for (k, v) in seq.as_mut_slice().iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        let base = net.predict(&seq).unwrap();
        let mut perturbed = seq.clone();
        for t in 5..8 {
            perturbed[(t, 0)] += 3.0;
        }
        let out = net.predict(&perturbed).unwrap();
        for t in 0..5 {
            assert_eq!(out.row(t), base.row(t));
        }
        assert_ne!(out.row(5), base.row(5));

        let mut padded = Matrix::zeros(16, 2);
        padded.as_mut_slice()[..16].copy_from_slice(seq.as_slice());
        let long = net.predict(&padded).unwrap();
        assert_eq!(&long.as_slice()[..16], base.as_slice());
    }

    #[test]
    fn sigmoid_outputs_strictly_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = StackedLstm::random(shape(3, 6, 1, 1, Activation::Sigmoid), &mut rng).unwrap();
        let seq = Matrix::filled(10, 3, 40.0);
        let out = net.predict(&seq).unwrap();
        assert!(out.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn zero_output_grads_give_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = StackedLstm::random(shape(2, 3, 2, 1, Activation::Tanh), &mut rng).unwrap();
        let seq = Matrix::filled(4, 2, 0.5);
        let (out, cache) = net.forward(&seq).unwrap();
        let (g, dx) = net.backward(&cache, &Matrix::zeros(out.rows(), out.cols())).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let net = StackedLstm::zeros(shape(2, 3, 1, 1, Activation::Tanh)).unwrap();
        assert!(net.forward(&Matrix::zeros(3, 4)).is_err());
        let mut bad = Matrix::zeros(3, 2);
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(net.forward(&bad), Err(Error::NonFinite(_))));

        let other = StackedLstm::zeros(shape(2, 5, 1, 1, Activation::Tanh)).unwrap();
        let (out, cache) = other.forward(&Matrix::zeros(3, 2)).unwrap();
        assert!(net.backward(&cache, &Matrix::zeros(out.rows(), out.cols())).is_err());
        assert!(StackedLstm::zeros(shape(2, 3, 0, 1, Activation::Tanh)).is_err());
    }

    #[test]
    fn initialization_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = StackedLstm::random(shape(4, 7, 2, 3, Activation::Tanh), &mut rng).unwrap();
        for l in &net.layers {
            assert!(l.input_weights.iter().chain(&l.recurrent_weights).all(|w| w.abs() <= INIT_RANGE));
            let h = l.hidden_size;
            assert!(l.biases[h..2 * h].iter().all(|&b| b == FORGET_BIAS));
            assert!(l.biases[..h].iter().chain(&l.biases[2 * h..]).all(|&b| b == 0.0));
        }
        assert_eq!(net.layers[1].input_size, 7);
    }

    #[test]
    fn clip_global_norm() {
        let net = StackedLstm::zeros(shape(1, 1, 1, 1, Activation::Identity)).unwrap();
        let mut g = GradientSet::zeros_like(&net);
        g.output_weights[0] = 3.0;
        g.output_bias[0] = 4.0;
        assert_eq!(g.clip_global_norm(1.0), 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-15);
    }
}
