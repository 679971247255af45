//! A small fully-connected network with hand-written backpropagation.
//!
//! Affine layers with ReLU after each hidden layer and a linear head. Inputs
//! are the 4 observation components, outputs the 2 action values. Everything
//! is f64 and allocation happens per call; at this scale (default 4-8-8-2,
//! 130 parameters) that is plenty fast and keeps the code obvious.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

const CHECKPOINT_MAGIC: [u8; 4] = *b"QMLP";
const CHECKPOINT_VERSION: u32 = 1;

/// Which update rule `apply_gradient` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// One affine layer: weights are row-major `out x in`, one bias per output.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LayerParams {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }
}

/// First/second moment accumulators for one layer.
#[derive(Debug, Clone, PartialEq)]
struct LayerMoments {
    m_weights: Vec<f64>,
    v_weights: Vec<f64>,
    m_biases: Vec<f64>,
    v_biases: Vec<f64>,
}

impl LayerMoments {
    fn zeros(layer: &LayerParams) -> Self {
        LayerMoments {
            m_weights: vec![0.0; layer.weights.len()],
            v_weights: vec![0.0; layer.weights.len()],
            m_biases: vec![0.0; layer.biases.len()],
            v_biases: vec![0.0; layer.biases.len()],
        }
    }
}

/// Network parameters plus optimizer state. `Clone` produces a fully
/// independent deep copy (used for target-network snapshots).
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    layers: Vec<LayerParams>,
    moments: Vec<LayerMoments>,
    step: u64,
}

/// Gradient of a scalar objective with respect to every parameter;
/// shape-congruent with the [`Mlp`] it came from.
#[derive(Debug, Clone)]
pub struct Gradient {
    layers: Vec<LayerParams>,
}

impl Gradient {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradient {
            layers: net
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    /// `self += other`, entry by entry.
    pub fn accumulate(&mut self, other: &Gradient) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|w| w.is_finite()) && l.biases.iter().all(|b| b.is_finite())
        })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }
}

impl Mlp {
    /// Builds a network with He-uniform weights (fan-in scaled) and zero
    /// biases. Widths must run from the 4 observation components to the 2
    /// action values.
    pub fn init<R: Rng>(widths: &[usize], rng: &mut R) -> Result<Mlp> {
        if widths.len() < 2 {
            return Err(Error::InvalidWidths(format!(
                "need at least input and output widths, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidWidths(format!(
                "zero-width layer in {widths:?}"
            )));
        }
        if widths[0] != 4 || *widths.last().unwrap() != 2 {
            return Err(Error::InvalidWidths(format!(
                "expected widths 4 -> ... -> 2, got {widths:?}"
            )));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (in_dim, out_dim) = (pair[0], pair[1]);
            let bound = (6.0 / in_dim as f64).sqrt();
            let mut layer = LayerParams::zeros(in_dim, out_dim);
            for w in &mut layer.weights {
                *w = rng.gen_range(-bound..bound);
            }
            layers.push(layer);
        }
        let moments = layers.iter().map(LayerMoments::zeros).collect();
        Ok(Mlp {
            widths: widths.to_vec(),
            layers,
            moments,
            step: 0,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Mutable access to the raw parameters, for hand-built networks.
    /// Dimensions must be preserved.
    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    /// Optimizer steps applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Action values for one observation.
    pub fn forward(&self, input: &[f64; 4]) -> [f64; 2] {
        debug_assert!(input.iter().all(|x| x.is_finite()));
        let mut activation: Vec<f64> = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut next = layer.biases.clone();
            for (row, out) in next.iter_mut().enumerate() {
                let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (wi, ai) in w.iter().zip(&activation) {
                    *out += wi * ai;
                }
            }
            if k != last {
                for a in &mut next {
                    if *a < 0.0 {
                        *a = 0.0;
                    }
                }
            }
            activation = next;
        }
        [activation[0], activation[1]]
    }

    /// Exact gradient of `<upstream, forward(input)>` with respect to every
    /// parameter. The ReLU subgradient at exactly 0 is taken as 0.
    pub fn backward(&self, input: &[f64; 4], upstream: &[f64; 2]) -> Gradient {
        // Forward pass, keeping pre-activations for the ReLU mask.
        let last = self.layers.len() - 1;
        let mut activations: Vec<Vec<f64>> = vec![input.to_vec()];
        let mut pre_activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let prev = activations.last().unwrap();
            let mut z = layer.biases.clone();
            for (row, out) in z.iter_mut().enumerate() {
                let w = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (wi, ai) in w.iter().zip(prev) {
                    *out += wi * ai;
                }
            }
            pre_activations.push(z.clone());
            if k != last {
                for a in &mut z {
                    if *a < 0.0 {
                        *a = 0.0;
                    }
                }
            }
            activations.push(z);
        }

        let mut grad = Gradient::zeros_like(self);
        let mut delta: Vec<f64> = upstream.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if k != last {
                // Mask by this layer's ReLU: strict positivity, so z == 0
                // contributes nothing.
                for (d, z) in delta.iter_mut().zip(&pre_activations[k]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input_act = &activations[k];
            let g = &mut grad.layers[k];
            for (row, d) in delta.iter().enumerate() {
                let w_row = &mut g.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                for (gw, ai) in w_row.iter_mut().zip(input_act) {
                    *gw = d * ai;
                }
                g.biases[row] = *d;
            }
            if k > 0 {
                let mut prev_delta = vec![0.0; layer.in_dim];
                for (row, d) in delta.iter().enumerate() {
                    let w_row = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
                    for (pd, wi) in prev_delta.iter_mut().zip(w_row) {
                        *pd += d * wi;
                    }
                }
                delta = prev_delta;
            }
        }
        grad
    }

    /// One optimizer step. Rejects non-finite gradients without touching any
    /// parameter.
    pub fn apply_gradient(
        &mut self,
        grad: &Gradient,
        lr: f64,
        optimizer: OptimizerKind,
    ) -> Result<()> {
        if grad.layers.len() != self.layers.len() {
            return Err(Error::LengthMismatch("gradient layer count"));
        }
        if !grad.is_finite() {
            return Err(Error::NonFiniteGradient);
        }
        match optimizer {
            OptimizerKind::Adam => self.adam_step(grad, lr),
            OptimizerKind::Sgd => self.sgd_step(grad, lr),
        }
        Ok(())
    }

    fn adam_step(&mut self, grad: &Gradient, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let m_corr = 1.0 - ADAM_BETA1.powi(t);
        let v_corr = 1.0 - ADAM_BETA2.powi(t);
        for ((layer, moments), g) in self
            .layers
            .iter_mut()
            .zip(&mut self.moments)
            .zip(&grad.layers)
        {
            adam_update_slice(
                &mut layer.weights,
                &mut moments.m_weights,
                &mut moments.v_weights,
                &g.weights,
                lr,
                m_corr,
                v_corr,
            );
            adam_update_slice(
                &mut layer.biases,
                &mut moments.m_biases,
                &mut moments.v_biases,
                &g.biases,
                lr,
                m_corr,
                v_corr,
            );
        }
    }

    fn sgd_step(&mut self, grad: &Gradient, lr: f64) {
        self.step += 1;
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb;
            }
        }
    }

    /// Writes parameters as a flat little-endian binary checkpoint:
    /// magic, version, layer widths, then per layer the row-major weight
    /// matrix followed by the bias vector.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<()> {
            w.write_all(bytes).map_err(|e| Error::io(path, e))
        };
        write(&mut w, &CHECKPOINT_MAGIC)?;
        write(&mut w, &CHECKPOINT_VERSION.to_le_bytes())?;
        write(&mut w, &(self.widths.len() as u32).to_le_bytes())?;
        for &width in &self.widths {
            write(&mut w, &(width as u32).to_le_bytes())?;
        }
        for layer in &self.layers {
            for value in layer.weights.iter().chain(&layer.biases) {
                write(&mut w, &value.to_le_bytes())?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint written by [`Mlp::save`]. Optimizer state starts
    /// zeroed.
    pub fn load(path: &Path) -> Result<Mlp> {
        let bad = |reason: &str| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u32_buf = [0u8; 4];
        r.read_exact(&mut u32_buf).map_err(|e| Error::io(path, e))?;
        if u32::from_le_bytes(u32_buf) != CHECKPOINT_VERSION {
            return Err(bad("unsupported version"));
        }
        r.read_exact(&mut u32_buf).map_err(|e| Error::io(path, e))?;
        let n_widths = u32::from_le_bytes(u32_buf) as usize;
        if !(2..=64).contains(&n_widths) {
            return Err(bad("implausible layer count"));
        }
        let mut widths = Vec::with_capacity(n_widths);
        for _ in 0..n_widths {
            r.read_exact(&mut u32_buf).map_err(|e| Error::io(path, e))?;
            widths.push(u32::from_le_bytes(u32_buf) as usize);
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(bad("zero-width layer"));
        }

        let mut layers = Vec::with_capacity(n_widths - 1);
        let mut f64_buf = [0u8; 8];
        for pair in widths.windows(2) {
            let mut layer = LayerParams::zeros(pair[0], pair[1]);
            for slot in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                r.read_exact(&mut f64_buf).map_err(|e| Error::io(path, e))?;
                *slot = f64::from_le_bytes(f64_buf);
            }
            layers.push(layer);
        }
        let moments = layers.iter().map(LayerMoments::zeros).collect();
        Ok(Mlp {
            widths,
            layers,
            moments,
            step: 0,
        })
    }
}

fn adam_update_slice(
    params: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    grad: &[f64],
    lr: f64,
    m_corr: f64,
    v_corr: f64,
) {
    for i in 0..params.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
        let m_hat = m[i] / m_corr;
        let v_hat = v[i] / v_corr;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}
