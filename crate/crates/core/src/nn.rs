//! Dense-network machinery: two-hidden-layer feedforward networks with
//! ReLU, exact reverse-mode gradients, bias-corrected Adam, and soft
//! (Polyak) target blending.
//!
//! Everything is f64 and batched: inputs are `[batch, dim]` matrices.
//! Parameter containers are exclusively owned by one learner; clone for
//! read-only snapshots.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Clamp bounds for the log-std half of a Gaussian head.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Output-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Raw affine output (critics).
    Linear,
    /// Elementwise tanh, bounding outputs to [-1, 1] (deterministic actors).
    Tanh,
    /// First half mean, second half log-std clamped to
    /// [LOG_STD_MIN, LOG_STD_MAX] (stochastic actors).
    GaussianMeanLogStd,
}

impl Head {
    pub fn as_str(&self) -> &'static str {
        match self {
            Head::Linear => "linear",
            Head::Tanh => "tanh",
            Head::GaussianMeanLogStd => "gaussian",
        }
    }

    pub fn from_str(s: &str) -> Result<Head> {
        match s {
            "linear" => Ok(Head::Linear),
            "tanh" => Ok(Head::Tanh),
            "gaussian" => Ok(Head::GaussianMeanLogStd),
            other => Err(Error::Parse(format!("unknown head kind '{other}'"))),
        }
    }
}

/// Layered weights and biases. `dims` lists layer widths from input to
/// output; weights are stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub head: Head,
}

/// Activations saved by a forward pass, sufficient for exact backprop.
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    hidden: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Per-layer parameter gradients, shaped exactly like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

impl Mlp {
    /// Fan-in uniform init: every weight and bias of a layer is drawn from
    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the final layer is additionally
    /// scaled by `final_scale` (actors use 0.01 so initial actions are
    /// near zero). Draw order: per layer, weights row-major then biases.
    pub fn new(dims: &[usize], head: Head, final_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let layers = dims.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l == layers - 1 { final_scale } else { 1.0 };
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-bound..bound) * scale
            });
            let b = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound) * scale);
            weights.push(w);
            biases.push(b);
        }
        Mlp { dims: dims.to_vec(), weights, biases, head }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Affine + activation composition over a batch, returning the output
    /// and a cache for backprop. Panics on input width mismatch.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> (Array2<f64>, ForwardCache) {
        assert_eq!(
            x.ncols(),
            self.input_dim(),
            "input width {} does not match layer_dims[0] = {}",
            x.ncols(),
            self.input_dim()
        );
        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut hidden = Vec::with_capacity(layers.saturating_sub(1));
        let mut a = x.to_owned();
        let mut output = None;
        for l in 0..layers {
            let z = a.dot(&self.weights[l].t()) + &self.biases[l];
            if l + 1 < layers {
                a = z.mapv(|v| v.max(0.0));
                pre.push(z);
                hidden.push(a.clone());
            } else {
                output = Some(self.apply_head(&z));
                pre.push(z);
            }
        }
        let output = output.unwrap();
        (
            output.clone(),
            ForwardCache { input: x.to_owned(), pre, hidden, output },
        )
    }

    /// Forward pass without cache, for target networks and rollouts.
    pub fn infer_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(x.ncols(), self.input_dim());
        let layers = self.weights.len();
        let mut a = x.to_owned();
        for l in 0..layers {
            let z = a.dot(&self.weights[l].t()) + &self.biases[l];
            a = if l + 1 < layers { z.mapv(|v| v.max(0.0)) } else { self.apply_head(&z) };
        }
        a
    }

    /// Single-observation forward.
    pub fn forward_one(&self, x: &[f64]) -> Vec<f64> {
        let input = Array2::from_shape_vec((1, x.len()), x.to_vec()).unwrap();
        self.infer_batch(input.view()).row(0).to_vec()
    }

    fn apply_head(&self, z: &Array2<f64>) -> Array2<f64> {
        match self.head {
            Head::Linear => z.clone(),
            Head::Tanh => z.mapv(f64::tanh),
            Head::GaussianMeanLogStd => {
                let half = z.ncols() / 2;
                let mut out = z.clone();
                for mut row in out.rows_mut() {
                    for j in half..row.len() {
                        row[j] = row[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
                    }
                }
                out
            }
        }
    }

    /// Exact reverse-mode gradients for all weights and biases plus the
    /// gradient with respect to the input. `d_out` is the loss gradient at
    /// the (post-head) output.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        d_out: ArrayView2<f64>,
    ) -> (Gradients, Array2<f64>) {
        assert_eq!(d_out.dim(), cache.output.dim(), "output gradient shape mismatch");
        let layers = self.weights.len();
        let z_last = &cache.pre[layers - 1];
        let mut dz = match self.head {
            Head::Linear => d_out.to_owned(),
            Head::Tanh => {
                let y = &cache.output;
                let mut d = d_out.to_owned();
                d.zip_mut_with(y, |g, &yv| *g *= 1.0 - yv * yv);
                d
            }
            Head::GaussianMeanLogStd => {
                // Mean half passes through; clamped log-std entries get
                // zero gradient outside the open clamp interval.
                let half = z_last.ncols() / 2;
                let mut d = d_out.to_owned();
                for (mut drow, zrow) in d.rows_mut().into_iter().zip(z_last.rows()) {
                    for j in half..drow.len() {
                        if zrow[j] <= LOG_STD_MIN || zrow[j] >= LOG_STD_MAX {
                            drow[j] = 0.0;
                        }
                    }
                }
                d
            }
        };

        let mut g = Gradients {
            weights: Vec::with_capacity(layers),
            biases: Vec::with_capacity(layers),
        };
        let mut d_input = None;
        for l in (0..layers).rev() {
            let a_prev = if l == 0 { &cache.input } else { &cache.hidden[l - 1] };
            g.weights.push(dz.t().dot(a_prev));
            g.biases.push(dz.sum_axis(Axis(0)));
            let da = dz.dot(&self.weights[l]);
            if l == 0 {
                d_input = Some(da);
            } else {
                let mut next = da;
                next.zip_mut_with(&cache.pre[l - 1], |v, &z| {
                    if z <= 0.0 {
                        *v = 0.0;
                    }
                });
                dz = next;
            }
        }
        g.weights.reverse();
        g.biases.reverse();
        (g, d_input.unwrap())
    }
}

/// First/second-moment accumulators shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m_weights: Vec<Array2<f64>>,
    pub v_weights: Vec<Array2<f64>>,
    pub m_biases: Vec<Array1<f64>>,
    pub v_biases: Vec<Array1<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        AdamState {
            m_weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v_weights: mlp.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            m_biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            v_biases: mlp.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected Adam update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
/// Fails fast on non-finite gradients so a diverging run can abort with
/// its last good checkpoint.
pub fn adam_step(mlp: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient contains NaN or infinity".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for l in 0..mlp.weights.len() {
        azip(&mut state.m_weights[l], &grads.weights[l], |m, g| {
            *m = b1 * *m + (1.0 - b1) * g
        });
        azip(&mut state.v_weights[l], &grads.weights[l], |v, g| {
            *v = b2 * *v + (1.0 - b2) * g * g
        });
        let m = &state.m_weights[l];
        let v = &state.v_weights[l];
        ndarray::Zip::from(&mut mlp.weights[l])
            .and(m)
            .and(v)
            .for_each(|w, &m, &v| {
                *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
        azip1(&mut state.m_biases[l], &grads.biases[l], |m, g| {
            *m = b1 * *m + (1.0 - b1) * g
        });
        azip1(&mut state.v_biases[l], &grads.biases[l], |v, g| {
            *v = b2 * *v + (1.0 - b2) * g * g
        });
        let mb = &state.m_biases[l];
        let vb = &state.v_biases[l];
        ndarray::Zip::from(&mut mlp.biases[l])
            .and(mb)
            .and(vb)
            .for_each(|w, &m, &v| {
                *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
            });
    }
    Ok(())
}

fn azip(dst: &mut Array2<f64>, src: &Array2<f64>, f: impl Fn(&mut f64, f64)) {
    dst.zip_mut_with(src, |d, &s| f(d, s));
}

fn azip1(dst: &mut Array1<f64>, src: &Array1<f64>, f: impl Fn(&mut f64, f64)) {
    dst.zip_mut_with(src, |d, &s| f(d, s));
}

/// Polyak blend: target <- (1 - tau) * target + tau * source, elementwise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<()> {
    if target.dims != source.dims {
        return Err(Error::Dimension(format!(
            "soft_update shape mismatch: {:?} vs {:?}",
            target.dims, source.dims
        )));
    }
    for l in 0..target.weights.len() {
        azip(&mut target.weights[l], &source.weights[l], |t, s| {
            *t = (1.0 - tau) * *t + tau * s
        });
        azip1(&mut target.biases[l], &source.biases[l], |t, s| {
            *t = (1.0 - tau) * *t + tau * s
        });
    }
    Ok(())
}
