//! Shared test oracles, compiled only for unit tests. These deliberately
//! re-implement forward passes with plain loops so the ndarray path has an
//! independent reference.

use ndarray::{Array1, Array2};

use crate::nn::{Head, Mlp, LOG_STD_MAX, LOG_STD_MIN};

/// Plain-Vec forward pass, independent of the batched implementation.
pub(crate) fn naive_forward(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = x.to_vec();
    let layers = mlp.weights.len();
    for l in 0..layers {
        let w = &mlp.weights[l];
        let b = &mlp.biases[l];
        let mut z = vec![0.0; w.nrows()];
        for i in 0..w.nrows() {
            let mut acc = b[i];
            for j in 0..w.ncols() {
                acc += w[[i, j]] * a[j];
            }
            z[i] = acc;
        }
        if l + 1 < layers {
            for v in z.iter_mut() {
                *v = v.max(0.0);
            }
        } else {
            match mlp.head {
                Head::Linear => {}
                Head::Tanh => {
                    for v in z.iter_mut() {
                        *v = v.tanh();
                    }
                }
                Head::GaussianMeanLogStd => {
                    let half = z.len() / 2;
                    for v in z.iter_mut().skip(half) {
                        *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
                    }
                }
            }
        }
        a = z;
    }
    a
}

/// A network that outputs a constant regardless of input: zero weights,
/// final bias set to the constant.
pub(crate) fn const_net(input_dim: usize, hidden: usize, value: f64, head: Head) -> Mlp {
    let dims = vec![input_dim, hidden, 1];
    let weights = vec![
        Array2::zeros((hidden, input_dim)),
        Array2::zeros((1, hidden)),
    ];
    let biases = vec![Array1::zeros(hidden), Array1::from_elem(1, value)];
    Mlp { dims, weights, biases, head }
}
