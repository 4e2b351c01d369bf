//! Forward and backward passes of the block stack.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};

use super::config::{Architecture, LEAKY_SLOPE};
use super::params::{ModelLayout, ModelParams, TensorSpec};
use crate::error::{Error, Result};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn matrix<'a>(params: &'a ModelParams, spec: &TensorSpec) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((spec.shape[0], spec.shape[1]), params.tensor(spec)).expect("layout")
}

fn vector<'a>(params: &'a ModelParams, spec: &TensorSpec) -> ArrayView1<'a, f64> {
    ArrayView1::from(params.tensor(spec))
}

fn affine(x: &ArrayView2<f64>, w: ArrayView2<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w);
    z += &b;
    z
}

/// Activations retained by [`forward`] for exact backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layout: ModelLayout,
    input: Array2<f64>,
    block_inputs: Vec<Array2<f64>>,
    /// Highway: post-ReLU transform output. Plain: pre-activation.
    transforms: Vec<Array2<f64>>,
    gates: Vec<Array2<f64>>,
    last: Array2<f64>,
    probs: Vec<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn rows(&self) -> usize {
        self.probs.len()
    }
}

fn check_input(params: &ModelParams, batch: &ArrayView2<f64>) -> Result<()> {
    if batch.ncols() != params.layout.input_dim {
        return Err(Error::shape(
            format!("{} input columns", params.layout.input_dim),
            format!("{} columns", batch.ncols()),
        ));
    }
    Ok(())
}

fn run(params: &ModelParams, batch: ArrayView2<f64>, keep: bool) -> (Vec<f64>, Option<ForwardCache>) {
    let layout = &params.layout;
    let input_w = &layout.tensors[0];
    let input_b = &layout.tensors[1];
    let mut x = affine(&batch, matrix(params, input_w), vector(params, input_b));

    let mut block_inputs = Vec::new();
    let mut transforms = Vec::new();
    let mut gates = Vec::new();
    for k in 0..layout.n_blocks {
        let t = layout.block_tensors(k);
        let mut z = affine(&x.view(), matrix(params, &t[0]), vector(params, &t[1]));
        let y = match layout.architecture {
            Architecture::Highway => {
                z.mapv_inplace(|v| v.max(0.0));
                let mut gate = affine(&x.view(), matrix(params, &t[2]), vector(params, &t[3]));
                gate.mapv_inplace(sigmoid);
                let mut y = x.clone();
                Zip::from(&mut y)
                    .and(&z)
                    .and(&gate)
                    .for_each(|y, &h, &g| *y += g * (h - *y));
                if keep {
                    gates.push(gate);
                }
                y
            }
            Architecture::Plain => z.mapv(|v| if v > 0.0 { v } else { LEAKY_SLOPE * v }),
        };
        if keep {
            block_inputs.push(std::mem::replace(&mut x, y));
            transforms.push(z);
        } else {
            x = y;
        }
    }

    let (head_w, head_b) = layout.head();
    let logits = affine(&x.view(), matrix(params, head_w), vector(params, head_b));
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    let cache = keep.then(|| ForwardCache {
        layout: layout.clone(),
        input: batch.to_owned(),
        block_inputs,
        transforms,
        gates,
        last: x,
        probs: probs.clone(),
    });
    (probs, cache)
}

/// Probabilities plus the activations [`backward`] needs.
pub fn forward(params: &ModelParams, batch: ArrayView2<f64>) -> Result<(Vec<f64>, ForwardCache)> {
    check_input(params, &batch)?;
    let (probs, cache) = run(params, batch, true);
    Ok((probs, cache.expect("kept")))
}

const PREDICT_CHUNK: usize = 4096;

/// Probabilities only, evaluated in bounded chunks.
pub fn predict(params: &ModelParams, batch: ArrayView2<f64>) -> Result<Vec<f64>> {
    check_input(params, &batch)?;
    let mut out = Vec::with_capacity(batch.nrows());
    for chunk in batch.axis_chunks_iter(Axis(0), PREDICT_CHUNK) {
        out.extend(run(params, chunk, false).0);
    }
    Ok(out)
}

fn write_matrix(grad: &mut [f64], spec: &TensorSpec, value: Array2<f64>) {
    let mut dst = ArrayViewMut2::from_shape((spec.shape[0], spec.shape[1]), &mut grad[spec.range()])
        .expect("layout");
    dst.assign(&value);
}

fn write_vector(grad: &mut [f64], spec: &TensorSpec, value: Array1<f64>) {
    ArrayViewMut1::from(&mut grad[spec.range()]).assign(&value);
}

/// Gradient of the mean weighted binary cross-entropy with respect to every
/// parameter, in the parameter layout.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    labels: &[u8],
    pos_weight: f64,
) -> Result<Vec<f64>> {
    if cache.layout != params.layout {
        return Err(Error::StaleCache("layout differs from the forward pass".into()));
    }
    if labels.len() != cache.rows() {
        return Err(Error::StaleCache(format!(
            "{} labels for a {}-row forward pass",
            labels.len(),
            cache.rows()
        )));
    }
    if cache.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let layout = &params.layout;
    let n = cache.rows() as f64;
    let mut grad = vec![0.0; params.len()];

    let dlogit = Array2::from_shape_fn((cache.rows(), 1), |(i, _)| {
        let y = f64::from(labels[i]);
        let p = cache.probs[i];
        (p * (pos_weight * y + 1.0 - y) - pos_weight * y) / n
    });
    let (head_w, head_b) = layout.head();
    write_matrix(&mut grad, head_w, cache.last.t().dot(&dlogit));
    write_vector(&mut grad, head_b, dlogit.sum_axis(Axis(0)));
    let mut dy = dlogit.dot(&matrix(params, head_w).t());

    for k in (0..layout.n_blocks).rev() {
        let t = layout.block_tensors(k);
        let x = &cache.block_inputs[k];
        let dx = match layout.architecture {
            Architecture::Highway => {
                let h = &cache.transforms[k];
                let gate = &cache.gates[k];
                let mut dz_gate = Array2::zeros(dy.raw_dim());
                let mut dz_h = Array2::zeros(dy.raw_dim());
                Zip::from(&mut dz_gate)
                    .and(&mut dz_h)
                    .and(&dy)
                    .and(h)
                    .and(gate)
                    .and(x)
                    .for_each(|dg, dh, &d, &h, &g, &x| {
                        *dg = d * (h - x) * g * (1.0 - g);
                        *dh = if h > 0.0 { d * g } else { 0.0 };
                    });
                let mut carry = dy.clone();
                Zip::from(&mut carry).and(gate).for_each(|c, &g| *c *= 1.0 - g);
                write_matrix(&mut grad, &t[0], x.t().dot(&dz_h));
                write_vector(&mut grad, &t[1], dz_h.sum_axis(Axis(0)));
                write_matrix(&mut grad, &t[2], x.t().dot(&dz_gate));
                write_vector(&mut grad, &t[3], dz_gate.sum_axis(Axis(0)));
                carry + dz_h.dot(&matrix(params, &t[0]).t()) + dz_gate.dot(&matrix(params, &t[2]).t())
            }
            Architecture::Plain => {
                let z = &cache.transforms[k];
                let mut dz = dy.clone();
                Zip::from(&mut dz).and(z).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d *= LEAKY_SLOPE;
                    }
                });
                write_matrix(&mut grad, &t[0], x.t().dot(&dz));
                write_vector(&mut grad, &t[1], dz.sum_axis(Axis(0)));
                dz.dot(&matrix(params, &t[0]).t())
            }
        };
        dy = dx;
    }

    write_matrix(&mut grad, &layout.tensors[0], cache.input.t().dot(&dy));
    write_vector(&mut grad, &layout.tensors[1], dy.sum_axis(Axis(0)));
    Ok(grad)
}

/// Output of every block for a batch, head excluded.
pub fn block_outputs(params: &ModelParams, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_input(params, &batch)?;
    let (_, cache) = run(params, batch, true);
    Ok(cache.expect("kept").last)
}

/// Output of the input projection alone (the stack's input).
pub fn projected_input(params: &ModelParams, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_input(params, &batch)?;
    let layout = &params.layout;
    Ok(affine(
        &batch,
        matrix(params, &layout.tensors[0]),
        vector(params, &layout.tensors[1]),
    ))
}
