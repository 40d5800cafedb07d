//! The classifier: three dense layers with ReLU and inverted dropout.
//!
//! ```text
//! logits = l3(drop(relu(l2(drop(relu(l1(x)))))))
//! ```
//!
//! Shapes default to 512→256→256→2 but any composable chain can be built,
//! which is what the gradient checks use. Weights are row-major
//! `(out_dim, in_dim)`; batches are row-major `(batch, features)`.
//!
//! Forward and backward skip zero inputs: bag-of-bytes vectors and
//! post-dropout activations are mostly zeros, and a zero input contributes
//! nothing to a dot product or to a weight gradient.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::vectorizer::VECTOR_DIM;

pub const HIDDEN_DIM: usize = 256;
pub const NUM_CLASSES: usize = 2;
pub const DEFAULT_DROPOUT: f64 = 0.75;

/// Layer widths `[input, hidden1, hidden2, classes]` of the production model.
pub const DEFAULT_DIMS: [usize; 4] = [VECTOR_DIM, HIDDEN_DIM, HIDDEN_DIM, NUM_CLASSES];

/// Row-major 2-D array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseLayer {
            out_dim,
            in_dim,
            weights: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Builds a layer from row-major weights and a bias vector. Values must be finite.
    pub fn from_parts(out_dim: usize, in_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != out_dim * in_dim {
            return Err(Error::DimensionMismatch {
                context: "layer weights",
                expected: out_dim * in_dim,
                found: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: out_dim,
                found: bias.len(),
            });
        }
        if !weights.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(DenseLayer {
            out_dim,
            in_dim,
            weights,
            bias,
        })
    }

    fn gaussian<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let std = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..out_dim * in_dim)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        DenseLayer {
            out_dim,
            in_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn weight_row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    /// `out = W x + b`, reading only the inputs listed in `active`.
    fn forward_row(&self, x: &[f64], active: &[usize], out: &mut [f64]) {
        for (o, y) in out.iter_mut().enumerate() {
            let row = self.weight_row(o);
            let mut acc = self.bias[o];
            for &i in active {
                acc += row[i] * x[i];
            }
            *y = acc;
        }
    }

    /// Adds this row's contribution `d xᵀ` and `d` to the gradients.
    fn accumulate_grad(&self, x: &[f64], active: &[usize], d: &[f64], grad: &mut LayerGradients) {
        for (o, &dout) in d.iter().enumerate() {
            if dout == 0.0 {
                continue;
            }
            grad.bias[o] += dout;
            let grow = &mut grad.weights[o * self.in_dim..(o + 1) * self.in_dim];
            for &i in active {
                grow[i] += dout * x[i];
            }
        }
    }

    /// `dx[i] = Σ_o W[o][i] d[o]` for the listed inputs; other entries are left untouched.
    fn backprop_input(&self, d: &[f64], active: &[usize], dx: &mut [f64]) {
        for (o, &dout) in d.iter().enumerate() {
            if dout == 0.0 {
                continue;
            }
            let row = self.weight_row(o);
            for &i in active {
                dx[i] += row[i] * dout;
            }
        }
    }
}

fn nonzero_indices(x: &[f64], into: &mut Vec<usize>) {
    into.clear();
    into.extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, _)| i));
}

/// Whether dropout is active for a forward pass.
pub enum Mode<'a> {
    /// Dropout is the identity.
    Eval,
    /// Dropout masks are drawn from the given stream.
    Train(&'a mut dyn RngCore),
}

/// Weight and bias gradients of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGradients {
    fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGradients {
            weights: vec![0.0; layer.weights.len()],
            bias: vec![0.0; layer.bias.len()],
        }
    }
}

/// Gradients for every parameter of an [`MlpModel`], in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: [LayerGradients; 3],
}

impl Gradients {
    /// Flat views in the same order as [`MlpModel::parameters_mut`].
    pub fn slices(&self) -> [&[f64]; 6] {
        let [a, b, c] = &self.layers;
        [&a.weights, &a.bias, &b.weights, &b.bias, &c.weights, &c.bias]
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|&g| g == 0.0))
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    pub pre1: Matrix,
    /// Per-activation dropout factor (`0` or `1/(1-ratio)`); `None` in eval mode.
    pub mask1: Option<Vec<f64>>,
    pub hidden1: Matrix,
    pub pre2: Matrix,
    pub mask2: Option<Vec<f64>>,
    pub hidden2: Matrix,
    pub logits: Matrix,
}

impl ForwardTrace {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Three dense layers plus the dropout ratio used between them.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: [DenseLayer; 3],
    dropout_ratio: f64,
}

/// A freshly initialized 512→256→256→2 model. See [`MlpModel::init_with_dims`].
pub fn init_model(seed: u64) -> MlpModel {
    MlpModel::init_with_dims(DEFAULT_DIMS, seed)
}

impl MlpModel {
    /// Weights drawn i.i.d. from `N(0, 1/fan_in)`, biases zero, dropout 0.75.
    /// The parameters are a pure function of `dims` and `seed`.
    pub fn init_with_dims(dims: [usize; 4], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = DenseLayer::gaussian(dims[1], dims[0], &mut rng);
        let l2 = DenseLayer::gaussian(dims[2], dims[1], &mut rng);
        let l3 = DenseLayer::gaussian(dims[3], dims[2], &mut rng);
        MlpModel {
            layers: [l1, l2, l3],
            dropout_ratio: DEFAULT_DROPOUT,
        }
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        MlpModel {
            layers: [
                DenseLayer::zeros(dims[1], dims[0]),
                DenseLayer::zeros(dims[2], dims[1]),
                DenseLayer::zeros(dims[3], dims[2]),
            ],
            dropout_ratio: DEFAULT_DROPOUT,
        }
    }

    pub fn from_layers(layers: [DenseLayer; 3], dropout_ratio: f64) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[1].in_dim != pair[0].out_dim {
                return Err(Error::DimensionMismatch {
                    context: "layer chain",
                    expected: pair[0].out_dim,
                    found: pair[1].in_dim,
                });
            }
        }
        let model = MlpModel {
            layers,
            dropout_ratio: 0.0,
        };
        model.with_dropout(dropout_ratio)
    }

    /// Replaces the dropout ratio; it must lie in `[0, 1)`.
    pub fn with_dropout(mut self, ratio: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidInput(format!("dropout ratio {ratio} is outside [0, 1)")));
        }
        self.dropout_ratio = ratio;
        Ok(self)
    }

    pub fn dropout_ratio(&self) -> f64 {
        self.dropout_ratio
    }

    pub fn layers(&self) -> &[DenseLayer; 3] {
        &self.layers
    }

    pub fn dims(&self) -> [usize; 4] {
        let [a, b, c] = &self.layers;
        [a.in_dim, a.out_dim, b.out_dim, c.out_dim]
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Mutable flat views of all parameters: `w1, b1, w2, b2, w3, b3`.
    pub fn parameters_mut(&mut self) -> [&mut [f64]; 6] {
        let [a, b, c] = &mut self.layers;
        [
            &mut a.weights,
            &mut a.bias,
            &mut b.weights,
            &mut b.bias,
            &mut c.weights,
            &mut c.bias,
        ]
    }

    pub fn parameters(&self) -> [&[f64]; 6] {
        let [a, b, c] = &self.layers;
        [&a.weights, &a.bias, &b.weights, &b.bias, &c.weights, &c.bias]
    }

    pub fn forward(&self, batch: &Matrix, mode: Mode<'_>) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "forward batch width",
                expected: self.input_dim(),
                found: batch.cols(),
            });
        }
        let n = batch.rows();
        let [l1, l2, l3] = &self.layers;
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train(rng) => Some(rng),
        };

        let mut active = Vec::new();
        let mut pre1 = Matrix::zeros(n, l1.out_dim);
        for r in 0..n {
            nonzero_indices(batch.row(r), &mut active);
            l1.forward_row(batch.row(r), &active, pre1.row_mut(r));
        }
        let (hidden1, mask1) = self.activate(&pre1, &mut rng);

        let mut pre2 = Matrix::zeros(n, l2.out_dim);
        for r in 0..n {
            nonzero_indices(hidden1.row(r), &mut active);
            l2.forward_row(hidden1.row(r), &active, pre2.row_mut(r));
        }
        let (hidden2, mask2) = self.activate(&pre2, &mut rng);

        let mut logits = Matrix::zeros(n, l3.out_dim);
        for r in 0..n {
            nonzero_indices(hidden2.row(r), &mut active);
            l3.forward_row(hidden2.row(r), &active, logits.row_mut(r));
        }

        Ok(ForwardTrace {
            input: batch.clone(),
            pre1,
            mask1,
            hidden1,
            pre2,
            mask2,
            hidden2,
            logits,
        })
    }

    /// ReLU followed by dropout (train mode only).
    fn activate(&self, pre: &Matrix, rng: &mut Option<&mut dyn RngCore>) -> (Matrix, Option<Vec<f64>>) {
        let mut out = pre.clone();
        for v in out.as_mut_slice() {
            *v = v.max(0.0);
        }
        let Some(rng) = rng.as_mut() else {
            return (out, None);
        };
        let keep_scale = 1.0 / (1.0 - self.dropout_ratio);
        let mask: Vec<f64> = (0..out.as_slice().len())
            .map(|_| {
                if rng.random::<f64>() < self.dropout_ratio {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect();
        for (v, m) in out.as_mut_slice().iter_mut().zip(&mask) {
            *v *= m;
        }
        (out, Some(mask))
    }

    /// Eval-mode logits.
    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch, Mode::Eval)?.logits)
    }

    /// Gradients of the loss with respect to every parameter, given the loss
    /// gradient at the logits. Uses the dropout masks recorded in `trace`.
    pub fn backward(&self, trace: &ForwardTrace, dlogits: &Matrix) -> Result<Gradients> {
        let [l1, l2, l3] = &self.layers;
        let n = trace.batch_size();
        check_shape("trace input", &trace.input, n, l1.in_dim)?;
        check_shape("trace layer 1", &trace.pre1, n, l1.out_dim)?;
        check_shape("trace layer 1", &trace.hidden1, n, l1.out_dim)?;
        check_shape("trace layer 2", &trace.pre2, n, l2.out_dim)?;
        check_shape("trace layer 2", &trace.hidden2, n, l2.out_dim)?;
        check_shape("dlogits", dlogits, n, l3.out_dim)?;
        for (mask, width) in [(&trace.mask1, l1.out_dim), (&trace.mask2, l2.out_dim)] {
            if let Some(mask) = mask {
                if mask.len() != n * width {
                    return Err(Error::DimensionMismatch {
                        context: "dropout mask",
                        expected: n * width,
                        found: mask.len(),
                    });
                }
            }
        }

        let mut grads = Gradients {
            layers: [
                LayerGradients::zeros_like(l1),
                LayerGradients::zeros_like(l2),
                LayerGradients::zeros_like(l3),
            ],
        };
        let [g1, g2, g3] = &mut grads.layers;

        let mut active = Vec::new();
        let mut gate = Vec::new();
        let mut d2 = vec![0.0; l2.out_dim];
        let mut d1 = vec![0.0; l1.out_dim];
        for r in 0..n {
            let dl = dlogits.row(r);
            let h2 = trace.hidden2.row(r);
            nonzero_indices(h2, &mut active);
            l3.accumulate_grad(h2, &active, dl, g3);

            open_gates(trace.pre2.row(r), trace.mask2.as_deref().map(|m| row_of(m, r, l2.out_dim)), &mut gate);
            d2.fill(0.0);
            l3.backprop_input(dl, &gate, &mut d2);
            apply_mask(&mut d2, trace.mask2.as_deref().map(|m| row_of(m, r, l2.out_dim)));

            let h1 = trace.hidden1.row(r);
            nonzero_indices(h1, &mut active);
            l2.accumulate_grad(h1, &active, &d2, g2);

            open_gates(trace.pre1.row(r), trace.mask1.as_deref().map(|m| row_of(m, r, l1.out_dim)), &mut gate);
            d1.fill(0.0);
            l2.backprop_input(&d2, &gate, &mut d1);
            apply_mask(&mut d1, trace.mask1.as_deref().map(|m| row_of(m, r, l1.out_dim)));

            let x = trace.input.row(r);
            nonzero_indices(x, &mut active);
            l1.accumulate_grad(x, &active, &d1, g1);
        }
        Ok(grads)
    }

    /// Class probabilities `(p_benign, p_malicious)` for one vector, eval mode.
    pub fn predict_proba(&self, vector: &[f64]) -> Result<(f64, f64)> {
        let batch = Matrix::from_vec(1, vector.len(), vector.to_vec())?;
        let logits = self.logits(&batch)?;
        let p = softmax(logits.row(0));
        Ok((p[0], p[1]))
    }
}

fn check_shape(context: &'static str, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
    if m.rows() != rows {
        return Err(Error::DimensionMismatch {
            context,
            expected: rows,
            found: m.rows(),
        });
    }
    if m.cols() != cols {
        return Err(Error::DimensionMismatch {
            context,
            expected: cols,
            found: m.cols(),
        });
    }
    Ok(())
}

fn row_of(mask: &[f64], r: usize, width: usize) -> &[f64] {
    &mask[r * width..(r + 1) * width]
}

/// Indices where gradient flows back through ReLU and dropout: positive
/// pre-activation and a kept unit. ReLU'(0) is taken as 0.
fn open_gates(pre: &[f64], mask: Option<&[f64]>, into: &mut Vec<usize>) {
    into.clear();
    match mask {
        Some(m) => into.extend((0..pre.len()).filter(|&i| pre[i] > 0.0 && m[i] != 0.0)),
        None => into.extend((0..pre.len()).filter(|&i| pre[i] > 0.0)),
    }
}

fn apply_mask(d: &mut [f64], mask: Option<&[f64]>) {
    if let Some(m) = mask {
        for (v, &s) in d.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

/// Numerically stable softmax of one row of logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean softmax cross-entropy over the batch and its gradient at the logits,
/// `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let n = logits.rows();
    if n == 0 {
        return Err(Error::EmptyDataset("softmax cross-entropy needs at least one sample"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "labels",
            expected: n,
            found: labels.len(),
        });
    }
    let classes = logits.cols();
    let mut dlogits = Matrix::zeros(n, classes);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::InvalidLabel(label as i64));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&l| (l - max).exp()).sum();
        let log_sum = max + sum.ln();
        total += log_sum - row[label];

        let drow = dlogits.row_mut(r);
        for (c, d) in drow.iter_mut().enumerate() {
            let p = (row[c] - log_sum).exp();
            *d = (p - if c == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    Ok((total / n as f64, dlogits))
}

/// Predicted class from a row of two logits: malicious only when its logit is
/// strictly larger, so ties go to benign.
pub fn predicted_class(logits: &[f64]) -> usize {
    usize::from(logits[1] > logits[0])
}
