//! Forward pass, squared-error loss and backpropagation.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::{ModelError, NetworkSpec, ParamVector};

/// Inputs with one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl Batch {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self, ModelError> {
        if inputs.nrows() != targets.nrows() {
            return Err(ModelError::Shape(format!(
                "{} input rows vs {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(Self { inputs, targets })
    }

    /// One-hot encodes `labels` over `classes`.
    pub fn from_labels(inputs: Array2<f64>, labels: &[usize], classes: usize) -> Result<Self, ModelError> {
        if labels.iter().any(|&l| l >= classes) {
            return Err(ModelError::Shape(format!("label out of range for {classes} classes")));
        }
        let mut targets = Array2::zeros((labels.len(), classes));
        for (i, &l) in labels.iter().enumerate() {
            targets[[i, l]] = 1.0;
        }
        Self::new(inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
        }
    }

    pub fn concat(&self, other: &Batch) -> Result<Batch, ModelError> {
        let inputs = ndarray::concatenate(Axis(0), &[self.inputs.view(), other.inputs.view()])
            .map_err(|e| ModelError::Shape(e.to_string()))?;
        let targets = ndarray::concatenate(Axis(0), &[self.targets.view(), other.targets.view()])
            .map_err(|e| ModelError::Shape(e.to_string()))?;
        Batch::new(inputs, targets)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.targets.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
    }

    /// Same targets with inputs replaced, e.g. by frozen-base features.
    pub fn with_inputs(&self, inputs: Array2<f64>) -> Result<Batch, ModelError> {
        Batch::new(inputs, self.targets.clone())
    }
}

/// Whether a gradient is the plain per-sample sum or divided by the batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScale {
    Sum,
    Mean,
}

pub(crate) fn argmax(it: impl Iterator<Item = f64>) -> usize {
    it.enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
        .0
}

fn weights<'a>(spec_params: &'a ParamVector, layer: usize) -> (ArrayView2<'a, f64>, &'a [f64]) {
    let slot = spec_params.layout()[layer];
    let w = ArrayView2::from_shape((slot.fan_out, slot.fan_in), &spec_params.values()[slot.weights..slot.biases])
        .expect("layout matches weight block");
    (w, &spec_params.values()[slot.biases..slot.end()])
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Activations for layers `from..to`, starting from `input` (the activation entering `from`).
///
/// Returns `[input, a_from, .., a_{to-1}]`. The network's last layer applies
/// softmax, every other layer ReLU.
fn forward_range(
    spec: &NetworkSpec,
    params: &ParamVector,
    input: ArrayView2<'_, f64>,
    from: usize,
    to: usize,
) -> Vec<Array2<f64>> {
    let mut acts = Vec::with_capacity(to - from + 1);
    acts.push(input.to_owned());
    for layer in from..to {
        let (w, b) = weights(params, layer);
        let mut z = acts.last().unwrap().dot(&w.t());
        z += &ndarray::ArrayView1::from(b);
        if layer + 1 == spec.num_layers() {
            softmax_rows(&mut z);
        } else {
            z.mapv_inplace(|v| v.max(0.0));
        }
        acts.push(z);
    }
    acts
}

/// Backpropagates `delta` (gradient w.r.t. the pre-activation of layer `to - 1`)
/// down to layer `from`, accumulating parameter gradients into `grad`.
fn backward_range(
    params: &ParamVector,
    acts: &[Array2<f64>],
    from: usize,
    to: usize,
    mut delta: Array2<f64>,
    grad: &mut [f64],
) {
    for layer in (from..to).rev() {
        let slot = params.layout()[layer];
        let a_prev = &acts[layer - from];
        let dw = delta.t().dot(a_prev);
        let db: Array1<f64> = delta.sum_axis(Axis(0));
        for (g, v) in grad[slot.weights..slot.biases].iter_mut().zip(dw.iter()) {
            *g += v;
        }
        for (g, v) in grad[slot.biases..slot.end()].iter_mut().zip(db.iter()) {
            *g += v;
        }
        if layer > from {
            let (w, _) = weights(params, layer);
            let mut d_prev = delta.dot(&w);
            // ReLU mask from the stored post-activation.
            ndarray::Zip::from(&mut d_prev)
                .and(a_prev)
                .for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            delta = d_prev;
        }
    }
}

fn check_inputs(spec: &NetworkSpec, params: &ParamVector, inputs: &ArrayView2<'_, f64>) -> Result<(), ModelError> {
    params.check_spec(spec)?;
    if inputs.ncols() != spec.input_dim() {
        return Err(ModelError::Shape(format!(
            "input has {} columns, network expects {}",
            inputs.ncols(),
            spec.input_dim()
        )));
    }
    Ok(())
}

fn check_batch(spec: &NetworkSpec, params: &ParamVector, batch: &Batch) -> Result<(), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    check_inputs(spec, params, &batch.inputs.view())?;
    if batch.targets.ncols() != spec.output_dim() {
        return Err(ModelError::Shape(format!(
            "targets have {} columns, network outputs {}",
            batch.targets.ncols(),
            spec.output_dim()
        )));
    }
    Ok(())
}

/// Class probabilities, one row per input row.
pub fn forward(spec: &NetworkSpec, params: &ParamVector, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
    check_inputs(spec, params, &inputs)?;
    Ok(forward_range(spec, params, inputs, 0, spec.num_layers()).pop().unwrap())
}

/// Output of the base, i.e. the features the head consumes.
pub fn base_features(spec: &NetworkSpec, params: &ParamVector, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
    check_inputs(spec, params, &inputs)?;
    Ok(forward_range(spec, params, inputs, 0, spec.head_start_layer).pop().unwrap())
}

pub fn predict(spec: &NetworkSpec, params: &ParamVector, inputs: ArrayView2<'_, f64>) -> Result<Vec<usize>, ModelError> {
    let probs = forward(spec, params, inputs)?;
    Ok(probs.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
}

/// `1/(2m) * sum_i ||h(x_i) - y_i||^2`.
pub fn loss_mse(spec: &NetworkSpec, params: &ParamVector, batch: &Batch) -> Result<f64, ModelError> {
    check_batch(spec, params, batch)?;
    let probs = forward(spec, params, batch.inputs.view())?;
    let sq: f64 = (&probs - &batch.targets).iter().map(|d| d * d).sum();
    Ok(sq / (2.0 * batch.len() as f64))
}

fn output_delta(probs: &Array2<f64>, targets: &Array2<f64>) -> Array2<f64> {
    // dL/dp = p - y (sum form); through softmax: dz = p * (g - <g, p>).
    let g = probs - targets;
    let mut delta = Array2::zeros(probs.raw_dim());
    for ((mut d, p), gr) in delta.rows_mut().into_iter().zip(probs.rows()).zip(g.rows()) {
        let dot: f64 = gr.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        for ((dd, &pp), &gg) in d.iter_mut().zip(p.iter()).zip(gr.iter()) {
            *dd = pp * (gg - dot);
        }
    }
    delta
}

fn grad_from(spec: &NetworkSpec, params: &ParamVector, batch: &Batch, from: usize, scale: GradScale) -> Result<Vec<f64>, ModelError> {
    check_batch(spec, params, batch)?;
    let l = spec.num_layers();
    let input = if from == 0 {
        batch.inputs.clone()
    } else {
        forward_range(spec, params, batch.inputs.view(), 0, from).pop().unwrap()
    };
    let acts = forward_range(spec, params, input.view(), from, l);
    let delta = output_delta(acts.last().unwrap(), &batch.targets);
    let mut grad = vec![0.0; params.len()];
    backward_range(params, &acts, from, l, delta, &mut grad);
    if scale == GradScale::Mean {
        let m = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
    }
    Ok(grad)
}

/// Analytic gradient of the loss: `sum_i (h(x_i) - y_i) dh(x_i)/dθ` in
/// [`GradScale::Sum`] form, or that divided by the batch size.
pub fn grad(spec: &NetworkSpec, params: &ParamVector, batch: &Batch, scale: GradScale) -> Result<ParamVector, ModelError> {
    let values = grad_from(spec, params, batch, 0, scale)?;
    ParamVector::from_values(spec, values)
}

/// Gradient restricted to head parameters; backpropagation stops at the base.
pub fn grad_head(spec: &NetworkSpec, params: &ParamVector, batch: &Batch, scale: GradScale) -> Result<Vec<f64>, ModelError> {
    let mut values = grad_from(spec, params, batch, spec.head_start_layer, scale)?;
    Ok(values.split_off(spec.head_offset()))
}

/// Squared-error loss of a base-only subnetwork against target activations,
/// with its gradient over base parameters (mean form).
pub(crate) fn base_regression_grad(
    spec: &NetworkSpec,
    params: &ParamVector,
    inputs: ArrayView2<'_, f64>,
    targets: &Array2<f64>,
) -> (f64, Vec<f64>) {
    let h = spec.head_start_layer;
    let acts = forward_range(spec, params, inputs, 0, h);
    let out = acts.last().unwrap();
    let m = inputs.nrows() as f64;
    let diff = out - targets;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * m);
    // Last base layer is ReLU.
    let mut delta = diff / m;
    ndarray::Zip::from(&mut delta).and(out).for_each(|d, &a| {
        if a <= 0.0 {
            *d = 0.0
        }
    });
    let mut grad = vec![0.0; params.len()];
    backward_range(params, &acts, 0, h, delta, &mut grad);
    grad.truncate(spec.head_offset());
    (loss, grad)
}

/// Probabilities restricted to a slice of rows; used for evaluation on large sets.
pub fn forward_rows(spec: &NetworkSpec, params: &ParamVector, inputs: &Array2<f64>, start: usize, end: usize) -> Result<Array2<f64>, ModelError> {
    forward(spec, params, inputs.slice(s![start..end, ..]))
}
