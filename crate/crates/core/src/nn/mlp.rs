//! Fully connected network with hand-written forward and backward passes.
//!
//! Every hidden layer is `leaky_relu(W x + b)`, optionally multiplied by a
//! dropout mask; the last layer feeds the output head (sigmoid for reward
//! probabilities, identity for regression rewards and generators).
//!
//! Parameters are flattened layer-major: for each layer, the weight matrix in
//! row-major order (`W[o][i]` at `o * inputs + i`) followed by the bias. All
//! gradient vectors use the same order.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::dropout::DropoutMask;
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    Sigmoid,
    Identity,
}

impl OutputHead {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputHead::Sigmoid => sigmoid(z),
            OutputHead::Identity => z,
        }
    }

    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            OutputHead::Sigmoid => y * (1.0 - y),
            OutputHead::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Self {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| dist.sample(rng)).collect(),
            bias: (0..outputs).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn from_parts(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        check_dim("layer weights", inputs * outputs, weights.len())?;
        check_dim("layer bias", outputs, bias.len())?;
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut acc = self.bias[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// Activation record of one forward pass; enough for both backward passes.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input fed to each layer (post-activation, post-mask of the previous one).
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    pre: Vec<Vec<f64>>,
    /// Mask actually applied after each hidden layer (`None` = no dropout).
    masks: Vec<Option<Vec<f64>>>,
    output: Vec<f64>,
    dims: Vec<usize>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Scalar output; panics for multi-output models.
    pub fn value(&self) -> f64 {
        assert_eq!(self.output.len(), 1, "value() on a multi-output model");
        self.output[0]
    }
}

/// Flattened gradient in canonical parameter order, tagged with the network
/// width used by the UCB bonus.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub values: Vec<f64>,
    pub width: usize,
}

impl ParamGradient {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
    slope: f64,
    /// Hidden layers whose activations may be masked by dropout.
    dropout_sites: Vec<usize>,
    head: OutputHead,
}

impl MlpModel {
    /// Random initialization; `dims = [input, hidden.., output]`. Every hidden
    /// layer is a dropout site.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], head: OutputHead, rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::random(w[0], w[1], rng))
            .collect();
        Self::from_layers(layers, head, DEFAULT_LEAKY_SLOPE, default_sites(dims.len() - 1))
    }

    pub fn zeros(dims: &[usize], head: OutputHead) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect();
        Self::from_layers(layers, head, DEFAULT_LEAKY_SLOPE, default_sites(dims.len() - 1))
    }

    pub fn from_layers(
        layers: Vec<DenseLayer>,
        head: OutputHead,
        slope: f64,
        dropout_sites: Vec<usize>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_dim("layer chain", pair[0].outputs, pair[1].inputs)?;
        }
        for &site in &dropout_sites {
            if site + 1 >= layers.len() {
                return Err(Error::Contract(format!(
                    "dropout site {site} is not a hidden layer"
                )));
            }
        }
        let mut sites = dropout_sites;
        sites.sort_unstable();
        sites.dedup();
        let model = Self {
            layers,
            slope,
            dropout_sites: sites,
            head,
        };
        if !model.params().iter().all(|p| p.is_finite()) {
            return Err(Error::Contract("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn head(&self) -> OutputHead {
        self.head
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn dropout_sites(&self) -> &[usize] {
        &self.dropout_sites
    }

    /// Sizes of the dropout sites, in site order.
    pub fn dropout_shapes(&self) -> Vec<(usize, usize)> {
        self.dropout_sites
            .iter()
            .map(|&s| (s, self.layers[s].outputs))
            .collect()
    }

    /// Network width `m` for the UCB bonus: the widest hidden layer (or the
    /// input width for single-layer models).
    pub fn width(&self) -> usize {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .max()
            .unwrap_or(self.input_dim())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        check_dim("parameter vector", self.param_count(), flat.len())?;
        if !flat.iter().all(|p| p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter update".into()));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_mask(&self, mask: &DropoutMask) -> Result<()> {
        let shapes = self.dropout_shapes();
        check_dim("dropout sites", shapes.len(), mask.sites().len())?;
        for ((site, len), (msite, values)) in shapes.iter().zip(mask.sites()) {
            if site != msite {
                return Err(Error::Contract(format!(
                    "mask site {msite} does not match model site {site}"
                )));
            }
            check_dim("dropout mask", *len, values.len())?;
        }
        Ok(())
    }

    fn mask_for<'m>(&self, mask: Option<&'m DropoutMask>, layer: usize) -> Option<&'m [f64]> {
        mask.and_then(|m| m.for_site(layer))
    }

    /// Forward pass recording activations. `mask = None` is expectation mode.
    pub fn forward(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<ForwardCache> {
        check_dim("model input", self.input_dim(), input.len())?;
        if let Some(m) = mask {
            self.check_mask(m)?;
        }
        let n = self.layers.len();
        let mut layer_inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        let mut current = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine_into(&current, &mut z);
            let next = if l + 1 < n {
                let site_mask = self.mask_for(mask, l);
                let h: Vec<f64> = z
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let a = if v > 0.0 { v } else { self.slope * v };
                        site_mask.map_or(a, |m| a * m[j])
                    })
                    .collect();
                masks.push(site_mask.map(<[f64]>::to_vec));
                h
            } else {
                masks.push(None);
                z.iter().map(|&v| self.head.apply(v)).collect()
            };
            layer_inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
        }
        Ok(ForwardCache {
            layer_inputs,
            pre,
            masks,
            output: current,
            dims: self.dims(),
        })
    }

    /// Forward pass without an activation record.
    pub fn predict(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        check_dim("model input", self.input_dim(), input.len())?;
        if let Some(m) = mask {
            self.check_mask(m)?;
        }
        let n = self.layers.len();
        let mut current = input.to_vec();
        let mut z = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine_into(&current, &mut z);
            if l + 1 < n {
                let site_mask = self.mask_for(mask, l);
                for (j, v) in z.iter_mut().enumerate() {
                    let a = if *v > 0.0 { *v } else { self.slope * *v };
                    *v = site_mask.map_or(a, |m| a * m[j]);
                }
            } else {
                for v in z.iter_mut() {
                    *v = self.head.apply(*v);
                }
            }
            std::mem::swap(&mut current, &mut z);
        }
        Ok(current)
    }

    /// Scalar convenience for single-output models.
    pub fn predict_value(&self, input: &[f64], mask: Option<&DropoutMask>) -> Result<f64> {
        check_dim("model output", 1, self.output_dim())?;
        Ok(self.predict(input, mask)?[0])
    }

    /// Matrix-shaped forward over `inputs.len() / input_dim` rows sharing one
    /// mask. Returns row-major outputs.
    pub fn forward_batch(&self, inputs: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if inputs.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                what: "batch input",
                expected: d * (inputs.len() / d + 1),
                got: inputs.len(),
            });
        }
        if let Some(m) = mask {
            self.check_mask(m)?;
        }
        let rows = inputs.len() / d;
        let n = self.layers.len();
        let mut current = inputs.to_vec();
        let mut width = d;
        for (l, layer) in self.layers.iter().enumerate() {
            let out_w = layer.outputs;
            let mut next = vec![0.0; rows * out_w];
            // next[r][o] = b[o] + sum_i current[r][i] * W[o][i]
            for r in 0..rows {
                let x = &current[r * width..(r + 1) * width];
                let y = &mut next[r * out_w..(r + 1) * out_w];
                for o in 0..out_w {
                    let row = &layer.weights[o * width..(o + 1) * width];
                    let mut acc = layer.bias[o];
                    for i in 0..width {
                        acc += row[i] * x[i];
                    }
                    y[o] = acc;
                }
            }
            if l + 1 < n {
                let site_mask = self.mask_for(mask, l);
                for chunk in next.chunks_mut(out_w) {
                    for (j, v) in chunk.iter_mut().enumerate() {
                        let a = if *v > 0.0 { *v } else { self.slope * *v };
                        *v = site_mask.map_or(a, |m| a * m[j]);
                    }
                }
            } else {
                for v in next.iter_mut() {
                    *v = self.head.apply(*v);
                }
            }
            current = next;
            width = out_w;
        }
        Ok(current)
    }

    fn check_cache(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<()> {
        if cache.dims != self.dims() || cache.pre.len() != self.layers.len() {
            return Err(Error::Contract(
                "activation record does not belong to this model".into(),
            ));
        }
        check_dim("upstream gradient", self.output_dim(), upstream.len())
    }

    /// Walks the network backwards. Returns the gradient w.r.t. the input and,
    /// if `param_grad` is given, accumulates parameter gradients into it.
    fn backprop(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        mut param_grad: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let offsets = self.layer_offsets();
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&cache.output)
            .map(|(u, &y)| u * self.head.derivative_from_output(y))
            .collect();
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let x = &cache.layer_inputs[l];
            if let Some(grad) = param_grad.as_deref_mut() {
                let base = offsets[l];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &mut grad[base + o * layer.inputs..base + (o + 1) * layer.inputs];
                        for (g, xi) in row.iter_mut().zip(x) {
                            *g += d * xi;
                        }
                    }
                    grad[base + layer.weights.len() + o] += d;
                }
            }
            let mut dx = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d != 0.0 {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (acc, w) in dx.iter_mut().zip(row) {
                        *acc += d * w;
                    }
                }
            }
            if l > 0 {
                // through mask and leaky ReLU of layer l-1
                let z = &cache.pre[l - 1];
                let mask = cache.masks[l - 1].as_deref();
                for (j, v) in dx.iter_mut().enumerate() {
                    let act = if z[j] > 0.0 { 1.0 } else { self.slope };
                    *v *= act * mask.map_or(1.0, |m| m[j]);
                }
            }
            delta = dx;
        }
        delta
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }
        offsets
    }

    /// Gradient of `upstream · output` w.r.t. all parameters.
    pub fn backward_params(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<ParamGradient> {
        self.check_cache(cache, upstream)?;
        let mut grad = vec![0.0; self.param_count()];
        self.backprop(cache, upstream, Some(&mut grad));
        Ok(ParamGradient {
            values: grad,
            width: self.width(),
        })
    }

    /// Accumulates `upstream · ∂output/∂θ` into `grad` (canonical order).
    pub fn accumulate_param_grad(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        self.check_cache(cache, upstream)?;
        check_dim("gradient accumulator", self.param_count(), grad.len())?;
        self.backprop(cache, upstream, Some(grad));
        Ok(())
    }

    /// Gradient of `upstream · output` w.r.t. the input, parameters fixed.
    pub fn backward_input(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<f64>> {
        self.check_cache(cache, upstream)?;
        Ok(self.backprop(cache, upstream, None))
    }

    /// Both gradients from one backward sweep.
    pub fn backward_both(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
    ) -> Result<(ParamGradient, Vec<f64>)> {
        self.check_cache(cache, upstream)?;
        let mut grad = vec![0.0; self.param_count()];
        let dx = self.backprop(cache, upstream, Some(&mut grad));
        Ok((
            ParamGradient {
                values: grad,
                width: self.width(),
            },
            dx,
        ))
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Contract(
            "model dims need at least input and output".into(),
        ));
    }
    if dims.contains(&0) {
        return Err(Error::Contract("zero-width layer".into()));
    }
    Ok(())
}

fn default_sites(n_layers: usize) -> Vec<usize> {
    (0..n_layers.saturating_sub(1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dropout::sample_mask;
    use crate::rng::seeded;

    fn random_model(seed: u64, dims: &[usize], head: OutputHead) -> MlpModel {
        MlpModel::new(dims, head, &mut seeded(seed)).unwrap()
    }

    /// Straight-line recomputation of the layer equations, independent of the
    /// cached implementation.
    fn naive_forward(model: &MlpModel, x: &[f64], mask: Option<&DropoutMask>) -> Vec<f64> {
        let mut h = x.to_vec();
        let n = model.layers().len();
        for (l, layer) in model.layers().iter().enumerate() {
            let mut z = vec![0.0; layer.outputs()];
            for o in 0..layer.outputs() {
                z[o] = layer.bias()[o];
                for i in 0..layer.inputs() {
                    z[o] += layer.weights()[o * layer.inputs() + i] * h[i];
                }
            }
            if l + 1 < n {
                for (j, v) in z.iter_mut().enumerate() {
                    if *v < 0.0 {
                        *v *= model.slope();
                    }
                    if let Some(m) = mask.and_then(|m| m.for_site(l)) {
                        *v *= m[j];
                    }
                }
            } else if model.head() == OutputHead::Sigmoid {
                for v in z.iter_mut() {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
            }
            h = z;
        }
        h
    }

    #[test]
    fn zero_model_outputs_half() {
        let model = MlpModel::zeros(&[5, 8, 8, 1], OutputHead::Sigmoid).unwrap();
        for x in [[0.0; 5], [1.0, -2.0, 3.0, 0.5, 9.0]] {
            assert_eq!(model.forward(&x, None).unwrap().value(), 0.5);
        }
    }

    #[test]
    fn fixed_mask_is_reproducible() {
        let model = random_model(1, &[4, 8, 8, 1], OutputHead::Sigmoid);
        let mask = sample_mask(0.3, &model.dropout_shapes(), &mut seeded(2)).unwrap();
        let x = [0.1, -0.4, 0.7, 0.2];
        let a = model.forward(&x, Some(&mask)).unwrap().value();
        let b = model.forward(&x, Some(&mask)).unwrap().value();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn forward_matches_naive_recomputation() {
        let model = random_model(3, &[6, 8, 8, 1], OutputHead::Sigmoid);
        let mask = sample_mask(0.2, &model.dropout_shapes(), &mut seeded(4)).unwrap();
        let x = [0.3, -1.2, 0.5, 2.0, -0.1, 0.0];
        for m in [None, Some(&mask)] {
            let fast = model.forward(&x, m).unwrap().value();
            let slow = naive_forward(&model, &x, m)[0];
            assert!((fast - slow).abs() < 1e-14, "{fast} vs {slow}");
            assert_eq!(model.predict_value(&x, m).unwrap(), fast);
        }
    }

    #[test]
    fn forward_batch_matches_rowwise() {
        let model = random_model(5, &[3, 7, 4, 2], OutputHead::Identity);
        let rows: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        let batch = model.forward_batch(&rows, None).unwrap();
        for (r, x) in rows.chunks(3).enumerate() {
            let single = model.predict(x, None).unwrap();
            assert_eq!(&batch[r * 2..r * 2 + 2], single.as_slice());
        }
    }

    #[test]
    fn zero_input_zero_weights_gradient_structure() {
        let model = MlpModel::zeros(&[3, 4, 4, 1], OutputHead::Sigmoid).unwrap();
        let cache = model.forward(&[0.0; 3], None).unwrap();
        let g = model.backward_params(&cache, &[1.0]).unwrap();
        // first-layer weight gradients vanish because x = 0
        assert!(g.values[..12].iter().all(|&v| v == 0.0));
        // output bias gradient is sigmoid'(0) = 0.25
        assert_eq!(*g.values.last().unwrap(), 0.25);
    }

    #[test]
    fn upstream_zero_gives_zero_gradient() {
        let model = random_model(6, &[4, 8, 8, 1], OutputHead::Sigmoid);
        let cache = model.forward(&[0.5, 0.1, -0.3, 0.9], None).unwrap();
        let g = model.backward_params(&cache, &[0.0]).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        let dx = model.backward_input(&cache, &[0.0]).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_input_gradient() {
        let w = vec![0.3, -0.7, 1.1];
        let layer = DenseLayer::from_parts(3, 1, w.clone(), vec![0.0]).unwrap();
        let model = MlpModel::from_layers(vec![layer], OutputHead::Sigmoid, 0.01, vec![]).unwrap();
        let cache = model.forward(&[0.0, 0.0, 0.0], None).unwrap();
        let dx = model.backward_input(&cache, &[1.0]).unwrap();
        for (g, wi) in dx.iter().zip(&w) {
            assert!((g - 0.25 * wi).abs() < 1e-15);
        }
    }

    #[test]
    fn mask_zeroing_hidden_units_blocks_input_gradient() {
        let model = random_model(7, &[4, 8, 8, 1], OutputHead::Sigmoid);
        let mask = DropoutMask::from_sites(0.5, vec![(0, vec![0.0; 8]), (1, vec![2.0; 8])]).unwrap();
        let cache = model.forward(&[0.2, 0.4, -0.6, 0.8], Some(&mask)).unwrap();
        let dx = model.backward_input(&cache, &[1.0]).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let model = random_model(8, &[4, 8, 1], OutputHead::Sigmoid);
        assert!(matches!(
            model.forward(&[1.0; 3], None),
            Err(Error::DimensionMismatch { .. })
        ));
        let other = random_model(9, &[4, 6, 1], OutputHead::Sigmoid);
        let cache = other.forward(&[1.0; 4], None).unwrap();
        assert!(matches!(
            model.backward_params(&cache, &[1.0]),
            Err(Error::Contract(_))
        ));
        let bad_mask = sample_mask(0.1, &[(0, 5)], &mut seeded(1)).unwrap();
        assert!(model.forward(&[1.0; 4], Some(&bad_mask)).is_err());
    }

    #[test]
    fn params_roundtrip_canonical_order() {
        let mut model = random_model(10, &[2, 3, 1], OutputHead::Identity);
        let p = model.params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 1);
        assert_eq!(&p[..6], model.layers()[0].weights());
        assert_eq!(&p[6..9], model.layers()[0].bias());
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        model.set_params(&shifted).unwrap();
        assert_eq!(model.params(), shifted);
    }

    #[test]
    fn forward_does_not_mutate() {
        let model = random_model(11, &[4, 8, 8, 1], OutputHead::Sigmoid);
        let before = model.clone();
        let cache = model.forward(&[1.0, 2.0, 3.0, 4.0], None).unwrap();
        model.backward_both(&cache, &[1.0]).unwrap();
        assert_eq!(model, before);
    }
}
