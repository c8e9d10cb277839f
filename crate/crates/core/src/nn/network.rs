use std::borrow::Cow;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::noise::NoiseSample;
use super::params::{Gradients, LayerParams, NetworkParams};
use super::spec::{Activation, Head, NetworkSpec};
use crate::error::{Error, Result};

/// Intermediates of one forward pass, needed by [`backward_from_cache`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer, in layer order.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of each trunk layer.
    pre_act: Vec<Array2<f64>>,
    /// Effective weights used (mu plus perturbation for noisy layers).
    weights: Vec<Array2<f64>>,
    /// `(f_out, outer)` for noisy layers that ran with noise.
    factors: Vec<Option<(Array1<f64>, Array2<f64>)>>,
    pub q: Array2<f64>,
}

fn check_noise(spec: &NetworkSpec, params: &NetworkParams, noise: Option<&NoiseSample>) -> Result<()> {
    let Some(noise) = noise else { return Ok(()) };
    let layers = spec.layers();
    if noise.layers.len() != layers.len() {
        return Err(Error::Contract(format!(
            "noise sample covers {} layers, network has {}",
            noise.layers.len(),
            layers.len()
        )));
    }
    for (i, (n, (l, p))) in noise.layers.iter().zip(layers.iter().zip(&params.layers)).enumerate() {
        if let Some(n) = n {
            if !p.is_noisy() || n.eps_in.len() != l.in_dim || n.eps_out.len() != l.out_dim {
                return Err(Error::Contract(format!("noise for layer {i} does not match its shape")));
            }
        }
    }
    Ok(())
}

/// Effective weight and bias, plus `(f_out, f_out f_in^T)` when noise is applied.
type Effective<'a> = (Cow<'a, Array2<f64>>, Cow<'a, Array1<f64>>, Option<(Array1<f64>, Array2<f64>)>);

fn effective<'a>(layer: &'a LayerParams, noise: Option<&NoiseSample>, idx: usize) -> Effective<'a> {
    let factor = noise.and_then(|n| n.layers[idx].as_ref());
    match (factor, &layer.sigma_weight, &layer.sigma_bias) {
        (Some(f), Some(sw), Some(sb)) => {
            let outer = f.outer();
            let f_out = f.f_out();
            let w = &layer.weight + &(sw * &outer);
            let b = &layer.bias + &(sb * &f_out);
            (Cow::Owned(w), Cow::Owned(b), Some((f_out, outer)))
        }
        _ => (Cow::Borrowed(&layer.weight), Cow::Borrowed(&layer.bias), None),
    }
}

fn affine(x: ArrayView2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += b;
    z
}

fn activate(z: &Array2<f64>, act: Activation) -> Array2<f64> {
    match act {
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::Identity => z.clone(),
    }
}

fn run(
    params: &NetworkParams,
    spec: &NetworkSpec,
    input: ArrayView2<f64>,
    noise: Option<&NoiseSample>,
    keep: bool,
) -> Result<(Array2<f64>, Option<ForwardCache>)> {
    if input.ncols() != spec.input_dim {
        return Err(Error::Contract(format!(
            "input has {} features, network expects {}",
            input.ncols(),
            spec.input_dim
        )));
    }
    params.check_shapes(spec)?;
    check_noise(spec, params, noise)?;

    let n_layers = params.layers.len();
    let mut cache = keep.then(|| ForwardCache {
        inputs: Vec::with_capacity(n_layers),
        pre_act: Vec::with_capacity(spec.trunk.len()),
        weights: Vec::with_capacity(n_layers),
        factors: Vec::with_capacity(n_layers),
        q: Array2::zeros((0, 0)),
    });

    let mut h = input.to_owned();
    for (i, ls) in spec.trunk.iter().enumerate() {
        let (w, b, fac) = effective(&params.layers[i], noise, i);
        let z = affine(h.view(), &w, &b);
        let out = activate(&z, ls.activation);
        if let Some(c) = cache.as_mut() {
            c.inputs.push(std::mem::replace(&mut h, out));
            c.pre_act.push(z);
            c.weights.push(w.into_owned());
            c.factors.push(fac);
        } else {
            h = out;
        }
    }

    let head_start = spec.trunk.len();
    let q = match spec.head {
        Head::Single { .. } => {
            let (w, b, fac) = effective(&params.layers[head_start], noise, head_start);
            let q = affine(h.view(), &w, &b);
            if let Some(c) = cache.as_mut() {
                c.inputs.push(h);
                c.weights.push(w.into_owned());
                c.factors.push(fac);
            }
            q
        }
        Head::Dueling { .. } => {
            let (wv, bv, fv) = effective(&params.layers[head_start], noise, head_start);
            let (wa, ba, fa) = effective(&params.layers[head_start + 1], noise, head_start + 1);
            let v = affine(h.view(), &wv, &bv);
            let a = affine(h.view(), &wa, &ba);
            let mean_a = a.mean_axis(Axis(1)).expect("advantage stream is non-empty");
            let mut q = a;
            q += &v;
            q -= &mean_a.insert_axis(Axis(1));
            if let Some(c) = cache.as_mut() {
                c.inputs.push(h.clone());
                c.inputs.push(h);
                c.weights.push(wv.into_owned());
                c.weights.push(wa.into_owned());
                c.factors.push(fv);
                c.factors.push(fa);
            }
            q
        }
    };
    Ok((q, cache))
}

/// Q values for a batch of inputs (`batch x input_dim` -> `batch x num_actions`).
/// `noise = None` runs every noisy layer at its mean weights.
pub fn forward(
    params: &NetworkParams,
    spec: &NetworkSpec,
    input: ArrayView2<f64>,
    noise: Option<&NoiseSample>,
) -> Result<Array2<f64>> {
    run(params, spec, input, noise, false).map(|(q, _)| q)
}

/// Q values for a single input.
pub fn forward_one(
    params: &NetworkParams,
    spec: &NetworkSpec,
    input: &[f64],
    noise: Option<&NoiseSample>,
) -> Result<Array1<f64>> {
    let view = ArrayView2::from_shape((1, input.len()), input).expect("row view of a slice");
    let q = forward(params, spec, view, noise)?;
    Ok(q.index_axis_move(Axis(0), 0))
}

pub fn forward_cached(
    params: &NetworkParams,
    spec: &NetworkSpec,
    input: ArrayView2<f64>,
    noise: Option<&NoiseSample>,
) -> Result<ForwardCache> {
    let (q, cache) = run(params, spec, input, noise, true)?;
    let mut cache = cache.expect("cache requested");
    cache.q = q;
    Ok(cache)
}

fn layer_grads(
    dz: ArrayView2<f64>,
    input: &Array2<f64>,
    factor: Option<&(Array1<f64>, Array2<f64>)>,
    noisy: bool,
) -> LayerParams {
    let weight = dz.t().dot(input).as_standard_layout().into_owned();
    let bias = dz.sum_axis(Axis(0));
    let (sigma_weight, sigma_bias) = match (noisy, factor) {
        (false, _) => (None, None),
        (true, Some((f_out, outer))) => (Some(&weight * outer), Some(&bias * f_out)),
        // Noisy layer evaluated without noise: sigma did not enter the output.
        (true, None) => (Some(Array2::zeros(weight.dim())), Some(Array1::zeros(bias.dim()))),
    };
    LayerParams { weight, bias, sigma_weight, sigma_bias }
}

/// Gradients of `sum(output_grad * Q)` with respect to every parameter, using
/// the intermediates of a previous forward pass. Noise is held fixed.
pub fn backward_from_cache(
    params: &NetworkParams,
    spec: &NetworkSpec,
    cache: &ForwardCache,
    output_grad: ArrayView2<f64>,
) -> Result<Gradients> {
    if output_grad.dim() != cache.q.dim() {
        return Err(Error::Contract(format!(
            "output gradient shape {:?} does not match Q shape {:?}",
            output_grad.dim(),
            cache.q.dim()
        )));
    }
    let n_layers = params.layers.len();
    let mut grads: Vec<Option<LayerParams>> = vec![None; n_layers];
    let head_start = spec.trunk.len();

    let mut dh = match spec.head {
        Head::Single { .. } => {
            grads[head_start] = Some(layer_grads(
                output_grad,
                &cache.inputs[head_start],
                cache.factors[head_start].as_ref(),
                params.layers[head_start].is_noisy(),
            ));
            output_grad.dot(&cache.weights[head_start])
        }
        Head::Dueling { .. } => {
            // dQ_a/dV = 1, dQ_a/dA_b = [a == b] - 1/n.
            let dv = output_grad.sum_axis(Axis(1)).insert_axis(Axis(1));
            let mean = output_grad.mean_axis(Axis(1)).expect("non-empty actions");
            let da = &output_grad - &mean.insert_axis(Axis(1));
            let (vi, ai) = (head_start, head_start + 1);
            grads[vi] = Some(layer_grads(
                dv.view(),
                &cache.inputs[vi],
                cache.factors[vi].as_ref(),
                params.layers[vi].is_noisy(),
            ));
            grads[ai] = Some(layer_grads(
                da.view(),
                &cache.inputs[ai],
                cache.factors[ai].as_ref(),
                params.layers[ai].is_noisy(),
            ));
            dv.dot(&cache.weights[vi]) + da.dot(&cache.weights[ai])
        }
    };

    for i in (0..head_start).rev() {
        let mut dz = dh;
        if spec.trunk[i].activation == Activation::Relu {
            dz.zip_mut_with(&cache.pre_act[i], |g, &z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
        }
        grads[i] =
            Some(layer_grads(dz.view(), &cache.inputs[i], cache.factors[i].as_ref(), params.layers[i].is_noisy()));
        dh = if i > 0 { dz.dot(&cache.weights[i]) } else { Array2::zeros((0, 0)) };
    }

    Ok(Gradients { layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect() })
}

/// Runs a forward pass on `input` and returns the gradients of
/// `sum(output_grad * Q)`.
pub fn backward(
    params: &NetworkParams,
    spec: &NetworkSpec,
    input: ArrayView2<f64>,
    noise: Option<&NoiseSample>,
    output_grad: ArrayView2<f64>,
) -> Result<Gradients> {
    let cache = forward_cached(params, spec, input, noise)?;
    backward_from_cache(params, spec, &cache, output_grad)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
