//! Batched fully connected ReLU networks over a shared flat parameter
//! vector. Weights of a layer are stored input-major (`W[i * out + o]`)
//! so the inner loops run over contiguous output units.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl Layer {
    fn weights<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset..self.offset + self.inputs * self.outputs]
    }

    fn bias<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.inputs * self.outputs;
        &theta[start..start + self.outputs]
    }

    pub fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// ReLU on hidden layers, identity on the last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub batch: usize,
    /// `inputs[l]` is the input to layer `l` (batch x inputs).
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer (batch x outputs).
    pub pre: Vec<Vec<f64>>,
}

/// Layer differences from [`Mlp::difference`].
#[derive(Debug, Clone, Default)]
pub struct DiffTape {
    pub half_batch: usize,
    /// Hidden activation differences per layer.
    pub da: Vec<Vec<f64>>,
    /// Output differences (half batch x outputs).
    pub dy: Vec<f64>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("non-empty network")
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    // independent partial sums let the compiler keep them in vector lanes
    let mut acc = [0.0f64; 8];
    let xc = x.chunks_exact(8);
    let yc = y.chunks_exact(8);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..8 {
            acc[k] += a[k] * b[k];
        }
    }
    let mut tail = 0.0;
    for (a, b) in xr.iter().zip(yr) {
        tail += a * b;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

impl Mlp {
    /// Lays out the network starting at `offset` in the parameter vector.
    pub fn new(sizes: &[usize], offset: usize) -> Self {
        let mut layers = Vec::new();
        let mut at = offset;
        for w in sizes.windows(2) {
            let layer = Layer {
                inputs: w[0],
                outputs: w[1],
                offset: at,
            };
            at += layer.len();
            layers.push(layer);
        }
        Self {
            sizes: sizes.to_vec(),
            layers,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// He-normal weights. Hidden biases are drawn with standard deviation
    /// 0.1 so that kinks are spread out instead of all passing through the
    /// origin (with a scalar input a zero-bias network is piecewise linear
    /// in one piece per sign). Output biases start at zero.
    pub fn init<R: Rng>(&self, theta: &mut [f64], rng: &mut R) {
        let bias = Normal::new(0.0, 0.1).expect("finite std");
        for (li, l) in self.layers.iter().enumerate() {
            let normal = Normal::new(0.0, (2.0 / l.inputs as f64).sqrt()).expect("finite std");
            let start = l.offset;
            for v in &mut theta[start..start + l.inputs * l.outputs] {
                *v = normal.sample(rng);
            }
            let hidden = li + 1 < self.layers.len();
            for v in &mut theta[start + l.inputs * l.outputs..start + l.len()] {
                *v = if hidden { bias.sample(rng) } else { 0.0 };
            }
        }
    }

    pub fn forward(&self, theta: &[f64], x: &[f64], batch: usize) -> Tape {
        debug_assert_eq!(x.len(), batch * self.input_dim());
        let mut tape = Tape {
            batch,
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::new(),
        };
        let mut input = x.to_vec();
        for (li, l) in self.layers.iter().enumerate() {
            let (w, b) = (l.weights(theta), l.bias(theta));
            let mut z = vec![0.0; batch * l.outputs];
            for s in 0..batch {
                let zs = &mut z[s * l.outputs..(s + 1) * l.outputs];
                zs.copy_from_slice(b);
                let xs = &input[s * l.inputs..(s + 1) * l.inputs];
                for (i, &xi) in xs.iter().enumerate() {
                    axpy(xi, &w[i * l.outputs..(i + 1) * l.outputs], zs);
                }
            }
            let next = if li + 1 < self.layers.len() {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                Vec::new()
            };
            tape.inputs.push(input);
            tape.pre.push(z);
            input = next;
        }
        tape
    }

    /// Accumulates parameter gradients into `grad` given `d_out`
    /// (batch x outputs) and returns the gradient with respect to the input.
    pub fn backward(&self, theta: &[f64], tape: &Tape, d_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        self.backward_with(theta, tape, d_out, None, grad)
    }

    /// As [`Mlp::backward`], with extra gradients `inject[l]` added directly
    /// to the pre-activations of hidden layer `l`.
    pub fn backward_with(
        &self,
        theta: &[f64],
        tape: &Tape,
        d_out: &[f64],
        inject: Option<&[Vec<f64>]>,
        grad: &mut [f64],
    ) -> Vec<f64> {
        let batch = tape.batch;
        let mut delta = d_out.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            if li + 1 < self.layers.len() {
                // ReLU derivative, taken as 0 at the kink
                for (d, &z) in delta.iter_mut().zip(&tape.pre[li]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
                if let Some(inj) = inject {
                    axpy(1.0, &inj[li], &mut delta);
                }
            }
            let w = l.weights(theta);
            let x = &tape.inputs[li];
            let (gw, gb) = grad[l.offset..l.offset + l.len()].split_at_mut(l.inputs * l.outputs);
            let mut d_in = vec![0.0; batch * l.inputs];
            for s in 0..batch {
                let ds = &delta[s * l.outputs..(s + 1) * l.outputs];
                axpy(1.0, ds, gb);
                let xs = &x[s * l.inputs..(s + 1) * l.inputs];
                let dxs = &mut d_in[s * l.inputs..(s + 1) * l.inputs];
                for i in 0..l.inputs {
                    let wi = &w[i * l.outputs..(i + 1) * l.outputs];
                    axpy(xs[i], ds, &mut gw[i * l.outputs..(i + 1) * l.outputs]);
                    dxs[i] = dot(wi, ds);
                }
            }
            delta = d_in;
        }
        delta
    }

    /// Propagates the output difference `f(x+) - f(x-)` layer by layer for
    /// a tape whose first half of rows holds the `x+` evaluations and second
    /// half the `x-` ones, given the input difference `dx` (half batch x
    /// inputs). Biases cancel exactly and units active at both points pass
    /// the difference through unchanged, so no digits are lost to
    /// cancellation.
    pub fn difference(&self, theta: &[f64], tape: &Tape, dx: &[f64]) -> DiffTape {
        let b = tape.batch / 2;
        let mut input = dx.to_vec();
        let mut out = DiffTape {
            half_batch: b,
            da: Vec::new(),
            dy: Vec::new(),
        };
        for (li, l) in self.layers.iter().enumerate() {
            let w = l.weights(theta);
            let mut dz = vec![0.0; b * l.outputs];
            for s in 0..b {
                let dzs = &mut dz[s * l.outputs..(s + 1) * l.outputs];
                for (i, &xi) in input[s * l.inputs..(s + 1) * l.inputs].iter().enumerate() {
                    axpy(xi, &w[i * l.outputs..(i + 1) * l.outputs], dzs);
                }
            }
            if li + 1 == self.layers.len() {
                out.dy = dz;
                break;
            }
            let pre = &tape.pre[li];
            let da: Vec<f64> = (0..b * l.outputs)
                .map(|k| {
                    let (zp, zm) = (pre[k], pre[b * l.outputs + k]);
                    match (zp > 0.0, zm > 0.0) {
                        (true, true) => dz[k],
                        (false, false) => 0.0,
                        (true, false) => zp,
                        (false, true) => -zm,
                    }
                })
                .collect();
            out.da.push(da.clone());
            input = da;
        }
        out
    }

    /// Backward pass of [`Mlp::difference`] for output gradient `d_dy`.
    /// Parameter gradients go into `grad`. Units with a kink between the two
    /// points depend on the individual evaluations; their gradients are
    /// returned as pre-activation injections for [`Mlp::backward_with`] on
    /// the same tape, or `None` if there are none.
    pub fn difference_backward(
        &self,
        theta: &[f64],
        tape: &Tape,
        diff: &DiffTape,
        dx: &[f64],
        d_dy: &[f64],
        grad: &mut [f64],
    ) -> Option<Vec<Vec<f64>>> {
        let b = diff.half_batch;
        let last = self.layers.len() - 1;
        let mut inject: Vec<Vec<f64>> = self.layers[..last]
            .iter()
            .map(|l| vec![0.0; 2 * b * l.outputs])
            .collect();
        let mut any = false;
        let mut delta = d_dy.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            if li < last {
                let pre = &tape.pre[li];
                let width = b * l.outputs;
                for k in 0..width {
                    let (zp, zm) = (pre[k], pre[width + k]);
                    match (zp > 0.0, zm > 0.0) {
                        (true, true) => {}
                        (false, false) => delta[k] = 0.0,
                        (true, false) => {
                            inject[li][k] += delta[k];
                            any |= delta[k] != 0.0;
                            delta[k] = 0.0;
                        }
                        (false, true) => {
                            inject[li][width + k] -= delta[k];
                            any |= delta[k] != 0.0;
                            delta[k] = 0.0;
                        }
                    }
                }
            }
            let w = l.weights(theta);
            let x = if li == 0 { dx } else { &diff.da[li - 1][..] };
            let gw = &mut grad[l.offset..l.offset + l.inputs * l.outputs];
            let mut d_in = vec![0.0; b * l.inputs];
            for s in 0..b {
                let ds = &delta[s * l.outputs..(s + 1) * l.outputs];
                for i in 0..l.inputs {
                    axpy(x[s * l.inputs + i], ds, &mut gw[i * l.outputs..(i + 1) * l.outputs]);
                    if li > 0 {
                        d_in[s * l.inputs + i] = dot(&w[i * l.outputs..(i + 1) * l.outputs], ds);
                    }
                }
            }
            delta = d_in;
        }
        any.then_some(inject)
    }

    /// Smallest `|pre-activation|` over the hidden layers, per batch row.
    pub fn hidden_margins(&self, tape: &Tape) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; tape.batch];
        for (l, z) in self.layers.iter().zip(&tape.pre).take(self.layers.len() - 1) {
            for (s, row) in z.chunks_exact(l.outputs).enumerate() {
                out[s] = row.iter().fold(out[s], |m, &v| m.min(v.abs()));
            }
        }
        out
    }
}
