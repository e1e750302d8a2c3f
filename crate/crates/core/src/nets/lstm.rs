//! Long short-term memory layers with explicit backpropagation through time.
//!
//! Every tensor here is time-major: `T×B×X`. Gate order inside the fused
//! `4H` axis is input, forget, cell, output.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView3, Axis};
use rand::Rng;

use super::dropout::dropout_inplace;
use super::param::{Param, Parameterized};
use crate::scalar::Scalar;

/// One recurrent direction.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmDirection<A> {
    pub w_ih: Param<A>,
    pub w_hh: Param<A>,
    pub bias: Param<A>,
    reverse: bool,
}

#[derive(Clone, Debug)]
pub struct DirectionCache<A> {
    /// Post-activation gates, `T×B×4H`.
    gates: Array3<A>,
    cell: Array3<A>,
    tanh_cell: Array3<A>,
    hidden: Array3<A>,
}

impl<A: Scalar> LstmDirection<A> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, reverse: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_ih: Param::uniform(inputs, 4 * hidden, bound, rng),
            w_hh: Param::uniform(hidden, 4 * hidden, bound, rng),
            bias: Param::uniform(1, 4 * hidden, bound, rng),
            reverse,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.value.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.w_ih.value.nrows()
    }

    fn order(&self, t_len: usize) -> Vec<usize> {
        if self.reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        }
    }

    /// Runs the direction over `x: T×B×I`; the hidden states are returned inside the cache.
    pub fn forward(&self, x: ArrayView3<A>) -> DirectionCache<A> {
        let (t_len, batch, inputs) = x.dim();
        let h = self.hidden();
        let x_std = x.as_standard_layout();
        let x2 = x_std
            .view()
            .into_shape_with_order((t_len * batch, inputs))
            .expect("standard layout");
        let mut pre = x2.dot(&self.w_ih.value);
        pre += &self.bias.value;
        let mut gates = pre
            .into_shape_with_order((t_len, batch, 4 * h))
            .expect("contiguous");
        let mut cell = Array3::<A>::zeros((t_len, batch, h));
        let mut tanh_cell = Array3::<A>::zeros((t_len, batch, h));
        let mut hidden = Array3::<A>::zeros((t_len, batch, h));

        let order = self.order(t_len);
        let mut prev: Option<usize> = None;
        for &t in &order {
            let mut g = gates.index_axis_mut(Axis(0), t);
            if let Some(p) = prev {
                general_mat_mul(
                    A::one(),
                    &hidden.index_axis(Axis(0), p),
                    &self.w_hh.value,
                    A::one(),
                    &mut g,
                );
            }
            let g = g.as_slice_mut().expect("contiguous gates");
            let c_prev = prev.map(|p| cell.index_axis(Axis(0), p).to_owned());
            let mut c_t = cell.index_axis_mut(Axis(0), t);
            let c_t = c_t.as_slice_mut().expect("contiguous");
            let mut tc_t = tanh_cell.index_axis_mut(Axis(0), t);
            let tc_t = tc_t.as_slice_mut().expect("contiguous");
            let mut h_t = hidden.index_axis_mut(Axis(0), t);
            let h_t = h_t.as_slice_mut().expect("contiguous");
            for b in 0..batch {
                let row = &mut g[b * 4 * h..(b + 1) * 4 * h];
                for j in 0..h {
                    let i_g = row[j].sigmoid();
                    let f_g = row[h + j].sigmoid();
                    let c_g = row[2 * h + j].fast_tanh();
                    let o_g = row[3 * h + j].sigmoid();
                    row[j] = i_g;
                    row[h + j] = f_g;
                    row[2 * h + j] = c_g;
                    row[3 * h + j] = o_g;
                    let cp = match &c_prev {
                        Some(c) => c[[b, j]],
                        None => A::zero(),
                    };
                    let c = f_g * cp + i_g * c_g;
                    let tc = c.fast_tanh();
                    c_t[b * h + j] = c;
                    tc_t[b * h + j] = tc;
                    h_t[b * h + j] = o_g * tc;
                }
            }
            prev = Some(t);
        }
        DirectionCache {
            gates,
            cell,
            tanh_cell,
            hidden,
        }
    }

    /// Backpropagates `dh: T×B×H` (gradient on every emitted hidden state) and returns `dL/dx`.
    pub fn backward(
        &mut self,
        x: ArrayView3<A>,
        cache: &DirectionCache<A>,
        dh: ArrayView3<A>,
        param_grads: bool,
    ) -> Array3<A> {
        let (t_len, batch, inputs) = x.dim();
        let h = self.hidden();
        let mut dgates = Array3::<A>::zeros((t_len, batch, 4 * h));
        let mut dh_next = Array2::<A>::zeros((batch, h));
        let mut dc_next = Array2::<A>::zeros((batch, h));
        let w_hh_t = self.w_hh.value.t();

        let order = self.order(t_len);
        for (k, &t) in order.iter().enumerate().rev() {
            let prev = if k > 0 { Some(order[k - 1]) } else { None };
            let gates = cache.gates.index_axis(Axis(0), t);
            let gates = gates.as_slice().expect("contiguous");
            let tc = cache.tanh_cell.index_axis(Axis(0), t);
            let tc = tc.as_slice().expect("contiguous");
            let c_prev = prev.map(|p| cache.cell.index_axis(Axis(0), p));
            let dh_t = dh.index_axis(Axis(0), t);
            let mut dg = dgates.index_axis_mut(Axis(0), t);
            let dg = dg.as_slice_mut().expect("contiguous");
            let dhn = dh_next.as_slice().expect("contiguous");
            let dcn = dc_next.as_slice_mut().expect("contiguous");
            for b in 0..batch {
                let row = &gates[b * 4 * h..(b + 1) * 4 * h];
                let drow = &mut dg[b * 4 * h..(b + 1) * 4 * h];
                for j in 0..h {
                    let (i_g, f_g, c_g, o_g) = (row[j], row[h + j], row[2 * h + j], row[3 * h + j]);
                    let tcv = tc[b * h + j];
                    let dht = dh_t[[b, j]] + dhn[b * h + j];
                    let d_o = dht * tcv;
                    let dc = dht * o_g * (A::one() - tcv * tcv) + dcn[b * h + j];
                    let cp = match &c_prev {
                        Some(c) => c[[b, j]],
                        None => A::zero(),
                    };
                    drow[j] = dc * c_g * i_g * (A::one() - i_g);
                    drow[h + j] = dc * cp * f_g * (A::one() - f_g);
                    drow[2 * h + j] = dc * i_g * (A::one() - c_g * c_g);
                    drow[3 * h + j] = d_o * o_g * (A::one() - o_g);
                    dcn[b * h + j] = dc * f_g;
                }
            }
            if prev.is_some() {
                general_mat_mul(
                    A::one(),
                    &dgates.index_axis(Axis(0), t),
                    &w_hh_t,
                    A::zero(),
                    &mut dh_next,
                );
            } else {
                dh_next.fill(A::zero());
            }
        }

        let dg2 = dgates
            .view()
            .into_shape_with_order((t_len * batch, 4 * h))
            .expect("contiguous");
        if param_grads {
            let x_std = x.as_standard_layout();
            let x2 = x_std
                .view()
                .into_shape_with_order((t_len * batch, inputs))
                .expect("standard layout");
            general_mat_mul(A::one(), &x2.t(), &dg2, A::one(), &mut self.w_ih.grad);
            self.bias.grad += &dg2.sum_axis(Axis(0)).insert_axis(Axis(0));

            // hidden state feeding each step: shifted copy of the emitted states
            let mut h_prev = Array3::<A>::zeros((t_len, batch, h));
            if t_len > 1 {
                if self.reverse {
                    h_prev
                        .slice_mut(s![..t_len - 1, .., ..])
                        .assign(&cache.hidden.slice(s![1.., .., ..]));
                } else {
                    h_prev
                        .slice_mut(s![1.., .., ..])
                        .assign(&cache.hidden.slice(s![..t_len - 1, .., ..]));
                }
            }
            let hp2 = h_prev
                .into_shape_with_order((t_len * batch, h))
                .expect("contiguous");
            general_mat_mul(A::one(), &hp2.t(), &dg2, A::one(), &mut self.w_hh.grad);
        }
        dg2.dot(&self.w_ih.value.t())
            .into_shape_with_order((t_len, batch, inputs))
            .expect("contiguous")
    }
}

impl<A: Scalar> Parameterized<A> for LstmDirection<A> {
    fn params(&self) -> Vec<&Param<A>> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}

/// One (optionally bidirectional) recurrent layer; outputs are `[forward | backward]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer<A> {
    pub forward: LstmDirection<A>,
    pub backward: Option<LstmDirection<A>>,
}

/// Stacked recurrent encoder with dropout between layers.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqEncoder<A> {
    pub layers: Vec<LstmLayer<A>>,
    pub dropout: f64,
}

#[derive(Clone, Debug)]
struct LayerCache<A> {
    input: Array3<A>,
    fwd: DirectionCache<A>,
    bwd: Option<DirectionCache<A>>,
    mask: Option<Array3<A>>,
}

#[derive(Clone, Debug)]
pub struct EncoderCache<A> {
    layers: Vec<LayerCache<A>>,
}

impl<A: Scalar> SeqEncoder<A> {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        n_layers: usize,
        bidirectional: bool,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let dirs = if bidirectional { 2 } else { 1 };
        let layers = (0..n_layers)
            .map(|l| {
                let inp = if l == 0 { inputs } else { dirs * hidden };
                LstmLayer {
                    forward: LstmDirection::new(inp, hidden, false, rng),
                    backward: bidirectional.then(|| LstmDirection::new(inp, hidden, true, rng)),
                }
            })
            .collect();
        Self { layers, dropout }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].forward.hidden()
    }

    pub fn bidirectional(&self) -> bool {
        self.layers[0].backward.is_some()
    }

    pub fn output_size(&self) -> usize {
        self.hidden() * if self.bidirectional() { 2 } else { 1 }
    }

    /// `x: T×B×I` → `T×B×(dirs·H)`. Dropout is active only when `rng` is given.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: ArrayView3<A>,
        mut rng: Option<&mut R>,
    ) -> (Array3<A>, EncoderCache<A>) {
        let mut input = x.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let fwd = layer.forward.forward(input.view());
            let bwd = layer.backward.as_ref().map(|d| d.forward(input.view()));
            let h = layer.forward.hidden();
            let (t_len, batch, _) = input.dim();
            let mut out = match &bwd {
                None => fwd.hidden.clone(),
                Some(b) => {
                    let mut out = Array3::<A>::zeros((t_len, batch, 2 * h));
                    out.slice_mut(s![.., .., ..h]).assign(&fwd.hidden);
                    out.slice_mut(s![.., .., h..]).assign(&b.hidden);
                    out
                }
            };
            let mask = if l + 1 < n_layers {
                dropout_inplace(&mut out, self.dropout, rng.as_deref_mut())
            } else {
                None
            };
            caches.push(LayerCache {
                input: std::mem::replace(&mut input, out),
                fwd,
                bwd,
                mask,
            });
        }
        (input, EncoderCache { layers: caches })
    }

    pub fn backward(
        &mut self,
        cache: &EncoderCache<A>,
        d_out: Array3<A>,
        param_grads: bool,
    ) -> Array3<A> {
        let mut grad = d_out;
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers).rev() {
            if let Some(mask) = &lc.mask {
                grad *= mask;
            }
            let h = layer.forward.hidden();
            let mut dx = match layer.backward.as_mut() {
                None => layer
                    .forward
                    .backward(lc.input.view(), &lc.fwd, grad.view(), param_grads),
                Some(bdir) => {
                    let mut dx = layer.forward.backward(
                        lc.input.view(),
                        &lc.fwd,
                        grad.slice(s![.., .., ..h]),
                        param_grads,
                    );
                    dx += &bdir.backward(
                        lc.input.view(),
                        lc.bwd.as_ref().expect("bidirectional cache"),
                        grad.slice(s![.., .., h..]),
                        param_grads,
                    );
                    dx
                }
            };
            std::mem::swap(&mut grad, &mut dx);
        }
        grad
    }
}

impl<A: Scalar> Parameterized<A> for SeqEncoder<A> {
    fn params(&self) -> Vec<&Param<A>> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.forward.params());
            if let Some(b) = &l.backward {
                out.extend(b.params());
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.forward.params_mut());
            if let Some(b) = &mut l.backward {
                out.extend(b.params_mut());
            }
        }
        out
    }
}

/// Many-to-one summary: last forward state concatenated with the backward state at `t = 0`.
pub fn final_states<A: Scalar>(seq: &Array3<A>, hidden: usize, bidirectional: bool) -> Array2<A> {
    let t_len = seq.dim().0;
    if bidirectional {
        let mut out = Array2::zeros((seq.dim().1, 2 * hidden));
        out.slice_mut(s![.., ..hidden])
            .assign(&seq.slice(s![t_len - 1, .., ..hidden]));
        out.slice_mut(s![.., hidden..])
            .assign(&seq.slice(s![0, .., hidden..]));
        out
    } else {
        seq.index_axis(Axis(0), t_len - 1).to_owned()
    }
}

/// Scatters a gradient on [`final_states`] back onto the full sequence.
pub fn final_states_backward<A: Scalar>(
    d_final: &Array2<A>,
    seq_dim: (usize, usize, usize),
    hidden: usize,
    bidirectional: bool,
) -> Array3<A> {
    let (t_len, _, _) = seq_dim;
    let mut d = Array3::zeros(seq_dim);
    if bidirectional {
        d.slice_mut(s![t_len - 1, .., ..hidden])
            .assign(&d_final.slice(s![.., ..hidden]));
        d.slice_mut(s![0, .., hidden..])
            .assign(&d_final.slice(s![.., hidden..]));
    } else {
        d.index_axis_mut(Axis(0), t_len - 1).assign(d_final);
    }
    d
}
