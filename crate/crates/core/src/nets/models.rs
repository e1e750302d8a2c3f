//! Classifier, generator and discriminator built on [`SeqEncoder`].
//!
//! Forward passes take time-major input (`T×B×F`) and return a pass record
//! that the matching backward call consumes.

use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dropout::dropout_inplace;
use super::linear::Linear;
use super::lstm::{final_states, final_states_backward, EncoderCache, SeqEncoder};
use super::param::{Param, Parameterized};
use crate::scalar::Scalar;

/// Rows processed per chunk when running inference over a whole dataset.
pub const INFERENCE_CHUNK: usize = 256;

pub fn to_time_major<A: Scalar>(x: ArrayView3<A>) -> Array3<A> {
    x.permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

pub fn to_batch_major<A: Scalar>(x: ArrayView3<A>) -> Array3<A> {
    to_time_major(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub n_features: usize,
    pub n_classes: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub bidirectional: bool,
    pub dropout: f64,
}

impl ClassifierSpec {
    pub fn new(n_features: usize, n_classes: usize) -> Self {
        Self {
            n_features,
            n_classes,
            hidden_size: 64,
            n_layers: 1,
            bidirectional: true,
            dropout: 0.2,
        }
    }

    /// Width of the logit layer: a single sigmoid unit for two classes.
    pub fn n_logits(&self) -> usize {
        if self.n_classes == 2 {
            1
        } else {
            self.n_classes
        }
    }
}

/// Output activation of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadVariant {
    /// `tanh` output that is the counterfactual itself.
    TanhFull,
    /// `tanh`-bounded residual.
    TanhResidual,
    /// `relu(pos) - relu(neg)` residual with exact zeros.
    DualReluResidual,
}

impl HeadVariant {
    pub fn is_residual(self) -> bool {
        !matches!(self, HeadVariant::TanhFull)
    }

    fn channels(self) -> usize {
        match self {
            HeadVariant::DualReluResidual => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_features: usize,
    pub output_features: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub bidirectional: bool,
    pub dropout: f64,
    pub head: HeadVariant,
}

impl GeneratorSpec {
    pub fn new(n_features: usize, output_features: usize, head: HeadVariant) -> Self {
        Self {
            n_features,
            output_features,
            hidden_size: 256,
            n_layers: 2,
            bidirectional: true,
            dropout: 0.4,
            head,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub n_features: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    pub bidirectional: bool,
    pub dropout: f64,
}

impl DiscriminatorSpec {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            hidden_size: 16,
            n_layers: 1,
            bidirectional: true,
            dropout: 0.4,
        }
    }
}

/// State kept between a many-to-one forward pass and its backward pass.
#[derive(Clone, Debug)]
pub struct SummaryPass<A> {
    enc: EncoderCache<A>,
    seq_dim: (usize, usize, usize),
    features: Array2<A>,
    mask: Option<Array2<A>>,
    pub logits: Array2<A>,
}

/// Sequence encoder followed by a dense head on the final states.
#[derive(Clone, Debug, PartialEq)]
struct SummaryNet<A> {
    encoder: SeqEncoder<A>,
    head: Linear<A>,
    dropout: f64,
}

impl<A: Scalar> SummaryNet<A> {
    #[allow(clippy::too_many_arguments)]
    fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        layers: usize,
        bidirectional: bool,
        dropout: f64,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let encoder = SeqEncoder::new(inputs, hidden, layers, bidirectional, dropout, rng);
        let head = Linear::new(encoder.output_size(), outputs, rng);
        Self { encoder, head, dropout }
    }

    fn forward<R: Rng + ?Sized>(&self, x: ArrayView3<A>, mut rng: Option<&mut R>) -> SummaryPass<A> {
        let (seq, enc) = self.encoder.forward(x, rng.as_deref_mut());
        let mut features = final_states(&seq, self.encoder.hidden(), self.encoder.bidirectional());
        let mask = dropout_inplace(&mut features, self.dropout, rng);
        let logits = self.head.forward(features.view());
        SummaryPass {
            enc,
            seq_dim: seq.dim(),
            features,
            mask,
            logits,
        }
    }

    fn backward(&mut self, pass: &SummaryPass<A>, d_logits: &Array2<A>, param_grads: bool) -> Array3<A> {
        let mut d_feat = self
            .head
            .backward(pass.features.view(), d_logits.view(), param_grads);
        if let Some(m) = &pass.mask {
            d_feat *= m;
        }
        let d_seq = final_states_backward(
            &d_feat,
            pass.seq_dim,
            self.encoder.hidden(),
            self.encoder.bidirectional(),
        );
        self.encoder.backward(&pass.enc, d_seq, param_grads)
    }

    fn params(&self) -> Vec<&Param<A>> {
        let mut p = self.encoder.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

/// Many-to-one recurrent classifier producing class probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier<A> {
    spec: ClassifierSpec,
    net: SummaryNet<A>,
}

impl<A: Scalar> Classifier<A> {
    pub fn new<R: Rng + ?Sized>(spec: ClassifierSpec, rng: &mut R) -> Self {
        let net = SummaryNet::new(
            spec.n_features,
            spec.hidden_size,
            spec.n_layers,
            spec.bidirectional,
            spec.dropout,
            spec.n_logits(),
            rng,
        );
        Self { spec, net }
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn forward_tm<R: Rng + ?Sized>(&self, x: ArrayView3<A>, rng: Option<&mut R>) -> SummaryPass<A> {
        self.net.forward(x, rng)
    }

    /// Class probabilities (`B×C`) for the logits of a pass.
    pub fn probabilities(&self, logits: &Array2<A>) -> Array2<A> {
        if self.spec.n_classes == 2 {
            let mut p = Array2::zeros((logits.nrows(), 2));
            for (b, z) in logits.column(0).iter().enumerate() {
                p[[b, 0]] = (-*z).sigmoid();
                p[[b, 1]] = z.sigmoid();
            }
            p
        } else {
            softmax_rows(logits)
        }
    }

    /// Chain rule from `dL/dp` to `dL/dlogits`.
    pub fn probs_to_logit_grad(&self, probs: &Array2<A>, d_probs: &Array2<A>) -> Array2<A> {
        if self.spec.n_classes == 2 {
            let mut dz = Array2::zeros((probs.nrows(), 1));
            for b in 0..probs.nrows() {
                let s = probs[[b, 0]] * probs[[b, 1]];
                dz[[b, 0]] = (d_probs[[b, 1]] - d_probs[[b, 0]]) * s;
            }
            dz
        } else {
            let mut dz = Array2::zeros(probs.raw_dim());
            for b in 0..probs.nrows() {
                let dot: A = (0..probs.ncols()).map(|k| probs[[b, k]] * d_probs[[b, k]]).sum();
                for k in 0..probs.ncols() {
                    dz[[b, k]] = probs[[b, k]] * (d_probs[[b, k]] - dot);
                }
            }
            dz
        }
    }

    /// Gradient of mean cross-entropy w.r.t. logits for integer labels.
    pub fn cross_entropy_logit_grad(&self, probs: &Array2<A>, labels: &[usize]) -> Array2<A> {
        let n = A::lit(labels.len() as f64);
        if self.spec.n_classes == 2 {
            Array2::from_shape_fn((labels.len(), 1), |(b, _)| {
                (probs[[b, 1]] - A::lit(labels[b] as f64)) / n
            })
        } else {
            Array2::from_shape_fn(probs.raw_dim(), |(b, k)| {
                let y = if labels[b] == k { A::one() } else { A::zero() };
                (probs[[b, k]] - y) / n
            })
        }
    }

    /// Returns `dL/dx` (time-major); parameter gradients accumulate only when asked.
    pub fn backward_logits(&mut self, pass: &SummaryPass<A>, d_logits: &Array2<A>, param_grads: bool) -> Array3<A> {
        self.net.backward(pass, d_logits, param_grads)
    }

    /// Evaluation-mode probabilities for batch-major input `N×T×F`.
    pub fn predict_proba(&self, x: ArrayView3<A>) -> Array2<A> {
        let n = x.dim().0;
        let mut out = Array2::zeros((n, self.spec.n_classes));
        for start in (0..n).step_by(INFERENCE_CHUNK) {
            let end = (start + INFERENCE_CHUNK).min(n);
            let xt = to_time_major(x.slice(s![start..end, .., ..]));
            let pass = self.forward_tm::<ChaCha8Rng>(xt.view(), None);
            out.slice_mut(s![start..end, ..])
                .assign(&self.probabilities(&pass.logits));
        }
        out
    }

    pub fn predict(&self, x: ArrayView3<A>) -> Vec<usize> {
        argmax_rows(&self.predict_proba(x))
    }
}

impl<A: Scalar> Parameterized<A> for Classifier<A> {
    fn params(&self) -> Vec<&Param<A>> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        self.net.params_mut()
    }
}

/// Many-to-one recurrent real/fake scorer with a sigmoid output.
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<A> {
    spec: DiscriminatorSpec,
    net: SummaryNet<A>,
}

impl<A: Scalar> Discriminator<A> {
    pub fn new<R: Rng + ?Sized>(spec: DiscriminatorSpec, rng: &mut R) -> Self {
        let net = SummaryNet::new(
            spec.n_features,
            spec.hidden_size,
            spec.n_layers,
            spec.bidirectional,
            spec.dropout,
            1,
            rng,
        );
        Self { spec, net }
    }

    pub fn spec(&self) -> &DiscriminatorSpec {
        &self.spec
    }

    pub fn forward_tm<R: Rng + ?Sized>(&self, x: ArrayView3<A>, rng: Option<&mut R>) -> SummaryPass<A> {
        self.net.forward(x, rng)
    }

    pub fn probability(pass: &SummaryPass<A>) -> Array1<A> {
        pass.logits.column(0).mapv(|z| z.sigmoid())
    }

    /// Backpropagates `dL/dp` for the per-sample real-probabilities of `pass`.
    pub fn backward_probs(&mut self, pass: &SummaryPass<A>, d_probs: &Array1<A>, param_grads: bool) -> Array3<A> {
        let d_logits = Array2::from_shape_fn((d_probs.len(), 1), |(b, _)| {
            let p = pass.logits[[b, 0]].sigmoid();
            d_probs[b] * p * (A::one() - p)
        });
        self.net.backward(pass, &d_logits, param_grads)
    }

    pub fn predict_proba(&self, x: ArrayView3<A>) -> Array1<A> {
        let n = x.dim().0;
        let mut out = Array1::zeros(n);
        for start in (0..n).step_by(INFERENCE_CHUNK) {
            let end = (start + INFERENCE_CHUNK).min(n);
            let xt = to_time_major(x.slice(s![start..end, .., ..]));
            let pass = self.forward_tm::<ChaCha8Rng>(xt.view(), None);
            out.slice_mut(s![start..end]).assign(&Self::probability(&pass));
        }
        out
    }
}

impl<A: Scalar> Parameterized<A> for Discriminator<A> {
    fn params(&self) -> Vec<&Param<A>> {
        self.net.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        self.net.params_mut()
    }
}

#[derive(Clone, Debug)]
pub struct GeneratorPass<A> {
    enc: EncoderCache<A>,
    features: Array2<A>,
    mask: Option<Array2<A>>,
    /// Pre-activation head output, `(T·B)×(channels·F_out)`.
    z: Array2<A>,
    /// Activated output, time-major `T×B×F_out`.
    pub output: Array3<A>,
}

/// Many-to-many recurrent generator with a per-step dense head.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator<A> {
    spec: GeneratorSpec,
    encoder: SeqEncoder<A>,
    head: Linear<A>,
}

impl<A: Scalar> Generator<A> {
    pub fn new<R: Rng + ?Sized>(spec: GeneratorSpec, rng: &mut R) -> Self {
        let encoder = SeqEncoder::new(
            spec.n_features,
            spec.hidden_size,
            spec.n_layers,
            spec.bidirectional,
            spec.dropout,
            rng,
        );
        let head = Linear::new(
            encoder.output_size(),
            spec.head.channels() * spec.output_features,
            rng,
        );
        Self { spec, encoder, head }
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn head_mut(&mut self) -> &mut Linear<A> {
        &mut self.head
    }

    pub fn forward_tm<R: Rng + ?Sized>(&self, x: ArrayView3<A>, mut rng: Option<&mut R>) -> GeneratorPass<A> {
        let (t_len, batch, _) = x.dim();
        let (seq, enc) = self.encoder.forward(x, rng.as_deref_mut());
        let width = seq.dim().2;
        let mut features = seq
            .into_shape_with_order((t_len * batch, width))
            .expect("contiguous");
        let mask = dropout_inplace(&mut features, self.spec.dropout, rng);
        let z = self.head.forward(features.view());
        let fo = self.spec.output_features;
        let out2 = match self.spec.head {
            HeadVariant::TanhFull | HeadVariant::TanhResidual => z.mapv(|v| v.fast_tanh()),
            HeadVariant::DualReluResidual => {
                super::sparsity_layer_view(z.slice(s![.., ..fo]), z.slice(s![.., fo..]))
            }
        };
        let output = out2
            .into_shape_with_order((t_len, batch, fo))
            .expect("contiguous");
        GeneratorPass {
            enc,
            features,
            mask,
            z,
            output,
        }
    }

    /// Accumulates parameter gradients for `dL/d output` (time-major `T×B×F_out`).
    pub fn backward(&mut self, pass: &GeneratorPass<A>, d_out: &Array3<A>) {
        let (t_len, batch, fo) = d_out.dim();
        let d2 = d_out
            .view()
            .into_shape_with_order((t_len * batch, fo))
            .expect("contiguous");
        let dz = match self.spec.head {
            HeadVariant::TanhFull | HeadVariant::TanhResidual => {
                let out2 = pass
                    .output
                    .view()
                    .into_shape_with_order((t_len * batch, fo))
                    .expect("contiguous");
                let mut dz = d2.to_owned();
                dz.zip_mut_with(&out2, |d, &y| *d *= A::one() - y * y);
                dz
            }
            HeadVariant::DualReluResidual => {
                let mut dz = Array2::zeros(pass.z.raw_dim());
                for r in 0..t_len * batch {
                    for j in 0..fo {
                        let g = d2[[r, j]];
                        if pass.z[[r, j]] > A::zero() {
                            dz[[r, j]] = g;
                        }
                        if pass.z[[r, fo + j]] > A::zero() {
                            dz[[r, fo + j]] = -g;
                        }
                    }
                }
                dz
            }
        };
        let mut d_feat = self.head.backward(pass.features.view(), dz.view(), true);
        if let Some(m) = &pass.mask {
            d_feat *= m;
        }
        let width = d_feat.ncols();
        let d_seq = d_feat
            .into_shape_with_order((t_len, batch, width))
            .expect("contiguous");
        self.encoder.backward(&pass.enc, d_seq, true);
    }

    /// Evaluation-mode output for batch-major input, returned batch-major `N×T×F_out`.
    pub fn predict(&self, x: ArrayView3<A>) -> Array3<A> {
        let (n, t_len, _) = x.dim();
        let mut out = Array3::zeros((n, t_len, self.spec.output_features));
        for start in (0..n).step_by(INFERENCE_CHUNK) {
            let end = (start + INFERENCE_CHUNK).min(n);
            let xt = to_time_major(x.slice(s![start..end, .., ..]));
            let pass = self.forward_tm::<ChaCha8Rng>(xt.view(), None);
            out.slice_mut(s![start..end, .., ..])
                .assign(&to_batch_major(pass.output.view()));
        }
        out
    }
}

impl<A: Scalar> Parameterized<A> for Generator<A> {
    fn params(&self) -> Vec<&Param<A>> {
        let mut p = self.encoder.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<A>> {
        let mut p = self.encoder.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

pub fn softmax_rows<A: Scalar>(logits: &Array2<A>) -> Array2<A> {
    let mut p = logits.clone();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let m = row.iter().copied().fold(A::neg_infinity(), A::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s: A = row.iter().copied().sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

pub fn argmax_rows<A: Scalar>(p: &Array2<A>) -> Vec<usize> {
    p.outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, A::neg_infinity()), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect()
}
