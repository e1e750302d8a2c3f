use ndarray::{Array1, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RegularizerScale, TrainConfig};
use crate::dataset::{mutable_indices, partition_by_target, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::losses::{self, LossBreakdown, LossComponents};
use crate::nets::{
    build_counterfactual_head, to_batch_major, to_time_major, Classifier, Discriminator, DiscriminatorSpec,
    Generator, GeneratorSpec, HeadVariant, Parameterized,
};
use crate::optim::Adam;
use crate::scalar::Scalar;

/// One line of the training log: epoch means of every loss term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub epoch: usize,
    /// Generator updates completed so far.
    pub step: usize,
    pub adv: f64,
    pub cls: f64,
    pub sim: f64,
    pub sparse: f64,
    pub jerk: f64,
    pub total: f64,
    pub d_loss: f64,
    /// Fraction of real and generated samples the discriminator labels correctly.
    pub d_acc: f64,
}

#[derive(Clone, Debug)]
pub struct GanOutcome<A> {
    pub generator: Generator<A>,
    pub discriminator: Discriminator<A>,
    pub generator_spec: GeneratorSpec,
    pub discriminator_spec: DiscriminatorSpec,
    pub log: Vec<LogRecord>,
}

#[derive(Default)]
struct Running {
    sum: LossBreakdown,
    d_loss: f64,
    d_hits: usize,
    d_seen: usize,
    batches: usize,
}

impl Running {
    fn add(&mut self, b: &LossBreakdown, d_loss: f64) {
        self.sum.adv += b.adv;
        self.sum.cls += b.cls;
        self.sum.sim += b.sim;
        self.sum.sparse += b.sparse;
        self.sum.jerk += b.jerk;
        self.sum.total += b.total;
        self.d_loss += d_loss;
        self.batches += 1;
    }

    fn record(&self, epoch: usize, step: usize) -> LogRecord {
        let n = self.batches.max(1) as f64;
        LogRecord {
            epoch,
            step,
            adv: self.sum.adv / n,
            cls: self.sum.cls / n,
            sim: self.sum.sim / n,
            sparse: self.sum.sparse / n,
            jerk: self.sum.jerk / n,
            total: self.sum.total / n,
            d_loss: self.d_loss / n,
            d_acc: self.d_hits as f64 / self.d_seen.max(1) as f64,
        }
    }
}

fn non_finite(component: &str, epoch: usize, step: usize) -> Error {
    Error::NonFinite {
        component: component.to_string(),
        epoch,
        step,
    }
}

/// Trains a generator for one target class against a frozen classifier.
///
/// Each step updates the discriminator on a batch of target-class samples
/// versus the current counterfactuals, then updates the generator on the
/// weighted loss. The classifier runs in evaluation mode and is never updated.
pub fn train_counterfactual_gan<A: Scalar>(
    train: &TimeSeriesDataset<A>,
    classifier: &Classifier<A>,
    config: &TrainConfig,
) -> Result<GanOutcome<A>> {
    config.validate()?;
    if classifier.spec().n_features != train.n_features() || classifier.spec().n_classes != train.class_count() {
        return Err(Error::Shape(format!(
            "classifier expects {} features and {} classes, data has {} and {}",
            classifier.spec().n_features,
            classifier.spec().n_classes,
            train.n_features(),
            train.class_count()
        )));
    }
    let (queries, targets) = partition_by_target(train, config.target_class)?;
    let mask = train.mutable_mask().to_vec();
    let cols = mutable_indices(&mask);
    if cols.is_empty() {
        return Err(Error::InvalidDataset("no mutable features to perturb".into()));
    }
    let weights = config.effective_weights();
    let w = weights.as_array().map(A::lit);
    let beta = A::lit(config.sparsity_beta);
    let cells = (train.n_timesteps() * cols.len()) as f64;
    let reg_scale = match config.regularizer_scale {
        RegularizerScale::PerCell => 1.0 / cells,
        RegularizerScale::Sum => 1.0,
    };
    let reg = A::lit(reg_scale);
    let arch = &config.architecture;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let generator_spec = GeneratorSpec {
        hidden_size: arch.generator_hidden,
        n_layers: arch.generator_layers,
        dropout: arch.generator_dropout,
        ..build_counterfactual_head(config.approach, train.n_features(), cols.len())?
    };
    let discriminator_spec = DiscriminatorSpec {
        hidden_size: arch.discriminator_hidden,
        dropout: arch.discriminator_dropout,
        ..DiscriminatorSpec::new(train.n_features())
    };
    let mut gen = Generator::new(generator_spec.clone(), &mut rng);
    let mut disc = Discriminator::new(discriminator_spec.clone(), &mut rng);
    // input gradients need `&mut`; the copy never receives parameter gradients or updates
    let mut frozen = classifier.clone();
    let mut adam_g = Adam::new(config.optimizer);
    let mut adam_d = Adam::new(config.optimizer);

    let mut q_order: Vec<usize> = (0..queries.n_samples()).collect();
    let mut t_order: Vec<usize> = (0..targets.n_samples()).collect();
    let mut t_pos = t_order.len();
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 0..config.epochs {
        q_order.shuffle(&mut rng);
        let mut run = Running::default();
        for q_idx in q_order.chunks(config.batch_size) {
            let b = q_idx.len();
            let mut t_idx = Vec::with_capacity(b);
            while t_idx.len() < b {
                if t_pos == t_order.len() {
                    t_order.shuffle(&mut rng);
                    t_pos = 0;
                }
                t_idx.push(t_order[t_pos]);
                t_pos += 1;
            }
            let xq = to_time_major(queries.data().select(Axis(0), q_idx).view());
            let xt = to_time_major(targets.data().select(Axis(0), &t_idx).view());

            let g_pass = gen.forward_tm(xq.view(), Some(&mut rng));
            let mut delta = g_pass.output.clone();
            if generator_spec.head == HeadVariant::TanhFull {
                delta -= &xq.select(Axis(2), &cols);
            }
            let mut xcf = xq.clone();
            for (k, &c) in cols.iter().enumerate() {
                let mut dst = xcf.index_axis_mut(Axis(2), c);
                dst += &delta.index_axis(Axis(2), k);
            }

            // discriminator: target-class samples are real, counterfactuals fake
            let real = disc.forward_tm(xt.view(), Some(&mut rng));
            let fake = disc.forward_tm(xcf.view(), Some(&mut rng));
            let p_real = Discriminator::probability(&real).to_vec();
            let p_fake = Discriminator::probability(&fake).to_vec();
            let d_loss = losses::discriminator_loss(&p_real, &p_fake).as_f64();
            if !d_loss.is_finite() {
                return Err(non_finite("discriminator", epoch, step));
            }
            let half = A::lit(0.5);
            run.d_hits += p_real.iter().filter(|&&p| p >= half).count();
            run.d_hits += p_fake.iter().filter(|&&p| p < half).count();
            run.d_seen += 2 * b;
            let (g_real, g_fake) = losses::discriminator_grad(&p_real, &p_fake);
            disc.zero_grad();
            disc.backward_probs(&real, &Array1::from(g_real), true);
            disc.backward_probs(&fake, &Array1::from(g_fake), true);
            adam_d.step_params(disc.params_mut());

            // generator
            let mut d_x = Array3::<A>::zeros(xq.raw_dim());
            let mut comps = LossComponents::default();

            let fake = disc.forward_tm(xcf.view(), Some(&mut rng));
            let p_fake = Discriminator::probability(&fake).to_vec();
            comps.adv = losses::adversarial_loss(&p_fake).as_f64();
            if w[0] != A::zero() {
                let g = Array1::from(losses::adversarial_grad(&p_fake)).mapv(|v| v * w[0]);
                d_x += &disc.backward_probs(&fake, &g, false);
            }

            let c_pass = frozen.forward_tm::<ChaCha8Rng>(xcf.view(), None);
            let probs = frozen.probabilities(&c_pass.logits);
            comps.cls = losses::classification_loss(probs.view(), config.target_class).as_f64();
            if w[1] != A::zero() {
                let d_probs = losses::classification_grad(probs.view(), config.target_class).mapv(|v| v * w[1]);
                let dz = frozen.probs_to_logit_grad(&probs, &d_probs);
                d_x += &frozen.backward_logits(&c_pass, &dz, false);
            }

            let delta_bm = to_batch_major(delta.view());
            let zeros = Array3::<A>::zeros(delta_bm.raw_dim());
            comps.sim = losses::similarity_loss(zeros.view(), delta_bm.view()).as_f64() * reg_scale;
            comps.sparse = losses::sparsity_loss(zeros.view(), delta_bm.view(), beta).as_f64() * reg_scale;
            comps.jerk = losses::jerk_loss(delta_bm.view())?.as_f64() * reg_scale;
            let breakdown = losses::generator_loss(comps, &weights).map_err(|e| match e {
                Error::NonFiniteComponent(name) => non_finite(name, epoch, step),
                other => other,
            })?;

            let mut d_delta_bm = Array3::<A>::zeros(delta_bm.raw_dim());
            if w[2] != A::zero() {
                d_delta_bm.scaled_add(w[2] * reg, &losses::similarity_grad(delta_bm.view()));
            }
            if w[3] != A::zero() {
                d_delta_bm.scaled_add(w[3] * reg, &losses::sparsity_grad(delta_bm.view(), beta));
            }
            if w[4] != A::zero() {
                d_delta_bm.scaled_add(w[4] * reg, &losses::jerk_grad(delta_bm.view())?);
            }
            // x_cf depends on δ only through the mutable columns
            let mut d_delta = to_time_major(d_delta_bm.view());
            d_delta += &d_x.select(Axis(2), &cols);

            gen.zero_grad();
            gen.backward(&g_pass, &d_delta);
            adam_g.step_params(gen.params_mut());
            step += 1;
            run.add(&breakdown, d_loss);
        }
        log.push(run.record(epoch, step));
    }

    Ok(GanOutcome {
        generator: gen,
        discriminator: disc,
        generator_spec,
        discriminator_spec,
        log,
    })
}

/// Writes one JSON object per line.
pub fn write_log(path: impl AsRef<std::path::Path>, log: &[LogRecord]) -> Result<()> {
    use crate::error::IoContext;
    let path = path.as_ref();
    let mut text = String::new();
    for rec in log {
        text.push_str(&serde_json::to_string(rec).expect("plain numeric record"));
        text.push('\n');
    }
    std::fs::write(path, text).at(path)
}
