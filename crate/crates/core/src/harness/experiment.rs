//! Training and evaluation under the invariance-enforcement methods.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{synth_dataset, Dataset, DatasetSpec};
use super::mlp::{MlpModel, Sgd};
use crate::algebra::{GroupElement, PointCloud};
use crate::canon::canon_lex;
use crate::diagnostics::random_permutation;
use crate::error::{FrameError, Result};
use crate::frames::{frame_argsort_mc, frame_separated, separated_collection, DirectionCollection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Raw column order.
    None,
    /// Lexicographic sort of the columns.
    DiscontCanon,
    /// Sorting frame over a fixed random direction collection.
    RobustSeparated,
    /// Sort along a uniformly random direction.
    RobustArgsort,
    /// Uniformly random permutation.
    ReynoldsSampled,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::None,
        Method::DiscontCanon,
        Method::RobustSeparated,
        Method::RobustArgsort,
        Method::ReynoldsSampled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::DiscontCanon => "discont-canon",
            Method::RobustSeparated => "robust-separated",
            Method::RobustArgsort => "robust-argsort",
            Method::ReynoldsSampled => "reynolds-sampled",
        }
    }

    /// Whether the input is transformed by a random draw.
    pub fn is_sampled(self) -> bool {
        matches!(
            self,
            Method::RobustSeparated | Method::RobustArgsort | Method::ReynoldsSampled
        )
    }

    pub fn is_robust(self) -> bool {
        matches!(self, Method::RobustSeparated | Method::RobustArgsort)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FrameError::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Everything that defines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub classes: usize,
    pub n_points: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: f64,
    /// Pixel grid resolution, `0` for continuous coordinates.
    pub grid: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Step size after `lr_drop_epoch`.
    pub lr_after: f64,
    pub lr_drop_epoch: usize,
    pub momentum: f64,
    /// Frame draws per example per training step.
    pub train_samples: usize,
    pub inference_samples: Vec<usize>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            n_points: 32,
            train_per_class: 100,
            test_per_class: 40,
            noise: 0.01,
            grid: 28,
            hidden: vec![64, 48, 32],
            epochs: 20,
            batch_size: 10,
            lr: 0.05,
            lr_after: 0.005,
            lr_drop_epoch: 10,
            momentum: 0.9,
            train_samples: 32,
            inference_samples: vec![1, 5, 10, 25],
            methods: Method::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl ExperimentConfig {
    /// A quick configuration for checks.
    pub fn smoke() -> Self {
        Self {
            classes: 2,
            n_points: 16,
            train_per_class: 50,
            test_per_class: 20,
            epochs: 5,
            lr_drop_epoch: 3,
            seeds: vec![0],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("classes", self.classes),
            ("n_points", self.n_points),
            ("train_per_class", self.train_per_class),
            ("test_per_class", self.test_per_class),
            ("batch_size", self.batch_size),
            ("train_samples", self.train_samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(FrameError::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.inference_samples.contains(&0) || self.hidden.contains(&0) {
            return Err(FrameError::InvalidInput(
                "sample counts and layer sizes must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr_after > 0.0 && (0.0..1.0).contains(&self.momentum)) {
            return Err(FrameError::InvalidInput(
                "need lr > 0 and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![2 * self.n_points];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.classes);
        sizes
    }
}

/// Applies a method's invariance step to a cloud.
#[derive(Debug, Clone)]
pub struct Enforcer {
    pub method: Method,
    dirs: Option<DirectionCollection>,
}

impl Enforcer {
    /// `rng` draws the direction collection of the separated frame.
    pub fn new<R: Rng + ?Sized>(method: Method, n_points: usize, rng: &mut R) -> Result<Self> {
        let dirs = match method {
            Method::RobustSeparated => Some(separated_collection(n_points, 2, rng)?),
            _ => None,
        };
        Ok(Self { method, dirs })
    }

    /// The flattened network input for one draw.
    pub fn input<R: Rng + ?Sized>(&self, x: &PointCloud, rng: &mut R) -> Result<Vec<f64>> {
        let y = match self.method {
            Method::None => x.clone(),
            Method::DiscontCanon => canon_lex(x),
            Method::RobustSeparated => {
                let dirs = self
                    .dirs
                    .as_ref()
                    .expect("collection drawn at construction");
                frame_separated(x, dirs)?.sample(rng).act_inverse(x)?
            }
            Method::RobustArgsort => frame_argsort_mc(x, 1, rng)?.atoms()[0]
                .element
                .act_inverse(x)?,
            Method::ReynoldsSampled => {
                GroupElement::Perm(random_permutation(x.n(), rng)).act_inverse(x)?
            }
        };
        Ok(y.flatten())
    }

    /// Logits averaged over `samples` draws (one evaluation for the
    /// deterministic methods).
    pub fn logits<R: Rng + ?Sized>(
        &self,
        model: &MlpModel,
        x: &PointCloud,
        samples: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let draws = if self.method.is_sampled() {
            samples.max(1)
        } else {
            1
        };
        let mut acc = vec![0.0; model.output_size()];
        for _ in 0..draws {
            let out = model.forward(&self.input(x, rng)?);
            for (a, o) in acc.iter_mut().zip(out.iter()) {
                *a += o / draws as f64;
            }
        }
        Ok(acc)
    }
}

/// Mean training loss per epoch.
pub type LossCurve = Vec<f64>;

/// Trains `model` in place on the training split.
pub fn train<R: Rng + ?Sized>(
    model: &mut MlpModel,
    data: &Dataset,
    enforcer: &Enforcer,
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<LossCurve> {
    let mut opt = Sgd::new(model, config.momentum);
    let mut order = data.train.clone();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = if epoch < config.lr_drop_epoch {
            config.lr
        } else {
            config.lr_after
        };
        order.shuffle(rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_gradients();
            let mut terms = 0usize;
            for &i in batch {
                for _ in 0..config.train_samples {
                    let input = enforcer.input(&data.clouds[i], rng)?;
                    total += model.accumulate(&input, data.labels[i], &mut grads);
                    terms += 1;
                }
            }
            count += terms;
            opt.step(model, &grads, lr, 1.0 / terms as f64)?;
        }
        let mean = total / count.max(1) as f64;
        if !mean.is_finite() {
            return Err(FrameError::Diverged(format!(
                "loss is {mean} in epoch {epoch}"
            )));
        }
        curve.push(mean);
    }
    Ok(curve)
}

/// Test accuracy with logits averaged over `samples` draws per cloud.
/// Every test cloud draws from its own stream derived from `seed`, so the
/// draws for `k` samples are a prefix of those for any larger count.
pub fn evaluate(
    model: &MlpModel,
    data: &Dataset,
    enforcer: &Enforcer,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if data.test.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for &i in &data.test {
        let mut rng = stream(seed, i as u64);
        let logits = enforcer.logits(model, &data.clouds[i], samples, &mut rng)?;
        let pred = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .expect("nonempty logits");
        if pred == data.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.test.len() as f64)
}

/// One cell of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub method: Method,
    pub samples: usize,
    pub accuracy: f64,
    pub seed: u64,
}

/// Seed-averaged accuracy of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRecord {
    pub method: Method,
    pub samples: usize,
    pub accuracy: f64,
}

/// The qualitative ordering: robust methods at 5 or more inference
/// samples at least as accurate as the lexicographic canonicalization,
/// which beats both the raw input and sampled Reynolds averaging by 10
/// points; robust accuracy non-decreasing in the number of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub robust_at_least_canon: bool,
    pub canon_margin: bool,
    pub robust_monotone: bool,
}

impl OrderingCheck {
    pub fn passed(&self) -> bool {
        self.robust_at_least_canon && self.canon_margin && self.robust_monotone
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub means: Vec<MeanRecord>,
    pub ordering: Option<OrderingCheck>,
    /// Per method and seed, the training loss curve.
    pub loss_curves: Vec<(Method, u64, LossCurve)>,
    pub loss: String,
    pub init: String,
}

/// Independent random streams of one seed.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// Dataset of one seed.
pub fn dataset_for(config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    let spec = DatasetSpec {
        classes: config.classes,
        n_points: config.n_points,
        per_class: config.train_per_class + config.test_per_class,
        noise: config.noise,
        grid: config.grid,
    };
    synth_dataset(spec, &mut stream(seed, 0))?.split(config.test_per_class)
}

/// Trains and evaluates one method for one seed.
pub fn run_single(
    config: &ExperimentConfig,
    data: &Dataset,
    method: Method,
    seed: u64,
) -> Result<(Vec<Record>, LossCurve)> {
    let tag = 16
        * (Method::ALL
            .iter()
            .position(|&m| m == method)
            .expect("listed") as u64
            + 1);
    let enforcer = Enforcer::new(method, config.n_points, &mut stream(seed, 2))?;
    let mut model = MlpModel::new(&config.layer_sizes(), &mut stream(seed, 1))?;
    let curve = train(&mut model, data, &enforcer, config, &mut stream(seed, tag))?;
    let eval_seed = stream(seed, tag + 1).random::<u64>();
    let mut records = Vec::with_capacity(config.inference_samples.len());
    for &k in &config.inference_samples {
        let accuracy = evaluate(&model, data, &enforcer, k, eval_seed)?;
        records.push(Record {
            method,
            samples: k,
            accuracy,
            seed,
        });
    }
    Ok((records, curve))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let mut records = Vec::new();
    let mut loss_curves = Vec::new();
    for &seed in &config.seeds {
        let data = dataset_for(config, seed)?;
        for &method in &config.methods {
            let (recs, curve) = run_single(config, &data, method, seed)?;
            records.extend(recs);
            loss_curves.push((method, seed, curve));
        }
    }
    let means = seed_means(&records);
    let ordering = ordering_check(&means);
    Ok(ExperimentResults {
        config: config.clone(),
        records,
        means,
        ordering,
        loss_curves,
        loss: "cross-entropy".into(),
        init: "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases".into(),
    })
}

pub fn seed_means(records: &[Record]) -> Vec<MeanRecord> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.samples)) {
            keys.push((r.method, r.samples));
        }
    }
    keys.into_iter()
        .map(|(method, samples)| {
            let accs: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method && r.samples == samples)
                .map(|r| r.accuracy)
                .collect();
            MeanRecord {
                method,
                samples,
                accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
            }
        })
        .collect()
}

/// Evaluates the ordering when every method was run; `None` otherwise.
pub fn ordering_check(means: &[MeanRecord]) -> Option<OrderingCheck> {
    let at = |m: Method| -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = means
            .iter()
            .filter(|r| r.method == m)
            .map(|r| (r.samples, r.accuracy))
            .collect();
        v.sort_by_key(|p| p.0);
        v
    };
    let best = |m: Method| at(m).iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if Method::ALL.iter().any(|&m| at(m).is_empty()) {
        return None;
    }
    let canon = best(Method::DiscontCanon);
    let baseline = best(Method::None).max(best(Method::ReynoldsSampled));
    let robust = [Method::RobustSeparated, Method::RobustArgsort];
    let robust_at_least_canon = robust
        .iter()
        .all(|&m| at(m).iter().filter(|p| p.0 >= 5).all(|p| p.1 >= canon));
    let robust_monotone = robust
        .iter()
        .all(|&m| at(m).windows(2).all(|w| w[1].1 >= w[0].1));
    Some(OrderingCheck {
        robust_at_least_canon,
        canon_margin: canon >= baseline + 0.10,
        robust_monotone,
    })
}
