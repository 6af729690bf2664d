//! QNN wrapped between classical affine layers and trained end to end.
//!
//! Stack: `affine(n_features → n_qubits) → angle map → QNN → affine(1 → 1)`,
//! followed by a logistic output for classification. The angle map is
//! `z ↦ π·σ(z)` in the hybrid configuration and the identity in the pure-QNN
//! configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::featmap::FeatureMapSpec;
use crate::qnn::{AnsatzSpec, QnnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    /// Row-major `out × in`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let n_in = weights.first().map_or(0, Vec::len);
        if weights.is_empty() || n_in == 0 {
            return Err(Error::config("affine layer needs at least one input and output"));
        }
        if let Some(r) = weights.iter().find(|r| r.len() != n_in) {
            return Err(Error::Shape {
                what: "affine weight row length",
                expected: n_in,
                found: r.len(),
            });
        }
        if bias.len() != weights.len() {
            return Err(Error::Shape {
                what: "affine bias length",
                expected: weights.len(),
                found: bias.len(),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn identity(n: usize) -> Self {
        let weights = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            weights,
            bias: vec![0.0; n],
        }
    }

    /// `U(-1/√in, 1/√in)` for every weight and bias.
    pub fn init<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let weights = (0..n_out)
            .map(|_| (0..n_in).map(|_| rng.gen_range(-bound..=bound)).collect())
            .collect();
        let bias = (0..n_out).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { weights, bias }
    }

    pub fn n_in(&self) -> usize {
        self.weights[0].len()
    }

    pub fn n_out(&self) -> usize {
        self.weights.len()
    }

    fn n_params(&self) -> usize {
        self.n_out() * (self.n_in() + 1)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_in() {
            return Err(Error::Shape {
                what: "affine layer input",
                expected: self.n_in(),
                found: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        for row in &self.weights {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.bias);
    }

    fn load(&mut self, params: &[f64]) {
        let n_in = self.n_in();
        let (w, b) = params.split_at(self.n_out() * n_in);
        for (row, chunk) in self.weights.iter_mut().zip(w.chunks(n_in)) {
            row.copy_from_slice(chunk);
        }
        self.bias.copy_from_slice(b);
    }
}

/// Map from pre-layer outputs to encoding angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleMap {
    /// `z ↦ π σ(z)`, keeping angles inside `(0, π)`.
    Sigmoid,
    Identity,
}

impl AngleMap {
    fn apply(self, z: f64) -> f64 {
        match self {
            AngleMap::Sigmoid => PI * sigmoid(z),
            AngleMap::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            AngleMap::Sigmoid => {
                let s = sigmoid(z);
                PI * s * (1.0 - s)
            }
            AngleMap::Identity => 1.0,
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

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub pre: AffineLayer,
    pub angle_map: AngleMap,
    pub qnn: QnnModel,
    pub post: AffineLayer,
    pub objective: Objective,
}

/// Which parameter groups the optimizer may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trainable {
    pub pre: bool,
    pub qnn: bool,
    pub post: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable {
        pre: true,
        qnn: true,
        post: true,
    };
    pub const NONE: Trainable = Trainable {
        pre: false,
        qnn: false,
        post: false,
    };
    pub const QNN_ONLY: Trainable = Trainable {
        pre: false,
        qnn: true,
        post: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub trainable: Trainable,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.05,
            seed: 0,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            trainable: Trainable::ALL,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Loss value and its gradient, laid out like [`HybridModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub grad: Vec<f64>,
}

struct SampleGrad {
    loss: f64,
    grad: Vec<f64>,
}

impl HybridModel {
    /// Hybrid configuration with freshly initialized layers. All random draws
    /// come from `rng` in a fixed order: pre layer, QNN weights, post layer.
    pub fn init<R: Rng + ?Sized>(
        n_features: usize,
        feature_map: FeatureMapSpec,
        ansatz: AnsatzSpec,
        objective: Objective,
        rng: &mut R,
    ) -> Result<Self> {
        let pre = AffineLayer::init(n_features, feature_map.n_qubits(), rng);
        let qnn = QnnModel::init(feature_map, ansatz, None, rng)?;
        let post = AffineLayer::init(1, 1, rng);
        Self::new(pre, AngleMap::Sigmoid, qnn, post, objective)
    }

    /// Pure-QNN configuration: identity pre layer and angle map, fixed unit
    /// post layer. Pair with [`Trainable::QNN_ONLY`].
    pub fn pure_qnn(qnn: QnnModel, objective: Objective) -> Result<Self> {
        let n = qnn.n_inputs();
        Self::new(
            AffineLayer::identity(n),
            AngleMap::Identity,
            qnn,
            AffineLayer::identity(1),
            objective,
        )
    }

    pub fn new(
        pre: AffineLayer,
        angle_map: AngleMap,
        qnn: QnnModel,
        post: AffineLayer,
        objective: Objective,
    ) -> Result<Self> {
        let m = Self {
            pre,
            angle_map,
            qnn,
            post,
            objective,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.qnn.validate()?;
        if self.pre.n_out() != self.qnn.n_inputs() {
            return Err(Error::Shape {
                what: "pre layer outputs vs QNN inputs",
                expected: self.qnn.n_inputs(),
                found: self.pre.n_out(),
            });
        }
        if self.post.n_in() != 1 || self.post.n_out() != 1 {
            return Err(Error::Shape {
                what: "post layer must be 1 → 1; inputs",
                expected: 1,
                found: self.post.n_in(),
            });
        }
        let finite = |l: &AffineLayer| l.weights.iter().flatten().chain(&l.bias).all(|v| v.is_finite());
        if !finite(&self.pre) || !finite(&self.post) {
            return Err(Error::Numeric("affine layer entries must be finite".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.pre.n_in()
    }

    /// Flat parameter vector: pre weights (row-major), pre bias, QNN weights,
    /// post weight, post bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.pre.flatten_into(&mut out);
        out.extend_from_slice(&self.qnn.weights);
        self.post.flatten_into(&mut out);
        out
    }

    pub fn n_params(&self) -> usize {
        self.pre.n_params() + self.qnn.weights.len() + self.post.n_params()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::Shape {
                what: "hybrid parameter vector",
                expected: self.n_params(),
                found: params.len(),
            });
        }
        let (pre, rest) = params.split_at(self.pre.n_params());
        let (theta, post) = rest.split_at(self.qnn.weights.len());
        self.pre.load(pre);
        self.qnn.weights.copy_from_slice(theta);
        self.post.load(post);
        Ok(())
    }

    fn segments(&self) -> [(usize, usize); 3] {
        let a = self.pre.n_params();
        let b = a + self.qnn.weights.len();
        [(0, a), (a, b), (b, b + self.post.n_params())]
    }

    fn angles(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = self.pre.apply(x)?;
        let a = z.iter().map(|&v| self.angle_map.apply(v)).collect();
        Ok((z, a))
    }

    /// Output of the post layer before any logistic squashing.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        let (_, a) = self.angles(x)?;
        let q = self.qnn.forward(&a)?;
        Ok(self.post.weights[0][0] * q + self.post.bias[0])
    }

    /// Regression: raw post-layer value. Classification: `σ(logit)` in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let o = self.logit(x)?;
        Ok(match self.objective {
            Objective::Regression => o,
            Objective::Classification => sigmoid(o),
        })
    }

    /// Class decision at threshold 0.5 on the σ output.
    pub fn classify(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.forward(x)? >= 0.5))
    }

    fn sample_grad(&self, x: &[f64], target: f64, scale: f64, trainable: Trainable) -> Result<SampleGrad> {
        let (z, a) = self.angles(x)?;
        let q = self.qnn.forward(&a)?;
        let (w2, b2) = (self.post.weights[0][0], self.post.bias[0]);
        let o = w2 * q + b2;
        let (loss, d_o) = match self.objective {
            Objective::Regression => ((o - target).powi(2), 2.0 * (o - target)),
            Objective::Classification => (softplus(o) - target * o, sigmoid(o) - target),
        };
        let d_o = d_o * scale;

        let mut grad = vec![0.0; self.n_params()];
        let [(pre0, _), (th0, _), (post0, _)] = self.segments();
        let d_q = d_o * w2;

        if trainable.pre {
            let d_a = self.qnn.grad_inputs(&a)?;
            let n_in = self.pre.n_in();
            let n_out = self.pre.n_out();
            for k in 0..n_out {
                let d_z = d_q * d_a[k] * self.angle_map.derivative(z[k]);
                for (j, xj) in x.iter().enumerate() {
                    grad[pre0 + k * n_in + j] = d_z * xj;
                }
                grad[pre0 + n_out * n_in + k] = d_z;
            }
        }
        if trainable.qnn {
            for (g, d) in grad[th0..post0].iter_mut().zip(self.qnn.grad_weights(&a)?) {
                *g = d_q * d;
            }
        }
        if trainable.post {
            grad[post0] = d_o * q;
            grad[post0 + 1] = d_o;
        }
        Ok(SampleGrad {
            loss: loss * scale,
            grad,
        })
    }

    /// Mean loss over the batch: MSE for regression (targets already scaled),
    /// binary cross-entropy for classification (targets in {0, 1}).
    pub fn loss(&self, xs: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
        check_batch(xs, targets)?;
        let per: Vec<f64> = xs
            .par_iter()
            .zip(targets)
            .map(|(x, &t)| {
                let o = self.logit(x)?;
                Ok(match self.objective {
                    Objective::Regression => (o - t).powi(2),
                    Objective::Classification => softplus(o) - t * o,
                })
            })
            .collect::<Result<_>>()?;
        Ok(per.iter().sum::<f64>() / xs.len() as f64)
    }

    /// Loss and analytic gradient over all parameters.
    pub fn backward(&self, xs: &[Vec<f64>], targets: &[f64]) -> Result<LossGradient> {
        self.backward_masked(xs, targets, Trainable::ALL)
    }

    fn backward_masked(&self, xs: &[Vec<f64>], targets: &[f64], trainable: Trainable) -> Result<LossGradient> {
        check_batch(xs, targets)?;
        let scale = 1.0 / xs.len() as f64;
        let per: Vec<SampleGrad> = xs
            .par_iter()
            .zip(targets)
            .map(|(x, &t)| self.sample_grad(x, t, scale, trainable))
            .collect::<Result<_>>()?;
        // Fixed accumulation order keeps results independent of thread count.
        let mut grad = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        for s in &per {
            loss += s.loss;
            for (g, v) in grad.iter_mut().zip(&s.grad) {
                *g += v;
            }
        }
        Ok(LossGradient { loss, grad })
    }
}

fn check_batch(xs: &[Vec<f64>], targets: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::config("training batch is empty"));
    }
    if xs.len() != targets.len() {
        return Err(Error::Shape {
            what: "batch targets",
            expected: xs.len(),
            found: targets.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: HybridModel,
    /// Loss at the start of every epoch, followed by the loss after the last update.
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history is never empty")
    }

    /// Loss history as a two-column CSV (`epoch,loss`).
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (e, l) in self.loss_history.iter().enumerate() {
            s.push_str(&format!("{e},{l:.17e}\n"));
        }
        s
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Full-batch gradient descent. Deterministic for a fixed model and config.
pub fn train_hybrid(
    xs: &[Vec<f64>],
    targets: &[f64],
    model: HybridModel,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_batch(xs, targets)?;
    model.validate()?;

    let mut model = model;
    let mut params = model.params();
    let mut mask = vec![false; params.len()];
    let flags = [config.trainable.pre, config.trainable.qnn, config.trainable.post];
    for ((lo, hi), on) in model.segments().into_iter().zip(flags) {
        mask[lo..hi].iter_mut().for_each(|m| *m = on);
    }
    let mut adam = Adam {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        t: 0,
    };
    let mut history = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..config.epochs {
        let LossGradient { loss, grad } = model.backward_masked(xs, targets, config.trainable)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training {
                epoch,
                message: format!("non-finite loss or gradient (loss = {loss})"),
            });
        }
        history.push(loss);
        match config.optimizer {
            Optimizer::Sgd => {
                for ((p, g), &on) in params.iter_mut().zip(&grad).zip(&mask) {
                    if on {
                        *p -= config.learning_rate * g;
                    }
                }
            }
            Optimizer::Adam => {
                adam.t += 1;
                let bc1 = 1.0 - config.beta1.powi(adam.t);
                let bc2 = 1.0 - config.beta2.powi(adam.t);
                for i in 0..params.len() {
                    if !mask[i] {
                        continue;
                    }
                    adam.m[i] = config.beta1 * adam.m[i] + (1.0 - config.beta1) * grad[i];
                    adam.v[i] = config.beta2 * adam.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
                    let m_hat = adam.m[i] / bc1;
                    let v_hat = adam.v[i] / bc2;
                    params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
                }
            }
        }
        model.set_params(&params)?;
    }
    let last = model.loss(xs, targets)?;
    if !last.is_finite() {
        return Err(Error::Training {
            epoch: config.epochs,
            message: format!("non-finite final loss ({last})"),
        });
    }
    history.push(last);
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

/// Builds and trains a model from scratch using `config.seed` for initialization.
pub fn fit_hybrid(
    xs: &[Vec<f64>],
    targets: &[f64],
    feature_map: FeatureMapSpec,
    ansatz: AnsatzSpec,
    objective: Objective,
    pure_qnn: bool,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let n_features = xs.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = if pure_qnn {
        HybridModel::pure_qnn(QnnModel::init(feature_map, ansatz, None, &mut rng)?, objective)?
    } else {
        HybridModel::init(n_features, feature_map, ansatz, objective, &mut rng)?
    };
    let mut cfg = *config;
    if pure_qnn {
        cfg.trainable = Trainable::QNN_ONLY;
    }
    train_hybrid(xs, targets, model, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featmap::EntanglementPattern::*;

    fn fm(reps: usize) -> FeatureMapSpec {
        FeatureMapSpec::new(3, reps, Full).unwrap()
    }

    fn an(reps: usize) -> AnsatzSpec {
        AnsatzSpec::new(3, reps, Full).unwrap()
    }

    fn random_model(seed: u64, objective: Objective) -> HybridModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HybridModel::init(3, fm(1), an(1), objective, &mut rng).unwrap()
    }

    #[test]
    fn identity_wrappers_reduce_to_qnn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let qnn = QnnModel::init(fm(2), an(2), None, &mut rng).unwrap();
        let h = HybridModel::pure_qnn(qnn.clone(), Objective::Regression).unwrap();
        let x = [0.3, 1.7, 2.4];
        assert_eq!(h.forward(&x).unwrap(), qnn.forward(&x).unwrap());
    }

    #[test]
    fn zero_post_weight_gives_constant() {
        let mut h = random_model(2, Objective::Regression);
        h.post = AffineLayer::new(vec![vec![0.0]], vec![0.37]).unwrap();
        for x in [[0.0, 1.0, 2.0], [3.0, 0.5, 0.1]] {
            assert_eq!(h.forward(&x).unwrap(), 0.37);
        }
        let mut c = h.clone();
        c.objective = Objective::Classification;
        c.post = AffineLayer::new(vec![vec![0.0]], vec![0.0]).unwrap();
        assert_eq!(c.forward(&[1.0, 1.0, 1.0]).unwrap(), 0.5);
        assert_eq!(c.classify(&[1.0, 1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn bce_at_midpoint_is_ln2() {
        let mut h = random_model(3, Objective::Classification);
        h.post = AffineLayer::new(vec![vec![0.0]], vec![0.0]).unwrap();
        let loss = h.loss(&[vec![0.1, 0.2, 0.3]], &[1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let h = random_model(4, Objective::Regression);
        let xs = vec![vec![0.5, 1.0, 2.0], vec![2.0, 0.3, 1.1]];
        let t: Vec<f64> = xs.iter().map(|x| h.forward(x).unwrap()).collect();
        let lg = h.backward(&xs, &t).unwrap();
        assert!(lg.loss.abs() < 1e-20);
        assert!(lg.grad.iter().all(|g| g.abs() < 1e-10));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (seed, objective) in [(5, Objective::Regression), (6, Objective::Classification)] {
            let h = random_model(seed, objective);
            let xs = vec![vec![0.5, 1.0, 2.0], vec![2.0, 0.3, 1.1], vec![1.4, 2.9, 0.2]];
            let t = match objective {
                Objective::Regression => vec![0.3, -0.5, 0.9],
                Objective::Classification => vec![1.0, 0.0, 1.0],
            };
            let lg = h.backward(&xs, &t).unwrap();
            let p0 = h.params();
            let hstep = 1e-5;
            for i in 0..p0.len() {
                let mut m = h.clone();
                let mut p = p0.clone();
                p[i] += hstep;
                m.set_params(&p).unwrap();
                let lp = m.loss(&xs, &t).unwrap();
                p[i] -= 2.0 * hstep;
                m.set_params(&p).unwrap();
                let lm = m.loss(&xs, &t).unwrap();
                let fd = (lp - lm) / (2.0 * hstep);
                assert!((fd - lg.grad[i]).abs() < 1e-5, "param {i}: {fd} vs {}", lg.grad[i]);
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let h = random_model(7, Objective::Regression);
        assert!(matches!(h.backward(&[], &[]), Err(Error::Config(_))));
    }

    #[test]
    fn frozen_model_has_flat_history() {
        let h = random_model(8, Objective::Regression);
        let xs = vec![vec![0.5, 1.0, 2.0], vec![2.0, 0.3, 1.1]];
        let cfg = TrainConfig {
            epochs: 5,
            trainable: Trainable::NONE,
            ..TrainConfig::default()
        };
        let out = train_hybrid(&xs, &[0.1, 0.2], h, &cfg).unwrap();
        assert!(out.loss_history.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(out.loss_history.len(), 6);
    }

    #[test]
    fn same_seed_same_history() {
        let xs = vec![vec![0.5, 1.0, 2.0], vec![2.0, 0.3, 1.1], vec![1.0, 1.0, 1.0]];
        let t = [0.1, -0.4, 0.6];
        let cfg = TrainConfig {
            epochs: 30,
            seed: 17,
            ..TrainConfig::default()
        };
        let a = fit_hybrid(&xs, &t, fm(1), an(1), Objective::Regression, false, &cfg).unwrap();
        let b = fit_hybrid(&xs, &t, fm(1), an(1), Objective::Regression, false, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert!(a.final_loss() < a.loss_history[0]);
        assert!(a.loss_csv().starts_with("epoch,loss\n0,"));
    }

    #[test]
    fn divergence_is_reported() {
        let mut h = random_model(9, Objective::Regression);
        h.post.weights[0][0] = 1e308;
        h.post.bias[0] = 1e308;
        let cfg = TrainConfig {
            epochs: 3,
            optimizer: Optimizer::Sgd,
            ..TrainConfig::default()
        };
        let err = train_hybrid(&[vec![1.0, 1.0, 1.0]], &[0.0], h, &cfg).unwrap_err();
        assert!(matches!(err, Error::Training { epoch: 0, .. }));
    }

    #[test]
    fn json_roundtrip() {
        let h = random_model(10, Objective::Classification);
        let js = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<HybridModel>(&js).unwrap(), h);
    }
}
