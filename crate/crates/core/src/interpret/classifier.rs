//! Two-step recurrent classifier with a balance penalty on the recurrent
//! weights, trained full-batch with Adam.

use rand::Rng;

use super::{invalid, EmbeddingSet, InterpretError};
use crate::balance::{Kernel, Penalty};
use crate::io::fmt_f64;
use crate::matrix::SynapticMatrix;

/// Hidden-state updates per forward pass.
pub const RECURRENT_STEPS: usize = 2;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Flat parameter vector laid out as `U_in (H x D)`, `U_rec (H x H)`,
/// `b (H)`, `U_out (C x H)`, `c (C)`, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    input_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    params: Vec<f64>,
}

struct Forward {
    h1: Vec<f64>,
    h2: Vec<f64>,
    probs: Vec<f64>,
}

impl ClassifierModel {
    /// Weights uniform on `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self, InterpretError> {
        if input_dim == 0 || hidden_dim == 0 || num_classes == 0 {
            return Err(invalid("classifier dimensions must be positive"));
        }
        let mut m = Self {
            input_dim,
            hidden_dim,
            num_classes,
            params: vec![0.0; Self::param_count(input_dim, hidden_dim, num_classes)],
        };
        let (d, h) = (input_dim as f64, hidden_dim as f64);
        let fill = |slice: &mut [f64], bound: f64, rng: &mut R| {
            for v in slice {
                *v = rng.random_range(-bound..=bound);
            }
        };
        let r = m.ranges();
        fill(&mut m.params[r[0].clone()], 1.0 / d.sqrt(), rng);
        fill(&mut m.params[r[1].clone()], 1.0 / h.sqrt(), rng);
        fill(&mut m.params[r[3].clone()], 1.0 / h.sqrt(), rng);
        Ok(m)
    }

    fn param_count(d: usize, h: usize, c: usize) -> usize {
        h * d + h * h + h + c * h + c
    }

    fn ranges(&self) -> [std::ops::Range<usize>; 5] {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        let a = h * d;
        let b = a + h * h;
        let e = b + h;
        let f = e + c * h;
        [0..a, a..b, b..e, e..f, f..f + c]
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn u_in(&self) -> &[f64] {
        &self.params[self.ranges()[0].clone()]
    }

    pub fn u_rec(&self) -> &[f64] {
        &self.params[self.ranges()[1].clone()]
    }

    pub fn b(&self) -> &[f64] {
        &self.params[self.ranges()[2].clone()]
    }

    pub fn u_out(&self) -> &[f64] {
        &self.params[self.ranges()[3].clone()]
    }

    pub fn c(&self) -> &[f64] {
        &self.params[self.ranges()[4].clone()]
    }

    /// `(U_rec + U_rec') / 2` with the diagonal cleared.
    pub fn symmetric_recurrent(&self) -> SynapticMatrix {
        let h = self.hidden_dim;
        let u = self.u_rec();
        SynapticMatrix::from_upper(h, |i, j| 0.5 * (u[i * h + j] + u[j * h + i]))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), InterpretError> {
        if x.len() != self.input_dim {
            return Err(InterpretError::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        let (u_in, u_rec, b, u_out, cb) = (self.u_in(), self.u_rec(), self.b(), self.u_out(), self.c());
        let drive: Vec<f64> = (0..h)
            .map(|i| b[i] + (0..d).map(|k| u_in[i * d + k] * x[k]).sum::<f64>())
            .collect();
        let h1: Vec<f64> = drive.iter().map(|a| a.tanh()).collect();
        let h2: Vec<f64> = (0..h)
            .map(|i| (drive[i] + (0..h).map(|k| u_rec[i * h + k] * h1[k]).sum::<f64>()).tanh())
            .collect();
        let logits: Vec<f64> = (0..c)
            .map(|j| cb[j] + (0..h).map(|k| u_out[j * h + k] * h2[k]).sum::<f64>())
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Forward {
            h1,
            h2,
            probs: exps.into_iter().map(|e| e / total).collect(),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, InterpretError> {
        self.check_input(x)?;
        Ok(self.forward(x).probs)
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize, InterpretError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    /// Mean cross-entropy, balance energy of the symmetrized recurrent
    /// weights, and the gradient of `ce + lambda * energy`.
    fn loss_and_grad(
        &self,
        data: &EmbeddingSet,
        labels: &[usize],
        lambda: f64,
        kernel: Kernel,
        penalty: Penalty,
    ) -> (f64, f64, Vec<f64>) {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        let r = self.ranges();
        let (u_rec, u_out) = (self.u_rec(), self.u_out());
        let mut grad = vec![0.0; self.params.len()];
        let scale = 1.0 / data.len() as f64;
        let mut ce = 0.0;

        for (x, &y) in data.vectors().iter().zip(labels) {
            let f = self.forward(x);
            ce -= f.probs[y].max(f64::MIN_POSITIVE).ln() * scale;
            let dz: Vec<f64> = (0..c)
                .map(|j| (f.probs[j] - if j == y { 1.0 } else { 0.0 }) * scale)
                .collect();
            for j in 0..c {
                grad[r[4].start + j] += dz[j];
                for k in 0..h {
                    grad[r[3].start + j * h + k] += dz[j] * f.h2[k];
                }
            }
            let da2: Vec<f64> = (0..h)
                .map(|k| {
                    let dh2: f64 = (0..c).map(|j| u_out[j * h + k] * dz[j]).sum();
                    dh2 * (1.0 - f.h2[k] * f.h2[k])
                })
                .collect();
            let da1: Vec<f64> = (0..h)
                .map(|k| {
                    let dh1: f64 = (0..h).map(|i| u_rec[i * h + k] * da2[i]).sum();
                    dh1 * (1.0 - f.h1[k] * f.h1[k])
                })
                .collect();
            for i in 0..h {
                let da = da1[i] + da2[i];
                grad[r[2].start + i] += da;
                for k in 0..d {
                    grad[r[0].start + i * d + k] += da * x[k];
                }
                for k in 0..h {
                    grad[r[1].start + i * h + k] += da2[i] * f.h1[k];
                }
            }
        }

        let sym = self.symmetric_recurrent();
        let energy = kernel.energy(&sym, penalty);
        if lambda != 0.0 {
            let g = kernel.gradient(&sym, penalty);
            for i in 0..h {
                for j in 0..h {
                    if i != j {
                        grad[r[1].start + i * h + j] += lambda * 0.5 * g.get(i, j);
                    }
                }
            }
        }
        (ce, energy, grad)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub alpha_lr: f64,
    pub lambda_balance: f64,
    pub kernel: Kernel,
    pub penalty: Penalty,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            epochs: 100,
            alpha_lr: 0.01,
            lambda_balance: 0.01,
            kernel: Kernel::Fast,
            penalty: Penalty::Plus,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), InterpretError> {
        if self.hidden_dim == 0 {
            return Err(invalid("hidden_dim must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be >= 1"));
        }
        if !(self.alpha_lr > 0.0 && self.alpha_lr.is_finite()) {
            return Err(invalid(format!("alpha_lr must be > 0, got {}", self.alpha_lr)));
        }
        if !(self.lambda_balance >= 0.0 && self.lambda_balance.is_finite()) {
            return Err(invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda_balance
            )));
        }
        Ok(())
    }
}

/// Per-epoch metrics, measured after that epoch's update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub model: ClassifierModel,
    /// `cross_entropy + lambda * balance_energy`
    pub loss: Vec<f64>,
    pub cross_entropy: Vec<f64>,
    pub balance_energy: Vec<f64>,
    /// Empty when no test set was given.
    pub test_accuracy: Vec<f64>,
}

impl TrainingRun {
    /// `epoch,loss,balance_energy,test_accuracy` with epochs numbered
    /// from 1.
    pub fn training_csv(&self) -> String {
        let mut out = String::from("epoch,loss,balance_energy,test_accuracy\n");
        for e in 0..self.loss.len() {
            let acc = self.test_accuracy.get(e).map(|a| fmt_f64(*a)).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{acc}\n",
                e + 1,
                fmt_f64(self.loss[e]),
                fmt_f64(self.balance_energy[e]),
            ));
        }
        out
    }
}

fn labels_of(data: &EmbeddingSet) -> Result<&[usize], InterpretError> {
    data.labels().ok_or(InterpretError::Unlabeled)
}

/// Full-batch Adam on `mean cross-entropy + lambda * E(sym(U_rec))`.
pub fn train_classifier<R: Rng + ?Sized>(
    train: &EmbeddingSet,
    test: Option<&EmbeddingSet>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainingRun, InterpretError> {
    cfg.validate()?;
    let labels = labels_of(train)?;
    if train.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let classes = train
        .num_classes()
        .max(test.map_or(0, EmbeddingSet::num_classes));
    let mut model = ClassifierModel::init(train.dim(), cfg.hidden_dim, classes, rng)?;
    if let Some(t) = test {
        labels_of(t)?;
        if !t.is_empty() && t.dim() != train.dim() {
            return Err(InterpretError::DimensionMismatch {
                expected: train.dim(),
                got: t.dim(),
            });
        }
    }

    let count = model.params.len();
    let (mut m, mut v) = (vec![0.0; count], vec![0.0; count]);
    let mut run = TrainingRun {
        model: model.clone(),
        loss: Vec::with_capacity(cfg.epochs),
        cross_entropy: Vec::with_capacity(cfg.epochs),
        balance_energy: Vec::with_capacity(cfg.epochs),
        test_accuracy: Vec::new(),
    };

    for epoch in 1..=cfg.epochs {
        let (_, _, grad) = model.loss_and_grad(train, labels, cfg.lambda_balance, cfg.kernel, cfg.penalty);
        let bc1 = 1.0 - ADAM_BETA1.powi(epoch as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(epoch as i32);
        for (i, g) in grad.iter().enumerate() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
            model.params[i] -= cfg.alpha_lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + ADAM_EPS);
        }

        let (ce, energy, _) = model.loss_and_grad(train, labels, 0.0, cfg.kernel, cfg.penalty);
        let loss = ce + cfg.lambda_balance * energy;
        if !loss.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(InterpretError::Diverged { epoch, loss });
        }
        run.loss.push(loss);
        run.cross_entropy.push(ce);
        run.balance_energy.push(energy);
        if let Some(t) = test {
            run.test_accuracy.push(evaluate_classifier(&model, t)?);
        }
    }
    run.model = model;
    Ok(run)
}

/// Fraction of items whose predicted class equals the label.
pub fn evaluate_classifier(model: &ClassifierModel, data: &EmbeddingSet) -> Result<f64, InterpretError> {
    let labels = labels_of(data)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (x, &y) in data.vectors().iter().zip(labels) {
        if model.predict(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

impl ClassifierModel {
    /// `block,row,col,value` for every parameter; vectors use column 0.
    pub fn model_csv(&self) -> String {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let blocks: [(&str, &[f64], usize); 5] = [
            ("u_in", self.u_in(), d),
            ("u_rec", self.u_rec(), h),
            ("b", self.b(), 1),
            ("u_out", self.u_out(), h),
            ("c", self.c(), 1),
        ];
        let mut out = String::from("block,row,col,value\n");
        for (name, values, cols) in blocks {
            for (idx, v) in values.iter().enumerate() {
                out.push_str(&format!("{name},{},{},{}\n", idx / cols, idx % cols, fmt_f64(*v)));
            }
        }
        out
    }

    /// Predictions on a `resolution x resolution` grid spanning
    /// `[lo, hi]^2`: `x,y,predicted,p_0,...`.
    pub fn prediction_grid_csv(&self, lo: f64, hi: f64, resolution: usize) -> Result<String, InterpretError> {
        if self.input_dim != 2 {
            return Err(InterpretError::DimensionMismatch {
                expected: 2,
                got: self.input_dim,
            });
        }
        if resolution < 2 || lo >= hi || lo.is_nan() || hi.is_nan() {
            return Err(invalid("grid needs resolution >= 2 and lo < hi"));
        }
        let mut out = String::from("x,y,predicted");
        for j in 0..self.num_classes {
            out.push_str(&format!(",p_{j}"));
        }
        out.push('\n');
        let step = (hi - lo) / (resolution - 1) as f64;
        for a in 0..resolution {
            for b in 0..resolution {
                let (x, y) = (lo + a as f64 * step, lo + b as f64 * step);
                let probs = self.forward(&[x, y]).probs;
                out.push_str(&format!("{},{},{}", fmt_f64(x), fmt_f64(y), argmax(&probs)));
                for p in probs {
                    out.push(',');
                    out.push_str(&fmt_f64(p));
                }
                out.push('\n');
            }
        }
        Ok(out)
    }
}
