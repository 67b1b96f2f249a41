//! One-vs-rest L2-regularised hinge-loss linear SVM trained by dual
//! coordinate descent. The bias is learned as the weight of a constant
//! 1.0 feature appended to every sample.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 32.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmOptions {
    pub c: f64,
    /// Relative duality gap `(P - D) / |P|` at which a binary solve stops.
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            tol: 1e-3,
            max_epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    num_classes: usize,
    dim: usize,
    c: f64,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl SvmModel {
    pub fn new(num_classes: usize, dim: usize, c: f64, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if num_classes == 0 || weights.len() != num_classes * dim || biases.len() != num_classes {
            return Err(Error::Argument("SVM parameter sizes do not match".into()));
        }
        Ok(Self {
            num_classes,
            dim,
            c,
            weights,
            biases,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// `w_c . x + b_c` for every class.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "SVM dim is {}, got {}",
                self.dim,
                x.len()
            )));
        }
        Ok((0..self.num_classes)
            .map(|c| dot(self.weight_row(c), x) + self.biases[c])
            .collect())
    }

    /// Class with the largest decision value; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let scores = self.decision_values(x)?;
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = c;
            }
        }
        Ok(best)
    }
}

pub fn predict(model: &SvmModel, x: &[f64]) -> Result<usize> {
    model.predict(x)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of one binary solve.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual objective `0.5 |w|^2 - sum(alpha)` after each epoch.
    pub dual_objective: Vec<f64>,
    pub epochs: usize,
    pub final_gap: f64,
}

/// Binary hinge-loss SVM with labels `+1 / -1` (`positive[i]`).
pub fn train_binary<S: AsRef<[f64]>>(x: &[S], positive: &[bool], opts: &SvmOptions, seed: u64) -> Result<BinaryFit> {
    let n = x.len();
    if n == 0 || positive.len() != n {
        return Err(Error::Argument("binary SVM needs matching non-empty inputs".into()));
    }
    if !(opts.c > 0.0) {
        return Err(Error::Argument(format!("C must be positive, got {}", opts.c)));
    }
    let dim = x[0].as_ref().len();
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
    // squared norms of the bias-augmented samples
    let qd: Vec<f64> = x.iter().map(|s| dot(s.as_ref(), s.as_ref()) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::new();
    let mut gap = f64::INFINITY;
    let mut epochs = 0;

    while epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let xi = x[i].as_ref();
            let g = y[i] * (dot(&w, xi) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == opts.c {
                g.max(0.0)
            } else {
                g
            };
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, opts.c);
                let step = (alpha[i] - old) * y[i];
                for (wj, v) in w.iter_mut().zip(xi) {
                    *wj += step * v;
                }
                b += step;
            }
        }
        epochs += 1;

        let reg = 0.5 * (dot(&w, &w) + b * b);
        let alpha_sum: f64 = alpha.iter().sum();
        let hinge: f64 = x
            .iter()
            .zip(&y)
            .map(|(s, &yi)| (1.0 - yi * (dot(&w, s.as_ref()) + b)).max(0.0))
            .sum();
        let primal = reg + opts.c * hinge;
        let dual = alpha_sum - reg;
        history.push(reg - alpha_sum);
        gap = (primal - dual) / primal.abs().max(1e-12);
        if gap <= opts.tol {
            break;
        }
    }
    Ok(BinaryFit {
        weights: w,
        bias: b,
        dual_objective: history,
        epochs,
        final_gap: gap,
    })
}

/// One binary problem per class (class vs rest). Labels must be dense in
/// `0..num_classes` with at least two classes present. Every binary solve
/// uses the same visiting order, so relabelling classes permutes the
/// solutions exactly.
pub fn train_ovr<S: AsRef<[f64]> + Sync>(x: &[S], labels: &[usize], opts: &SvmOptions, seed: u64) -> Result<SvmModel> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} samples with {} labels",
            x.len(),
            labels.len()
        )));
    }
    let dim = x[0].as_ref().len();
    if x.iter().any(|s| s.as_ref().len() != dim) {
        return Err(Error::Data("SVM samples have mixed dims".into()));
    }
    if x.iter().any(|s| s.as_ref().iter().any(|v| v.is_nan())) {
        return Err(Error::Data("NaN in SVM training features".into()));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    if num_classes < 2 {
        return Err(Error::Training("need at least two classes".into()));
    }
    if let Some(c) = (0..num_classes).find(|c| !labels.contains(c)) {
        return Err(Error::Training(format!("class {c} has no training samples")));
    }
    let fits = (0..num_classes)
        .into_par_iter()
        .map(|c| {
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            train_binary(x, &pos, opts, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::with_capacity(num_classes * dim);
    let mut biases = Vec::with_capacity(num_classes);
    for f in fits {
        if f.final_gap > opts.tol {
            log::warn!("binary SVM stopped after {} epochs with relative gap {:.2e}", f.epochs, f.final_gap);
        }
        weights.extend(f.weights);
        biases.push(f.bias);
    }
    SvmModel::new(num_classes, dim, opts.c, weights, biases)
}
