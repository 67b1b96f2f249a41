//! Diagonal-covariance Gaussian mixtures trained by EM.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Samples per E-step work unit. Partial statistics are reduced in chunk
/// order, so results do not depend on the thread count.
const EM_CHUNK: usize = 2048;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    k: usize,
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GmmModel {
    pub fn new(k: usize, dim: usize, weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::Argument("GMM needs K >= 1 and dim >= 1".into()));
        }
        if weights.len() != k || means.len() != k * dim || variances.len() != k * dim {
            return Err(Error::Argument("GMM parameter sizes do not match K x dim".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Argument(
                "GMM weights and variances must be positive".into(),
            ));
        }
        Ok(Self {
            k,
            dim,
            weights,
            means,
            variances,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dim..(k + 1) * self.dim]
    }

    /// Per-component `log w_k - 0.5 sum_d log(2 pi var_kd)`.
    pub(crate) fn log_norms(&self) -> Vec<f64> {
        (0..self.k)
            .map(|k| {
                self.weights[k].ln()
                    - 0.5
                        * self
                            .variance(k)
                            .iter()
                            .map(|v| LN_2PI + v.ln())
                            .sum::<f64>()
            })
            .collect()
    }

    /// Fills `resp` with posteriors for `x` and returns `log p(x)`.
    pub(crate) fn posterior_with(&self, log_norms: &[f64], x: &[f64], resp: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for k in 0..self.k {
            let m = self.mean(k);
            let v = self.variance(k);
            let mut q = 0.0;
            for d in 0..self.dim {
                let diff = x[d] - m[d];
                q += diff * diff / v[d];
            }
            let l = log_norms[k] - 0.5 * q;
            resp[k] = l;
            max = max.max(l);
        }
        let mut sum = 0.0;
        for r in resp.iter_mut() {
            *r = (*r - max).exp();
            sum += *r;
        }
        for r in resp.iter_mut() {
            *r /= sum;
        }
        max + sum.ln()
    }

    /// Posterior probabilities of each component for `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut resp = vec![0.0; self.k];
        self.posterior_with(&self.log_norms(), x, &mut resp);
        Ok(resp)
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut resp = vec![0.0; self.k];
        Ok(self.posterior_with(&self.log_norms(), x, &mut resp))
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "GMM dim is {}, got a {}-dim vector",
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    /// Draws `n` samples from the mixture.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = self.k - 1;
                for (i, w) in self.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                let (m, v) = (self.mean(k), self.variance(k));
                (0..self.dim)
                    .map(|d| m[d] + v[d].sqrt() * standard_normal(&mut rng))
                    .collect()
            })
            .collect()
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop when the relative log-likelihood gain drops below this.
    pub tol: f64,
    pub kmeans_iter: usize,
    /// Variance floor as a fraction of the per-dimension data variance.
    pub var_floor: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-5,
            kmeans_iter: 10,
            var_floor: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean per-sample log-likelihood of each successive model.
    pub log_likelihoods: Vec<f64>,
}

struct Stats {
    n: Vec<f64>,
    sx: Vec<f64>,
    sxx: Vec<f64>,
    ll: f64,
}

impl Stats {
    fn zeros(k: usize, d: usize) -> Self {
        Self {
            n: vec![0.0; k],
            sx: vec![0.0; k * d],
            sxx: vec![0.0; k * d],
            ll: 0.0,
        }
    }

    fn add(&mut self, o: &Stats) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.n, &o.n);
        add(&mut self.sx, &o.sx);
        add(&mut self.sxx, &o.sxx);
        self.ll += o.ll;
    }
}

fn e_step<S: AsRef<[f64]> + Sync>(model: &GmmModel, samples: &[S]) -> Stats {
    let (k, d) = (model.k, model.dim);
    let norms = model.log_norms();
    let partials: Vec<Stats> = samples
        .par_chunks(EM_CHUNK)
        .map(|chunk| {
            let mut st = Stats::zeros(k, d);
            let mut resp = vec![0.0; k];
            for s in chunk {
                let x = s.as_ref();
                st.ll += model.posterior_with(&norms, x, &mut resp);
                for (c, &g) in resp.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    st.n[c] += g;
                    let sx = &mut st.sx[c * d..(c + 1) * d];
                    let sxx = &mut st.sxx[c * d..(c + 1) * d];
                    for j in 0..d {
                        sx[j] += g * x[j];
                        sxx[j] += g * x[j] * x[j];
                    }
                }
            }
            st
        })
        .collect();
    let mut total = Stats::zeros(k, d);
    for p in &partials {
        total.add(p);
    }
    total
}

fn m_step(model: &mut GmmModel, st: &Stats, n: usize, floor: &[f64]) {
    let d = model.dim;
    for c in 0..model.k {
        let nk = st.n[c];
        // a component that lost all mass keeps its parameters
        if nk <= 1e-10 * n as f64 {
            model.weights[c] = 1e-10;
            continue;
        }
        model.weights[c] = nk / n as f64;
        for j in 0..d {
            let mu = st.sx[c * d + j] / nk;
            let var = st.sxx[c * d + j] / nk - mu * mu;
            model.means[c * d + j] = mu;
            model.variances[c * d + j] = var.max(floor[j]);
        }
    }
    let s: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= s);
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; returns centres and
/// assignments.
pub fn kmeans<S: AsRef<[f64]> + Sync>(samples: &[S], k: usize, iters: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<usize>) {
    let n = samples.len();
    let d = samples[0].as_ref().len();
    let mut centers = Vec::with_capacity(k * d);
    centers.extend_from_slice(samples[rng.random_range(0..n)].as_ref());
    let mut dist: Vec<f64> = samples.iter().map(|s| sq_dist(s.as_ref(), &centers[..d])).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = samples[pick].as_ref();
        centers.extend_from_slice(c);
        dist.par_iter_mut()
            .zip(samples.par_iter())
            .for_each(|(dv, s)| *dv = dv.min(sq_dist(s.as_ref(), c)));
    }

    let nearest = |centers: &[f64]| -> Vec<usize> {
        samples
            .par_iter()
            .map(|s| {
                let x = s.as_ref();
                let mut best = 0;
                let mut bd = f64::INFINITY;
                for c in 0..k {
                    let dd = sq_dist(x, &centers[c * d..(c + 1) * d]);
                    if dd < bd {
                        bd = dd;
                        best = c;
                    }
                }
                best
            })
            .collect()
    };
    let mut assign = nearest(&centers);
    for _ in 0..iters {
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (s, &a) in samples.iter().zip(&assign) {
            counts[a] += 1;
            for (acc, v) in sums[a * d..(a + 1) * d].iter_mut().zip(s.as_ref()) {
                *acc += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
        let next = nearest(&centers);
        if next == assign {
            break;
        }
        assign = next;
    }
    (centers, assign)
}

pub fn fit_gmm<S: AsRef<[f64]> + Sync>(samples: &[S], k: usize, seed: u64) -> Result<GmmFit> {
    fit_gmm_with(samples, k, seed, &GmmOptions::default())
}

pub fn fit_gmm_with<S: AsRef<[f64]> + Sync>(samples: &[S], k: usize, seed: u64, opts: &GmmOptions) -> Result<GmmFit> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::Argument("K must be >= 1".into()));
    }
    if n < k {
        return Err(Error::Training(format!(
            "GMM with K = {k} needs at least {k} samples, got {n}"
        )));
    }
    if n < 10 * k {
        log::warn!("GMM with K = {k} trained on only {n} samples (recommended >= {})", 10 * k);
    }
    let d = samples[0].as_ref().len();
    if d == 0 || samples.iter().any(|s| s.as_ref().len() != d) {
        return Err(Error::Data("GMM samples have mixed or zero dims".into()));
    }
    if samples.iter().any(|s| s.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("non-finite value in GMM samples".into()));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        mean.iter_mut().zip(s.as_ref()).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut data_var = vec![0.0; d];
    for s in samples {
        for (j, v) in s.as_ref().iter().enumerate() {
            data_var[j] += (v - mean[j]) * (v - mean[j]);
        }
    }
    let floor: Vec<f64> = data_var
        .iter()
        .map(|v| (opts.var_floor * v / n as f64).max(1e-12))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (centers, assign) = kmeans(samples, k, opts.kmeans_iter, &mut rng);

    // initial parameters from the hard clustering
    let mut counts = vec![0usize; k];
    let mut var = vec![0.0; k * d];
    for (s, &a) in samples.iter().zip(&assign) {
        counts[a] += 1;
        for (j, v) in s.as_ref().iter().enumerate() {
            let diff = v - centers[a * d + j];
            var[a * d + j] += diff * diff;
        }
    }
    for c in 0..k {
        for j in 0..d {
            var[c * d + j] = if counts[c] > 1 {
                (var[c * d + j] / counts[c] as f64).max(floor[j])
            } else {
                (data_var[j] / n as f64).max(floor[j])
            };
        }
    }
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| (c.max(1)) as f64 / (n + counts.iter().filter(|&&c| c == 0).count()) as f64)
        .collect();
    let wsum: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / wsum).collect();
    let mut model = GmmModel::new(k, d, weights, centers, var)?;

    let mut lls = Vec::new();
    for _ in 0..opts.max_iter {
        let st = e_step(&model, samples);
        let ll = st.ll / n as f64;
        if let Some(&prev) = lls.last() {
            let prev: f64 = prev;
            lls.push(ll);
            if (ll - prev) / prev.abs().max(1e-300) < opts.tol {
                break;
            }
        } else {
            lls.push(ll);
        }
        m_step(&mut model, &st, n, &floor);
    }
    Ok(GmmFit {
        model,
        log_likelihoods: lls,
    })
}
