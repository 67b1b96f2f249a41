use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Rows processed per covariance update.
const COV_CHUNK: usize = 1024;

/// Linear projection `y = basis (x - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    in_dim: usize,
    out_dim: usize,
    mean: Vec<f64>,
    /// `out_dim x in_dim`, row-major; rows are principal directions.
    basis: Vec<f64>,
}

impl PcaModel {
    pub fn new(in_dim: usize, out_dim: usize, mean: Vec<f64>, basis: Vec<f64>) -> Result<Self> {
        if out_dim == 0 || out_dim > in_dim {
            return Err(Error::Argument(format!(
                "PCA output dim {out_dim} must be in 1..={in_dim}"
            )));
        }
        if mean.len() != in_dim || basis.len() != in_dim * out_dim {
            return Err(Error::Argument("PCA mean/basis sizes do not match dims".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            mean,
            basis,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    pub fn basis_row(&self, i: usize) -> &[f64] {
        &self.basis[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.out_dim];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.in_dim || out.len() != self.out_dim {
            return Err(Error::Argument(format!(
                "PCA expects {} -> {}, got {} -> {}",
                self.in_dim,
                self.out_dim,
                x.len(),
                out.len()
            )));
        }
        for (o, row) in out.iter_mut().zip(self.basis.chunks_exact(self.in_dim)) {
            *o = row
                .iter()
                .zip(x.iter().zip(&self.mean))
                .map(|(b, (v, m))| b * (v - m))
                .sum();
        }
        Ok(())
    }

    /// `mean + basis^T y`.
    pub fn reconstruct(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.out_dim {
            return Err(Error::Argument("reconstruction input has wrong dim".into()));
        }
        let mut x = self.mean.clone();
        for (row, &c) in self.basis.chunks_exact(self.in_dim).zip(y) {
            for (xi, b) in x.iter_mut().zip(row) {
                *xi += c * b;
            }
        }
        Ok(x)
    }
}

pub fn apply_pca(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    model.apply(x)
}

/// Principal directions of the sample covariance, largest first. Each row
/// is sign-fixed so that its largest-magnitude entry is positive. With
/// `whiten`, rows are divided by the square root of their eigenvalue.
/// Directions beyond the numerical rank are zero rows.
pub fn fit_pca<S: AsRef<[f64]>>(samples: &[S], out_dim: usize, whiten: bool) -> Result<PcaModel> {
    let n = samples.len();
    if out_dim == 0 {
        return Err(Error::Argument("PCA output dim must be >= 1".into()));
    }
    if n <= out_dim {
        return Err(Error::Training(format!(
            "PCA to {out_dim} dims needs more than {out_dim} samples, got {n}"
        )));
    }
    let d = samples[0].as_ref().len();
    if out_dim > d {
        return Err(Error::Argument(format!(
            "PCA output dim {out_dim} exceeds input dim {d}"
        )));
    }
    if samples.iter().any(|s| s.as_ref().len() != d) {
        return Err(Error::Data("PCA samples have mixed dims".into()));
    }
    if samples.iter().any(|s| s.as_ref().iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("non-finite value in PCA samples".into()));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for chunk in samples.chunks(COV_CHUNK) {
        let block = DMatrix::from_fn(chunk.len(), d, |i, j| chunk[i].as_ref()[j] - mean[j]);
        cov += block.tr_mul(&block);
    }
    cov /= (n - 1) as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-10;

    let mut basis = vec![0.0; out_dim * d];
    let mut rank = 0;
    for (row, &k) in order.iter().take(out_dim).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= tol || top == 0.0 {
            break;
        }
        rank += 1;
        let v = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for j in 1..d {
            if v[j].abs() > v[pivot].abs() {
                pivot = j;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let scale = if whiten { sign / lambda.sqrt() } else { sign };
        for j in 0..d {
            basis[row * d + j] = v[j] * scale;
        }
    }
    if rank < out_dim {
        log::warn!("PCA data has rank {rank} < {out_dim}; padding with zero directions");
    }
    PcaModel::new(d, out_dim, mean, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthonormal(m: &PcaModel) {
        for i in 0..m.out_dim() {
            for j in 0..m.out_dim() {
                let dot: f64 = m.basis_row(i).iter().zip(m.basis_row(j)).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-6, "rows {i},{j}: {dot}");
            }
        }
    }

    #[test]
    fn diagonal_covariance_first_axis() {
        // x ~ (2a, b) with a, b in {-1, 1} balanced: covariance diag(4, 1) * n/(n-1)
        let mut samples = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                for _ in 0..10 {
                    samples.push(vec![2.0 * a, b]);
                }
            }
        }
        let m = fit_pca(&samples, 2, false).unwrap();
        assert!((m.basis_row(0)[0] - 1.0).abs() < 1e-12);
        assert!(m.basis_row(0)[1].abs() < 1e-12);
        assert!((m.basis_row(1)[1] - 1.0).abs() < 1e-12);
        orthonormal(&m);
    }

    #[test]
    fn exact_subspace_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = [1.0, 2.0, 0.0, -1.0, 0.5];
        let v = [0.0, 1.0, 1.0, 1.0, -2.0];
        let samples: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
                (0..5).map(|i| 7.0 + a * u[i] + b * v[i]).collect()
            })
            .collect();
        let m = fit_pca(&samples, 2, false).unwrap();
        orthonormal(&m);
        for s in &samples {
            let r = m.reconstruct(&m.apply(s).unwrap()).unwrap();
            for (a, b) in r.iter().zip(s) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficient_pads_zero_rows() {
        let samples: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let m = fit_pca(&samples, 3, false).unwrap();
        assert!(m.basis_row(1).iter().all(|&v| v == 0.0));
        assert!(m.basis_row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn apply_basics() {
        let m = PcaModel::new(3, 2, vec![0.0; 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.apply(&[4.0, 5.0, 6.0]).unwrap(), vec![4.0, 5.0]);
        let shifted = PcaModel::new(3, 2, vec![1.0, 2.0, 3.0], m.basis().to_vec()).unwrap();
        assert_eq!(shifted.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(m.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn apply_matches_direct_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let m = fit_pca(&samples, 3, false).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = m.apply(&x).unwrap();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += m.basis()[i * 6 + j] * (x[j] - m.mean()[j]);
            }
            assert!((acc - y[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn whitening_gives_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![3.0 * rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let m = fit_pca(&samples, 2, true).unwrap();
        let ys: Vec<Vec<f64>> = samples.iter().map(|s| m.apply(s).unwrap()).collect();
        for k in 0..2 {
            let var = ys.iter().map(|y| y[k] * y[k]).sum::<f64>() / 499.0;
            assert!((var - 1.0).abs() < 1e-9, "{var}");
        }
    }

    #[test]
    fn too_few_samples() {
        let samples = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert!(matches!(fit_pca(&samples, 2, false), Err(Error::Training(_))));
    }
}
