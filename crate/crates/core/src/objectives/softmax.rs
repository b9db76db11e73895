use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Softmax-regression client objective over `N` samples with `C` classes.
///
/// The parameter vector has dimension `d = p * C` and is read as a row-major
/// `p x C` weight matrix: `W[j, c] = x[j * C + c]`. The loss is the mean
/// cross-entropy over the client's samples plus an optional ridge term
/// `(regularizer / 2) * ||x||^2`.
#[derive(Debug, Clone)]
pub struct SoftmaxObjective {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    batch_size: usize,
    regularizer: f64,
    lipschitz: f64,
}

impl SoftmaxObjective {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::dims(features.nrows(), labels.len()));
        }
        if features.nrows() == 0 || features.ncols() == 0 || num_classes < 2 {
            return Err(Error::Config(
                "softmax objective needs samples, features and >= 2 classes".into(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Config(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let n = features.nrows() as f64;
        let lipschitz = 0.25 * gram_sigma_max(&features) / n;
        Ok(Self {
            batch_size: features.nrows(),
            features,
            labels,
            num_classes,
            regularizer: 0.0,
            lipschitz,
        })
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > self.num_samples() {
            return Err(Error::Config(format!(
                "batch size {batch_size} must be in 1..={}",
                self.num_samples()
            )));
        }
        self.batch_size = batch_size;
        Ok(self)
    }

    pub fn with_regularizer(mut self, regularizer: f64) -> Result<Self> {
        if regularizer < 0.0 {
            return Err(Error::Config("regularizer must be nonnegative".into()));
        }
        self.regularizer = regularizer;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.features.ncols() * self.num_classes
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    /// `(1/4) sigma_max(XᵀX) / N + regularizer`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz + self.regularizer
    }

    pub fn modulus(&self) -> f64 {
        self.regularizer
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dims(self.dim(), x.len()));
        }
        Ok(())
    }

    fn weights(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.features.ncols(), self.num_classes, x.as_slice())
    }

    /// Mean cross-entropy over all samples plus the ridge term.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let w = self.weights(x);
        let scores = &self.features * &w;
        let mut loss = 0.0;
        for (n, &label) in self.labels.iter().enumerate() {
            let row = scores.row(n);
            let m = row.max();
            let lse = m + row.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
            loss += lse - row[label];
        }
        loss /= self.num_samples() as f64;
        Ok(loss + 0.5 * self.regularizer * x.norm_squared())
    }

    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(self.grad_over(x, 0, self.num_samples()))
    }

    /// Gradient of the batch starting at `cursor` (wrapping modulo `N`),
    /// and the cursor for the next batch.
    pub fn minibatch_grad(&self, x: &DVector<f64>, cursor: usize) -> Result<(DVector<f64>, usize)> {
        self.check_dim(x)?;
        let n = self.num_samples();
        if cursor >= n {
            return Err(Error::Config(format!("cursor {cursor} out of range 0..{n}")));
        }
        let g = self.grad_over(x, cursor, self.batch_size);
        Ok((g, (cursor + self.batch_size) % n))
    }

    /// Mean cross-entropy gradient over `count` samples starting at `start`
    /// (wrapping), plus the ridge gradient. The batch is gathered into a
    /// contiguous matrix so both passes run as dense products.
    fn grad_over(&self, x: &DVector<f64>, start: usize, count: usize) -> DVector<f64> {
        let n = self.num_samples();
        let p = self.features.ncols();
        let c = self.num_classes;
        let w = self.weights(x);
        let batch = DMatrix::from_fn(count, p, |r, j| self.features[((start + r) % n, j)]);
        // scores -> softmax probabilities minus the one-hot labels, in place
        let mut scores = &batch * &w;
        for r in 0..count {
            let mut row = scores.row_mut(r);
            let mx = row.max();
            let mut sum = 0.0;
            for s in row.iter_mut() {
                *s = (*s - mx).exp();
                sum += *s;
            }
            row /= sum;
            row[self.labels[(start + r) % n]] -= 1.0;
        }
        let g = batch.transpose() * scores / count as f64;
        let mut out = DVector::<f64>::zeros(self.dim());
        for j in 0..p {
            for k in 0..c {
                out[j * c + k] = g[(j, k)];
            }
        }
        if self.regularizer > 0.0 {
            out.axpy(self.regularizer, x, 1.0);
        }
        out
    }

    /// Fraction of samples whose argmax score matches the label.
    pub fn accuracy(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let w = self.weights(x);
        let scores = &self.features * &w;
        let mut hits = 0usize;
        for (index, &label) in self.labels.iter().enumerate() {
            let row = scores.row(index);
            let mut best = 0usize;
            for k in 1..self.num_classes {
                if row[k] > row[best] {
                    best = k;
                }
            }
            if best == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / self.num_samples() as f64)
    }
}

/// Largest eigenvalue of `XᵀX` by power iteration on the implicit operator
/// `v -> Xᵀ(Xv)`; the Gram matrix itself is never formed.
fn gram_sigma_max(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    let mut v = DVector::from_fn(p, |j, _| 1.0 + j as f64 * 1e-6);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..300 {
        let mut w = x.transpose() * (x * &v);
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        w /= next;
        let done = (next - lambda).abs() <= 1e-10 * next.max(1.0);
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    lambda
}
