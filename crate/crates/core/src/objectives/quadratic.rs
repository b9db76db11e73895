use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares client objective `f(x) = 0.5 * ||A x - b||^2`.
///
/// The Gram matrix `AᵀA` and the vector `Aᵀb` are cached at construction; the
/// gradient, the proximal map and the curvature constants all come from them.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
    atb: DVector<f64>,
    lipschitz: f64,
    modulus: f64,
}

impl QuadraticObjective {
    /// Builds the objective from a dense `n x d` matrix and an `n`-vector.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::dims(a.nrows(), b.len()));
        }
        if a.ncols() == 0 || a.nrows() == 0 {
            return Err(Error::Config("matrix must be non-empty".into()));
        }
        let gram = a.transpose() * &a;
        let atb = a.transpose() * &b;
        // The Gram matrix is symmetric PSD, so its eigenvalues give the exact
        // curvature bounds for f.
        let eigs = gram.clone().symmetric_eigenvalues();
        let lipschitz = eigs.max();
        let modulus = eigs.min().max(0.0);
        Ok(Self {
            a,
            b,
            gram,
            atb,
            lipschitz,
            modulus,
        })
    }

    /// Scalar objective `0.5 * (x - c)^2`, handy for hand-traced fixtures.
    pub fn scalar_shifted(c: f64) -> Self {
        Self::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, c))
            .expect("1x1 system is always valid")
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn atb(&self) -> &DVector<f64> {
        &self.atb
    }

    /// Largest eigenvalue of the Gram matrix.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Smallest eigenvalue of the Gram matrix, clamped at zero.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dims(self.dim(), x.len()));
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let r = &self.a * x - &self.b;
        Ok(0.5 * r.norm_squared())
    }

    /// `∇f(x) = AᵀA x - Aᵀb`.
    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(&self.gram * x - &self.atb)
    }

    /// Exact proximal map `argmin_x f(x) + (rho/2)||x - v||^2`, i.e. the
    /// solution of `(AᵀA + rho I) x = Aᵀb + rho v`.
    pub fn prox(&self, rho: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        if rho <= 0.0 {
            return Err(Error::Config(format!("prox requires rho > 0, got {rho}")));
        }
        self.check_dim(v)?;
        let mut m = self.gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += rho;
        }
        let rhs = &self.atb + rho * v;
        let chol = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("prox system not positive definite".into()))?;
        let mut x = chol.solve(&rhs);
        // One step of iterative refinement keeps the relative residual at
        // rounding level even for ill-scaled Gram matrices.
        let residual = &rhs - &m * &x;
        x += chol.solve(&residual);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn identity_value_is_half_norm_squared() {
        // A = I_2, b = 0, x = (3,4) -> 12.5
        let obj = QuadraticObjective::new(DMatrix::identity(2, 2), vec(&[0.0, 0.0])).unwrap();
        assert_eq!(obj.value(&vec(&[3.0, 4.0])).unwrap(), 12.5);
    }

    #[test]
    fn scalar_shifted_value_and_grad() {
        // f(x) = 0.5 (x-1)^2: f(0) = 0.5, f'(0) = -1
        let obj = QuadraticObjective::scalar_shifted(1.0);
        assert_eq!(obj.value(&vec(&[0.0])).unwrap(), 0.5);
        assert_eq!(obj.grad(&vec(&[0.0])).unwrap()[0], -1.0);
    }

    #[test]
    fn identity_grad_is_x() {
        let obj = QuadraticObjective::new(DMatrix::identity(3, 3), vec(&[0.0; 3])).unwrap();
        let x = vec(&[1.0, -2.0, 0.5]);
        assert_eq!(obj.grad(&x).unwrap(), x);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let obj = QuadraticObjective::scalar_shifted(1.0);
        assert!(matches!(
            obj.value(&vec(&[0.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            obj.grad(&vec(&[0.0, 1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn prox_scalar_hand_solve() {
        // f(x) = 0.5 (x-a)^2, rho = 1, v = 0 -> (a + rho v)/(1 + rho) = a/2
        let a = 3.0;
        let obj = QuadraticObjective::scalar_shifted(a);
        let p = obj.prox(1.0, &vec(&[0.0])).unwrap();
        assert!((p[0] - a / 2.0).abs() < 1e-14);
    }

    #[test]
    fn prox_fixed_point_at_own_minimizer() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.25, 2.0, 0.0, 1.0]);
        let b = vec(&[1.0, -1.0, 0.5]);
        let obj = QuadraticObjective::new(a, b).unwrap();
        // unconstrained minimizer solves gram v = atb
        let v = obj
            .gram()
            .clone()
            .cholesky()
            .unwrap()
            .solve(obj.atb());
        let p = obj.prox(2.5, &v).unwrap();
        assert!((&p - &v).norm() < 1e-10);
    }

    #[test]
    fn prox_optimality_residual() {
        // grad f(p) + rho (p - v) = 0 up to 1e-9
        let a = DMatrix::from_row_slice(4, 3, &[
            0.9, -0.3, 0.2, 1.5, 0.4, -0.7, -0.2, 0.8, 1.1, 0.3, 0.3, 0.3,
        ]);
        let b = vec(&[1.0, 0.0, -2.0, 0.5]);
        let obj = QuadraticObjective::new(a, b).unwrap();
        let v = vec(&[0.4, -1.2, 2.0]);
        let rho = 0.7;
        let p = obj.prox(rho, &v).unwrap();
        let res = obj.grad(&p).unwrap() + rho * (&p - &v);
        assert!(res.norm() <= 1e-9, "residual {}", res.norm());
    }

    #[test]
    fn prox_agrees_with_gradient_descent_oracle() {
        // Independent oracle: descend f(x) + (rho/2)||x - v||^2 to tolerance.
        let a = DMatrix::from_row_slice(5, 3, &[
            1.0, 0.2, -0.1, 0.3, 1.2, 0.5, -0.6, 0.1, 0.9, 0.0, -0.4, 1.1, 0.7, 0.7, 0.0,
        ]);
        let b = vec(&[0.5, -0.2, 1.0, 0.3, -1.5]);
        let obj = QuadraticObjective::new(a, b).unwrap();
        let v = vec(&[1.0, -1.0, 0.25]);
        let rho = 1.3;
        let lip = obj.lipschitz() + rho;
        let mut x = v.clone();
        for _ in 0..200_000 {
            let g = obj.grad(&x).unwrap() + rho * (&x - &v);
            if g.norm() <= 1e-12 {
                break;
            }
            x -= g / lip;
        }
        let p = obj.prox(rho, &v).unwrap();
        assert!((&p - &x).norm() <= 1e-8, "gap {}", (&p - &x).norm());
    }

    #[test]
    fn prox_rejects_nonpositive_rho() {
        let obj = QuadraticObjective::scalar_shifted(0.0);
        assert!(obj.prox(0.0, &vec(&[0.0])).is_err());
    }
}
