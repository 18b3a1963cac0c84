//! Objective functions with evaluation accounting, and the analytic test
//! problems used throughout the solvers' test suites.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{config, Result};

pub type Evaluator = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A scalar function of a `d`-vector that counts every charged evaluation.
///
/// The counter is atomic so probe points may be evaluated from several
/// threads. Known constants (`f*`, Lipschitz constant of the gradient, PL
/// constant) are carried along so solvers can form theoretical step sizes.
pub struct Objective {
    name: String,
    dim: usize,
    evaluator: Evaluator,
    gradient: Option<GradientFn>,
    eval_count: AtomicU64,
    minimum_value: Option<f64>,
    lipschitz_constant: Option<f64>,
    pl_constant: Option<f64>,
}

impl Objective {
    pub fn new<F>(name: impl Into<String>, dim: usize, evaluator: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return config("objective dimension must be positive");
        }
        Ok(Self {
            name: name.into(),
            dim,
            evaluator: Arc::new(evaluator),
            gradient: None,
            eval_count: AtomicU64::new(0),
            minimum_value: None,
            lipschitz_constant: None,
            pl_constant: None,
        })
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_minimum_value(mut self, value: f64) -> Self {
        self.minimum_value = Some(value);
        self
    }

    pub fn with_lipschitz_constant(mut self, value: f64) -> Self {
        self.lipschitz_constant = Some(value);
        self
    }

    pub fn with_pl_constant(mut self, value: f64) -> Self {
        self.pl_constant = Some(value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn minimum_value(&self) -> Option<f64> {
        self.minimum_value
    }

    pub fn lipschitz_constant(&self) -> Option<f64> {
        self.lipschitz_constant
    }

    pub fn pl_constant(&self) -> Option<f64> {
        self.pl_constant
    }

    pub fn has_reference_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Evaluates the objective and charges one evaluation.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.eval_count.fetch_add(1, Ordering::Relaxed);
        Ok((self.evaluator)(x))
    }

    /// Evaluates without charging. Used only to record trace values that no
    /// solver step paid for (e.g. the value at the starting point).
    pub fn evaluate_unmetered(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok((self.evaluator)(x))
    }

    /// Analytic gradient, when the problem provides one. Never charged.
    pub fn reference_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        if x.len() != self.dim {
            return None;
        }
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    /// A copy sharing the evaluator but with its own zeroed counter.
    pub fn fresh(&self) -> Self {
        Self {
            name: self.name.clone(),
            dim: self.dim,
            evaluator: Arc::clone(&self.evaluator),
            gradient: self.gradient.clone(),
            eval_count: AtomicU64::new(0),
            minimum_value: self.minimum_value,
            lipschitz_constant: self.lipschitz_constant,
            pl_constant: self.pl_constant,
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return config(format!(
                "point has dimension {} but objective '{}' expects {}",
                x.len(),
                self.name,
                self.dim
            ));
        }
        Ok(())
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("eval_count", &self.eval_count())
            .field("minimum_value", &self.minimum_value)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .field("pl_constant", &self.pl_constant)
            .finish()
    }
}

/// Nesterov's worst-case function
/// `f(x) = λ((x₁² + Σ_{i<r}(x_i − x_{i+1})² + x_r²)/2 − x₁)/4`.
///
/// Only the first `r` coordinates enter; the remaining `d − r` are inert,
/// which gives the family its low intrinsic dimension.
pub fn nesterov_worst(lambda: f64, r: usize, d: usize) -> Result<Objective> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return config(format!("nesterov: lambda must be positive, got {lambda}"));
    }
    if r == 0 || r >= d {
        return config(format!("nesterov: require 1 <= r < d, got r={r}, d={d}"));
    }
    let evaluator = move |x: &DVector<f64>| {
        let mut quad = x[0] * x[0] + x[r - 1] * x[r - 1];
        for i in 0..r - 1 {
            let diff = x[i] - x[i + 1];
            quad += diff * diff;
        }
        lambda * (quad / 2.0 - x[0]) / 4.0
    };
    let gradient = move |x: &DVector<f64>| {
        let mut g = DVector::zeros(x.len());
        for i in 0..r {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < r { x[i + 1] } else { 0.0 };
            g[i] = 2.0 * x[i] - left - right;
        }
        g[0] -= 1.0;
        g * (lambda / 4.0)
    };
    let rf = r as f64;
    Ok(Objective::new(format!("nesterov(l={lambda},r={r},d={d})"), d, evaluator)?
        .with_gradient(gradient)
        .with_minimum_value(-lambda * rf / (8.0 * (rf + 1.0)))
        .with_lipschitz_constant(lambda))
}

/// `f(x) = ½‖x‖²`, with `λ = γ = 1` and `f* = 0`.
pub fn isotropic_quadratic(d: usize) -> Result<Objective> {
    if d == 0 {
        return config("quadratic: dimension must be positive");
    }
    Ok(
        Objective::new(format!("quadratic(d={d})"), d, |x: &DVector<f64>| 0.5 * x.norm_squared())?
            .with_gradient(|x: &DVector<f64>| x.clone())
            .with_minimum_value(0.0)
            .with_lipschitz_constant(1.0)
            .with_pl_constant(1.0),
    )
}

/// `f(x) = ½‖Ax − b‖²` for a possibly rank-deficient `A`.
///
/// `f*` comes from the pseudoinverse solution. The PL constant is the
/// smallest nonzero eigenvalue of `AᵀA` and the gradient Lipschitz constant
/// the largest.
pub fn rank_deficient_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<Objective> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return config("least squares: matrix must be non-empty");
    }
    if b.len() != a.nrows() {
        return config(format!(
            "least squares: b has length {} but A has {} rows",
            b.len(),
            a.nrows()
        ));
    }
    if a.iter().all(|&v| v == 0.0) {
        return config("least squares: matrix must be nonzero");
    }
    let (m, d) = a.shape();

    let gram = a.transpose() * &a;
    let eig = SymmetricEigen::new(gram);
    let largest = eig.eigenvalues.max();
    let cutoff = largest * 1e-10;
    let smallest_nonzero = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v > cutoff)
        .fold(f64::INFINITY, f64::min);

    let pinv = a
        .clone()
        .pseudo_inverse(a.norm() * 1e-12)
        .map_err(|e| crate::Error::Config(format!("least squares: {e}")))?;
    let x_star = pinv * &b;
    let residual = &a * x_star - &b;
    let f_star = 0.5 * residual.norm_squared();

    let a = Arc::new(a);
    let b = Arc::new(b);
    let (a_eval, b_eval) = (Arc::clone(&a), Arc::clone(&b));
    let evaluator = move |x: &DVector<f64>| 0.5 * (&*a_eval * x - &*b_eval).norm_squared();
    let gradient = move |x: &DVector<f64>| a.tr_mul(&(&*a * x - &*b));

    Ok(Objective::new(format!("lsq(m={m},d={d})"), d, evaluator)?
        .with_gradient(gradient)
        .with_minimum_value(f_star)
        .with_lipschitz_constant(largest)
        .with_pl_constant(smallest_nonzero))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn nesterov_zero_and_minimum() {
        let f = nesterov_worst(8.0, 1, 2).unwrap();
        assert_eq!(f.evaluate(&v(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(f.eval_count(), 1);
        assert_eq!(f.minimum_value(), Some(-0.5));
        assert_eq!(f.lipschitz_constant(), Some(8.0));
    }

    #[test]
    fn nesterov_at_first_basis_vector_vanishes() {
        for (lambda, r) in [(1.0, 2), (8.0, 5), (80.0, 10)] {
            let f = nesterov_worst(lambda, r, r + 3).unwrap();
            let mut e1 = DVector::zeros(r + 3);
            e1[0] = 1.0;
            assert!(f.evaluate(&e1).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn nesterov_rejects_bad_parameters() {
        assert!(nesterov_worst(1.0, 3, 3).is_err());
        assert!(nesterov_worst(1.0, 4, 3).is_err());
        assert!(nesterov_worst(0.0, 1, 3).is_err());
        assert!(nesterov_worst(-2.0, 1, 3).is_err());
        assert!(nesterov_worst(1.0, 0, 3).is_err());
    }

    #[test]
    fn nesterov_minimum_attained_by_closed_form_point() {
        // Minimiser on the active block is x_i = 1 - i/(r+1).
        let (lambda, r, d) = (80.0, 10, 15);
        let f = nesterov_worst(lambda, r, d).unwrap();
        let x = DVector::from_fn(d, |i, _| {
            if i < r {
                1.0 - (i + 1) as f64 / (r + 1) as f64
            } else {
                0.0
            }
        });
        let fx = f.evaluate(&x).unwrap();
        assert!((fx - f.minimum_value().unwrap()).abs() < 1e-12);
        assert!(f.reference_gradient(&x).unwrap().norm() < 1e-12);
    }

    #[test]
    fn quadratic_values() {
        let f = isotropic_quadratic(2).unwrap();
        assert_eq!(f.evaluate(&v(&[0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(f.evaluate(&v(&[3.0, 4.0])).unwrap(), 12.5);
        assert_eq!(f.evaluate(&v(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(f.reference_gradient(&v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
        assert_eq!(f.eval_count(), 3);
        assert!(isotropic_quadratic(0).is_err());
    }

    #[test]
    fn least_squares_rank_deficient_example() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let f = rank_deficient_least_squares(a, v(&[1.0, 0.0])).unwrap();
        assert_eq!(f.evaluate(&v(&[1.0, 5.0])).unwrap(), 0.0);
        assert!(f.minimum_value().unwrap().abs() < 1e-15);
        assert_eq!(f.pl_constant(), Some(1.0));
        assert_eq!(f.lipschitz_constant(), Some(1.0));
    }

    #[test]
    fn least_squares_zero_and_gradient() {
        let f = rank_deficient_least_squares(DMatrix::identity(2, 2), v(&[0.0, 0.0])).unwrap();
        assert_eq!(f.evaluate(&v(&[0.0, 0.0])).unwrap(), 0.0);

        let f = rank_deficient_least_squares(DMatrix::identity(2, 2), v(&[1.0, 1.0])).unwrap();
        assert_eq!(f.reference_gradient(&v(&[0.0, 0.0])).unwrap(), v(&[-1.0, -1.0]));
    }

    #[test]
    fn least_squares_inconsistent_system_minimum() {
        // Rows (1,0) and (1,0) with b = (0,2): best x₁ = 1, residual (−1, 1).
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let f = rank_deficient_least_squares(a, v(&[0.0, 2.0])).unwrap();
        assert!((f.minimum_value().unwrap() - 1.0).abs() < 1e-12);
        assert!((f.pl_constant().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn least_squares_rejects_empty_or_zero() {
        assert!(rank_deficient_least_squares(DMatrix::zeros(0, 0), DVector::zeros(0)).is_err());
        assert!(rank_deficient_least_squares(DMatrix::zeros(2, 2), DVector::zeros(2)).is_err());
        assert!(rank_deficient_least_squares(DMatrix::identity(2, 2), DVector::zeros(3)).is_err());
    }

    #[test]
    fn evaluate_checks_dimension_and_counts() {
        let f = isotropic_quadratic(3).unwrap();
        assert!(f.evaluate(&v(&[1.0])).is_err());
        assert_eq!(f.eval_count(), 0);
        f.evaluate(&v(&[1.0, 2.0, 3.0])).unwrap();
        f.evaluate(&v(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(f.eval_count(), 2);
        f.evaluate_unmetered(&v(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(f.eval_count(), 2);
        assert_eq!(f.fresh().eval_count(), 0);
    }
}
