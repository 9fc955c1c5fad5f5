//! Forward-mode Jacobians in chunks of [`CHUNK`] seed directions.

use crate::dual::Dual;
use crate::error::CoreError;
use crate::scalar::{nonsmooth_flag, reset_nonsmooth_flag, Scalar};

pub const CHUNK: usize = 8;

/// A vector function that can be evaluated over any scalar type.
pub trait DiffFn: Sync {
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

/// Value and Jacobian (row-major, `rows = outputs`, `cols = seeds`).
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    pub value: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    /// A branch was decided at a boundary while carrying partials.
    pub nonsmooth: bool,
}

/// Directional derivatives along each seed, without failing at kinks.
pub fn jacobian_seeded_unchecked<F: DiffFn>(f: &F, at: &[f64], seeds: &[Vec<f64>]) -> Jacobian {
    let value = f.eval(at);
    let m = value.len();
    let mut matrix = vec![vec![0.0; seeds.len()]; m];
    reset_nonsmooth_flag();
    for (c0, chunk) in seeds.chunks(CHUNK).enumerate() {
        let x: Vec<Dual<CHUNK>> = at
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut d = Dual::constant(v);
                for (c, s) in chunk.iter().enumerate() {
                    d.eps[c] = s[i];
                }
                d
            })
            .collect();
        let y = f.eval(&x);
        for (r, yr) in y.iter().enumerate() {
            for c in 0..chunk.len() {
                matrix[r][c0 * CHUNK + c] = yr.eps[c];
            }
        }
    }
    let nonsmooth = nonsmooth_flag();
    reset_nonsmooth_flag();
    Jacobian { value, matrix, nonsmooth }
}

fn unit_seeds(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Full Jacobian with respect to every input; kinks are reported in the result.
pub fn jacobian_unchecked<F: DiffFn>(f: &F, at: &[f64]) -> Jacobian {
    jacobian_seeded_unchecked(f, at, &unit_seeds(at.len()))
}

/// Directional derivatives along each seed. Fails with `NonSmoothPoint` when the
/// function branched on a quantity with live partials exactly at its boundary.
pub fn jacobian_seeded<F: DiffFn>(f: &F, at: &[f64], seeds: &[Vec<f64>]) -> Result<Jacobian, CoreError> {
    let j = jacobian_seeded_unchecked(f, at, seeds);
    if j.nonsmooth {
        Err(CoreError::NonSmoothPoint)
    } else {
        Ok(j)
    }
}

pub fn jacobian<F: DiffFn>(f: &F, at: &[f64]) -> Result<Jacobian, CoreError> {
    jacobian_seeded(f, at, &unit_seeds(at.len()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianReport {
    pub analytic: Vec<Vec<f64>>,
    pub finite_diff: Vec<Vec<f64>>,
    /// Max of `|analytic − fd| / max(1, |analytic|)`.
    pub max_rel_err: f64,
    pub nonsmooth: bool,
}

/// Central-difference check of the forward-mode Jacobian.
pub fn check_gradient<F: DiffFn>(f: &F, at: &[f64], h: f64) -> JacobianReport {
    assert!(h > 0.0, "step must be positive");
    let j = jacobian_unchecked(f, at);
    let m = j.value.len();
    let mut fd = vec![vec![0.0; at.len()]; m];
    let mut x = at.to_vec();
    for c in 0..at.len() {
        x[c] = at[c] + h;
        let yp = f.eval(&x);
        x[c] = at[c] - h;
        let ym = f.eval(&x);
        x[c] = at[c];
        for r in 0..m {
            fd[r][c] = (yp[r] - ym[r]) / (2.0 * h);
        }
    }
    let mut max_rel_err = 0.0f64;
    for r in 0..m {
        for c in 0..at.len() {
            let a = j.matrix[r][c];
            let e = (a - fd[r][c]).abs() / a.abs().max(1.0);
            max_rel_err = max_rel_err.max(if e.is_nan() { f64::INFINITY } else { e });
        }
    }
    JacobianReport { analytic: j.matrix, finite_diff: fd, max_rel_err, nonsmooth: j.nonsmooth }
}
