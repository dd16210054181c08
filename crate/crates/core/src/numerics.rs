//! Fixed-step integration and small dense eigen-routines.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{positive, Error, Result};

/// Continuous-time system `dx/dt = f(t, x)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    /// Writes `f(t, x)` into `dx`. Both slices have length [`OdeSystem::dim`].
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]);
}

/// Adapter so closures can be integrated directly.
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.f)(t, x, dx)
    }
}

/// Classical RK4 with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub t_end: f64,
    /// Any state component with magnitude above this aborts the run.
    pub divergence_limit: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            t_end: 50.0,
            divergence_limit: 1e6,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            step,
            t_end,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("step", self.step)?;
        positive("t_end", self.t_end)?;
        positive("divergence_limit", self.divergence_limit)?;
        if self.t_end / self.step > (u32::MAX as f64) {
            return Err(Error::Invalid(format!(
                "t_end / step = {} steps is too many",
                self.t_end / self.step
            )));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened when `t_end` is not a
    /// multiple of `step`.
    pub fn n_steps(&self) -> usize {
        let n = self.t_end / self.step;
        let rounded = n.round();
        if (n - rounded).abs() <= 1e-9 * n.max(1.0) {
            rounded as usize
        } else {
            n.ceil() as usize
        }
    }

    fn time_at(&self, k: usize, n: usize) -> f64 {
        if k == n {
            self.t_end
        } else {
            k as f64 * self.step
        }
    }
}

/// Integrates `sys` from `t = 0` to `cfg.t_end` and returns the final state.
///
/// `observer` sees `(step_index, t, state)` for the initial state (index 0)
/// and after every step. Time points are computed as `k * step`, never
/// accumulated, so runs are bitwise reproducible.
pub fn integrate<S, O>(
    sys: &S,
    x0: &[f64],
    cfg: &IntegratorConfig,
    mut observer: O,
) -> Result<Vec<f64>>
where
    S: OdeSystem + ?Sized,
    O: FnMut(usize, f64, &[f64]),
{
    cfg.validate()?;
    let dim = sys.dim();
    crate::error::check_len("initial state", dim, x0.len())?;

    let mut x = x0.to_vec();
    check_finite(&x, 0.0, cfg.divergence_limit)?;
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let n = cfg.n_steps();
    observer(0, 0.0, &x);
    for k in 0..n {
        let t = cfg.time_at(k, n);
        let t_next = cfg.time_at(k + 1, n);
        let h = t_next - t;

        sys.rhs(t, &x, &mut k1);
        for j in 0..dim {
            tmp[j] = x[j] + 0.5 * h * k1[j];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..dim {
            tmp[j] = x[j] + 0.5 * h * k2[j];
        }
        sys.rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..dim {
            tmp[j] = x[j] + h * k3[j];
        }
        sys.rhs(t_next, &tmp, &mut k4);
        for j in 0..dim {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }

        check_finite(&x, t_next, cfg.divergence_limit)?;
        observer(k + 1, t_next, &x);
    }
    Ok(x)
}

fn check_finite(x: &[f64], time: f64, limit: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= limit) {
        return Ok(());
    }
    let components = x
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite() || v.abs() > limit)
        .map(|(j, _)| j)
        .collect();
    Err(Error::Diverged { time, components })
}

/// All eigenvalues of a small dense square matrix (real Schur form).
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::Dimension {
            what: "square matrix",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &DMatrix<f64>) -> Result<bool> {
    Ok(spectral_abscissa(a)? < -1e-10)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_symmetric(m: &DMatrix<f64>) -> Result<f64> {
    let dev = asymmetry(m)?;
    if dev > 1e-10 {
        return Err(Error::Asymmetric(dev));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    Ok(eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

fn asymmetry(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension {
            what: "square matrix",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok((m - m.transpose()).amax())
}
