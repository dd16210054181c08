//! Controller synthesis and controller dynamics.
//!
//! Per agent of order `n` the tracker is
//!
//! ```text
//! u      = -theta_hat^T p + eps^-n [k1 (x1 - r) + sum_{j>=2} eps^{j-1} kj xj]
//! x_hat  = (x1 - r, eps x2, ..., eps^{n-1} xn)
//! theta_hat' = Lambda p (b2^T P x_hat) [- sigma theta_hat]
//! ```
//!
//! where `A` is the companion matrix of `k` and `A^T P + P A = -2 I`. The
//! optimal signal generator runs alongside:
//!
//! ```text
//! r_i'      = -grad f_i(s_i) - sum_j a_ij (lambda_i - lambda_j)
//! lambda_i' =  sum_j a_ij (r_i - r_j)
//! ```
//!
//! with `s_i = y_i` (measured gradient) or `s_i = r_i` (analytic gradient).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::costs::CostSet;
use crate::error::{check_len, positive, Error, Result};
use crate::graph::Topology;
use crate::numerics::{is_hurwitz, min_eig_symmetric, spectral_abscissa};

/// Feedback gains `k` whose characteristic polynomial
/// `s^n - k_n s^{n-1} - ... - k_1` has the given roots.
pub fn design_gains(order: usize, roots: &[Complex64]) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(Error::Invalid("controller order must be at least 1".into()));
    }
    if roots.len() != order {
        return Err(Error::RootCount {
            expected: order,
            got: roots.len(),
        });
    }
    if let Some(z) = roots
        .iter()
        .find(|z| z.re.is_nan() || z.re >= 0.0 || !z.im.is_finite())
    {
        return Err(Error::UnstableRoot { re: z.re, im: z.im });
    }
    check_conjugate_closed(roots)?;

    // coeffs[j] multiplies s^j; monic
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &root in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (j, &c) in coeffs.iter().enumerate() {
            next[j + 1] += c;
            next[j] -= c * root;
        }
        coeffs = next;
    }
    Ok(coeffs[..order].iter().map(|c| -c.re).collect())
}

fn check_conjugate_closed(roots: &[Complex64]) -> Result<()> {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        let z = roots[i];
        let tol = 1e-9 * (1.0 + z.norm());
        if z.im.abs() <= tol || used[i] {
            continue;
        }
        used[i] = true;
        let partner = (0..roots.len()).find(|&j| !used[j] && (roots[j] - z.conj()).norm() <= tol);
        match partner {
            Some(j) => used[j] = true,
            None => return Err(Error::RootsNotConjugate),
        }
    }
    Ok(())
}

/// `[[0, I], [k1 ... kn]]`.
pub fn companion(k: &[f64]) -> DMatrix<f64> {
    let n = k.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    if n > 0 {
        for (j, &kj) in k.iter().enumerate() {
            a[(n - 1, j)] = kj;
        }
    }
    a
}

/// Solves `A^T P + P A = -2 I` for Hurwitz `A` via the Kronecker form
/// `(I (x) A^T + A^T (x) I) vec(P) = vec(-2 I)`.
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let max_real = spectral_abscissa(a)?;
    if !is_hurwitz(a)? {
        return Err(Error::NotHurwitz { max_real });
    }
    let n = a.nrows();
    let at = a.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, (-2.0 * &eye).iter().copied());
    let vec_p = system.lu().solve(&rhs).ok_or(Error::Singular)?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    let p = 0.5 * (&p + p.transpose());
    if min_eig_symmetric(&p)? <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(p)
}

/// `||A^T P + P A + 2 I||_inf` (max absolute row sum).
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let r = a.transpose() * p + p * a + 2.0 * DMatrix::<f64>::identity(n, n);
    r.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Tracker gains for one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    k: Vec<f64>,
    epsilon: f64,
    a: DMatrix<f64>,
    p: DMatrix<f64>,
}

impl GainSet {
    pub fn new(k: Vec<f64>, epsilon: f64) -> Result<Self> {
        positive("epsilon", epsilon)?;
        if k.is_empty() {
            return Err(Error::Invalid("gain vector must be nonempty".into()));
        }
        let a = companion(&k);
        let p = solve_lyapunov(&a)?;
        Ok(Self { k, epsilon, a, p })
    }

    pub fn from_roots(order: usize, roots: &[Complex64], epsilon: f64) -> Result<Self> {
        Self::new(design_gains(order, roots)?, epsilon)
    }

    /// All closed-loop roots at `-2`.
    pub fn default_for(order: usize, epsilon: f64) -> Result<Self> {
        Self::from_roots(order, &vec![Complex64::new(-2.0, 0.0); order], epsilon)
    }

    pub fn order(&self) -> usize {
        self.k.len()
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn companion(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn lyapunov(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// `b2^T P x_hat` where `b2 = e_n`.
    pub fn weighted_error(&self, x_hat: &[f64]) -> f64 {
        let n = self.order();
        (0..n).map(|j| self.p[(n - 1, j)] * x_hat[j]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Measured gradients `grad f_i(y_i)`; needs a small enough epsilon.
    Online,
    /// Analytic gradients `grad f_i(r_i)`; any epsilon works.
    Offline,
    /// Online with a leakage term on the estimator.
    SigmaMod,
}

impl Variant {
    pub fn uses_measured_gradient(self) -> bool {
        !matches!(self, Variant::Offline)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Online => "online",
            Variant::Offline => "offline",
            Variant::SigmaMod => "sigma_mod",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Variant::Online),
            "offline" => Ok(Variant::Offline),
            "sigma_mod" => Ok(Variant::SigmaMod),
            other => Err(Error::Invalid(format!(
                "unknown variant `{other}` (expected online, offline or sigma_mod)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveLaw {
    variant: Variant,
    gain: DMatrix<f64>,
    sigma: f64,
}

impl AdaptiveLaw {
    pub fn new(variant: Variant, gain: DMatrix<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Negative {
                name: "sigma",
                value: sigma,
            });
        }
        if variant == Variant::SigmaMod {
            positive("sigma", sigma)?;
        }
        if gain.nrows() == 0 || min_eig_symmetric(&gain)? <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            variant,
            gain,
            sigma,
        })
    }

    /// `Lambda = lambda_gain * I`.
    pub fn scaled(variant: Variant, n_params: usize, lambda_gain: f64, sigma: f64) -> Result<Self> {
        positive("lambda_gain", lambda_gain)?;
        Self::new(
            variant,
            DMatrix::identity(n_params, n_params) * lambda_gain,
            sigma,
        )
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_params(&self) -> usize {
        self.gain.nrows()
    }

    pub(crate) fn rhs_into(
        &self,
        gains: &GainSet,
        p: &[f64],
        x_hat: &[f64],
        theta_hat: &[f64],
        out: &mut [f64],
    ) {
        let s = gains.weighted_error(x_hat);
        let m = self.n_params();
        for i in 0..m {
            let v: f64 = p
                .iter()
                .enumerate()
                .map(|(j, pj)| self.gain[(i, j)] * pj)
                .sum();
            out[i] = v * s;
            if self.variant == Variant::SigmaMod {
                out[i] -= self.sigma * theta_hat[i];
            }
        }
    }
}

/// The compensator state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub r: f64,
    pub lambda: f64,
    pub theta_hat: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum GradientSource<'a> {
    /// Evaluate gradients at the generator states `r`.
    Analytic,
    /// Evaluate gradients at measured outputs `y`.
    Measured(&'a [f64]),
}

/// Generator derivatives `(r', lambda')`.
pub fn generator_rhs(
    costs: &CostSet,
    topology: &Topology,
    r: &[f64],
    lambda: &[f64],
    source: GradientSource<'_>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = topology.n_agents();
    check_len("cost set", n, costs.len())?;
    check_len("r", n, r.len())?;
    check_len("lambda", n, lambda.len())?;
    let at = match source {
        GradientSource::Analytic => r,
        GradientSource::Measured(y) => {
            check_len("measured outputs", n, y.len())?;
            y
        }
    };
    let mut dr = vec![0.0; n];
    let mut dl = vec![0.0; n];
    generator_rhs_into(costs, topology, at, r, lambda, &mut dr, &mut dl);
    Ok((dr, dl))
}

pub(crate) fn generator_rhs_into(
    costs: &CostSet,
    topology: &Topology,
    grad_at: &[f64],
    r: &[f64],
    lambda: &[f64],
    dr: &mut [f64],
    dl: &mut [f64],
) {
    let n = topology.n_agents();
    for i in 0..n {
        let mut coupling_l = 0.0;
        let mut coupling_r = 0.0;
        for j in 0..n {
            let a = topology.weight(i, j);
            if a != 0.0 {
                coupling_l += a * (lambda[i] - lambda[j]);
                coupling_r += a * (r[i] - r[j]);
            }
        }
        dr[i] = -costs.get(i).gradient(grad_at[i]) - coupling_l;
        dl[i] = coupling_r;
    }
}

/// `(x1 - r, eps x2, ..., eps^{n-1} xn)`.
pub fn error_transform(x: &[f64], r: f64, epsilon: f64) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    error_transform_into(x, r, epsilon, &mut out);
    out
}

pub(crate) fn error_transform_into(x: &[f64], r: f64, epsilon: f64, out: &mut [f64]) {
    let mut scale = 1.0;
    for (j, (o, &xj)) in out.iter_mut().zip(x).enumerate() {
        *o = if j == 0 { xj - r } else { scale * xj };
        scale *= epsilon;
    }
}

pub fn inverse_error_transform(x_hat: &[f64], r: f64, epsilon: f64) -> Vec<f64> {
    let mut scale = 1.0;
    x_hat
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let x = if j == 0 { v + r } else { v / scale };
            scale *= epsilon;
            x
        })
        .collect()
}

/// Certainty-equivalence tracking input.
pub fn control_input(
    gains: &GainSet,
    x: &[f64],
    r: f64,
    theta_hat: &[f64],
    basis_value: &[f64],
) -> f64 {
    let n = gains.order();
    let eps = gains.epsilon();
    let mut feedback = gains.k[0] * (x[0] - r);
    let mut scale = 1.0;
    for (k, xj) in gains.k[1..n].iter().zip(&x[1..n]) {
        scale *= eps;
        feedback += scale * k * xj;
    }
    let cancel: f64 = theta_hat.iter().zip(basis_value).map(|(a, b)| a * b).sum();
    -cancel + feedback / eps.powi(n as i32)
}

/// Estimator derivative for the given law.
pub fn adaptation_rhs(
    law: &AdaptiveLaw,
    gains: &GainSet,
    basis_value: &[f64],
    x_hat: &[f64],
    theta_hat: &[f64],
) -> Result<Vec<f64>> {
    check_len("basis value", law.n_params(), basis_value.len())?;
    check_len("theta_hat", law.n_params(), theta_hat.len())?;
    check_len("x_hat", gains.order(), x_hat.len())?;
    let mut out = vec![0.0; law.n_params()];
    law.rhs_into(gains, basis_value, x_hat, theta_hat, &mut out);
    Ok(out)
}
