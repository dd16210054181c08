//! Agent dynamics: chains of integrators with an unknown, linearly
//! parameterized nonlinearity `theta^T p(x, t)` entering with the input.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, positive, Error, Result};

pub type BasisFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Names accepted by [`BasisVector::from_names`].
pub const BASIS_NAMES: &[&str] = &["neg_x1", "vdp_damping", "sin_t", "cos_t", "const"];

/// Looks up a registered basis component by name.
pub fn named_basis_component(name: &str) -> Result<BasisFn> {
    let f: BasisFn = match name {
        "neg_x1" => Arc::new(|x: &[f64], _t| -x[0]),
        // (1 - x1^2) x2; zero for first-order agents which have no x2
        "vdp_damping" => Arc::new(|x: &[f64], _t| match x.get(1) {
            Some(x2) => (1.0 - x[0] * x[0]) * x2,
            None => 0.0,
        }),
        "sin_t" => Arc::new(|_x: &[f64], t: f64| t.sin()),
        "cos_t" => Arc::new(|_x: &[f64], t: f64| t.cos()),
        "const" => Arc::new(|_x: &[f64], _t| 1.0),
        other => return Err(Error::UnknownBasis(other.to_string())),
    };
    Ok(f)
}

/// The known regressor `p(x, t)`.
#[derive(Clone)]
pub struct BasisVector {
    names: Vec<String>,
    components: Vec<BasisFn>,
}

impl fmt::Debug for BasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("BasisVector").field(&self.names).finish()
    }
}

impl BasisVector {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut basis = Self::empty();
        for name in names {
            basis = basis.with(name.as_ref(), named_basis_component(name.as_ref())?);
        }
        Ok(basis)
    }

    pub fn empty() -> Self {
        Self {
            names: Vec::new(),
            components: Vec::new(),
        }
    }

    /// Appends a user-defined component.
    pub fn with(mut self, name: impl Into<String>, f: BasisFn) -> Self {
        self.names.push(name.into());
        self.components.push(f);
        self
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn eval_into(&self, x: &[f64], t: f64, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.components) {
            *o = f(x, t);
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, t, &mut out);
        out
    }
}

/// One agent: `x_j' = x_{j+1}`, `x_n' = theta^T p(x, t) + u`, `y = x_1`.
#[derive(Debug, Clone)]
pub struct AgentModel {
    order: usize,
    basis: BasisVector,
    true_theta: Vec<f64>,
}

impl AgentModel {
    pub fn new(order: usize, basis: BasisVector, true_theta: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Invalid("agent order must be at least 1".into()));
        }
        check_len("true parameter vector", basis.dim(), true_theta.len())?;
        if true_theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("true parameters must be finite".into()));
        }
        Ok(Self {
            order,
            basis,
            true_theta,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn basis(&self) -> &BasisVector {
        &self.basis
    }

    pub fn true_theta(&self) -> &[f64] {
        &self.true_theta
    }

    pub fn n_params(&self) -> usize {
        self.true_theta.len()
    }

    /// Same order and basis with different parameters.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.order, self.basis.clone(), theta)
    }

    /// `theta^T p(x, t)`.
    pub fn uncertainty(&self, x: &[f64], t: f64) -> f64 {
        let p = self.basis.eval(x, t);
        dot(&self.true_theta, &p)
    }

    pub fn rhs(&self, x: &[f64], u: f64, t: f64) -> Result<Vec<f64>> {
        check_len("agent state", self.order, x.len())?;
        let p = self.basis.eval(x, t);
        let mut dx = vec![0.0; self.order];
        self.rhs_into(x, u, &p, &mut dx);
        Ok(dx)
    }

    /// Unchecked variant given a pre-evaluated basis `p`.
    pub(crate) fn rhs_into(&self, x: &[f64], u: f64, p: &[f64], dx: &mut [f64]) {
        let n = self.order;
        dx[..n - 1].copy_from_slice(&x[1..n]);
        dx[n - 1] = dot(&self.true_theta, p) + u;
    }
}

pub fn agent_rhs(model: &AgentModel, x: &[f64], u: f64, t: f64) -> Result<Vec<f64>> {
    model.rhs(x, u, t)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Linear exosystem `v' = S v`, `d = D v` generating a sinusoidal disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exosystem {
    pub d: [f64; 2],
    pub s: [[f64; 2]; 2],
    pub v0: [f64; 2],
}

impl Exosystem {
    /// `D = [1, 0]`, `S = [[0, 1], [-1, 0]]`.
    pub fn paper(v0: [f64; 2]) -> Self {
        Self {
            d: [1.0, 0.0],
            s: [[0.0, 1.0], [-1.0, 0.0]],
            v0,
        }
    }

    pub fn rhs(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.s[0][0] * v[0] + self.s[0][1] * v[1],
            self.s[1][0] * v[0] + self.s[1][1] * v[1],
        ]
    }

    pub fn output(&self, v: [f64; 2]) -> f64 {
        self.d[0] * v[0] + self.d[1] * v[1]
    }

    /// `(A1, A2)` with `d(t) = A1 sin t + A2 cos t`.
    ///
    /// With `S = [[0, 1], [-1, 0]]`, `exp(S t) = [[cos, sin], [-sin, cos]]`,
    /// so `d(t) = (d1 v02 - d2 v01) sin t + (d1 v01 + d2 v02) cos t`.
    pub fn sinusoid_amplitudes(&self) -> Result<(f64, f64)> {
        if self.s != [[0.0, 1.0], [-1.0, 0.0]] {
            return Err(Error::UnsupportedExosystem);
        }
        let [d1, d2] = self.d;
        let [v1, v2] = self.v0;
        Ok((d1 * v2 - d2 * v1, d1 * v1 + d2 * v2))
    }

    /// Closed-form `d(t)`.
    pub fn disturbance(&self, t: f64) -> Result<f64> {
        let (a1, a2) = self.sinusoid_amplitudes()?;
        Ok(a1 * t.sin() + a2 * t.cos())
    }
}

/// Second-order Van der Pol agent with the sinusoidal disturbance folded into
/// the regressor: `p = (-x1, (1 - x1^2) x2, sin t, cos t)`,
/// `theta = (a, b, A1, A2)`.
pub fn vdp_preset(a: f64, b: f64, exo: &Exosystem) -> Result<AgentModel> {
    positive("a", a)?;
    positive("b", b)?;
    let (a1, a2) = exo.sinusoid_amplitudes()?;
    let basis = BasisVector::from_names(&["neg_x1", "vdp_damping", "sin_t", "cos_t"])?;
    AgentModel::new(2, basis, vec![a, b, a1, a2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, FnSystem, IntegratorConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn vdp11() -> AgentModel {
        vdp_preset(1.0, 1.0, &Exosystem::paper([0.0, 0.0])).unwrap()
    }

    #[test]
    fn double_integrator() {
        let m =
            AgentModel::new(2, BasisVector::from_names(&["const"]).unwrap(), vec![0.0]).unwrap();
        assert_eq!(
            agent_rhs(&m, &[0.0, 1.0], 0.0, 0.0).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn vdp_unforced_at_unit_displacement() {
        // -a x1 + b (1 - x1^2) x2 at x = (1, 0) is -1
        for t in [0.0, 1.3, 10.0] {
            assert_eq!(
                agent_rhs(&vdp11(), &[1.0, 0.0], 0.0, t).unwrap(),
                vec![0.0, -1.0]
            );
        }
    }

    #[test]
    fn exact_cancellation() {
        let m = vdp_preset(1.0, 1.0, &Exosystem::paper([1.0, 0.0])).unwrap();
        let x = [2.0, 3.0];
        let t = 0.7;
        let u = -m.uncertainty(&x, t);
        let dx = agent_rhs(&m, &x, u, t).unwrap();
        assert_eq!(dx[0], 3.0);
        assert_abs_diff_eq!(dx[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            agent_rhs(&vdp11(), &[1.0], 0.0, 0.0),
            Err(Error::Dimension { .. })
        ));
        assert!(AgentModel::new(0, BasisVector::empty(), vec![]).is_err());
        assert!(AgentModel::new(1, BasisVector::from_names(&["const"]).unwrap(), vec![]).is_err());
        assert!(BasisVector::from_names(&["tan_t"]).is_err());
    }

    #[test]
    fn vdp_preset_amplitudes_from_exosystem() {
        let exo = Exosystem::paper([1.0, 0.0]);
        let m = vdp_preset(1.0, 1.0, &exo).unwrap();
        assert_eq!(m.true_theta(), &[1.0, 1.0, 0.0, 1.0]);

        // Oracle: integrate v' = S v numerically, compare D v(t) with cos t.
        let sys = FnSystem::new(2, move |_t, v: &[f64], dv: &mut [f64]| {
            let r = exo.rhs([v[0], v[1]]);
            dv.copy_from_slice(&r);
        });
        for t in [
            0.0,
            std::f64::consts::FRAC_PI_4,
            std::f64::consts::FRAC_PI_2,
        ] {
            let v = if t == 0.0 {
                exo.v0.to_vec()
            } else {
                let cfg = IntegratorConfig::new(1e-4, t).unwrap();
                integrate(&sys, &exo.v0, &cfg, |_, _, _| {}).unwrap()
            };
            let d = exo.output([v[0], v[1]]);
            assert_abs_diff_eq!(d, t.cos(), epsilon = 1e-10);
            assert_abs_diff_eq!(d, exo.disturbance(t).unwrap(), epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_exosystem_gives_no_disturbance() {
        let exo = Exosystem::paper([0.0, 0.0]);
        assert_eq!(exo.sinusoid_amplitudes().unwrap(), (0.0, 0.0));
        assert_eq!(
            vdp_preset(1.0, 1.0, &exo).unwrap().true_theta()[2..],
            [0.0, 0.0]
        );
    }

    #[test]
    fn basis_at_optimum_has_nonzero_first_component() {
        let y_star = 3.24;
        let p = vdp11().basis().eval(&[y_star, 0.0], 5.0);
        assert_eq!(p[0], -y_star);
    }

    #[test]
    fn preset_rejects_nonpositive_coefficients() {
        let exo = Exosystem::paper([1.0, 0.0]);
        assert!(vdp_preset(0.0, 1.0, &exo).is_err());
        assert!(vdp_preset(1.0, -2.0, &exo).is_err());
        let mut odd = exo;
        odd.s = [[0.0, 2.0], [-2.0, 0.0]];
        assert!(matches!(
            vdp_preset(1.0, 1.0, &odd),
            Err(Error::UnsupportedExosystem)
        ));
    }

    #[test]
    fn exosystem_energy_is_conserved() {
        let exo = Exosystem::paper([0.6, -0.8]);
        let sys = FnSystem::new(2, move |_t, v: &[f64], dv: &mut [f64]| {
            dv.copy_from_slice(&exo.rhs([v[0], v[1]]));
        });
        let cfg = IntegratorConfig::new(1e-3, 20.0).unwrap();
        integrate(&sys, &exo.v0, &cfg, |_, _, v| {
            assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() <= 1e-8);
        })
        .unwrap();
    }

    fn random_model() -> impl Strategy<Value = (AgentModel, Vec<f64>, f64, f64)> {
        (
            1usize..=5,
            prop::collection::vec(0usize..BASIS_NAMES.len(), 1..=5),
        )
            .prop_flat_map(|(n, idx)| {
                let names: Vec<&str> = idx.iter().map(|&k| BASIS_NAMES[k]).collect();
                let dim = names.len();
                (
                    prop::collection::vec(-5.0f64..5.0, dim),
                    prop::collection::vec(-5.0f64..5.0, n),
                    -5.0f64..5.0,
                    0.0f64..30.0,
                )
                    .prop_map(move |(theta, x, u, t)| {
                        let basis = BasisVector::from_names(&names).unwrap();
                        (AgentModel::new(n, basis, theta).unwrap(), x, u, t)
                    })
            })
    }

    proptest! {
        #[test]
        fn chain_structure_and_linear_parameterization((m, x, u, t) in random_model()) {
            let n = m.order();
            let dx = m.rhs(&x, u, t).unwrap();
            prop_assert_eq!(&dx[..n - 1], &x[1..]);

            let zero = m.with_theta(vec![0.0; m.n_params()]).unwrap();
            let dx0 = zero.rhs(&x, u, t).unwrap();
            let p = m.basis().eval(&x, t);
            for j in 0..n {
                let expected = if j == n - 1 { dot(m.true_theta(), &p) } else { 0.0 };
                prop_assert!((dx[j] - dx0[j] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }
}
