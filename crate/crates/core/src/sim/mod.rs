//! Closed-loop assembly and scenario runs.
//!
//! The stacked state is `[x_1 .. x_N, r, lambda, theta_hat_1 .. theta_hat_N]`.

mod metrics;
mod pe;
mod trajectory;

pub use metrics::{metrics, Summary};
pub use pe::{pe_monitor, window_gram, AgentPe, PeReport};
pub use trajectory::{AgentTrace, Trajectory};

use crate::control::{
    control_input, error_transform_into, generator_rhs_into, AdaptiveLaw, GainSet,
};
use crate::costs::CostSet;
use crate::error::{check_len, positive, Error, Result};
use crate::graph::Topology;
use crate::numerics::{integrate, FnSystem, IntegratorConfig, OdeSystem};
use crate::plant::AgentModel;

/// Initial plant and compensator state of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub x: Vec<f64>,
    pub r: f64,
    pub lambda: f64,
    pub theta_hat: Vec<f64>,
}

impl InitialState {
    /// `r(0) = x1(0)`, `lambda(0) = 0`, `theta_hat(0) = 0`.
    pub fn from_plant(x: Vec<f64>, n_params: usize) -> Self {
        let r = x.first().copied().unwrap_or(0.0);
        Self {
            x,
            r,
            lambda: 0.0,
            theta_hat: vec![0.0; n_params],
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub model: AgentModel,
    pub gains: GainSet,
    pub law: AdaptiveLaw,
    pub initial: InitialState,
}

/// Persistence-of-excitation test constants: window length `T0`, first
/// window start `t0`, and floor `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeSettings {
    pub window: f64,
    pub start: f64,
    pub floor: f64,
}

impl Default for PeSettings {
    fn default() -> Self {
        Self {
            window: 2.0 * std::f64::consts::PI,
            start: 10.0,
            floor: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub costs: CostSet,
    pub agents: Vec<AgentSpec>,
    pub integrator: IntegratorConfig,
    /// Record every k-th integration step (the final step is always kept).
    pub record_every: usize,
    pub pe: PeSettings,
    pub optimum_bracket: (f64, f64),
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.agents.len();
        if n == 0 {
            return Err(Error::Invalid("scenario has no agents".into()));
        }
        check_len("topology size", n, self.topology.n_agents())?;
        check_len("cost count", n, self.costs.len())?;
        if !self.topology.is_connected() {
            return Err(Error::Disconnected);
        }
        self.integrator.validate()?;
        if self.record_every == 0 {
            return Err(Error::Invalid("record_every must be at least 1".into()));
        }
        positive("pe window", self.pe.window)?;
        positive("pe floor", self.pe.floor)?;
        if !(self.pe.start.is_finite() && self.pe.start >= 0.0) {
            return Err(Error::Negative {
                name: "pe start",
                value: self.pe.start,
            });
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent_checks(agent).map_err(|e| Error::Invalid(format!("agent {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Non-fatal advice, currently the step-size rule `h <= eps^2 / 10`.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, a) in self.agents.iter().enumerate() {
            let eps = a.gains.epsilon();
            let limit = eps.powi(2) / 10.0;
            if self.integrator.step > limit * (1.0 + 1e-12) {
                out.push(format!(
                    "agent {}: step {} exceeds eps^2/10 = {limit} for eps = {eps}",
                    i + 1,
                    self.integrator.step
                ));
            }
        }
        out
    }

    pub fn y_star(&self) -> Result<f64> {
        self.costs.minimize_global(self.optimum_bracket, 1e-10)
    }

    /// Same scenario with a different epsilon for every agent.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut s = self.clone();
        for a in &mut s.agents {
            a.gains = GainSet::new(a.gains.k().to_vec(), epsilon)?;
        }
        Ok(s)
    }
}

fn agent_checks(agent: &AgentSpec) -> Result<()> {
    let n = agent.model.order();
    let m = agent.model.n_params();
    check_len("controller order", n, agent.gains.order())?;
    check_len("adaptation gain size", m, agent.law.n_params())?;
    check_len("initial plant state", n, agent.initial.x.len())?;
    check_len(
        "initial parameter estimate",
        m,
        agent.initial.theta_hat.len(),
    )?;
    let finite = agent
        .initial
        .x
        .iter()
        .chain(&agent.initial.theta_hat)
        .all(|v| v.is_finite())
        && agent.initial.r.is_finite()
        && agent.initial.lambda.is_finite();
    if !finite {
        return Err(Error::Invalid("initial state must be finite".into()));
    }
    Ok(())
}

/// Offsets into the stacked state.
#[derive(Debug, Clone)]
pub struct Layout {
    x_offsets: Vec<usize>,
    theta_offsets: Vec<usize>,
    r_offset: usize,
    lambda_offset: usize,
    dim: usize,
}

impl Layout {
    fn new(scenario: &Scenario) -> Self {
        let n = scenario.agents.len();
        let mut off = 0;
        let mut x_offsets = Vec::with_capacity(n);
        for a in &scenario.agents {
            x_offsets.push(off);
            off += a.model.order();
        }
        let r_offset = off;
        let lambda_offset = off + n;
        off += 2 * n;
        let mut theta_offsets = Vec::with_capacity(n);
        for a in &scenario.agents {
            theta_offsets.push(off);
            off += a.model.n_params();
        }
        Self {
            x_offsets,
            theta_offsets,
            r_offset,
            lambda_offset,
            dim: off,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x<'s>(&self, s: &'s [f64], i: usize, order: usize) -> &'s [f64] {
        &s[self.x_offsets[i]..self.x_offsets[i] + order]
    }

    pub fn r(&self, s: &[f64], i: usize) -> f64 {
        s[self.r_offset + i]
    }

    pub fn lambda(&self, s: &[f64], i: usize) -> f64 {
        s[self.lambda_offset + i]
    }

    pub fn theta_hat<'s>(&self, s: &'s [f64], i: usize, m: usize) -> &'s [f64] {
        &s[self.theta_offsets[i]..self.theta_offsets[i] + m]
    }

    /// Which agent owns stacked component `j`.
    pub fn agent_of(&self, j: usize) -> usize {
        let n = self.x_offsets.len();
        if j >= self.r_offset && j < self.r_offset + 2 * n {
            return (j - self.r_offset) % n;
        }
        let offsets = if j < self.r_offset {
            &self.x_offsets
        } else {
            &self.theta_offsets
        };
        offsets.iter().rposition(|&o| o <= j).unwrap_or(0)
    }
}

/// The composite plant + tracker + generator system.
pub struct ClosedLoop<'a> {
    scenario: &'a Scenario,
    layout: Layout,
}

impl<'a> ClosedLoop<'a> {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.layout.dim];
        for (i, a) in self.scenario.agents.iter().enumerate() {
            let xo = self.layout.x_offsets[i];
            s[xo..xo + a.model.order()].copy_from_slice(&a.initial.x);
            s[self.layout.r_offset + i] = a.initial.r;
            s[self.layout.lambda_offset + i] = a.initial.lambda;
            let to = self.layout.theta_offsets[i];
            s[to..to + a.model.n_params()].copy_from_slice(&a.initial.theta_hat);
        }
        s
    }

    /// Control input of agent `i` at stacked state `s`.
    pub fn input(&self, i: usize, t: f64, s: &[f64]) -> f64 {
        let a = &self.scenario.agents[i];
        let x = self.layout.x(s, i, a.model.order());
        let th = self.layout.theta_hat(s, i, a.model.n_params());
        let p = a.model.basis().eval(x, t);
        control_input(&a.gains, x, self.layout.r(s, i), th, &p)
    }
}

impl OdeSystem for ClosedLoop<'_> {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn rhs(&self, t: f64, s: &[f64], ds: &mut [f64]) {
        let sc = self.scenario;
        let lay = &self.layout;
        let n = sc.agents.len();
        let mut grad_at = vec![0.0; n];
        let mut p = Vec::new();
        let mut x_hat = Vec::new();
        for (i, a) in sc.agents.iter().enumerate() {
            let order = a.model.order();
            let m = a.model.n_params();
            let x = lay.x(s, i, order);
            let r = lay.r(s, i);
            let th = lay.theta_hat(s, i, m);

            p.resize(m, 0.0);
            a.model.basis().eval_into(x, t, &mut p);
            let u = control_input(&a.gains, x, r, th, &p);
            let xo = lay.x_offsets[i];
            a.model.rhs_into(x, u, &p, &mut ds[xo..xo + order]);

            x_hat.resize(order, 0.0);
            error_transform_into(x, r, a.gains.epsilon(), &mut x_hat);
            let to = lay.theta_offsets[i];
            a.law
                .rhs_into(&a.gains, &p, &x_hat, th, &mut ds[to..to + m]);

            grad_at[i] = if a.law.variant().uses_measured_gradient() {
                x[0]
            } else {
                r
            };
        }
        let r = &s[lay.r_offset..lay.r_offset + n];
        let lambda = &s[lay.lambda_offset..lay.lambda_offset + n];
        let (dr, rest) = ds[lay.r_offset..].split_at_mut(n);
        generator_rhs_into(
            &sc.costs,
            &sc.topology,
            &grad_at,
            r,
            lambda,
            dr,
            &mut rest[..n],
        );
    }
}

pub fn assemble(scenario: &Scenario) -> Result<ClosedLoop<'_>> {
    scenario.validate()?;
    Ok(ClosedLoop {
        scenario,
        layout: Layout::new(scenario),
    })
}

/// Integrates the closed loop and records a decimated trajectory.
pub fn run(scenario: &Scenario) -> Result<Trajectory> {
    let system = assemble(scenario)?;
    let y_star = scenario.y_star()?;
    let n_steps = scenario.integrator.n_steps();
    let every = scenario.record_every;
    let mut traj = Trajectory::empty(scenario, y_star);
    let lay = system.layout().clone();

    let outcome = integrate(
        &system,
        &system.initial_state(),
        &scenario.integrator,
        |k, t, s| {
            if k % every != 0 && k != n_steps {
                return;
            }
            traj.times.push(t);
            for (i, a) in scenario.agents.iter().enumerate() {
                let tr = &mut traj.agents[i];
                tr.states.push(lay.x(s, i, a.model.order()).to_vec());
                tr.r.push(lay.r(s, i));
                tr.lambda.push(lay.lambda(s, i));
                tr.u.push(system.input(i, t, s));
                tr.theta_hat
                    .push(lay.theta_hat(s, i, a.model.n_params()).to_vec());
            }
        },
    );
    match outcome {
        Ok(_) => {}
        Err(Error::Diverged { time, components }) => {
            let mut agents: Vec<usize> = components.iter().map(|&j| lay.agent_of(j)).collect();
            agents.sort_unstable();
            agents.dedup();
            return Err(Error::AgentsDiverged { time, agents });
        }
        Err(e) => return Err(e),
    }
    traj.derive(scenario);
    Ok(traj)
}

/// Record of a generator-only run.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTrace {
    pub times: Vec<f64>,
    pub r: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
}

/// Runs the optimal signal generator alone with analytic gradients.
pub fn run_generator(
    costs: &CostSet,
    topology: &Topology,
    r0: &[f64],
    lambda0: &[f64],
    integrator: &IntegratorConfig,
    record_every: usize,
) -> Result<GeneratorTrace> {
    let n = topology.n_agents();
    check_len("cost count", n, costs.len())?;
    check_len("r0", n, r0.len())?;
    check_len("lambda0", n, lambda0.len())?;
    let every = record_every.max(1);
    let sys = FnSystem::new(2 * n, |_t, s: &[f64], ds: &mut [f64]| {
        let (r, lambda) = s.split_at(n);
        let (dr, dl) = ds.split_at_mut(n);
        generator_rhs_into(costs, topology, r, r, lambda, dr, dl);
    });
    let mut s0 = r0.to_vec();
    s0.extend_from_slice(lambda0);
    let n_steps = integrator.n_steps();
    let mut out = GeneratorTrace {
        times: Vec::new(),
        r: Vec::new(),
        lambda: Vec::new(),
    };
    integrate(&sys, &s0, integrator, |k, t, s| {
        if k % every == 0 || k == n_steps {
            out.times.push(t);
            out.r.push(s[..n].to_vec());
            out.lambda.push(s[n..].to_vec());
        }
    })?;
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::control::{AdaptiveLaw, GainSet, Variant};
    use crate::costs::LocalCost;
    use crate::graph::fig2;
    use crate::plant::{vdp_preset, BasisVector, Exosystem};
    use nalgebra::DVector;

    pub(crate) fn paper_scenario(variant: Variant, epsilon: f64, t_end: f64) -> Scenario {
        let x0 = [[1.0, 0.0], [-1.0, 0.0], [2.0, 0.0], [5.0, 0.0]];
        let agents = x0
            .iter()
            .map(|x| {
                let model = vdp_preset(1.0, 1.0, &Exosystem::paper([1.0, 0.0])).unwrap();
                AgentSpec {
                    gains: GainSet::default_for(2, epsilon).unwrap(),
                    law: AdaptiveLaw::scaled(variant, 4, 10.0, 0.05).unwrap(),
                    initial: InitialState::from_plant(x.to_vec(), 4),
                    model,
                }
            })
            .collect();
        Scenario {
            name: "paper".into(),
            topology: fig2(),
            costs: CostSet::paper(),
            agents,
            integrator: IntegratorConfig::new(1e-3, t_end).unwrap(),
            record_every: 10,
            pe: PeSettings::default(),
            optimum_bracket: (-100.0, 100.0),
        }
    }

    fn scalar_scenario(cost: LocalCost, x0: f64, t_end: f64) -> Scenario {
        let model =
            AgentModel::new(1, BasisVector::from_names(&["const"]).unwrap(), vec![0.0]).unwrap();
        Scenario {
            name: "scalar".into(),
            topology: Topology::empty(1),
            costs: CostSet::new(vec![cost]),
            agents: vec![AgentSpec {
                gains: GainSet::default_for(1, 0.2).unwrap(),
                law: AdaptiveLaw::scaled(Variant::Offline, 1, 1.0, 0.0).unwrap(),
                initial: InitialState::from_plant(vec![x0], 1),
                model,
            }],
            integrator: IntegratorConfig::new(1e-3, t_end).unwrap(),
            record_every: 10,
            pe: PeSettings::default(),
            optimum_bracket: (-100.0, 100.0),
        }
    }

    #[test]
    fn paper_dimension_count() {
        let sc = paper_scenario(Variant::Online, 0.2, 1.0);
        assert_eq!(assemble(&sc).unwrap().dim(), 32);
    }

    #[test]
    fn singleton_reduces_to_gradient_flow() {
        let c = 3.0;
        let sc = scalar_scenario(
            crate::costs::builtin_cost("quadratic", &[c]).unwrap(),
            0.0,
            5.0,
        );
        let traj = run(&sc).unwrap();
        // r' = -2 (r - c) from r(0) = 0
        for (k, &t) in traj.times.iter().enumerate() {
            let exact = c * (1.0 - (-2.0 * t).exp());
            assert!((traj.agents[0].r[k] - exact).abs() < 1e-9);
            assert_eq!(traj.agents[0].lambda[k], 0.0);
        }
    }

    #[test]
    fn equilibrium_is_stationary() {
        let sc = paper_scenario(Variant::Offline, 0.2, 1.0);
        let y_star = sc.y_star().unwrap();
        let l = sc.topology.laplacian().into_matrix();
        let b = DVector::from_iterator(4, sc.costs.iter().map(|c| -c.gradient(y_star)));
        let lam = l.svd(true, true).solve(&b, 1e-12).unwrap();

        let mut sc = sc;
        for (i, a) in sc.agents.iter_mut().enumerate() {
            a.initial = InitialState {
                x: vec![y_star, 0.0],
                r: y_star,
                lambda: lam[i],
                theta_hat: a.model.true_theta().to_vec(),
            };
        }
        let sys = assemble(&sc).unwrap();
        let s0 = sys.initial_state();
        let mut ds = vec![0.0; sys.dim()];
        for t in [0.0, 1.0, 2.5] {
            sys.rhs(t, &s0, &mut ds);
            let norm = ds.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= 1e-6, "norm {norm} at t = {t}");
        }
    }

    #[test]
    fn certainty_equivalence_holds_position() {
        let mut sc = paper_scenario(Variant::Online, 0.2, 1.0);
        for a in sc.agents.iter_mut() {
            a.initial.x = vec![1.7, 0.0];
            a.initial.r = 1.7;
            a.initial.theta_hat = a.model.true_theta().to_vec();
        }
        let sys = assemble(&sc).unwrap();
        let s0 = sys.initial_state();
        let mut ds = vec![0.0; sys.dim()];
        sys.rhs(0.4, &s0, &mut ds);
        for i in 0..4 {
            assert_eq!(ds[2 * i], 0.0);
            assert!(ds[2 * i + 1].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_cost_generator_stays_put() {
        let mut sc = paper_scenario(Variant::Online, 0.2, 3.0);
        sc.costs = CostSet::new(vec![LocalCost::new("flat", |_| 1.0, |_| 0.0); 4]);
        for a in sc.agents.iter_mut() {
            a.initial.r = 0.0;
        }
        let traj = run(&sc).unwrap();
        assert!(traj.agents.iter().all(|a| a.r.iter().all(|&r| r == 0.0)));
    }

    #[test]
    fn rejects_disconnected_graph() {
        let mut sc = paper_scenario(Variant::Online, 0.2, 1.0);
        sc.topology = Topology::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        assert!(matches!(run(&sc), Err(Error::Disconnected)));
    }

    #[test]
    fn divergence_names_agents() {
        let mut sc = paper_scenario(Variant::Online, 0.2, 20.0);
        // fast poles at -2/eps = -100 are outside the RK4 stability region for h = 0.05
        sc.agents[2].gains = GainSet::default_for(2, 0.02).unwrap();
        sc.integrator = IntegratorConfig::new(0.05, 20.0).unwrap();
        match run(&sc) {
            Err(Error::AgentsDiverged { agents, .. }) => assert!(agents.contains(&2), "{agents:?}"),
            other => panic!("expected divergence, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn layout_maps_components_to_agents() {
        let sc = paper_scenario(Variant::Online, 0.2, 1.0);
        let sys = assemble(&sc).unwrap();
        let lay = sys.layout();
        assert_eq!(lay.agent_of(0), 0);
        assert_eq!(lay.agent_of(7), 3);
        assert_eq!(lay.agent_of(8), 0);
        assert_eq!(lay.agent_of(13), 1);
        assert_eq!(lay.agent_of(16), 0);
        assert_eq!(lay.agent_of(31), 3);
    }

    #[test]
    fn step_warning() {
        let mut sc = paper_scenario(Variant::Online, 0.2, 1.0);
        assert!(sc.warnings().is_empty());
        sc.integrator.step = 0.01;
        assert_eq!(sc.warnings().len(), 4);
    }
}
