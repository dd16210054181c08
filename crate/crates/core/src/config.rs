//! Scenario files.
//!
//! Scenarios are TOML documents with a strict schema: unknown keys are
//! rejected and `format` must be `1`. Agent and edge indices are 1-based.
//!
//! ```toml
//! format = 1
//! name = "example"
//!
//! [graph]
//! n_agents = 2
//! edges = [[1, 2, 1.0]]
//!
//! [controller]
//! variant = "online"      # online | offline | sigma_mod
//! epsilon = 0.2
//! poles = [-2.0, -2.0]    # reals, or [re, im] pairs
//! lambda_gain = 10.0
//!
//! [[agents]]
//! preset = "vdp"
//! a = 1.0
//! b = 1.0
//! v0 = [1.0, 0.0]
//! x0 = [1.0, 0.0]
//! cost = { kind = "quadratic", params = [8.0] }
//!
//! [[agents]]
//! order = 1
//! basis = ["const"]
//! theta = [0.5]
//! x0 = [0.0]
//! cost = { kind = "paper_f2" }
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::{AdaptiveLaw, GainSet, Variant};
use crate::costs::{builtin_cost, CostSet};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::numerics::IntegratorConfig;
use crate::plant::{vdp_preset, AgentModel, BasisVector, Exosystem};
use crate::sim::{AgentSpec, InitialState, PeSettings, Scenario};

pub const FORMAT_VERSION: u32 = 1;

/// Default sigma when the leakage variant is selected without one.
pub const DEFAULT_SIGMA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub graph: GraphSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub pe: PeSection,
    #[serde(default)]
    pub optimum: OptimumSection,
    pub agents: Vec<AgentEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n_agents: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub variant: Variant,
    pub epsilon: f64,
    pub poles: Option<Vec<Pole>>,
    pub lambda_gain: f64,
    pub sigma: Option<f64>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            variant: Variant::Online,
            epsilon: 0.2,
            poles: None,
            lambda_gain: 1.0,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pole {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Pole> for Complex64 {
    fn from(p: Pole) -> Self {
        match p {
            Pole::Real(re) => Complex64::new(re, 0.0),
            Pole::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub step: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub divergence_limit: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            step: d.step,
            t_end: d.t_end,
            record_every: 10,
            divergence_limit: d.divergence_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeSection {
    pub window: f64,
    pub start: f64,
    pub floor: f64,
}

impl Default for PeSection {
    fn default() -> Self {
        let d = PeSettings::default();
        Self {
            window: d.window,
            start: d.start,
            floor: d.floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimumSection {
    pub bracket: [f64; 2],
}

impl Default for OptimumSection {
    fn default() -> Self {
        Self {
            bracket: [-1000.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostEntry {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

/// Either `preset = "vdp"` with `a`, `b`, `v0`, or an explicit
/// `order`/`basis`/`theta` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat0: Option<Vec<f64>>,
    /// Per-agent override of `controller.poles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<Pole>>,
    pub cost: CostEntry,
}

/// Command-line style overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub epsilon: Option<f64>,
    pub sigma: Option<f64>,
    pub lambda_gain: Option<f64>,
    pub step: Option<f64>,
    pub t_end: Option<f64>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.format != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported format {} (expected {FORMAT_VERSION})",
                file.format
            )));
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.variant {
            self.controller.variant = v;
        }
        if let Some(e) = o.epsilon {
            self.controller.epsilon = e;
        }
        if let Some(s) = o.sigma {
            self.controller.sigma = Some(s);
        }
        if let Some(l) = o.lambda_gain {
            self.controller.lambda_gain = l;
        }
        if let Some(h) = o.step {
            self.integrator.step = h;
        }
        if let Some(t) = o.t_end {
            self.integrator.t_end = t;
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let n = self.graph.n_agents;
        if n == 0 {
            return Err(Error::Invalid("graph.n_agents must be at least 1".into()));
        }
        if self.agents.len() != n {
            return Err(Error::Invalid(format!(
                "graph.n_agents is {n} but {} [[agents]] entries are given",
                self.agents.len()
            )));
        }
        let mut edges = Vec::with_capacity(self.graph.edges.len());
        for (k, &(i, j, w)) in self.graph.edges.iter().enumerate() {
            if i == 0 || j == 0 {
                return Err(Error::Invalid(format!(
                    "graph.edges[{k}]: indices are 1-based"
                )));
            }
            edges.push((i - 1, j - 1, w));
        }
        let topology = Topology::from_edges(n, &edges)
            .map_err(|e| Error::Invalid(format!("graph.edges: {e}")))?;

        let c = &self.controller;
        crate::error::positive("epsilon", c.epsilon)?;
        crate::error::positive("lambda_gain", c.lambda_gain)?;
        let sigma = match (c.variant, c.sigma) {
            (_, Some(s)) => s,
            (Variant::SigmaMod, None) => DEFAULT_SIGMA,
            _ => 0.0,
        };

        let mut costs = Vec::with_capacity(n);
        let mut agents = Vec::with_capacity(n);
        for (i, entry) in self.agents.iter().enumerate() {
            let ctx = |e: Error| Error::Invalid(format!("agents[{}]: {e}", i + 1));
            costs.push(builtin_cost(&entry.cost.kind, &entry.cost.params).map_err(ctx)?);
            let model = entry.model().map_err(ctx)?;
            let poles = entry.poles.as_ref().or(c.poles.as_ref());
            let gains = match poles {
                Some(p) => {
                    let roots: Vec<Complex64> = p.iter().copied().map(Into::into).collect();
                    GainSet::from_roots(model.order(), &roots, c.epsilon)
                }
                None => GainSet::default_for(model.order(), c.epsilon),
            }
            .map_err(ctx)?;
            let law = AdaptiveLaw::scaled(c.variant, model.n_params(), c.lambda_gain, sigma)
                .map_err(ctx)?;
            let x0 = entry.x0.clone().unwrap_or_else(|| vec![0.0; model.order()]);
            let mut initial = InitialState::from_plant(x0, model.n_params());
            if let Some(r0) = entry.r0 {
                initial.r = r0;
            }
            if let Some(l0) = entry.lambda0 {
                initial.lambda = l0;
            }
            if let Some(th) = &entry.theta_hat0 {
                initial.theta_hat = th.clone();
            }
            agents.push(AgentSpec {
                model,
                gains,
                law,
                initial,
            });
        }

        let it = &self.integrator;
        let integrator = IntegratorConfig {
            step: it.step,
            t_end: it.t_end,
            divergence_limit: it.divergence_limit,
        };
        let scenario = Scenario {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            topology,
            costs: CostSet::new(costs),
            agents,
            integrator,
            record_every: it.record_every,
            pe: PeSettings {
                window: self.pe.window,
                start: self.pe.start,
                floor: self.pe.floor,
            },
            optimum_bracket: (self.optimum.bracket[0], self.optimum.bracket[1]),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Cost set alone, for optimum queries that need no plant.
    pub fn cost_set(&self) -> Result<CostSet> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                builtin_cost(&a.cost.kind, &a.cost.params)
                    .map_err(|e| Error::Invalid(format!("agents[{}]: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()
            .map(CostSet::new)
    }
}

impl AgentEntry {
    fn model(&self) -> Result<AgentModel> {
        match self.preset.as_deref() {
            Some("vdp") => {
                if self.order.is_some() || self.basis.is_some() || self.theta.is_some() {
                    return Err(Error::Invalid(
                        "preset agents take a, b, v0 and not order, basis, theta".into(),
                    ));
                }
                let a = self.a.ok_or_else(|| missing("a"))?;
                let b = self.b.ok_or_else(|| missing("b"))?;
                let v0 = self.v0.unwrap_or([0.0, 0.0]);
                vdp_preset(a, b, &Exosystem::paper(v0))
            }
            Some(other) => Err(Error::Invalid(format!(
                "unknown preset `{other}` (expected vdp)"
            ))),
            None => {
                if self.a.is_some() || self.b.is_some() || self.v0.is_some() {
                    return Err(Error::Invalid(
                        "a, b, v0 are only valid with preset = \"vdp\"".into(),
                    ));
                }
                let order = self.order.ok_or_else(|| missing("order"))?;
                let names = self.basis.as_ref().ok_or_else(|| missing("basis"))?;
                let theta = self.theta.clone().ok_or_else(|| missing("theta"))?;
                AgentModel::new(order, BasisVector::from_names(names)?, theta)
            }
        }
    }
}

fn missing(field: &str) -> Error {
    Error::Invalid(format!("missing field `{field}`"))
}

const PAPER_VDP: &str = include_str!("../scenarios/paper_vdp.toml");
const DISCONNECTED: &str = include_str!("../scenarios/disconnected_graph.toml");
const AVERAGE_CONSENSUS: &str = include_str!("../scenarios/average_consensus.toml");

/// Scenario files shipped with the library, by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "paper_vdp" => Some(PAPER_VDP),
        "disconnected_graph" => Some(DISCONNECTED),
        "average_consensus" => Some(AVERAGE_CONSENSUS),
        _ => None,
    }
}

pub const BUNDLED_NAMES: &[&str] = &["paper_vdp", "disconnected_graph", "average_consensus"];
