//! Persistence-of-excitation monitor.
//!
//! For each agent the regressor `p(x(t), t)` is rebuilt along the recorded
//! trajectory and the window Gram `G(t) = (1/T0) int_t^{t+T0} p p^T` is
//! evaluated with the trapezoid rule at every recorded `t >= t0` whose window
//! fits in the record.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::min_eig_symmetric;

use super::{Scenario, Trajectory};

/// Running trapezoid integrals of all products `p_a p_b`.
struct GramIntegrator<'a> {
    times: &'a [f64],
    products: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
    dim: usize,
}

impl<'a> GramIntegrator<'a> {
    fn new(times: &'a [f64], regressors: &[Vec<f64>]) -> Self {
        let dim = regressors.first().map_or(0, Vec::len);
        let products: Vec<Vec<f64>> = regressors
            .iter()
            .map(|p| {
                let mut out = Vec::with_capacity(dim * dim);
                for a in 0..dim {
                    for b in 0..dim {
                        out.push(p[a] * p[b]);
                    }
                }
                out
            })
            .collect();
        let mut cumulative = Vec::with_capacity(products.len());
        let mut acc = vec![0.0; dim * dim];
        cumulative.push(acc.clone());
        for k in 1..products.len() {
            let h = times[k] - times[k - 1];
            for (c, (g0, g1)) in acc.iter_mut().zip(products[k - 1].iter().zip(&products[k])) {
                *c += 0.5 * h * (g0 + g1);
            }
            cumulative.push(acc.clone());
        }
        Self {
            times,
            products,
            cumulative,
            dim,
        }
    }

    /// `int_{t_0}^{tau}` of the piecewise-linear interpolant.
    fn integral_to(&self, tau: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&t| t <= tau).saturating_sub(1);
        let mut out = self.cumulative[k].clone();
        if k + 1 < self.times.len() {
            let delta = tau - self.times[k];
            if delta > 0.0 {
                let frac = delta / (self.times[k + 1] - self.times[k]);
                for (o, (g0, g1)) in out
                    .iter_mut()
                    .zip(self.products[k].iter().zip(&self.products[k + 1]))
                {
                    let g_tau = g0 + frac * (g1 - g0);
                    *o += 0.5 * delta * (g0 + g_tau);
                }
            }
        }
        out
    }

    fn gram(&self, start: f64, window: f64) -> DMatrix<f64> {
        let hi = self.integral_to(start + window);
        let lo = self.integral_to(start);
        let d = self.dim;
        DMatrix::from_fn(d, d, |a, b| (hi[a * d + b] - lo[a * d + b]) / window)
    }
}

fn check_span(times: &[f64], start: f64, window: f64) -> Result<()> {
    let (first, last) = match (times.first(), times.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            return Err(Error::WindowTooLong {
                start: f64::NAN,
                end: f64::NAN,
                needed_start: start,
                needed_end: start + window,
            })
        }
    };
    if start < first - 1e-12 || start + window > last + 1e-9 {
        return Err(Error::WindowTooLong {
            start: first,
            end: last,
            needed_start: start,
            needed_end: start + window,
        });
    }
    Ok(())
}

/// `(1/T0) int_start^{start+T0} p p^T` from regressor samples on a grid.
pub fn window_gram(
    times: &[f64],
    regressors: &[Vec<f64>],
    start: f64,
    window: f64,
) -> Result<DMatrix<f64>> {
    crate::error::positive("window", window)?;
    crate::error::check_len("regressor samples", times.len(), regressors.len())?;
    check_span(times, start, window)?;
    Ok(GramIntegrator::new(times, regressors).gram(start, window))
}

#[derive(Debug, Clone)]
pub struct AgentPe {
    pub basis_names: Vec<String>,
    pub sample_times: Vec<f64>,
    pub grams: Vec<DMatrix<f64>>,
    pub min_eigs: Vec<f64>,
    /// Infimum of the smallest Gram eigenvalue over the sampled windows.
    pub inf_min_eig: f64,
    pub persistently_excited: bool,
    /// Infimum over windows of each diagonal Gram entry.
    pub component_inf_energy: Vec<f64>,
    pub component_excited: Vec<bool>,
    /// `sup |p_j|` along the whole trajectory.
    pub regressor_sup: Vec<f64>,
    pub bounded: bool,
}

#[derive(Debug, Clone)]
pub struct PeReport {
    pub window: f64,
    pub start: f64,
    pub floor: f64,
    pub agents: Vec<AgentPe>,
}

impl PeReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "start = {}", self.start);
        let _ = writeln!(s, "floor = {}", self.floor);
        for (i, a) in self.agents.iter().enumerate() {
            let id = i + 1;
            let _ = writeln!(
                s,
                "agent{id}.persistently_excited = {}",
                a.persistently_excited
            );
            let _ = writeln!(s, "agent{id}.inf_min_eig = {}", a.inf_min_eig);
            let _ = writeln!(s, "agent{id}.bounded = {}", a.bounded);
            for (j, name) in a.basis_names.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "agent{id}.p{}.{name}.excited = {} (inf energy {}, sup {})",
                    j + 1,
                    a.component_excited[j],
                    a.component_inf_energy[j],
                    a.regressor_sup[j]
                );
            }
        }
        s
    }
}

pub fn pe_monitor(trajectory: &Trajectory, scenario: &Scenario) -> Result<PeReport> {
    let settings = scenario.pe;
    let times = &trajectory.times;
    check_span(times, settings.start, settings.window)?;
    let last = *times.last().unwrap_or(&0.0);
    let starts: Vec<f64> = times
        .iter()
        .copied()
        .filter(|&t| t >= settings.start - 1e-12 && t + settings.window <= last + 1e-9)
        .collect();

    let mut agents = Vec::with_capacity(scenario.agents.len());
    for (spec, tr) in scenario.agents.iter().zip(&trajectory.agents) {
        let basis = spec.model.basis();
        let regressors: Vec<Vec<f64>> = times
            .iter()
            .zip(&tr.states)
            .map(|(&t, x)| basis.eval(x, t))
            .collect();
        let dim = basis.dim();

        let mut regressor_sup = vec![0.0f64; dim];
        let mut finite = true;
        for p in &regressors {
            for (s, v) in regressor_sup.iter_mut().zip(p) {
                finite &= v.is_finite();
                *s = s.max(v.abs());
            }
        }
        let bounded = finite
            && regressor_sup
                .iter()
                .all(|&s| s <= scenario.integrator.divergence_limit);

        let integ = GramIntegrator::new(times, &regressors);
        let mut grams = Vec::with_capacity(starts.len());
        let mut min_eigs = Vec::with_capacity(starts.len());
        let mut component_inf_energy = vec![f64::INFINITY; dim];
        for &t in &starts {
            let g = integ.gram(t, settings.window);
            let g = 0.5 * (&g + g.transpose());
            min_eigs.push(min_eig_symmetric(&g)?);
            for (j, e) in component_inf_energy.iter_mut().enumerate() {
                *e = e.min(g[(j, j)]);
            }
            grams.push(g);
        }
        let inf_min_eig = min_eigs.iter().copied().fold(f64::INFINITY, f64::min);
        agents.push(AgentPe {
            basis_names: basis.names().to_vec(),
            sample_times: starts.clone(),
            grams,
            min_eigs,
            inf_min_eig,
            persistently_excited: inf_min_eig >= settings.floor,
            component_excited: component_inf_energy
                .iter()
                .map(|&e| e >= settings.floor)
                .collect(),
            component_inf_energy,
            regressor_sup,
            bounded,
        });
    }
    Ok(PeReport {
        window: settings.window,
        start: settings.start,
        floor: settings.floor,
        agents,
    })
}
