use std::fmt::Write as _;

use super::trajectory::norm;
use super::Trajectory;

/// End-of-run figures of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub t_final: f64,
    pub y_star: f64,
    pub final_outputs: Vec<f64>,
    pub final_gap: Vec<f64>,
    pub max_final_gap: f64,
    /// `max_{i,j} |y_i - y_j|` at the final sample.
    pub consensus_spread: f64,
    pub final_tracking_error: Vec<f64>,
    pub max_tracking_error: f64,
    /// `|theta_hat_j - theta_j|` per agent and component.
    pub final_parameter_error: Vec<Vec<f64>>,
    /// `max_t |sum_i lambda_i(t) - sum_i lambda_i(0)|`.
    pub lambda_sum_drift: f64,
    pub band: f64,
    /// First time after which every optimality gap stays within `band`.
    pub time_to_band: Option<f64>,
    pub sup_state: f64,
}

pub fn metrics(trajectory: &Trajectory, band: f64) -> Summary {
    let last = trajectory.len().saturating_sub(1);
    let agents = &trajectory.agents;

    let final_outputs: Vec<f64> = agents.iter().map(|a| a.y(last)).collect();
    let final_gap: Vec<f64> = agents.iter().map(|a| a.optimality_gap[last]).collect();
    let final_tracking_error: Vec<f64> = agents.iter().map(|a| a.tracking_error[last]).collect();
    let spread = final_outputs
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        - final_outputs.iter().copied().fold(f64::INFINITY, f64::min);
    let final_parameter_error = agents
        .iter()
        .map(|a| {
            a.theta_hat[last]
                .iter()
                .zip(&a.true_theta)
                .map(|(e, t)| (e - t).abs())
                .collect()
        })
        .collect();

    let lambda_sum = |k: usize| agents.iter().map(|a| a.lambda[k]).sum::<f64>();
    let lambda0 = lambda_sum(0);
    let lambda_sum_drift = (0..trajectory.len())
        .map(|k| (lambda_sum(k) - lambda0).abs())
        .fold(0.0, f64::max);

    let mut time_to_band = None;
    for k in (0..trajectory.len()).rev() {
        if agents.iter().any(|a| a.optimality_gap[k] > band) {
            break;
        }
        time_to_band = Some(trajectory.times[k]);
    }

    let sup_state = agents
        .iter()
        .flat_map(|a| {
            a.states
                .iter()
                .chain(&a.theta_hat)
                .map(|v| v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
                .chain(a.r.iter().chain(&a.lambda).map(|v| v.abs()))
        })
        .fold(0.0, f64::max);

    Summary {
        t_final: trajectory.times[last],
        y_star: trajectory.y_star,
        max_final_gap: final_gap.iter().copied().fold(0.0, f64::max),
        max_tracking_error: final_tracking_error.iter().copied().fold(0.0, f64::max),
        final_outputs,
        final_gap,
        consensus_spread: spread,
        final_tracking_error,
        final_parameter_error,
        lambda_sum_drift,
        band,
        time_to_band,
        sup_state,
    }
}

impl Summary {
    /// Flat `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t_final = {}", self.t_final);
        let _ = writeln!(s, "y_star = {}", self.y_star);
        let _ = writeln!(s, "max_final_gap = {}", self.max_final_gap);
        let _ = writeln!(s, "consensus_spread = {}", self.consensus_spread);
        let _ = writeln!(s, "max_tracking_error = {}", self.max_tracking_error);
        let _ = writeln!(s, "lambda_sum_drift = {}", self.lambda_sum_drift);
        let _ = writeln!(s, "band = {}", self.band);
        match self.time_to_band {
            Some(t) => {
                let _ = writeln!(s, "time_to_band = {t}");
            }
            None => {
                let _ = writeln!(s, "time_to_band = never");
            }
        }
        let _ = writeln!(s, "sup_state = {}", self.sup_state);
        for (i, y) in self.final_outputs.iter().enumerate() {
            let id = i + 1;
            let _ = writeln!(s, "agent{id}.final_output = {y}");
            let _ = writeln!(s, "agent{id}.final_gap = {}", self.final_gap[i]);
            let _ = writeln!(
                s,
                "agent{id}.final_tracking_error = {}",
                self.final_tracking_error[i]
            );
            for (j, e) in self.final_parameter_error[i].iter().enumerate() {
                let _ = writeln!(s, "agent{id}.theta_error_{} = {e}", j + 1);
            }
        }
        s
    }

    pub fn parameter_error_norm(&self, agent: usize) -> f64 {
        norm(&self.final_parameter_error[agent])
    }
}
