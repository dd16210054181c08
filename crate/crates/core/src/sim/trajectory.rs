use std::io::{Read, Write};

use crate::control::error_transform;
use crate::error::{Error, Result};

use super::Scenario;

/// Recorded series of one agent, one entry per trajectory sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentTrace {
    pub states: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub u: Vec<f64>,
    pub theta_hat: Vec<Vec<f64>>,
    /// `||x_hat||`.
    pub tracking_error: Vec<f64>,
    /// `|y - y*|`.
    pub optimality_gap: Vec<f64>,
    /// `||theta_hat - theta||`.
    pub parameter_error: Vec<f64>,
    pub true_theta: Vec<f64>,
}

impl AgentTrace {
    pub fn y(&self, k: usize) -> f64 {
        self.states[k][0]
    }

    pub fn outputs(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|x| x[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub agents: Vec<AgentTrace>,
    pub y_star: f64,
}

impl Trajectory {
    pub(crate) fn empty(scenario: &Scenario, y_star: f64) -> Self {
        let agents = scenario
            .agents
            .iter()
            .map(|a| AgentTrace {
                true_theta: a.model.true_theta().to_vec(),
                ..AgentTrace::default()
            })
            .collect();
        Self {
            times: Vec::new(),
            agents,
            y_star,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last sample with `t <= time`.
    pub fn index_at(&self, time: f64) -> usize {
        self.times
            .partition_point(|&t| t <= time + 1e-9)
            .saturating_sub(1)
    }

    /// Recomputes the derived series from the raw ones.
    pub(crate) fn derive(&mut self, scenario: &Scenario) {
        let y_star = self.y_star;
        for (tr, spec) in self.agents.iter_mut().zip(&scenario.agents) {
            let eps = spec.gains.epsilon();
            let theta = spec.model.true_theta();
            tr.true_theta = theta.to_vec();
            tr.tracking_error = tr
                .states
                .iter()
                .zip(&tr.r)
                .map(|(x, &r)| norm(&error_transform(x, r, eps)))
                .collect();
            tr.optimality_gap = tr.states.iter().map(|x| (x[0] - y_star).abs()).collect();
            tr.parameter_error = tr
                .theta_hat
                .iter()
                .map(|th| {
                    th.iter()
                        .zip(theta)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
        }
    }

    fn widths(&self) -> (usize, usize) {
        let n = self
            .agents
            .iter()
            .filter_map(|a| a.states.first())
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        let m = self
            .agents
            .iter()
            .map(|a| a.true_theta.len())
            .max()
            .unwrap_or(0);
        (n, m)
    }

    /// Writes `t,agent,x1..xn,y,r,lambda,u,theta_hat_1..` with one row per
    /// (time, agent). Agents are numbered from 1; agents with lower order or
    /// fewer parameters leave the surplus columns empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let (n, m) = self.widths();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "agent".to_string()];
        header.extend((1..=n).map(|j| format!("x{j}")));
        header.extend(["y", "r", "lambda", "u"].map(String::from));
        header.extend((1..=m).map(|j| format!("theta_hat_{j}")));
        w.write_record(&header)?;

        let mut row: Vec<String> = Vec::with_capacity(header.len());
        for (k, t) in self.times.iter().enumerate() {
            for (i, a) in self.agents.iter().enumerate() {
                row.clear();
                row.push(t.to_string());
                row.push((i + 1).to_string());
                let x = &a.states[k];
                row.extend((0..n).map(|j| x.get(j).map(f64::to_string).unwrap_or_default()));
                row.push(x[0].to_string());
                row.push(a.r[k].to_string());
                row.push(a.lambda[k].to_string());
                row.push(a.u[k].to_string());
                let th = &a.theta_hat[k];
                row.extend((0..m).map(|j| th.get(j).map(f64::to_string).unwrap_or_default()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a trajectory written by [`Trajectory::write_csv`]; the scenario
    /// supplies the true parameters, epsilon and optimum for derived series.
    pub fn read_csv<R: Read>(input: R, scenario: &Scenario) -> Result<Self> {
        let y_star = scenario.y_star()?;
        let mut traj = Trajectory::empty(scenario, y_star);
        let n_agents = scenario.agents.len();
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("trajectory csv is missing column `{name}`")))
        };
        let (t_col, agent_col, r_col, l_col, u_col) = (
            col("t")?,
            col("agent")?,
            col("r")?,
            col("lambda")?,
            col("u")?,
        );

        let field = |rec: &csv::StringRecord, c: usize| -> Result<f64> {
            rec[c].parse::<f64>().map_err(|e| {
                Error::Parse(format!(
                    "line {}: column {}: {e}",
                    line_of(rec),
                    &headers[c]
                ))
            })
        };
        for rec in rdr.records() {
            let rec = rec?;
            let t = field(&rec, t_col)?;
            let agent = field(&rec, agent_col)? as usize;
            if agent == 0 || agent > n_agents {
                return Err(Error::AgentIndex {
                    index: agent,
                    n_agents,
                });
            }
            let i = agent - 1;
            if i == 0 {
                traj.times.push(t);
            } else if traj.times.last() != Some(&t)
                || traj.agents[i].r.len() + 1 != traj.times.len()
            {
                return Err(Error::Parse(format!(
                    "line {}: rows out of order",
                    line_of(&rec)
                )));
            }
            let spec = &scenario.agents[i];
            let x = (1..=spec.model.order())
                .map(|j| col(&format!("x{j}")).and_then(|c| field(&rec, c)))
                .collect::<Result<Vec<_>>>()?;
            let th = (1..=spec.model.n_params())
                .map(|j| col(&format!("theta_hat_{j}")).and_then(|c| field(&rec, c)))
                .collect::<Result<Vec<_>>>()?;
            let tr = &mut traj.agents[i];
            tr.states.push(x);
            tr.r.push(field(&rec, r_col)?);
            tr.lambda.push(field(&rec, l_col)?);
            tr.u.push(field(&rec, u_col)?);
            tr.theta_hat.push(th);
        }
        if traj.agents.iter().any(|a| a.r.len() != traj.times.len()) {
            return Err(Error::Parse("trajectory csv ends mid-sample".into()));
        }
        traj.derive(scenario);
        Ok(traj)
    }
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use crate::control::Variant;
    use crate::sim::tests::paper_scenario;
    use crate::sim::{metrics, run, Trajectory};

    #[test]
    fn csv_roundtrip_reproduces_metrics() {
        let sc = paper_scenario(Variant::Online, 0.2, 2.0);
        let traj = run(&sc).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "t,agent,x1,x2,y,r,lambda,u,theta_hat_1,theta_hat_2,theta_hat_3,theta_hat_4\n"
        ));
        assert_eq!(text.lines().count(), 1 + 4 * traj.len());

        let back = Trajectory::read_csv(buf.as_slice(), &sc).unwrap();
        assert_eq!(back, traj);
        assert_eq!(metrics(&back, 0.05), metrics(&traj, 0.05));
    }

    #[test]
    fn rejects_truncated_csv() {
        let sc = paper_scenario(Variant::Online, 0.2, 0.1);
        let traj = run(&sc).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().collect();
        let truncated = cut[..cut.len() - 1].join("\n");
        assert!(Trajectory::read_csv(truncated.as_bytes(), &sc).is_err());
        let garbled = text.replacen(",1,", ",9,", 1);
        assert!(Trajectory::read_csv(garbled.as_bytes(), &sc).is_err());
    }
}
