//! One-parameter sweeps over a scenario file.

use std::fmt;
use std::str::FromStr;

use crate::config::{Overrides, ScenarioFile};
use crate::error::{Error, Result};
use crate::sim::{metrics, run, Summary};

/// Band used for `time_to_band` in sweep summaries.
pub const SWEEP_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Epsilon,
    Sigma,
    LambdaGain,
    Step,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Sigma => "sigma",
            SweepParam::LambdaGain => "lambda_gain",
            SweepParam::Step => "step",
        }
    }

    fn apply(self, mut o: Overrides, value: f64) -> Overrides {
        match self {
            SweepParam::Epsilon => o.epsilon = Some(value),
            SweepParam::Sigma => o.sigma = Some(value),
            SweepParam::LambdaGain => o.lambda_gain = Some(value),
            SweepParam::Step => o.step = Some(value),
        }
        o
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epsilon" => Ok(SweepParam::Epsilon),
            "sigma" => Ok(SweepParam::Sigma),
            "lambda_gain" => Ok(SweepParam::LambdaGain),
            "step" => Ok(SweepParam::Step),
            other => Err(Error::Invalid(format!(
                "unknown sweep parameter `{other}` (expected epsilon, sigma, lambda_gain or step)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum CellOutcome {
    Ok(Summary),
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: f64,
    pub outcome: CellOutcome,
}

impl SweepCell {
    pub fn summary(&self) -> Option<&Summary> {
        match &self.outcome {
            CellOutcome::Ok(s) => Some(s),
            CellOutcome::Failed(_) => None,
        }
    }
}

/// Runs one cell; failures are captured rather than returned.
pub fn run_cell(
    base: &ScenarioFile,
    overrides: &Overrides,
    param: SweepParam,
    value: f64,
) -> SweepCell {
    let outcome = (|| {
        let mut file = base.clone();
        file.apply(&param.apply(overrides.clone(), value));
        let scenario = file.build()?;
        Ok::<_, Error>(metrics(&run(&scenario)?, SWEEP_BAND))
    })();
    SweepCell {
        value,
        outcome: match outcome {
            Ok(s) => CellOutcome::Ok(s),
            Err(e) => CellOutcome::Failed(e.to_string()),
        },
    }
}

/// Sequential sweep, one cell per value in the given order.
pub fn sweep(
    base: &ScenarioFile,
    overrides: &Overrides,
    param: SweepParam,
    values: &[f64],
) -> Vec<SweepCell> {
    values
        .iter()
        .map(|&v| run_cell(base, overrides, param, v))
        .collect()
}

/// CSV table with one row per cell.
pub fn table_csv(param: SweepParam, cells: &[SweepCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        param.as_str(),
        "status",
        "max_final_gap",
        "consensus_spread",
        "max_tracking_error",
        "lambda_sum_drift",
        "message",
    ])?;
    for c in cells {
        let row = match &c.outcome {
            CellOutcome::Ok(s) => [
                c.value.to_string(),
                "ok".into(),
                s.max_final_gap.to_string(),
                s.consensus_spread.to_string(),
                s.max_tracking_error.to_string(),
                s.lambda_sum_drift.to_string(),
                String::new(),
            ],
            CellOutcome::Failed(msg) => [
                c.value.to_string(),
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                msg.clone(),
            ],
        };
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
