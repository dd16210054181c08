//! Static SVG figures: outputs against time and the parameter estimates.

use std::path::Path;

use anyhow::{anyhow, Result};
use embedopt::sim::Trajectory;
use plotters::prelude::*;

use crate::output::write_atomic;

const SIZE: (u32, u32) = (900, 560);

fn colour(i: usize) -> RGBColor {
    const PALETTE: [RGBColor; 6] = [
        RGBColor(31, 119, 180),
        RGBColor(255, 127, 14),
        RGBColor(44, 160, 44),
        RGBColor(214, 39, 40),
        RGBColor(148, 103, 189),
        RGBColor(140, 86, 75),
    ];
    PALETTE[i % PALETTE.len()]
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    colour: RGBColor,
    dashed: bool,
}

fn draw_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    caption: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()>
where
    DB::ErrorType: 'static,
{
    let t_max = series
        .iter()
        .flat_map(|s| s.points.last())
        .map(|p| p.0)
        .fold(0.0, f64::max)
        .max(1e-9);
    let (lo, hi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(area)
        .caption(caption, ("sans-serif", 18))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..t_max, lo..hi)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc(y_label)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for s in series {
        let style = ShapeStyle::from(&s.colour).stroke_width(2);
        let drawn = if s.dashed {
            chart.draw_series(DashedLineSeries::new(s.points.iter().copied(), 6, 4, style))
        } else {
            chart.draw_series(LineSeries::new(s.points.iter().copied(), style))
        }
        .map_err(|e| anyhow!("{e}"))?;
        let c = s.colour;
        drawn
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], c.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

fn render(path: &Path, panels: &[(String, String, Vec<Series>)]) -> Result<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (SIZE.0, SIZE.1 * panels.len() as u32))
            .into_drawing_area();
        root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
        for (area, (caption, y_label, series)) in
            root.split_evenly((panels.len(), 1)).iter().zip(panels)
        {
            draw_panel(area, caption, y_label, series)?;
        }
        root.present().map_err(|e| anyhow!("{e}"))?;
    }
    write_atomic(path, svg.as_bytes())
}

fn estimate_panel(traj: &Trajectory, j: usize) -> (String, String, Vec<Series>) {
    let mut series = Vec::new();
    for (i, a) in traj.agents.iter().enumerate() {
        if j >= a.true_theta.len() {
            continue;
        }
        series.push(Series {
            label: format!("agent {}", i + 1),
            points: traj
                .times
                .iter()
                .zip(&a.theta_hat)
                .map(|(&t, th)| (t, th[j]))
                .collect(),
            colour: colour(i),
            dashed: false,
        });
        let truth = a.true_theta[j];
        series.push(Series {
            label: format!("true value, agent {}", i + 1),
            points: vec![(0.0, truth), (*traj.times.last().unwrap_or(&0.0), truth)],
            colour: colour(i),
            dashed: true,
        });
    }
    (
        format!("parameter estimate {}", j + 1),
        format!("theta_hat_{}", j + 1),
        series,
    )
}

/// Writes `outputs.svg`, `theta_12.svg` and `theta_34.svg` into `dir`.
pub fn write_plots(dir: &Path, traj: &Trajectory) -> Result<Vec<String>> {
    let mut outputs: Vec<Series> = traj
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| Series {
            label: format!("y_{}", i + 1),
            points: traj.times.iter().copied().zip(a.outputs()).collect(),
            colour: colour(i),
            dashed: false,
        })
        .collect();
    outputs.push(Series {
        label: format!("y* = {:.4}", traj.y_star),
        points: vec![
            (0.0, traj.y_star),
            (*traj.times.last().unwrap_or(&0.0), traj.y_star),
        ],
        colour: BLACK,
        dashed: true,
    });
    render(
        &dir.join("outputs.svg"),
        &[("agent outputs".into(), "y".into(), outputs)],
    )?;

    let n_params = traj
        .agents
        .iter()
        .map(|a| a.true_theta.len())
        .max()
        .unwrap_or(0);
    let mut written = vec!["outputs.svg".to_string()];
    for (name, pair) in [("theta_12.svg", [0, 1]), ("theta_34.svg", [2, 3])] {
        let panels: Vec<_> = pair
            .iter()
            .filter(|&&j| j < n_params)
            .map(|&j| estimate_panel(traj, j))
            .collect();
        if panels.is_empty() {
            continue;
        }
        render(&dir.join(name), &panels)?;
        written.push(name.to_string());
    }
    Ok(written)
}
