//! Local cost functions, the global gradient and the optimum oracle.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A differentiable scalar cost with an analytic gradient.
#[derive(Clone)]
pub struct LocalCost {
    name: String,
    value: ScalarFn,
    gradient: ScalarFn,
    /// Strong-convexity constant, when known.
    pub convexity_lower: Option<f64>,
    /// Gradient Lipschitz constant, when known.
    pub lipschitz_upper: Option<f64>,
}

impl fmt::Debug for LocalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalCost")
            .field("name", &self.name)
            .field("convexity_lower", &self.convexity_lower)
            .field("lipschitz_upper", &self.lipschitz_upper)
            .finish()
    }
}

impl LocalCost {
    pub fn new<F, G>(name: impl Into<String>, value: F, gradient: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            convexity_lower: None,
            lipschitz_upper: None,
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.convexity_lower = Some(lower);
        self.lipschitz_upper = Some(upper);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, y: f64) -> f64 {
        (self.value)(y)
    }

    pub fn gradient(&self, y: f64) -> f64 {
        (self.gradient)(y)
    }

    /// Smallest and largest gradient secant slope between neighbouring
    /// samples on `[lo, hi]`. For a strongly convex cost the first entry is a
    /// sampled estimate of the convexity constant on that interval.
    pub fn sampled_curvature_bounds(&self, lo: f64, hi: f64, spacing: f64) -> (f64, f64) {
        let n = ((hi - lo) / spacing).ceil().max(1.0) as usize;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut prev = (lo, self.gradient(lo));
        for k in 1..=n {
            let y = (lo + k as f64 * spacing).min(hi);
            let g = self.gradient(y);
            let slope = (g - prev.1) / (y - prev.0);
            min = min.min(slope);
            max = max.max(slope);
            prev = (y, g);
        }
        (min, max)
    }
}

/// The builtin cost families that scenario files can name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuiltinCost {
    /// `(y - c)^2`.
    Quadratic { center: f64 },
    /// `y^2 / (20 sqrt(y^2 + 1)) + y^2`.
    PaperF2,
    /// `y^2 / (80 ln(y^2 + 2)) + (y - 5)^2`.
    PaperF3,
    /// `ln(e^{-0.05 y} + e^{0.05 y}) + y^2`.
    PaperF4,
    /// `(y - y0)^2`; with `y0` an initial output this gives average consensus.
    Consensus { initial: f64 },
}

impl BuiltinCost {
    pub fn parse(kind: &str, params: &[f64]) -> Result<Self> {
        let expect = |expected: usize| -> Result<()> {
            if params.len() == expected {
                Ok(())
            } else {
                Err(Error::CostParams {
                    kind: kind.to_string(),
                    expected,
                    got: params.len(),
                })
            }
        };
        let cost = match kind {
            "quadratic" => {
                expect(1)?;
                BuiltinCost::Quadratic { center: params[0] }
            }
            "consensus" => {
                expect(1)?;
                BuiltinCost::Consensus { initial: params[0] }
            }
            "paper_f2" => {
                expect(0)?;
                BuiltinCost::PaperF2
            }
            "paper_f3" => {
                expect(0)?;
                BuiltinCost::PaperF3
            }
            "paper_f4" => {
                expect(0)?;
                BuiltinCost::PaperF4
            }
            other => return Err(Error::UnknownCost(other.to_string())),
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid(format!(
                "cost `{kind}` has non-finite parameters"
            )));
        }
        Ok(cost)
    }

    pub fn build(self) -> LocalCost {
        match self {
            BuiltinCost::Quadratic { center } => LocalCost::new(
                format!("quadratic({center})"),
                move |y| (y - center).powi(2),
                move |y| 2.0 * (y - center),
            )
            .with_bounds(2.0, 2.0),
            BuiltinCost::Consensus { initial } => LocalCost::new(
                format!("consensus({initial})"),
                move |y| (y - initial).powi(2),
                move |y| 2.0 * (y - initial),
            )
            .with_bounds(2.0, 2.0),
            BuiltinCost::PaperF2 => LocalCost::new("paper_f2", f2, f2_grad),
            BuiltinCost::PaperF3 => LocalCost::new("paper_f3", f3, f3_grad),
            BuiltinCost::PaperF4 => LocalCost::new("paper_f4", f4, f4_grad),
        }
    }
}

pub fn builtin_cost(kind: &str, params: &[f64]) -> Result<LocalCost> {
    Ok(BuiltinCost::parse(kind, params)?.build())
}

fn f2(y: f64) -> f64 {
    let y2 = y * y;
    y2 / (20.0 * (y2 + 1.0).sqrt()) + y2
}

fn f2_grad(y: f64) -> f64 {
    let y2 = y * y;
    y * (y2 + 2.0) / (20.0 * (y2 + 1.0).powf(1.5)) + 2.0 * y
}

fn f3(y: f64) -> f64 {
    let y2 = y * y;
    y2 / (80.0 * (y2 + 2.0).ln()) + (y - 5.0).powi(2)
}

fn f3_grad(y: f64) -> f64 {
    let g = y * y + 2.0;
    let ln = g.ln();
    (2.0 * y * ln - 2.0 * y.powi(3) / g) / (80.0 * ln * ln) + 2.0 * (y - 5.0)
}

fn f4(y: f64) -> f64 {
    // ln(e^{-a} + e^{a}) = |a| + ln(1 + e^{-2|a|})
    let a = (0.05 * y).abs();
    a + (-2.0 * a).exp().ln_1p() + y * y
}

fn f4_grad(y: f64) -> f64 {
    0.05 * (0.05 * y).tanh() + 2.0 * y
}

/// The per-agent costs; the global cost is their sum.
#[derive(Debug, Clone)]
pub struct CostSet(Vec<LocalCost>);

impl CostSet {
    pub fn new(costs: Vec<LocalCost>) -> Self {
        Self(costs)
    }

    /// The four local costs of the Van der Pol network example.
    pub fn paper() -> Self {
        Self(vec![
            BuiltinCost::Quadratic { center: 8.0 }.build(),
            BuiltinCost::PaperF2.build(),
            BuiltinCost::PaperF3.build(),
            BuiltinCost::PaperF4.build(),
        ])
    }

    pub fn quadratics(centers: &[f64]) -> Self {
        Self(
            centers
                .iter()
                .map(|&center| BuiltinCost::Quadratic { center }.build())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &LocalCost {
        &self.0[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &LocalCost> {
        self.0.iter()
    }

    pub fn global_value(&self, y: f64) -> f64 {
        self.0.iter().map(|c| c.value(y)).sum()
    }

    pub fn global_gradient(&self, y: f64) -> f64 {
        self.0.iter().map(|c| c.gradient(y)).sum()
    }

    /// Bisection on the (monotone) global gradient.
    ///
    /// Returns the first midpoint with `|grad| <= tol`, or the final midpoint
    /// once the bracket has collapsed to floating-point resolution.
    pub fn minimize_global(&self, bracket: (f64, f64), tol: f64) -> Result<f64> {
        crate::error::positive("tol", tol)?;
        let (mut lo, mut hi) = if bracket.0 <= bracket.1 {
            bracket
        } else {
            (bracket.1, bracket.0)
        };
        let (g_lo, g_hi) = (self.global_gradient(lo), self.global_gradient(hi));
        if g_lo.abs() <= tol {
            return Ok(lo);
        }
        if g_hi.abs() <= tol {
            return Ok(hi);
        }
        if !(g_lo < 0.0 && g_hi > 0.0) {
            return Err(Error::Bracket {
                lo,
                hi,
                grad_lo: g_lo,
                grad_hi: g_hi,
            });
        }
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..2000 {
            mid = 0.5 * (lo + hi);
            let g = self.global_gradient(mid);
            if g.abs() <= tol || mid <= lo || mid >= hi {
                break;
            }
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid)
    }
}

pub fn global_gradient(costs: &CostSet, y: f64) -> f64 {
    costs.global_gradient(y)
}

pub fn minimize_global(costs: &CostSet, bracket: (f64, f64), tol: f64) -> Result<f64> {
    costs.minimize_global(bracket, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn central_diff(c: &LocalCost, y: f64, h: f64) -> f64 {
        (c.value(y + h) - c.value(y - h)) / (2.0 * h)
    }

    fn all_builtins() -> Vec<LocalCost> {
        vec![
            builtin_cost("quadratic", &[8.0]).unwrap(),
            builtin_cost("paper_f2", &[]).unwrap(),
            builtin_cost("paper_f3", &[]).unwrap(),
            builtin_cost("paper_f4", &[]).unwrap(),
            builtin_cost("consensus", &[-1.5]).unwrap(),
        ]
    }

    #[test]
    fn quadratic_minimum() {
        let c = builtin_cost("quadratic", &[8.0]).unwrap();
        assert_eq!(c.value(8.0), 0.0);
        assert_eq!(c.gradient(8.0), 0.0);
    }

    #[test]
    fn f4_is_even_with_log2_at_origin() {
        let c = builtin_cost("paper_f4", &[]).unwrap();
        assert_abs_diff_eq!(c.value(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(c.gradient(0.0), 0.0);
        for y in [0.3, 2.0, 40.0, 900.0] {
            assert_abs_diff_eq!(c.value(y), c.value(-y), epsilon = 1e-9 * c.value(y));
        }
        let naive = |y: f64| ((-0.05 * y).exp() + (0.05 * y).exp()).ln() + y * y;
        assert_abs_diff_eq!(c.value(3.7), naive(3.7), epsilon = 1e-12);
    }

    #[test]
    fn f2_gradient_matches_finite_difference_at_one() {
        let c = builtin_cost("paper_f2", &[]).unwrap();
        assert_abs_diff_eq!(c.gradient(1.0), central_diff(&c, 1.0, 1e-5), epsilon = 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences_on_grid() {
        for c in all_builtins() {
            for k in -10..=10 {
                let y = k as f64;
                let g = c.gradient(y);
                let fd = central_diff(&c, y, 1e-5);
                assert!(
                    (g - fd).abs() <= 1e-5 * (1.0 + g.abs()),
                    "{} at {y}: {g} vs {fd}",
                    c.name()
                );
            }
        }
    }

    #[test]
    fn global_gradient_examples() {
        let q = CostSet::quadratics(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(q.global_gradient(2.5), 0.0);
        assert!(CostSet::paper().global_gradient(3.24).abs() < 0.05);
        assert_eq!(CostSet::quadratics(&[8.0]).global_gradient(0.0), -16.0);
    }

    #[test]
    fn paper_global_gradient_is_strictly_increasing() {
        let costs = CostSet::paper();
        let mut prev = costs.global_gradient(-100.0);
        for k in 1..=20_000 {
            let g = costs.global_gradient(-100.0 + k as f64 * 1e-2);
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn paper_costs_are_strongly_convex_on_sampled_interval() {
        for c in CostSet::paper().iter() {
            let (lo, hi) = c.sampled_curvature_bounds(-100.0, 100.0, 0.01);
            assert!(lo > 1.9 && hi < 2.2, "{}: [{lo}, {hi}]", c.name());
        }
    }

    #[test]
    fn minimizer_examples() {
        let y = CostSet::paper()
            .minimize_global((-100.0, 100.0), 1e-8)
            .unwrap();
        assert!((y - 3.24).abs() < 0.005, "{y}");
        let q = CostSet::quadratics(&[1.0, 2.0, 3.0, 4.0]).minimize_global((-100.0, 100.0), 1e-10);
        assert_abs_diff_eq!(q.unwrap(), 2.5, epsilon = 1e-10);
        let single = CostSet::quadratics(&[8.0]).minimize_global((-100.0, 100.0), 1e-10);
        assert_abs_diff_eq!(single.unwrap(), 8.0, epsilon = 1e-10);
    }

    #[test]
    fn minimizer_is_idempotent() {
        let costs = CostSet::paper();
        let tol = 1e-8;
        let y = costs.minimize_global((-100.0, 100.0), tol).unwrap();
        assert!(costs.global_gradient(y).abs() <= tol);
        let again = costs.minimize_global((y - 0.5, y + 0.3), tol).unwrap();
        assert!((again - y).abs() <= 2.0 * tol, "{y} vs {again}");
    }

    #[test]
    fn bracket_must_straddle_root() {
        let costs = CostSet::paper();
        assert!(matches!(
            costs.minimize_global((10.0, 20.0), 1e-8),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn unknown_kind_and_bad_params() {
        assert!(matches!(
            builtin_cost("cubic", &[]),
            Err(Error::UnknownCost(_))
        ));
        assert!(matches!(
            builtin_cost("quadratic", &[]),
            Err(Error::CostParams {
                expected: 1,
                got: 0,
                ..
            })
        ));
        assert!(builtin_cost("paper_f2", &[1.0]).is_err());
        assert!(builtin_cost("quadratic", &[f64::NAN]).is_err());
    }
}
