//! Data-driven estimation of the lumped term `F` of a homeostat.
//!
//! Both estimators are weighted integrals of the last `T` seconds of `Δy` and
//! `αΔu`. The weights annihilate the unknown initial conditions, so no
//! derivative of the measurement is ever taken:
//!
//! * order 1: `F = −6/T³ ∫₀ᵀ [(T − 2σ) Δỹ(σ) + σ(T − σ) α̃Δũ(σ)] dσ`
//! * order 2: `F = 60/T⁵ [∫₀ᵀ ((T−σ)² − 4(T−σ)σ + σ²) Δỹ(σ) dσ − ½ ∫₀ᵀ (T−σ)²σ² α̃Δũ(σ) dσ]`

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{window_slice, SampledSeries, SignalError, Window};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("quadrature needs at least 3 samples, got {0}")]
    InsufficientData(usize),
    #[error("Δy and αΔu windows are not aligned ({dy_len} samples over {dy_span} s vs {adu_len} over {adu_span} s)")]
    Misaligned {
        dy_len: usize,
        dy_span: f64,
        adu_len: usize,
        adu_span: f64,
    },
    #[error("no closed-form estimator for homeostat order {0} (orders 1 and 2 are supported)")]
    UnsupportedOrder(usize),
    #[error("estimator window {window} s must be a multiple of the sampling period {h} s spanning at least 5 samples")]
    InvalidWindow { window: f64, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Composite Simpson; an odd interval count closes with Simpson's 3/8 rule on the last three intervals.
    #[default]
    Simpson,
    Trapezoid,
}

/// `∫₀ᵀ weight(σ)·value(σ) dσ` over a uniformly sampled window.
pub fn quadrature(window: &Window, weight: impl Fn(f64) -> f64, rule: QuadratureRule) -> Result<f64, EstimatorError> {
    let n = window.len();
    if n < 3 {
        return Err(EstimatorError::InsufficientData(n));
    }
    let h = window.step();
    let f: Vec<f64> = window.samples().map(|(s, v)| weight(s) * v).collect();
    let intervals = n - 1;
    Ok(match rule {
        QuadratureRule::Trapezoid => {
            let inner: f64 = f[1..intervals].iter().sum();
            h * (0.5 * (f[0] + f[intervals]) + inner)
        }
        QuadratureRule::Simpson => {
            let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
            let mut acc = simpson(&f[..=simpson_end], h);
            if simpson_end < intervals {
                let g = &f[simpson_end..];
                acc += 3.0 * h / 8.0 * (g[0] + 3.0 * g[1] + 3.0 * g[2] + g[3]);
            }
            acc
        }
    })
}

// Composite Simpson over an even number of intervals (an empty range integrates to zero).
fn simpson(f: &[f64], h: f64) -> f64 {
    if f.len() < 3 {
        return 0.0;
    }
    let last = f.len() - 1;
    let odd: f64 = f[1..last].iter().step_by(2).sum();
    let even: f64 = f[2..last].iter().step_by(2).sum();
    h / 3.0 * (f[0] + f[last] + 4.0 * odd + 2.0 * even)
}

fn check_aligned(dy: &Window, adu: &Window) -> Result<(), EstimatorError> {
    let aligned = dy.len() == adu.len() && (dy.span() - adu.span()).abs() <= 1e-12 * dy.span();
    if !aligned {
        return Err(EstimatorError::Misaligned {
            dy_len: dy.len(),
            dy_span: dy.span(),
            adu_len: adu.len(),
            adu_span: adu.span(),
        });
    }
    Ok(())
}

/// Order-1 estimate from windows of `Δỹ` and `α̃Δũ` over the same grid.
pub fn estimate_f_nu1(dy: &Window, adu: &Window, rule: QuadratureRule) -> Result<f64, EstimatorError> {
    check_aligned(dy, adu)?;
    let t = dy.span();
    let a = quadrature(dy, |s| t - 2.0 * s, rule)?;
    let b = quadrature(adu, |s| s * (t - s), rule)?;
    Ok(-6.0 / t.powi(3) * (a + b))
}

/// Order-2 estimate from windows of `Δỹ` and `α̃Δũ` over the same grid.
pub fn estimate_f_nu2(dy: &Window, adu: &Window, rule: QuadratureRule) -> Result<f64, EstimatorError> {
    check_aligned(dy, adu)?;
    let t = dy.span();
    let a = quadrature(
        dy,
        |s| {
            let r = t - s;
            r * r - 4.0 * r * s + s * s
        },
        rule,
    )?;
    let b = quadrature(
        adu,
        |s| {
            let r = t - s;
            r * r * s * s
        },
        rule,
    )?;
    Ok(60.0 / t.powi(5) * (a - 0.5 * b))
}

/// Dispatches on the homeostat order.
pub fn estimate_f(order: usize, dy: &Window, adu: &Window, rule: QuadratureRule) -> Result<f64, EstimatorError> {
    match order {
        1 => estimate_f_nu1(dy, adu, rule),
        2 => estimate_f_nu2(dy, adu, rule),
        other => Err(EstimatorError::UnsupportedOrder(other)),
    }
}

/// Window length `T` and quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Window length in seconds.
    pub window: f64,
    #[serde(default)]
    pub rule: QuadratureRule,
}

impl EstimatorConfig {
    /// Default window: 30 sampling periods.
    pub const DEFAULT_PERIODS: usize = 30;

    pub fn new(window: f64, rule: QuadratureRule) -> Self {
        Self { window, rule }
    }

    pub fn default_for(h: f64) -> Self {
        Self::new(Self::DEFAULT_PERIODS as f64 * h, QuadratureRule::Simpson)
    }

    /// Checks that the window is a multiple of `h` holding at least 5 samples.
    pub fn validate(&self, h: f64) -> Result<usize, EstimatorError> {
        let m = (self.window / h).round();
        let ok = self.window.is_finite()
            && self.window > 0.0
            && m >= 4.0
            && (m * h - self.window).abs() <= 1e-9 * self.window;
        if !ok {
            return Err(EstimatorError::InvalidWindow { window: self.window, h });
        }
        Ok(m as usize)
    }
}

/// Estimate of `F` at one instant; `valid` is false while the window is still filling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FEstimate {
    pub value: f64,
    pub at_time: f64,
    pub valid: bool,
}

impl FEstimate {
    pub fn warm_up(at_time: f64) -> Self {
        Self {
            value: 0.0,
            at_time,
            valid: false,
        }
    }
}

/// Estimate from recorded histories over the window ending at grid time `t`.
/// Before a full window exists the estimate is zero and marked invalid.
pub fn estimate_from_history(
    config: &EstimatorConfig,
    order: usize,
    dy: &SampledSeries,
    adu: &SampledSeries,
    t: f64,
) -> Result<FEstimate, EstimatorError> {
    let dy_w = match window_slice(dy, t, config.window) {
        Ok(w) => w,
        Err(SignalError::WarmUp { .. }) => return Ok(FEstimate::warm_up(t)),
        Err(e) => return Err(e.into()),
    };
    let adu_w = window_slice(adu, t, config.window)?;
    let value = estimate_f(order, &dy_w, &adu_w, config.rule)?;
    Ok(FEstimate {
        value,
        at_time: t,
        valid: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::TimeGrid;
    use proptest::prelude::*;

    fn w(n: usize, f: impl Fn(f64) -> f64) -> Window {
        Window::from_fn(1.0, n, f).unwrap()
    }

    #[test]
    fn quadrature_examples() {
        let one = w(101, |_| 1.0);
        assert_eq!(quadrature(&one, |_| 1.0, QuadratureRule::Simpson).unwrap(), 1.0);
        let x = w(101, |s| s);
        let cubic = quadrature(&x, |s| s * s, QuadratureRule::Simpson).unwrap();
        assert!((cubic - 0.25).abs() < 1e-12);
        let quartic = quadrature(&x, |s| s.powi(3), QuadratureRule::Simpson).unwrap();
        assert!((quartic - 0.2).abs() < 1e-8);
    }

    #[test]
    fn odd_interval_counts_stay_exact_for_cubics() {
        for n in [4, 6, 10, 100] {
            let x = w(n, |s| s);
            let cubic = quadrature(&x, |s| s * s, QuadratureRule::Simpson).unwrap();
            assert!((cubic - 0.25).abs() < 1e-13, "n={n}: {cubic}");
        }
    }

    #[test]
    fn trapezoid_rule() {
        let x = w(3, |s| s);
        assert!((quadrature(&x, |_| 1.0, QuadratureRule::Trapezoid).unwrap() - 0.5).abs() < 1e-15);
        let sq = w(11, |s| s * s);
        let got = quadrature(&sq, |_| 1.0, QuadratureRule::Trapezoid).unwrap();
        // trapezoid error h²/12·(f'(1) − f'(0)) = 0.01/6
        assert!((got - (1.0 / 3.0 + 0.01 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let two = w(2, |s| s);
        assert_eq!(
            quadrature(&two, |_| 1.0, QuadratureRule::Simpson),
            Err(EstimatorError::InsufficientData(2))
        );
    }

    #[test]
    fn order_one_examples() {
        let zero = w(101, |_| 0.0);
        assert_eq!(estimate_f_nu1(&zero, &zero, QuadratureRule::Simpson).unwrap(), 0.0);
        let ramp = w(101, |s| 2.0 * s);
        assert!((estimate_f_nu1(&ramp, &zero, QuadratureRule::Simpson).unwrap() - 2.0).abs() < 1e-9);
        let three = w(101, |_| 3.0);
        assert!((estimate_f_nu1(&zero, &three, QuadratureRule::Simpson).unwrap() + 3.0).abs() < 1e-9);
    }

    #[test]
    fn order_two_examples() {
        let zero = w(101, |_| 0.0);
        assert_eq!(estimate_f_nu2(&zero, &zero, QuadratureRule::Simpson).unwrap(), 0.0);
        let sq = w(101, |s| s * s);
        assert!((estimate_f_nu2(&sq, &zero, QuadratureRule::Simpson).unwrap() - 2.0).abs() < 1e-6);
        let four = w(101, |_| 4.0);
        assert!((estimate_f_nu2(&zero, &four, QuadratureRule::Simpson).unwrap() + 4.0).abs() < 1e-6);
    }

    #[test]
    fn misaligned_and_unsupported() {
        let a = w(11, |s| s);
        let b = w(12, |s| s);
        assert!(matches!(
            estimate_f_nu1(&a, &b, QuadratureRule::Simpson),
            Err(EstimatorError::Misaligned { .. })
        ));
        let c = Window::from_fn(2.0, 11, |s| s).unwrap();
        assert!(matches!(
            estimate_f_nu2(&a, &c, QuadratureRule::Simpson),
            Err(EstimatorError::Misaligned { .. })
        ));
        assert_eq!(
            estimate_f(3, &a, &a, QuadratureRule::Simpson),
            Err(EstimatorError::UnsupportedOrder(3))
        );
    }

    #[test]
    fn config_validation() {
        assert_eq!(EstimatorConfig::default_for(0.01).validate(0.01).unwrap(), 30);
        assert!(EstimatorConfig::new(0.03, QuadratureRule::Simpson)
            .validate(0.01)
            .is_err());
        assert!(EstimatorConfig::new(0.305, QuadratureRule::Simpson)
            .validate(0.01)
            .is_err());
        assert!(EstimatorConfig::new(0.04, QuadratureRule::Simpson)
            .validate(0.01)
            .is_ok());
    }

    #[test]
    fn history_warm_up_then_valid() {
        let grid = TimeGrid::new(0.0, 0.1, 20).unwrap();
        let cfg = EstimatorConfig::new(0.5, QuadratureRule::Simpson);
        // Δẏ = F + αΔu with F = 1.5, αΔu = −0.5 constant
        let dy = SampledSeries::from_values(grid, (0..=20).map(|k| 1.0 + 1.0 * grid.time(k)).collect()).unwrap();
        let adu = SampledSeries::from_values(grid, vec![-0.5; 21]).unwrap();
        let early = estimate_from_history(&cfg, 1, &dy, &adu, 0.4).unwrap();
        assert_eq!(early, FEstimate::warm_up(0.4));
        let ready = estimate_from_history(&cfg, 1, &dy, &adu, 0.5).unwrap();
        assert!(ready.valid);
        assert!((ready.value - 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn linear_in_inputs(
            a in prop::collection::vec(-10.0f64..10.0, 31),
            b in prop::collection::vec(-10.0f64..10.0, 31),
            c in prop::collection::vec(-10.0f64..10.0, 31),
            d in prop::collection::vec(-10.0f64..10.0, 31),
            k in -5.0f64..5.0,
            order in 1usize..=2,
        ) {
            let mk = |v: &Vec<f64>| Window::new(0.3, v.clone()).unwrap();
            let sum = |x: &Vec<f64>, y: &Vec<f64>| Window::new(0.3, x.iter().zip(y).map(|(p, q)| p + k * q).collect()).unwrap();
            let r = QuadratureRule::Simpson;
            let lhs = estimate_f(order, &sum(&a, &c), &sum(&b, &d), r).unwrap();
            let e1 = estimate_f(order, &mk(&a), &mk(&b), r).unwrap();
            let e2 = k * estimate_f(order, &mk(&c), &mk(&d), r).unwrap();
            let tol = 1e-12 * (lhs.abs() + e1.abs() + e2.abs()) + 1e-9;
            prop_assert!((lhs - (e1 + e2)).abs() <= tol);
        }
    }
}
