//! Intelligent iP/iPD controllers closing the loop on homeostat channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{estimate_from_history, EstimatorConfig, EstimatorError, FEstimate};
use crate::homeostat::{HomeostatChannel, HomeostatError, SINGULARITY_THRESHOLD};
use crate::signals::{SampledSeries, SignalError, TimeGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("tangent gain α = {0} is too close to zero to invert")]
    SingularGain(f64),
    #[error("pole {0} is not strictly in the left half plane")]
    Unstable(f64),
    #[error("gains {0:?} do not place the closed-loop roots strictly in the left half plane")]
    UnstableGains(Gains),
    #[error("controllers exist for homeostat orders 1 and 2, got {0}")]
    UnsupportedOrder(usize),
    #[error("derivative estimator received t = {t} after t = {previous}")]
    TimeOrder { t: f64, previous: f64 },
    #[error("saturation bounds [{0}, {1}] are empty")]
    InvalidSaturation(f64, f64),
    #[error("filter time constant must be finite and non-negative, got {0}")]
    InvalidFilter(f64),
    #[error(transparent)]
    Homeostat(#[from] HomeostatError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Proportional and derivative gains. `kd` is unused for order-1 channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub kp: f64,
    #[serde(default)]
    pub kd: f64,
}

impl Gains {
    pub fn ip(kp: f64) -> Self {
        Self { kp, kd: 0.0 }
    }

    pub fn ipd(kp: f64, kd: f64) -> Self {
        Self { kp, kd }
    }

    /// Hurwitz check of `s + kp` (order 1) or `s² + kd·s + kp` (order 2).
    pub fn validate(&self, order: usize) -> Result<(), ControlError> {
        let ok = match order {
            1 => self.kp > 0.0,
            2 => self.kp > 0.0 && self.kd > 0.0,
            other => return Err(ControlError::UnsupportedOrder(other)),
        };
        if ok && self.kp.is_finite() && self.kd.is_finite() {
            Ok(())
        } else {
            Err(ControlError::UnstableGains(*self))
        }
    }

    /// Roots `(re, im)` of the closed-loop characteristic polynomial.
    pub fn characteristic_roots(&self, order: usize) -> Result<Vec<(f64, f64)>, ControlError> {
        match order {
            1 => Ok(vec![(-self.kp, 0.0)]),
            2 => {
                let half = -0.5 * self.kd;
                let mut disc = half * half - self.kp;
                // a double root is exact in theory; drop the round-off residue
                if disc.abs() <= 4.0 * f64::EPSILON * half * half {
                    disc = 0.0;
                }
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    Ok(vec![(half - r, 0.0), (half + r, 0.0)])
                } else {
                    let r = (-disc).sqrt();
                    Ok(vec![(half, -r), (half, r)])
                }
            }
            other => Err(ControlError::UnsupportedOrder(other)),
        }
    }
}

/// Gains placing a single real pole (order 1) or a double real pole (order 2).
pub fn gains_from_poles(order: usize, pole: f64) -> Result<Gains, ControlError> {
    if !(pole < 0.0) || !pole.is_finite() {
        return Err(ControlError::Unstable(pole));
    }
    match order {
        1 => Ok(Gains::ip(-pole)),
        2 => Ok(Gains::ipd(pole * pole, -2.0 * pole)),
        other => Err(ControlError::UnsupportedOrder(other)),
    }
}

fn check_alpha(alpha: f64) -> Result<(), ControlError> {
    if !alpha.is_finite() || alpha.abs() <= SINGULARITY_THRESHOLD {
        return Err(ControlError::SingularGain(alpha));
    }
    Ok(())
}

/// iP law `Δu = −(F_est + K_P·Δy) / α`.
pub fn ip_control(f_est: f64, dy: f64, gains: &Gains, alpha: f64) -> Result<f64, ControlError> {
    check_alpha(alpha)?;
    Ok(-(f_est + gains.kp * dy) / alpha)
}

/// iPD law `Δu = −(F_est + K_P·Δy + K_D·dΔy/dt) / α`.
pub fn ipd_control(f_est: f64, dy: f64, ddy: f64, gains: &Gains, alpha: f64) -> Result<f64, ControlError> {
    check_alpha(alpha)?;
    Ok(-(f_est + gains.kp * dy + gains.kd * ddy) / alpha)
}

/// Causal estimate of `dΔy/dt` from successive samples.
pub trait DerivativeEstimator: Send {
    fn estimate(&mut self, dy: f64, t: f64) -> Result<f64, ControlError>;
}

/// Backward difference followed by a first-order low-pass with time constant `tau`.
/// The first sample yields zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredDifference {
    tau: f64,
    previous: Option<(f64, f64)>,
    filtered: f64,
}

impl FilteredDifference {
    pub fn new(tau: f64) -> Result<Self, ControlError> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(ControlError::InvalidFilter(tau));
        }
        Ok(Self {
            tau,
            previous: None,
            filtered: 0.0,
        })
    }

    pub fn value(&self) -> f64 {
        self.filtered
    }
}

impl DerivativeEstimator for FilteredDifference {
    fn estimate(&mut self, dy: f64, t: f64) -> Result<f64, ControlError> {
        let Some((t_prev, dy_prev)) = self.previous else {
            self.previous = Some((t, dy));
            return Ok(0.0);
        };
        if !(t > t_prev) {
            return Err(ControlError::TimeOrder { t, previous: t_prev });
        }
        let dt = t - t_prev;
        let raw = (dy - dy_prev) / dt;
        self.filtered += dt / (self.tau + dt) * (raw - self.filtered);
        self.previous = Some((t, dy));
        Ok(self.filtered)
    }
}

/// Free-function form of [`DerivativeEstimator::estimate`].
pub fn derivative_estimate(state: &mut dyn DerivativeEstimator, dy: f64, t: f64) -> Result<f64, ControlError> {
    state.estimate(dy, t)
}

/// Everything one channel reports for a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRecord {
    pub t: f64,
    pub dy: f64,
    pub ddy: f64,
    pub alpha: f64,
    pub f_est: FEstimate,
    /// Applied correction `u − u*` after saturation.
    pub du: f64,
    pub u: f64,
    pub u_nominal: f64,
    pub clamped: bool,
}

/// Per-sample input of a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelInput {
    /// Grid time of the sample.
    pub t: f64,
    /// Measured output `y_j`.
    pub y: f64,
    /// Reference `y_j*(t)`.
    pub y_ref: f64,
    /// Nominal control `u_j*(t)`.
    pub u_nominal: f64,
}

/// A homeostat channel with its gains, estimator and recorded histories.
///
/// At sample `k` the estimator reads the window ending at sample `k − 1`:
/// the `αΔu` applied from `t_k` on is not known before the control is computed.
pub struct ChannelController {
    channel: HomeostatChannel,
    gains: Gains,
    estimator: EstimatorConfig,
    saturation: Option<(f64, f64)>,
    derivative: Box<dyn DerivativeEstimator>,
    dy_history: SampledSeries,
    adu_history: SampledSeries,
}

impl ChannelController {
    pub fn new(
        channel: HomeostatChannel,
        gains: Gains,
        estimator: EstimatorConfig,
        grid: TimeGrid,
        derivative_filter: f64,
    ) -> Result<Self, ControlError> {
        gains.validate(channel.order())?;
        estimator.validate(grid.period())?;
        Ok(Self {
            channel,
            gains,
            estimator,
            saturation: None,
            derivative: Box::new(FilteredDifference::new(derivative_filter)?),
            dy_history: SampledSeries::new(grid),
            adu_history: SampledSeries::new(grid),
        })
    }

    pub fn with_saturation(mut self, min: f64, max: f64) -> Result<Self, ControlError> {
        if !(min <= max) {
            return Err(ControlError::InvalidSaturation(min, max));
        }
        self.saturation = Some((min, max));
        Ok(self)
    }

    /// Replaces the default filtered backward difference.
    pub fn with_derivative_estimator(mut self, estimator: Box<dyn DerivativeEstimator>) -> Self {
        self.derivative = estimator;
        self
    }

    pub fn channel(&self) -> &HomeostatChannel {
        &self.channel
    }

    pub fn gains(&self) -> &Gains {
        &self.gains
    }

    pub fn dy_history(&self) -> &SampledSeries {
        &self.dy_history
    }

    pub fn adu_history(&self) -> &SampledSeries {
        &self.adu_history
    }

    /// Overwrites the recorded histories, for replay and testing.
    pub fn set_histories(&mut self, dy: SampledSeries, adu: SampledSeries) {
        self.dy_history = dy;
        self.adu_history = adu;
    }

    /// Computes `u_j = u_j* + Δu_j` for one sample and records `(Δy, α·Δu)`.
    pub fn step(&mut self, input: ChannelInput) -> Result<ChannelRecord, ControlError> {
        let ChannelInput { t, y, y_ref, u_nominal } = input;
        let dy = y - y_ref;
        let ddy = self.derivative.estimate(dy, t)?;
        let alpha = self.channel.alpha(t)?;
        let order = self.channel.order();

        let k = self.dy_history.len();
        let f_est = if k == 0 {
            FEstimate::warm_up(t)
        } else {
            let t_prev = self.dy_history.grid().time(k - 1);
            let est = estimate_from_history(&self.estimator, order, &self.dy_history, &self.adu_history, t_prev)?;
            FEstimate { at_time: t, ..est }
        };

        // warm-up: proportional correction only
        let du = match order {
            1 => ip_control(f_est.value, dy, &self.gains, alpha)?,
            2 if !f_est.valid => ip_control(0.0, dy, &self.gains, alpha)?,
            2 => ipd_control(f_est.value, dy, ddy, &self.gains, alpha)?,
            other => return Err(ControlError::UnsupportedOrder(other)),
        };
        let mut u = u_nominal + du;
        let mut clamped = false;
        if let Some((lo, hi)) = self.saturation {
            let c = u.clamp(lo, hi);
            clamped = c != u;
            u = c;
        }
        let du = u - u_nominal;
        self.dy_history.push(dy)?;
        self.adu_history.push(alpha * du)?;
        Ok(ChannelRecord {
            t,
            dy,
            ddy,
            alpha,
            f_est,
            du,
            u,
            u_nominal,
            clamped,
        })
    }
}

/// One step of a stand-alone channel; see [`ChannelController::step`].
pub fn channel_step(controller: &mut ChannelController, input: ChannelInput) -> Result<ChannelRecord, ControlError> {
    controller.step(input)
}
