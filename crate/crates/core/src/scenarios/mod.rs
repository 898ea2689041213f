//! Declarative scenarios, the closed-loop runner, metrics and CSV export.
//!
//! A scenario is a JSON document naming a built-in plant, the reference of
//! every flat output, one homeostat channel per control, the injected
//! mismatches and the timing. See `docs/scenario-format.md` for the format.

mod export;
mod metrics;
mod runner;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{gains_from_poles, ControlError, Gains};
use crate::estimators::EstimatorConfig;
use crate::homeostat::{
    example_relation_u1, example_relation_u2, validate_flat_io, FlatIoProfile, HomeostatError, ImplicitFlatRelation,
};
use crate::plant::{ExamplePlant, MismatchSpec, PlantError, PlantModel, UltraLocalPlant};
use crate::signals::{ReferenceTrajectory, SignalError};

pub use export::{csv_header, export_csv, write_csv};
pub use metrics::{compute_metrics, Metrics, TAIL_FRACTION};
pub use runner::{run_scenario, run_scenario_partial, PartialRun, SimLog, SimRecord};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown built-in scenario `{0}`")]
    UnknownBuiltin(String),
    #[error("run failed at t = {t}{}: {message}", channel.map(|c| format!(" on channel {}", c + 1)).unwrap_or_default())]
    Runtime {
        t: f64,
        channel: Option<usize>,
        message: String,
    },
    #[error("metrics need a non-empty log")]
    EmptyLog,
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("export failed: {0}")]
    Csv(#[from] csv::Error),
}

impl ScenarioError {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Self::Invalid(e.to_string())
    }
}

/// Built-in plant models, referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantSpec {
    /// The two-input, two-output example system.
    Example,
    /// `y^(ν) = F + α·u` with constant `F`, `α`.
    UltraLocal { order: usize, disturbance: f64, alpha: f64 },
}

impl PlantSpec {
    pub fn build(&self) -> Box<dyn PlantModel> {
        match *self {
            PlantSpec::Example => Box::new(ExamplePlant),
            PlantSpec::UltraLocal {
                order,
                disturbance,
                alpha,
            } => Box::new(UltraLocalPlant {
                order,
                disturbance,
                alpha,
            }),
        }
    }

    /// The implicit flat relation solved for control `j`, as known to the controller.
    /// The ultra-local model's relation ignores `F`, which is what the estimator recovers.
    pub fn relation(&self, control: usize) -> Option<ImplicitFlatRelation> {
        match *self {
            PlantSpec::Example => match control {
                0 => Some(example_relation_u1()),
                1 => Some(example_relation_u2()),
                _ => None,
            },
            PlantSpec::UltraLocal { order, alpha, .. } if control == 0 => {
                Some(ImplicitFlatRelation::new(vec![order], 0, move |p| {
                    p.y(0, order) - alpha * p.control
                }))
            }
            PlantSpec::UltraLocal { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    #[serde(default)]
    pub t0: f64,
    pub duration: f64,
    pub sampling_period: f64,
    /// RK4 steps per sampling period.
    #[serde(default = "one")]
    pub substeps: usize,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// One smooth transition of a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub start: f64,
    pub end: f64,
    pub to: f64,
}

/// A flat-output reference: constant `initial`, then degree-7 smoothsteps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub initial: f64,
    #[serde(default)]
    pub transitions: Vec<Transition>,
}

impl ReferenceSpec {
    pub fn build(&self) -> Result<ReferenceTrajectory, SignalError> {
        let steps: Vec<_> = self.transitions.iter().map(|t| (t.start, t.end, t.to)).collect();
        ReferenceTrajectory::smoothstep_sequence(self.initial, &steps)
    }
}

/// Where a channel's tangent gain comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSpec {
    /// Tangent linearization of the plant's flat relation, finite-difference partials.
    Derived,
    /// `α = y1*²`.
    Y1RefSquared,
    /// `α = ẏ1*/y1* − 1`.
    Y1RefLogRateMinusOne,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Index of the regulated flat output.
    pub output: usize,
    /// Homeostat order; derived from the relation when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub alpha: AlphaSpec,
    /// Real closed-loop pole, single for order 1 and double for order 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole: Option<f64>,
    /// Explicit gains, used when `pole` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Gains>,
    /// Defaults to 30 sampling periods with Simpson's rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorConfig>,
    /// Low-pass time constant of the derivative estimate; defaults to 5 sampling periods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative_filter: Option<f64>,
    /// Bounds `[min, max]` on the total control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<[f64; 2]>,
}

impl ChannelSpec {
    pub fn gains(&self, order: usize) -> Result<Gains, ControlError> {
        let gains = match (self.pole, self.gains) {
            (Some(p), _) => gains_from_poles(order, p)?,
            (None, Some(g)) => g,
            (None, None) => return Err(ControlError::Unstable(f64::NAN)),
        };
        gains.validate(order)?;
        Ok(gains)
    }

    pub fn estimator(&self, h: f64) -> EstimatorConfig {
        self.estimator.unwrap_or_else(|| EstimatorConfig::default_for(h))
    }

    pub fn derivative_filter(&self, h: f64) -> f64 {
        self.derivative_filter.unwrap_or(5.0 * h)
    }
}

/// Instant at which the nominal control is evaluated for each hold interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedforwardHold {
    /// `u*(t_k + h/2)`: second-order accurate average of `u*` over the interval.
    #[default]
    Midpoint,
    /// `u*(t_k)`.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub std_dev: f64,
    pub seed: u64,
}

/// Acceptance proxy: RMS tracking error over the final fraction of the run
/// must stay below a fraction of each reference's range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingTolerance {
    pub rms_fraction_of_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub plant: PlantSpec,
    pub timing: Timing,
    pub references: Vec<ReferenceSpec>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub mismatch: MismatchSpec,
    /// When false the plant runs on nominal controls only.
    #[serde(default = "yes")]
    pub feedback: bool,
    #[serde(default)]
    pub feedforward_hold: FeedforwardHold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_noise: Option<NoiseSpec>,
    /// Lets two channels regulate the same output.
    #[serde(default)]
    pub allow_shared_outputs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracking_tolerance: Option<TrackingTolerance>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.timing.t0, self.timing.t0 + self.timing.duration)
    }

    /// Checks every structural invariant without running.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let plant = self.plant.build();
        if let PlantSpec::UltraLocal { order, alpha, .. } = self.plant {
            if !(1..=2).contains(&order) || !alpha.is_finite() || alpha == 0.0 {
                return Err(ScenarioError::invalid(format!(
                    "ultra-local plant needs order 1 or 2 and a non-zero gain, got order {order}, α = {alpha}"
                )));
            }
        }
        validate_flat_io(FlatIoProfile {
            m: plant.input_dim(),
            p: self.references.len(),
        })
        .map_err(ScenarioError::invalid)?;
        if self.references.len() != plant.output_dim() {
            return Err(ScenarioError::invalid(format!(
                "plant has {} outputs, scenario gives {} references",
                plant.output_dim(),
                self.references.len()
            )));
        }
        let Timing {
            t0,
            duration,
            sampling_period: h,
            substeps,
        } = self.timing;
        if !(t0.is_finite() && duration.is_finite() && duration > 0.0) {
            return Err(ScenarioError::invalid(format!(
                "duration must be positive, got {duration}"
            )));
        }
        if !(h.is_finite() && h > 0.0 && h <= duration) {
            return Err(ScenarioError::invalid(format!(
                "sampling period must be positive and at most the duration, got {h}"
            )));
        }
        if substeps == 0 {
            return Err(ScenarioError::invalid("substeps must be at least 1"));
        }
        for (i, r) in self.references.iter().enumerate() {
            r.build()
                .map_err(|e| ScenarioError::invalid(format!("reference {}: {e}", i + 1)))?;
        }
        if self.channels.len() != plant.input_dim() {
            return Err(ScenarioError::invalid(format!(
                "plant has {} controls, scenario defines {} channels",
                plant.input_dim(),
                self.channels.len()
            )));
        }
        let mut seen = vec![false; self.references.len()];
        for (j, ch) in self.channels.iter().enumerate() {
            let tag = format!("channel {}", j + 1);
            let Some(slot) = seen.get_mut(ch.output) else {
                return Err(ScenarioError::invalid(format!(
                    "{tag}: output index {} out of range",
                    ch.output
                )));
            };
            if *slot && !self.allow_shared_outputs {
                return Err(ScenarioError::invalid(format!(
                    "{tag}: output {} is already regulated by another channel",
                    ch.output
                )));
            }
            *slot = true;
            let order = match (ch.order, ch.alpha) {
                (Some(o), _) => o,
                (None, AlphaSpec::Derived) => 1,
                (None, _) => {
                    return Err(ScenarioError::invalid(format!(
                        "{tag}: an explicit gain needs an explicit order"
                    )))
                }
            };
            if !(1..=2).contains(&order) {
                return Err(ScenarioError::invalid(format!(
                    "{tag}: order must be 1 or 2, got {order}"
                )));
            }
            if ch.order.is_some() || ch.pole.is_some() || ch.gains.is_some() {
                ch.gains(order)
                    .map_err(|e| ScenarioError::invalid(format!("{tag}: {e}")))?;
            }
            if ch.pole.is_none() && ch.gains.is_none() {
                return Err(ScenarioError::invalid(format!("{tag}: give either `pole` or `gains`")));
            }
            let est = ch.estimator(h);
            let periods = est
                .validate(h)
                .map_err(|e| ScenarioError::invalid(format!("{tag}: {e}")))?;
            if periods < 5 {
                return Err(ScenarioError::invalid(format!(
                    "{tag}: estimator window must span at least 5 sampling periods, got {periods}"
                )));
            }
            let tau = ch.derivative_filter(h);
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(ScenarioError::invalid(format!("{tag}: derivative filter must be >= 0")));
            }
            if let Some([lo, hi]) = ch.saturation {
                if !(lo <= hi) {
                    return Err(ScenarioError::invalid(format!("{tag}: empty saturation [{lo}, {hi}]")));
                }
            }
            if let AlphaSpec::Constant(a) = ch.alpha {
                if !a.is_finite() || a == 0.0 {
                    return Err(ScenarioError::invalid(format!("{tag}: constant gain must be non-zero")));
                }
            }
            if matches!(ch.alpha, AlphaSpec::Y1RefSquared | AlphaSpec::Y1RefLogRateMinusOne)
                && self.plant != PlantSpec::Example
            {
                return Err(ScenarioError::invalid(format!(
                    "{tag}: gain formulas in y1* apply to the example plant only"
                )));
            }
            if ch.alpha == AlphaSpec::Derived && self.plant.relation(j).is_none() {
                return Err(ScenarioError::invalid(format!(
                    "{tag}: plant has no relation for this control"
                )));
            }
        }
        self.mismatch
            .validate()
            .map_err(|e: PlantError| ScenarioError::invalid(e))?;
        if self.mismatch.nominal_u2 != Default::default() && self.plant != PlantSpec::Example {
            return Err(ScenarioError::invalid(
                "a perturbed u2* applies to the example plant only",
            ));
        }
        if let Some(n) = self.output_noise {
            if !(n.std_dev.is_finite() && n.std_dev >= 0.0) {
                return Err(ScenarioError::invalid(format!(
                    "noise std_dev must be >= 0, got {}",
                    n.std_dev
                )));
            }
        }
        if let Some(tol) = self.tracking_tolerance {
            if !(tol.rms_fraction_of_range.is_finite() && tol.rms_fraction_of_range > 0.0) {
                return Err(ScenarioError::invalid("tracking tolerance must be positive"));
            }
        }
        Ok(())
    }
}

impl From<HomeostatError> for ScenarioError {
    fn from(e: HomeostatError) -> Self {
        ScenarioError::invalid(e)
    }
}

/// References used by the built-in example scenarios: `y1*` stays within
/// `[1, 1.5]` so the flat parametrization is never singular, and both
/// references are at rest over the final 40 s.
fn example_references() -> Vec<ReferenceSpec> {
    vec![
        ReferenceSpec {
            initial: 1.0,
            transitions: vec![
                Transition {
                    start: 20.0,
                    end: 50.0,
                    to: 1.5,
                },
                Transition {
                    start: 80.0,
                    end: 100.0,
                    to: 1.2,
                },
            ],
        },
        ReferenceSpec {
            initial: 0.0,
            transitions: vec![
                Transition {
                    start: 10.0,
                    end: 40.0,
                    to: 1.0,
                },
                Transition {
                    start: 60.0,
                    end: 90.0,
                    to: 0.5,
                },
            ],
        },
    ]
}

fn example_channels() -> Vec<ChannelSpec> {
    let estimator = Some(EstimatorConfig::new(0.3, Default::default()));
    vec![
        ChannelSpec {
            output: 0,
            order: Some(1),
            alpha: AlphaSpec::Y1RefSquared,
            pole: Some(-1.0),
            gains: None,
            estimator,
            derivative_filter: None,
            saturation: None,
        },
        ChannelSpec {
            output: 1,
            order: Some(2),
            alpha: AlphaSpec::Y1RefLogRateMinusOne,
            pole: Some(-0.15),
            gains: None,
            estimator,
            derivative_filter: Some(0.05),
            saturation: None,
        },
    ]
}

/// Names of the built-in scenarios.
pub const BUILTIN_NAMES: [&str; 3] = ["paper-sec4", "paper-sec4-nominal", "ultra-local"];

/// Looks up a built-in scenario.
pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let timing = Timing {
        t0: 0.0,
        duration: 150.0,
        sampling_period: 0.01,
        substeps: 1,
    };
    match name {
        "paper-sec4" => Ok(Scenario {
            name: name.into(),
            description: "Two-input example: y1(0) = 1.1·y1*(0), perturbed u2*, iP on y1 (pole −1), iPD on y2 (double pole −0.15)".into(),
            plant: PlantSpec::Example,
            timing,
            references: example_references(),
            channels: example_channels(),
            mismatch: MismatchSpec::example_robustness(),
            feedback: true,
            feedforward_hold: FeedforwardHold::Midpoint,
            output_noise: None,
            allow_shared_outputs: false,
            tracking_tolerance: Some(TrackingTolerance {
                rms_fraction_of_range: 0.01,
            }),
        }),
        "paper-sec4-nominal" => Ok(Scenario {
            name: name.into(),
            description: "Two-input example without mismatch, nominal controls only".into(),
            plant: PlantSpec::Example,
            timing,
            references: example_references(),
            channels: example_channels(),
            mismatch: MismatchSpec::default(),
            feedback: false,
            feedforward_hold: FeedforwardHold::Midpoint,
            output_noise: None,
            allow_shared_outputs: false,
            tracking_tolerance: None,
        }),
        "ultra-local" => Ok(Scenario {
            name: name.into(),
            description: "Exact first-order ultra-local plant with constant disturbance F = 2 under an iP".into(),
            plant: PlantSpec::UltraLocal {
                order: 1,
                disturbance: 2.0,
                alpha: 1.0,
            },
            timing: Timing {
                duration: 10.0,
                ..timing
            },
            references: vec![ReferenceSpec {
                initial: 0.0,
                transitions: vec![Transition {
                    start: 2.0,
                    end: 6.0,
                    to: 1.0,
                }],
            }],
            channels: vec![ChannelSpec {
                output: 0,
                order: None,
                alpha: AlphaSpec::Derived,
                pole: Some(-1.0),
                gains: None,
                estimator: None,
                derivative_filter: None,
                saturation: None,
            }],
            mismatch: MismatchSpec::default(),
            feedback: true,
            feedforward_hold: FeedforwardHold::Midpoint,
            output_noise: None,
            allow_shared_outputs: false,
            tracking_tolerance: Some(TrackingTolerance {
                rms_fraction_of_range: 0.01,
            }),
        }),
        other => Err(ScenarioError::UnknownBuiltin(other.into())),
    }
}
