use crate::controllers::{ChannelController, ChannelInput, ControlError};
use crate::homeostat::{
    derive_channel, nominal_u1, nominal_u2, HomeostatChannel, HomeostatError, SINGULARITY_THRESHOLD,
};
use crate::plant::{
    initial_state, integrate_held, perturbed_nominal_u2, NominalU2, OutputNoise, PlantError, PlantModel,
};
use crate::signals::{ReferenceTrajectory, TimeGrid};

use super::{AlphaSpec, FeedforwardHold, PlantSpec, Scenario, ScenarioError};

/// One logged sample. Per-output vectors are indexed by output, per-channel
/// vectors by control.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    /// Plant output, before measurement noise.
    pub y: Vec<f64>,
    pub y_ref: Vec<f64>,
    /// `y − y*`, before measurement noise.
    pub dy: Vec<f64>,
    pub u: Vec<f64>,
    pub u_nominal: Vec<f64>,
    pub du: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f_est: Vec<f64>,
    pub f_valid: Vec<bool>,
    pub clamped: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub scenario: String,
    pub outputs: usize,
    pub channels: usize,
    pub records: Vec<SimRecord>,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

fn runtime(t: f64, channel: Option<usize>, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Runtime {
        t,
        channel,
        message: e.to_string(),
    }
}

/// Time named by a singularity error, if any.
fn error_time(e: &HomeostatError) -> Option<f64> {
    match *e {
        HomeostatError::SingularChannel { t, .. } | HomeostatError::FlatnessSingularity { t, .. } => Some(t),
        _ => None,
    }
}

fn control_error_time(e: &ControlError) -> Option<f64> {
    match e {
        ControlError::Homeostat(h) => error_time(h),
        _ => None,
    }
}

fn build_channel(
    scenario: &Scenario,
    refs: &[ReferenceTrajectory],
    j: usize,
) -> Result<HomeostatChannel, ScenarioError> {
    let spec = &scenario.channels[j];
    let (t0, t1) = scenario.horizon();
    let wrap = |e: HomeostatError| runtime(error_time(&e).unwrap_or(t0), Some(j), e);
    match spec.alpha {
        AlphaSpec::Derived => {
            let relation = scenario
                .plant
                .relation(j)
                .ok_or_else(|| ScenarioError::Invalid(format!("channel {}: no relation", j + 1)))?;
            derive_channel(&relation, refs, spec.output, (t0, t1), spec.order).map_err(wrap)
        }
        AlphaSpec::Constant(a) => HomeostatChannel::constant(spec.output, spec.order.unwrap_or(1), a).map_err(wrap),
        AlphaSpec::Y1RefSquared => {
            let y1 = refs[0].clone();
            HomeostatChannel::explicit(spec.output, spec.order.unwrap_or(1), move |t| {
                Ok(y1.eval(t, 0)?.powi(2))
            })
            .map_err(wrap)
        }
        AlphaSpec::Y1RefLogRateMinusOne => {
            let y1 = refs[0].clone();
            HomeostatChannel::explicit(spec.output, spec.order.unwrap_or(1), move |t| {
                let v = y1.eval(t, 0)?;
                if v.abs() <= SINGULARITY_THRESHOLD {
                    return Err(HomeostatError::FlatnessSingularity {
                        t,
                        what: "y1*",
                        value: v,
                    });
                }
                Ok(y1.eval(t, 1)? / v - 1.0)
            })
            .map_err(wrap)
        }
    }
}

/// Locates a zero of `y1*` in `[a, b]` when its sign changes there or it
/// touches the singularity threshold at either end.
fn y1_crossing(y1: &ReferenceTrajectory, a: f64, b: f64) -> Result<Option<f64>, ScenarioError> {
    let at = |t: f64| y1.eval(t, 0).map_err(|e| runtime(t, Some(0), e));
    let (ya, yb) = (at(a)?, at(b)?);
    if ya.abs() <= SINGULARITY_THRESHOLD {
        return Ok(Some(a));
    }
    if yb.abs() <= SINGULARITY_THRESHOLD {
        return Ok(Some(b));
    }
    if ya.signum() == yb.signum() {
        return Ok(None);
    }
    let (mut lo, mut hi) = (a, b);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid)?.signum() == ya.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

fn nominal_controls(scenario: &Scenario, refs: &[ReferenceTrajectory], t: f64) -> Result<Vec<f64>, ScenarioError> {
    match scenario.plant {
        PlantSpec::Example => {
            let u1 = nominal_u1(&refs[0], t).map_err(|e| runtime(error_time(&e).unwrap_or(t), Some(0), e))?;
            let u2 = match scenario.mismatch.nominal_u2 {
                NominalU2::Exact => nominal_u2(&refs[0], &refs[1], t),
                NominalU2::Perturbed => perturbed_nominal_u2(&refs[0], &refs[1], t),
            }
            .map_err(|e| runtime(error_time(&e).unwrap_or(t), Some(1), e))?;
            Ok(vec![u1, u2])
        }
        PlantSpec::UltraLocal { order, alpha, .. } => {
            let d = refs[0].eval(t, order).map_err(|e| runtime(t, Some(0), e))?;
            Ok(vec![d / alpha])
        }
    }
}

fn initial_plant_state(scenario: &Scenario, refs: &[ReferenceTrajectory]) -> Result<Vec<f64>, ScenarioError> {
    let t0 = scenario.timing.t0;
    match scenario.plant {
        PlantSpec::Example => initial_state(refs, &scenario.mismatch, t0).map_err(|e| runtime(t0, None, e)),
        PlantSpec::UltraLocal { order, .. } => {
            let mut x = refs[0].jet(t0, order - 1).map_err(|e| runtime(t0, None, e))?;
            x[0] *= scenario.mismatch.factor(0);
            Ok(x)
        }
    }
}

/// Runs the closed loop over the scenario horizon.
///
/// At each grid time the plant output is sampled, every channel computes its
/// control, and the plant integrates over one sampling period under that held
/// input. With `feedback` off the nominal controls are applied unchanged.
/// The logged `u_nominal` is the value held over the interval, read at the
/// instant chosen by [`FeedforwardHold`].
pub fn run_scenario(scenario: &Scenario) -> Result<SimLog, ScenarioError> {
    let run = run_scenario_partial(scenario)?;
    match run.error {
        Some(e) => Err(e),
        None => Ok(run.log),
    }
}

/// A run that may have stopped early.
#[derive(Debug)]
pub struct PartialRun {
    /// Every sample completed before the failure, or the whole horizon.
    pub log: SimLog,
    pub error: Option<ScenarioError>,
}

/// Like [`run_scenario`], but a failure during the loop keeps the samples
/// logged so far. Set-up failures are still returned as errors.
pub fn run_scenario_partial(scenario: &Scenario) -> Result<PartialRun, ScenarioError> {
    scenario.validate()?;
    let Scenario { timing, .. } = *scenario;
    let h = timing.sampling_period;
    let grid = TimeGrid::covering(timing.t0, h, timing.duration).map_err(ScenarioError::invalid)?;
    let refs = scenario
        .references
        .iter()
        .map(|r| r.build())
        .collect::<Result<Vec<_>, _>>()
        .map_err(ScenarioError::invalid)?;
    let plant: Box<dyn PlantModel> = scenario.plant.build();
    let p = refs.len();
    let m = scenario.channels.len();

    let mut controllers = Vec::with_capacity(m);
    for (j, spec) in scenario.channels.iter().enumerate() {
        let channel = build_channel(scenario, &refs, j)?;
        let order = channel.order();
        let gains = spec
            .gains(order)
            .map_err(|e| ScenarioError::Invalid(format!("channel {}: {e}", j + 1)))?;
        let mut c = ChannelController::new(channel, gains, spec.estimator(h), grid, spec.derivative_filter(h))
            .map_err(|e| ScenarioError::Invalid(format!("channel {}: {e}", j + 1)))?;
        if let Some([lo, hi]) = spec.saturation {
            c = c
                .with_saturation(lo, hi)
                .map_err(|e| ScenarioError::Invalid(format!("channel {}: {e}", j + 1)))?;
        }
        controllers.push(c);
    }

    let mut noise = match scenario.output_noise {
        Some(n) if n.std_dev > 0.0 => Some(OutputNoise::new(n.std_dev, n.seed).map_err(ScenarioError::invalid)?),
        _ => None,
    };
    let ff_offset = match scenario.feedforward_hold {
        FeedforwardHold::Midpoint => 0.5 * h,
        FeedforwardHold::Sample => 0.0,
    };
    if scenario.plant == PlantSpec::Example {
        // the flat parametrization divides by y1* at every instant the nominal control is read
        let probes: Vec<f64> = (0..grid.len())
            .flat_map(|k| [grid.time(k), grid.time(k) + ff_offset])
            .collect();
        for w in probes.windows(2) {
            if let Some(tc) = y1_crossing(&refs[0], w[0], w[1].max(w[0]))? {
                return Err(runtime(
                    tc,
                    Some(0),
                    HomeostatError::FlatnessSingularity {
                        t: tc,
                        what: "y1*",
                        value: refs[0].eval(tc, 0).unwrap_or(0.0),
                    },
                ));
            }
        }
    }
    let mut x = initial_plant_state(scenario, &refs)?;
    let mut records: Vec<SimRecord> = Vec::with_capacity(grid.len());

    let mut advance = || -> Result<(), ScenarioError> {
        for k in 0..grid.len() {
            let t = grid.time(k);
            let y = plant.output(&x);
            let mut measured = y.clone();
            if let Some(n) = noise.as_mut() {
                n.corrupt(&mut measured);
            }
            let y_ref = refs
                .iter()
                .map(|r| r.eval(t, 0))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| runtime(t, None, e))?;
            let u_nominal = nominal_controls(scenario, &refs, t + ff_offset)?;

            let mut rec = SimRecord {
                t,
                dy: y.iter().zip(&y_ref).map(|(a, b)| a - b).collect(),
                y,
                y_ref,
                u: u_nominal.clone(),
                u_nominal,
                du: vec![0.0; m],
                alpha: vec![f64::NAN; m],
                f_est: vec![0.0; m],
                f_valid: vec![false; m],
                clamped: vec![false; m],
            };
            if scenario.feedback {
                for (j, c) in controllers.iter_mut().enumerate() {
                    let i = c.channel().output();
                    let out = c
                        .step(ChannelInput {
                            t,
                            y: measured[i],
                            y_ref: rec.y_ref[i],
                            u_nominal: rec.u_nominal[j],
                        })
                        .map_err(|e| runtime(control_error_time(&e).unwrap_or(t), Some(j), e))?;
                    rec.u[j] = out.u;
                    rec.du[j] = out.du;
                    rec.alpha[j] = out.alpha;
                    rec.f_est[j] = out.f_est.value;
                    rec.f_valid[j] = out.f_est.valid;
                    rec.clamped[j] = out.clamped;
                }
            } else {
                for (j, c) in controllers.iter().enumerate() {
                    rec.alpha[j] = c
                        .channel()
                        .alpha(t)
                        .map_err(|e| runtime(error_time(&e).unwrap_or(t), Some(j), e))?;
                }
            }
            records.push(rec);
            if k + 1 < grid.len() {
                let u = &records[k].u;
                x = integrate_held(plant.as_ref(), t, &x, u, h, timing.substeps).map_err(|e| {
                    let at = match e {
                        PlantError::Diverged { t, .. } | PlantError::NonFiniteDerivative { t } => t,
                        _ => t,
                    };
                    runtime(at, None, e)
                })?;
            }
        }
        Ok(())
    };
    let error = advance().err();

    Ok(PartialRun {
        log: SimLog {
            scenario: scenario.name.clone(),
            outputs: p,
            channels: m,
            records,
        },
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin, ReferenceSpec, Transition};

    #[test]
    fn ultra_local_tracks_with_disturbance() {
        let log = run_scenario(&builtin("ultra-local").unwrap()).unwrap();
        assert_eq!(log.len(), 1001);
        let last = log.records.last().unwrap();
        assert!(last.dy[0].abs() < 1e-3, "{}", last.dy[0]);
        // F = 2 is recovered once the window is full
        assert!((last.f_est[0] - 2.0).abs() < 1e-6, "{}", last.f_est[0]);
    }

    #[test]
    fn y1_crossing_names_time_and_channel() {
        let mut s = builtin("paper-sec4").unwrap();
        s.references[0] = ReferenceSpec {
            initial: 1.0,
            transitions: vec![Transition {
                start: 10.0,
                end: 20.0,
                to: -1.0,
            }],
        };
        match run_scenario(&s) {
            Err(ScenarioError::Runtime { t, channel, message }) => {
                assert!((t - 15.0).abs() < 1e-6, "t = {t}");
                assert_eq!(channel, Some(0));
                assert!(message.contains("y1*"), "{message}");
            }
            other => panic!("expected a runtime error, got {other:?}"),
        }
    }

    #[test]
    fn feedback_off_applies_nominal() {
        let mut s = builtin("ultra-local").unwrap();
        s.feedback = false;
        let log = run_scenario(&s).unwrap();
        for r in &log.records {
            assert_eq!(r.u, r.u_nominal);
            assert!(!r.f_valid[0]);
        }
        // open loop with F = 2 drifts by F·t
        let last = log.records.last().unwrap();
        assert!((last.dy[0] - 20.0).abs() < 1e-6, "{}", last.dy[0]);
    }

    #[test]
    fn divergence_keeps_partial_log() {
        let run = run_scenario_partial(&builtin("paper-sec4-nominal").unwrap()).unwrap();
        let Some(ScenarioError::Runtime { t, channel: None, .. }) = run.error else {
            panic!("{:?}", run.error);
        };
        let last = run.log.records.last().unwrap();
        assert!(last.t < t && t - last.t <= 0.01 + 1e-9);
        assert!(run.log.len() > 1000);
    }

    #[test]
    fn noise_is_reproducible() {
        let mut s = builtin("ultra-local").unwrap();
        s.output_noise = Some(crate::scenarios::NoiseSpec { std_dev: 0.01, seed: 7 });
        let a = run_scenario(&s).unwrap();
        let b = run_scenario(&s).unwrap();
        assert_eq!(a, b);
    }
}
