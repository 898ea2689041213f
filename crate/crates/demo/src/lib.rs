//! WebAssembly bindings behind `www/index.html`: the two-input example under
//! mismatch, the `F` estimator chasing a moving disturbance, and the decay of
//! an iP loop on an exact ultra-local plant.
//!
//! Every entry point returns a [`Trace`] of equally long named columns, thinned
//! to at most [`MAX_POINTS`] samples for plotting.

use heol::estimators::{estimate_from_history, EstimatorConfig, QuadratureRule};
use heol::plant::{integrate_held, MismatchSpec, NominalU2, OutputNoise, PlantModel};
use heol::scenarios::{
    builtin, compute_metrics, run_scenario_partial, AlphaSpec, ChannelSpec, FeedforwardHold, NoiseSpec, PlantSpec,
    ReferenceSpec, Scenario, SimLog, Timing,
};
use heol::signals::{SampledSeries, TimeGrid};
use wasm_bindgen::prelude::*;

pub const MAX_POINTS: usize = 1500;

const H: f64 = 0.01;

#[wasm_bindgen]
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    summary: String,
    error: Option<String>,
}

#[wasm_bindgen]
impl Trace {
    pub fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    /// Column by name, `undefined` when absent.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].clone())
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    /// Why the run stopped early, if it did.
    pub fn error(&self) -> Option<String> {
        self.error.clone()
    }
}

impl Trace {
    fn failed(message: impl ToString) -> Self {
        Self {
            error: Some(message.to_string()),
            ..Self::default()
        }
    }

    fn push(&mut self, name: &str, values: Vec<f64>) {
        self.names.push(name.to_string());
        self.columns.push(values);
    }

    /// Keeps every `k`-th sample and the last one so at most [`MAX_POINTS`] remain.
    fn thinned(mut self) -> Self {
        let n = self.len();
        if n > MAX_POINTS {
            let stride = n.div_ceil(MAX_POINTS - 1);
            for c in &mut self.columns {
                let last = *c.last().expect("non-empty column");
                let mut kept: Vec<f64> = c.iter().copied().step_by(stride).collect();
                if !(n - 1).is_multiple_of(stride) {
                    kept.push(last);
                }
                *c = kept;
            }
        }
        self
    }
}

fn log_columns(trace: &mut Trace, log: &SimLog) {
    let col = |f: &dyn Fn(&heol::scenarios::SimRecord) -> f64| log.records.iter().map(f).collect::<Vec<_>>();
    trace.push("t", col(&|r| r.t));
    for i in 0..log.outputs {
        trace.push(&format!("y{}", i + 1), col(&|r| r.y[i]));
        trace.push(&format!("y{}_ref", i + 1), col(&|r| r.y_ref[i]));
    }
    for j in 0..log.channels {
        trace.push(&format!("u{}", j + 1), col(&|r| r.u[j]));
        trace.push(&format!("u{}_nom", j + 1), col(&|r| r.u_nominal[j]));
        trace.push(&format!("F{}_est", j + 1), col(&|r| r.f_est[j]));
    }
}

/// The two-input example with adjustable mismatch, poles and estimator window.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate_example(
    initial_scaling: f64,
    perturbed_u2: bool,
    feedback: bool,
    pole1: f64,
    pole2: f64,
    window_periods: u32,
    noise_std: f64,
    seed: u32,
) -> Trace {
    let mut s = builtin("paper-sec4").expect("built-in scenario");
    s.mismatch = MismatchSpec {
        initial_output_scaling: vec![initial_scaling, 1.0],
        nominal_u2: if perturbed_u2 {
            NominalU2::Perturbed
        } else {
            NominalU2::Exact
        },
    };
    s.feedback = feedback;
    s.channels[0].pole = Some(pole1);
    s.channels[1].pole = Some(pole2);
    for ch in &mut s.channels {
        ch.estimator = Some(EstimatorConfig::new(window_periods as f64 * H, QuadratureRule::Simpson));
    }
    if noise_std > 0.0 {
        s.output_noise = Some(NoiseSpec {
            std_dev: noise_std,
            seed: seed.into(),
        });
    }
    let run = match run_scenario_partial(&s) {
        Ok(run) => run,
        Err(e) => return Trace::failed(e),
    };
    let mut trace = Trace::default();
    log_columns(&mut trace, &run.log);
    if let Ok(m) = compute_metrics(&run.log, s.tracking_tolerance) {
        trace.summary = format!(
            "final-20% RMS error: y1 {:.2e}, y2 {:.2e}; max |du1| {:.3}, max |du2| {:.3}",
            m.rms_tail[0], m.rms_tail[1], m.max_abs_du[0], m.max_abs_du[1]
        );
    }
    trace.error = run.error.map(|e| e.to_string());
    trace.thinned()
}

/// `F(t)` used by [`estimator_demo`]: a step at 3 s, then a slow sine.
pub fn moving_disturbance(t: f64) -> f64 {
    if t < 3.0 {
        2.0
    } else if t < 6.0 {
        -1.0
    } else {
        -1.0 + 0.8 * (1.5 * (t - 6.0)).sin()
    }
}

const DEMO_ALPHA: f64 = 1.5;

fn demo_input(t: f64) -> f64 {
    (1.3 * t).sin()
}

struct MovingPlant {
    order: usize,
}

impl PlantModel for MovingPlant {
    fn state_dim(&self) -> usize {
        self.order
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn derivative(&self, t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx = x[1..].to_vec();
        dx.push(moving_disturbance(t) + DEMO_ALPHA * u[0]);
        dx
    }
    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
}

/// Open-loop `y^(ν) = F(t) + α·u(t)` over 10 s with a known input; the
/// estimator sees only `y` (plus optional noise) and `α·u`.
#[wasm_bindgen]
pub fn estimator_demo(order: usize, window_periods: u32, noise_std: f64, seed: u32) -> Trace {
    if !(1..=2).contains(&order) {
        return Trace::failed(format!("order must be 1 or 2, got {order}"));
    }
    let config = EstimatorConfig::new(window_periods as f64 * H, QuadratureRule::Simpson);
    if let Err(e) = config.validate(H) {
        return Trace::failed(e);
    }
    let mut noise = match OutputNoise::new(noise_std, seed.into()) {
        Ok(n) => n,
        Err(e) => return Trace::failed(e),
    };
    let grid = TimeGrid::covering(0.0, H, 10.0).expect("fixed grid");
    let plant = MovingPlant { order };
    let mut x = vec![0.0; order];
    let mut dy = SampledSeries::new(grid);
    let mut adu = SampledSeries::new(grid);
    let (mut ts, mut f_true, mut f_est) = (Vec::new(), Vec::new(), Vec::new());
    let mut sq = (0.0, 0usize);
    for k in 0..grid.len() {
        let t = grid.time(k);
        let mut y = plant.output(&x);
        noise.corrupt(&mut y);
        let u = demo_input(t);
        // the held input acts from t on, so the window ending at t is consistent
        dy.push(y[0]).expect("grid sized");
        adu.push(DEMO_ALPHA * u).expect("grid sized");
        let est = match estimate_from_history(&config, order, &dy, &adu, t) {
            Ok(e) => e,
            Err(e) => return Trace::failed(e),
        };
        ts.push(t);
        f_true.push(moving_disturbance(t));
        f_est.push(if est.valid { est.value } else { f64::NAN });
        if est.valid && (t - 3.0).abs() > config.window + H {
            sq.0 += (est.value - moving_disturbance(t)).powi(2);
            sq.1 += 1;
        }
        if k + 1 < grid.len() {
            x = match integrate_held(&plant, t, &x, &[u], H, 4) {
                Ok(x) => x,
                Err(e) => return Trace::failed(e),
            };
        }
    }
    let mut trace = Trace::default();
    trace.push("t", ts);
    trace.push("F_true", f_true);
    trace.push("F_est", f_est);
    trace.summary = format!(
        "RMS estimation error away from the step: {:.3e} (window {:.2} s)",
        (sq.0 / sq.1.max(1) as f64).sqrt(),
        config.window
    );
    trace.thinned()
}

fn decay_scenario(kp: f64, disturbance: f64, alpha: f64, window_periods: u32) -> Scenario {
    Scenario {
        name: "decay".into(),
        description: String::new(),
        plant: PlantSpec::UltraLocal {
            order: 1,
            disturbance,
            alpha,
        },
        timing: Timing {
            t0: 0.0,
            duration: 1.0 + 6.0 / kp.max(0.05),
            sampling_period: H,
            substeps: 1,
        },
        references: vec![ReferenceSpec {
            initial: 1.0,
            transitions: vec![],
        }],
        channels: vec![ChannelSpec {
            output: 0,
            order: Some(1),
            alpha: AlphaSpec::Constant(alpha),
            pole: Some(-kp),
            gains: None,
            estimator: Some(EstimatorConfig::new(window_periods as f64 * H, QuadratureRule::Simpson)),
            derivative_filter: None,
            saturation: None,
        }],
        mismatch: MismatchSpec {
            initial_output_scaling: vec![2.0],
            nominal_u2: NominalU2::Exact,
        },
        feedback: true,
        feedforward_hold: FeedforwardHold::Midpoint,
        output_noise: None,
        allow_shared_outputs: false,
        tracking_tolerance: None,
    }
}

/// iP loop on `ẏ = F + α·u` started one unit off the reference. After the
/// estimator window fills, `|Δy|` should decay as `e^(−K_P t)`.
#[wasm_bindgen]
pub fn decay_demo(kp: f64, disturbance: f64, alpha: f64, window_periods: u32) -> Trace {
    let s = decay_scenario(kp, disturbance, alpha, window_periods);
    let run = match run_scenario_partial(&s) {
        Ok(run) => run,
        Err(e) => return Trace::failed(e),
    };
    let log = &run.log;
    let mut trace = Trace::default();
    let t: Vec<f64> = log.records.iter().map(|r| r.t).collect();
    let dy: Vec<f64> = log.records.iter().map(|r| r.dy[0]).collect();
    // reference envelope anchored one second in
    let anchor = ((1.0 / H).round() as usize).min(dy.len().saturating_sub(1));
    let envelope = t
        .iter()
        .map(|&ti| dy[anchor].abs() * (-kp * (ti - t[anchor])).exp())
        .collect();
    let measured = {
        let end = (anchor + (3.0 / kp / H).round() as usize).min(dy.len() - 1);
        (dy[anchor].abs() / dy[end].abs()).ln() / (t[end] - t[anchor])
    };
    trace.push("t", t);
    trace.push("dy", dy);
    trace.push("envelope", envelope);
    trace.push("F_est", log.records.iter().map(|r| r.f_est[0]).collect());
    trace.summary = format!("measured decay rate {measured:.4} for K_P = {kp}");
    trace.error = run.error.map(|e| e.to_string());
    trace.thinned()
}
