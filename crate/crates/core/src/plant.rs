//! Explicit ODE plants and fixed-step integration under zero-order hold.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::homeostat::{nominal_u2_with, HomeostatError};
use crate::signals::ReferenceTrajectory;

/// Any state component beyond this magnitude aborts a run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("integration step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("state derivative is not finite at t = {t}")]
    NonFiniteDerivative { t: f64 },
    #[error("state x{} reached {value} at t = {t}", component + 1)]
    Diverged { t: f64, component: usize, value: f64 },
    #[error("expected {expected} {what}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("initial-condition scaling factors must be finite and positive, got {0:?}")]
    InvalidScaling(Vec<f64>),
    #[error("noise standard deviation must be finite and non-negative, got {0}")]
    InvalidNoise(f64),
    #[error(transparent)]
    Homeostat(#[from] HomeostatError),
}

/// `ẋ = f(t, x, u)`, `y = h(x)`.
pub trait PlantModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn derivative(&self, t: f64, x: &[f64], u: &[f64]) -> Vec<f64>;
    fn output(&self, x: &[f64]) -> Vec<f64>;
}

/// The two-input example system
///
/// ```text
/// ẋ1 = x1 + x1²·u1
/// ẋ2 = x3
/// ẋ3 = x4
/// ẋ4 = −x4 + x3 + x2 + x1·u1·u2
/// y  = (x1, x2)
/// ```
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExamplePlant;

impl PlantModel for ExamplePlant {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        vec![
            x[0] + x[0] * x[0] * u[0],
            x[2],
            x[3],
            -x[3] + x[2] + x[1] + x[0] * u[0] * u[1],
        ]
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0], x[1]]
    }
}

pub fn example_plant() -> ExamplePlant {
    ExamplePlant
}

/// Exact ultra-local plant `y^(ν) = F + α·u` with constant `F` and `α`.
/// The state holds `y, ẏ, …, y^(ν−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UltraLocalPlant {
    pub order: usize,
    pub disturbance: f64,
    pub alpha: f64,
}

impl PlantModel for UltraLocalPlant {
    fn state_dim(&self) -> usize {
        self.order
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx: Vec<f64> = x[1..].to_vec();
        dx.push(self.disturbance + self.alpha * u[0]);
        dx
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }
}

fn add_scaled(x: &[f64], k: &[f64], s: f64) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + s * b).collect()
}

fn finite_derivative(model: &dyn PlantModel, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>, PlantError> {
    let k = model.derivative(t, x, u);
    if k.iter().all(|v| v.is_finite()) {
        Ok(k)
    } else {
        Err(PlantError::NonFiniteDerivative { t })
    }
}

/// Classical RK4 step with `u` held over `[t, t + h]`.
pub fn rk4_step(model: &dyn PlantModel, t: f64, x: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>, PlantError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(PlantError::InvalidStep(h));
    }
    let half = 0.5 * h;
    let k1 = finite_derivative(model, t, x, u)?;
    let k2 = finite_derivative(model, t + half, &add_scaled(x, &k1, half), u)?;
    let k3 = finite_derivative(model, t + half, &add_scaled(x, &k2, half), u)?;
    let k4 = finite_derivative(model, t + h, &add_scaled(x, &k3, h), u)?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Advances from `t` to `t + h` in `substeps` RK4 steps under one held input,
/// aborting once a component exceeds [`DIVERGENCE_LIMIT`].
pub fn integrate_held(
    model: &dyn PlantModel,
    t: f64,
    x: &[f64],
    u: &[f64],
    h: f64,
    substeps: usize,
) -> Result<Vec<f64>, PlantError> {
    let substeps = substeps.max(1);
    let dt = h / substeps as f64;
    let mut state = x.to_vec();
    for s in 0..substeps {
        let ts = t + s as f64 * dt;
        state = rk4_step(model, ts, &state, u, dt)?;
        if let Some((component, &value)) = state.iter().enumerate().find(|(_, v)| !(v.abs() <= DIVERGENCE_LIMIT)) {
            return Err(PlantError::Diverged {
                t: ts + dt,
                component,
                value,
            });
        }
    }
    Ok(state)
}

/// Which formula provides the nominal second control of the example system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalU2 {
    /// `(y2*‴ + ÿ2* − ẏ2* − y2*) / (y1*·u1*)`.
    #[default]
    Exact,
    /// Model mismatch: coefficients 1.1 on `ẏ2*` and 0.9 on `y2*`.
    Perturbed,
}

/// Deliberate differences between the controller's model and the simulated plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchSpec {
    /// Multiplies `y_i*(t0)` to form `y_i(t0)`; missing entries mean 1.
    #[serde(default)]
    pub initial_output_scaling: Vec<f64>,
    #[serde(default)]
    pub nominal_u2: NominalU2,
}

impl Default for MismatchSpec {
    fn default() -> Self {
        Self {
            initial_output_scaling: Vec::new(),
            nominal_u2: NominalU2::Exact,
        }
    }
}

impl MismatchSpec {
    /// The robustness test of the example system: `y1(0) = 1.1·y1*(0)` and a perturbed `u2*`.
    pub fn example_robustness() -> Self {
        Self {
            initial_output_scaling: vec![1.1, 1.0],
            nominal_u2: NominalU2::Perturbed,
        }
    }

    pub fn factor(&self, output: usize) -> f64 {
        self.initial_output_scaling.get(output).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if self.initial_output_scaling.iter().all(|f| f.is_finite() && *f > 0.0) {
            Ok(())
        } else {
            Err(PlantError::InvalidScaling(self.initial_output_scaling.clone()))
        }
    }
}

/// Initial state of the example plant: `x1 = c1·y1*(t0)`, `x2 = c2·y2*(t0)`,
/// `x3 = ẏ2*(t0)`, `x4 = ÿ2*(t0)`.
pub fn initial_state(
    references: &[ReferenceTrajectory],
    mismatch: &MismatchSpec,
    t0: f64,
) -> Result<Vec<f64>, PlantError> {
    if references.len() != 2 {
        return Err(PlantError::Dimension {
            what: "references",
            expected: 2,
            got: references.len(),
        });
    }
    mismatch.validate()?;
    let y1 = references[0].eval(t0, 0).map_err(HomeostatError::from)?;
    let y2 = references[1].jet(t0, 2).map_err(HomeostatError::from)?;
    Ok(vec![mismatch.factor(0) * y1, mismatch.factor(1) * y2[0], y2[1], y2[2]])
}

/// `u2*` with the mismatched coefficients `1.1·ẏ2*` and `0.9·y2*`.
pub fn perturbed_nominal_u2(
    y1_ref: &ReferenceTrajectory,
    y2_ref: &ReferenceTrajectory,
    t: f64,
) -> Result<f64, HomeostatError> {
    nominal_u2_with(y1_ref, y2_ref, t, 1.1, 0.9)
}

/// Seeded additive Gaussian measurement noise.
#[derive(Debug, Clone)]
pub struct OutputNoise {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl OutputNoise {
    pub fn new(std_dev: f64, seed: u64) -> Result<Self, PlantError> {
        let normal = Normal::new(0.0, std_dev).map_err(|_| PlantError::InvalidNoise(std_dev))?;
        if !(std_dev.is_finite() && std_dev >= 0.0) {
            return Err(PlantError::InvalidNoise(std_dev));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal,
        })
    }

    pub fn corrupt(&mut self, y: &mut [f64]) {
        for v in y {
            *v += self.normal.sample(&mut self.rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homeostat::{nominal_u1, nominal_u2};

    struct Zero;
    impl PlantModel for Zero {
        fn state_dim(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            0
        }
        fn output_dim(&self) -> usize {
            0
        }
        fn derivative(&self, _t: f64, x: &[f64], _u: &[f64]) -> Vec<f64> {
            vec![0.0; x.len()]
        }
        fn output(&self, _x: &[f64]) -> Vec<f64> {
            Vec::new()
        }
    }

    struct Growth;
    impl PlantModel for Growth {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            0
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn derivative(&self, _t: f64, x: &[f64], _u: &[f64]) -> Vec<f64> {
            vec![x[0]]
        }
        fn output(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    struct Clock;
    impl PlantModel for Clock {
        fn state_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            0
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn derivative(&self, t: f64, _x: &[f64], _u: &[f64]) -> Vec<f64> {
            vec![t]
        }
        fn output(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    #[test]
    fn rk4_examples() {
        assert_eq!(rk4_step(&Zero, 0.0, &[1.5, -2.0], &[], 0.1).unwrap(), vec![1.5, -2.0]);
        let x = rk4_step(&Growth, 0.0, &[1.0], &[], 0.01).unwrap();
        assert!((x[0] - 0.01f64.exp()).abs() < 1e-11);
        let x = rk4_step(&Clock, 0.0, &[0.0], &[], 0.1).unwrap();
        assert!((x[0] - 0.005).abs() < 1e-17);
        assert!(matches!(
            rk4_step(&Growth, 0.0, &[1.0], &[], 0.0),
            Err(PlantError::InvalidStep(_))
        ));
        assert!(matches!(
            rk4_step(&Growth, 0.0, &[f64::NAN], &[], 0.1),
            Err(PlantError::NonFiniteDerivative { .. })
        ));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let max_err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut x = vec![1.0];
            let mut err: f64 = 0.0;
            for k in 0..n {
                x = rk4_step(&Growth, k as f64 * h, &x, &[], h).unwrap();
                err = err.max((x[0] - ((k + 1) as f64 * h).exp()).abs());
            }
            err
        };
        let ratio = max_err(0.1) / max_err(0.05);
        assert!((14.0..=18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn divergence_guard() {
        let err = integrate_held(&Growth, 0.0, &[1e8], &[], 5.0, 5).unwrap_err();
        assert!(matches!(err, PlantError::Diverged { component: 0, .. }));
    }

    #[test]
    fn example_plant_equations() {
        let p = example_plant();
        assert_eq!(
            p.derivative(0.0, &[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0]),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            p.derivative(0.0, &[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0]),
            vec![2.0, 3.0, 4.0, 2.0]
        );
        assert_eq!(p.output(&[5.0, 6.0, 7.0, 8.0]), vec![5.0, 6.0]);
        assert_eq!((p.state_dim(), p.input_dim(), p.output_dim()), (4, 2, 2));
    }

    #[test]
    fn initial_states() {
        let refs = [ReferenceTrajectory::constant(1.0), ReferenceTrajectory::constant(0.0)];
        let m = MismatchSpec {
            initial_output_scaling: vec![1.1, 1.0],
            nominal_u2: NominalU2::Exact,
        };
        assert_eq!(initial_state(&refs, &m, 0.0).unwrap(), vec![1.1, 0.0, 0.0, 0.0]);
        let m = MismatchSpec {
            initial_output_scaling: vec![2.0, 1.0],
            ..Default::default()
        };
        assert_eq!(initial_state(&refs, &m, 0.0).unwrap()[0], 2.0);

        let y2 = ReferenceTrajectory::polynomial(vec![0.5, 0.25, 1.0, 0.0], -1.0, 5.0).unwrap();
        let refs = [ReferenceTrajectory::constant(1.3), y2.clone()];
        let x = initial_state(&refs, &MismatchSpec::default(), 0.0).unwrap();
        assert_eq!(
            x,
            vec![
                1.3,
                y2.eval(0.0, 0).unwrap(),
                y2.eval(0.0, 1).unwrap(),
                y2.eval(0.0, 2).unwrap()
            ]
        );

        let bad = MismatchSpec {
            initial_output_scaling: vec![0.0],
            ..Default::default()
        };
        assert!(initial_state(&refs, &bad, 0.0).is_err());
    }

    #[test]
    fn perturbed_u2() {
        let one = ReferenceTrajectory::constant(1.0);
        let c = ReferenceTrajectory::constant(2.0);
        assert!((perturbed_nominal_u2(&one, &c, 0.0).unwrap() - 1.8).abs() < 1e-15);
        assert_eq!(
            perturbed_nominal_u2(&one, &ReferenceTrajectory::constant(0.0), 0.0).unwrap(),
            0.0
        );
        // only the ẏ2*, y2* terms differ: y2*(0) = ẏ2*(0) = 0 with non-zero higher derivatives
        let y2 = ReferenceTrajectory::polynomial(vec![0.0, 0.0, 0.5, 1.0 / 6.0], 0.0, 1.0).unwrap();
        assert_eq!(
            perturbed_nominal_u2(&one, &y2, 0.0).unwrap(),
            nominal_u2(&one, &y2, 0.0).unwrap()
        );
        assert_eq!(nominal_u2(&one, &y2, 0.0).unwrap(), -2.0);
    }

    #[test]
    fn feedforward_tracks_on_stable_first_channel() {
        // x1 alone: linearization 2ẏ1*/y1* − 1 < 0 keeps ZOH errors bounded
        let y1 = ReferenceTrajectory::smoothstep(1.0, 1.5, 1.0, 11.0).unwrap();
        let y2 = ReferenceTrajectory::constant(0.0);
        let refs = [y1.clone(), y2.clone()];
        let mut x = initial_state(&refs, &MismatchSpec::default(), 0.0).unwrap();
        let h = 0.01;
        let mut worst: f64 = 0.0;
        for k in 0..2000 {
            let t = k as f64 * h;
            let u = [nominal_u1(&y1, t).unwrap(), nominal_u2(&y1, &y2, t).unwrap()];
            x = integrate_held(&ExamplePlant, t, &x, &u, h, 1).unwrap();
            worst = worst.max((x[0] - y1.eval(t + h, 0).unwrap()).abs());
        }
        assert!(worst < 1e-3, "{worst}");
        assert_eq!(&x[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn noise_is_seeded() {
        let mut a = OutputNoise::new(0.1, 7).unwrap();
        let mut b = OutputNoise::new(0.1, 7).unwrap();
        let (mut ya, mut yb) = (vec![0.0; 3], vec![0.0; 3]);
        a.corrupt(&mut ya);
        b.corrupt(&mut yb);
        assert_eq!(ya, yb);
        assert!(ya.iter().any(|v| *v != 0.0));
        assert!(OutputNoise::new(-1.0, 0).is_err());
    }
}
