//! Implicit flat relations, homeostat channels and nominal controls.
//!
//! A relation `E_j(Y, Ẏ, …, u_j) = 0` ties control `u_j` to the flat outputs.
//! Differentiating it along a reference gives the homeostat
//! `d^ν Δy_j/dt^ν = F_j + α_j Δu_j` where `ν` is the lowest derivative order of
//! `y_j` with a non-vanishing partial and `α_j = -(∂E/∂u_j) / (∂E/∂y_j^(ν))`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::signals::{ReferenceTrajectory, SignalError};

/// Magnitude below which a partial derivative, gain or denominator counts as zero.
pub const SINGULARITY_THRESHOLD: f64 = 1e-9;

/// Number of horizon points used to decide that a partial is "not identically zero".
pub const ORDER_DETECTION_SAMPLES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomeostatError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("every derivative partial of output {output} vanishes along the reference")]
    DegenerateRelation { output: usize },
    #[error("channel for output {output} is singular at t = {t} (tangent coefficient {value})")]
    SingularChannel { output: usize, t: f64, value: f64 },
    #[error("flatness singularity at t = {t}: {what} = {value} is (nearly) zero")]
    FlatnessSingularity { t: f64, what: &'static str, value: f64 },
    #[error("relation residual is not finite at the evaluation point")]
    NonFiniteResidual,
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("{0}")]
    Shape(String),
    #[error("flat output count p = {p} differs from independent control count m = {m} (flat systems require p = m)")]
    FlatIoMismatch { m: usize, p: usize },
}

/// A variable of an implicit flat relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbol {
    /// `y_index^(order)`.
    Output { index: usize, order: usize },
    /// The relation's control `u_j`.
    Control,
}

/// Flat outputs and their derivatives, plus the control value, at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatPoint {
    /// `jets[l][ι]` holds `y_l^(ι)`.
    pub jets: Vec<Vec<f64>>,
    pub control: f64,
}

impl FlatPoint {
    pub fn new(jets: Vec<Vec<f64>>, control: f64) -> Self {
        Self { jets, control }
    }

    /// `y_index^(order)`, zero when the jet is shorter.
    pub fn y(&self, index: usize, order: usize) -> f64 {
        self.jets
            .get(index)
            .and_then(|jet| jet.get(order))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn get(&self, symbol: Symbol) -> f64 {
        match symbol {
            Symbol::Output { index, order } => self.y(index, order),
            Symbol::Control => self.control,
        }
    }

    fn with(&self, symbol: Symbol, value: f64) -> Self {
        let mut p = self.clone();
        match symbol {
            Symbol::Output { index, order } => {
                if p.jets.len() <= index {
                    p.jets.resize(index + 1, Vec::new());
                }
                if p.jets[index].len() <= order {
                    p.jets[index].resize(order + 1, 0.0);
                }
                p.jets[index][order] = value;
            }
            Symbol::Control => p.control = value,
        }
        p
    }
}

type Residual = dyn Fn(&FlatPoint) -> f64 + Send + Sync;
type Partials = dyn Fn(&FlatPoint, Symbol) -> f64 + Send + Sync;

/// `E_j(Y, Ẏ, …, u_j) = 0` with optional analytic partials.
#[derive(Clone)]
pub struct ImplicitFlatRelation {
    orders: Vec<usize>,
    control: usize,
    residual: Arc<Residual>,
    partials: Option<Arc<Partials>>,
}

impl fmt::Debug for ImplicitFlatRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImplicitFlatRelation")
            .field("orders", &self.orders)
            .field("control", &self.control)
            .field("analytic_partials", &self.partials.is_some())
            .finish()
    }
}

impl ImplicitFlatRelation {
    /// `orders[l]` is the highest derivative of `y_l` the residual reads;
    /// `control` is the index `j` of the control it solves for.
    pub fn new(
        orders: Vec<usize>,
        control: usize,
        residual: impl Fn(&FlatPoint) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            orders,
            control,
            residual: Arc::new(residual),
            partials: None,
        }
    }

    pub fn with_partials(mut self, partials: impl Fn(&FlatPoint, Symbol) -> f64 + Send + Sync + 'static) -> Self {
        self.partials = Some(Arc::new(partials));
        self
    }

    /// `c · E`, which has the same zero set and the same tangent gain.
    pub fn scaled(&self, c: f64) -> Self {
        let residual = Arc::clone(&self.residual);
        let partials = self.partials.clone();
        Self {
            orders: self.orders.clone(),
            control: self.control,
            residual: Arc::new(move |p| c * residual(p)),
            partials: partials.map(|f| Arc::new(move |p: &FlatPoint, s| c * f(p, s)) as Arc<Partials>),
        }
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn outputs(&self) -> usize {
        self.orders.len()
    }

    pub fn control_index(&self) -> usize {
        self.control
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    pub fn residual(&self, point: &FlatPoint) -> f64 {
        (self.residual)(point)
    }

    /// Analytic partial when available, central difference otherwise.
    pub fn partial(&self, point: &FlatPoint, symbol: Symbol) -> Result<f64, HomeostatError> {
        match &self.partials {
            Some(f) => Ok(f(point, symbol)),
            None => finite_diff_partial(self, symbol, point, None),
        }
    }

    /// Jets of the reference outputs at `t`, truncated to the orders this relation reads.
    pub fn jets_at(&self, reference: &[ReferenceTrajectory], t: f64) -> Result<Vec<Vec<f64>>, HomeostatError> {
        if reference.len() != self.orders.len() {
            return Err(HomeostatError::Shape(format!(
                "relation reads {} flat outputs, reference provides {}",
                self.orders.len(),
                reference.len()
            )));
        }
        self.orders
            .iter()
            .zip(reference)
            .map(|(&order, traj)| traj.jet(t, order).map_err(HomeostatError::from))
            .collect()
    }

    /// Solves `E(Y*(t), u) = 0` for `u` by Newton iteration from zero.
    pub fn solve_control(&self, jets: Vec<Vec<f64>>, t: f64) -> Result<f64, HomeostatError> {
        let mut point = FlatPoint::new(jets, 0.0);
        for _ in 0..50 {
            let r = self.residual(&point);
            if !r.is_finite() {
                return Err(HomeostatError::NonFiniteResidual);
            }
            let d = self.partial(&point, Symbol::Control)?;
            if d.abs() <= SINGULARITY_THRESHOLD {
                return Err(HomeostatError::SingularChannel {
                    output: self.control,
                    t,
                    value: d,
                });
            }
            let step = r / d;
            point.control -= step;
            if step.abs() <= 1e-14 * point.control.abs().max(1.0) {
                break;
            }
        }
        Ok(point.control)
    }

    /// Relation variables on the reference at `t`, with `u_j` solved from the relation.
    pub fn point_on_reference(&self, reference: &[ReferenceTrajectory], t: f64) -> Result<FlatPoint, HomeostatError> {
        let jets = self.jets_at(reference, t)?;
        let control = self.solve_control(jets.clone(), t)?;
        Ok(FlatPoint::new(jets, control))
    }
}

/// Central difference `(E(x+δ) − E(x−δ)) / 2δ` in one variable.
///
/// `step` defaults to `max(1e-6, 1e-6·|x|)`.
pub fn finite_diff_partial(
    relation: &ImplicitFlatRelation,
    symbol: Symbol,
    point: &FlatPoint,
    step: Option<f64>,
) -> Result<f64, HomeostatError> {
    let x = point.get(symbol);
    let delta = step.unwrap_or_else(|| (1e-6 * x.abs()).max(1e-6));
    if !(delta.is_finite() && delta > 0.0) {
        return Err(HomeostatError::InvalidStep(delta));
    }
    let plus = relation.residual(&point.with(symbol, x + delta));
    let minus = relation.residual(&point.with(symbol, x - delta));
    if !(plus.is_finite() && minus.is_finite()) {
        return Err(HomeostatError::NonFiniteResidual);
    }
    Ok((plus - minus) / (2.0 * delta))
}

type GainFn = dyn Fn(f64) -> Result<f64, HomeostatError> + Send + Sync;

/// One scalar homeostat `d^ν Δy_j/dt^ν = F_j + α_j(t) Δu_j`.
#[derive(Clone)]
pub struct HomeostatChannel {
    output: usize,
    order: usize,
    alpha: Arc<GainFn>,
}

impl fmt::Debug for HomeostatChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HomeostatChannel")
            .field("output", &self.output)
            .field("order", &self.order)
            .finish_non_exhaustive()
    }
}

impl HomeostatChannel {
    /// Channel with an explicitly given gain schedule.
    pub fn explicit(
        output: usize,
        order: usize,
        alpha: impl Fn(f64) -> Result<f64, HomeostatError> + Send + Sync + 'static,
    ) -> Result<Self, HomeostatError> {
        if order == 0 {
            return Err(HomeostatError::Shape("homeostat order must be at least 1".into()));
        }
        Ok(Self {
            output,
            order,
            alpha: Arc::new(alpha),
        })
    }

    /// Constant-gain channel, the classic ultra-local model.
    pub fn constant(output: usize, order: usize, alpha: f64) -> Result<Self, HomeostatError> {
        Self::explicit(output, order, move |_| Ok(alpha))
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `α(t)`; errors when it is not finite or falls below the singularity threshold.
    pub fn alpha(&self, t: f64) -> Result<f64, HomeostatError> {
        let a = (self.alpha)(t)?;
        if !a.is_finite() || a.abs() <= SINGULARITY_THRESHOLD {
            return Err(HomeostatError::SingularChannel {
                output: self.output,
                t,
                value: a,
            });
        }
        Ok(a)
    }
}

/// Tangent linearization of `relation` along `reference` for output `output`.
///
/// The order is the smallest `ι ≥ 1` whose partial `∂E/∂y_output^(ι)` exceeds
/// [`SINGULARITY_THRESHOLD`] at one of [`ORDER_DETECTION_SAMPLES`] points of
/// `horizon`, unless `order_override` pins it.
pub fn derive_channel(
    relation: &ImplicitFlatRelation,
    reference: &[ReferenceTrajectory],
    output: usize,
    horizon: (f64, f64),
    order_override: Option<usize>,
) -> Result<HomeostatChannel, HomeostatError> {
    let (t0, t1) = horizon;
    if !(t1 > t0) {
        return Err(HomeostatError::Signal(SignalError::InvalidInterval {
            start: t0,
            end: t1,
        }));
    }
    let max_order = *relation.orders().get(output).ok_or_else(|| {
        HomeostatError::Shape(format!(
            "output {output} is not read by a relation over {} outputs",
            relation.outputs()
        ))
    })?;
    let n = ORDER_DETECTION_SAMPLES;
    let times: Vec<f64> = (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect();
    let points = times
        .iter()
        .map(|&t| relation.point_on_reference(reference, t))
        .collect::<Result<Vec<_>, _>>()?;

    let order = match order_override {
        Some(0) => return Err(HomeostatError::Shape("homeostat order must be at least 1".into())),
        Some(order) => order,
        None => {
            let mut found = None;
            for order in 1..=max_order {
                let symbol = Symbol::Output { index: output, order };
                let mut nonzero = false;
                for p in &points {
                    if relation.partial(p, symbol)?.abs() > SINGULARITY_THRESHOLD {
                        nonzero = true;
                        break;
                    }
                }
                if nonzero {
                    found = Some(order);
                    break;
                }
            }
            found.ok_or(HomeostatError::DegenerateRelation { output })?
        }
    };

    let symbol = Symbol::Output { index: output, order };
    let leads = points
        .iter()
        .map(|p| relation.partial(p, symbol))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, (&lead, &t)) in leads.iter().zip(&times).enumerate() {
        if lead.abs() <= SINGULARITY_THRESHOLD {
            return Err(HomeostatError::SingularChannel { output, t, value: lead });
        }
        // a sign change between samples means a zero in between
        if i > 0 && lead.signum() != leads[i - 1].signum() {
            let lead_at = |t: f64| -> Result<f64, HomeostatError> {
                relation.partial(&relation.point_on_reference(reference, t)?, symbol)
            };
            let (mut lo, mut hi) = (times[i - 1], t);
            let lo_sign = leads[i - 1].signum();
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if lead_at(mid)?.signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            return Err(HomeostatError::SingularChannel {
                output,
                t,
                value: lead_at(t)?,
            });
        }
    }

    let relation = relation.clone();
    let reference = reference.to_vec();
    let channel = HomeostatChannel::explicit(output, order, move |t| {
        let p = relation.point_on_reference(&reference, t)?;
        let lead = relation.partial(&p, symbol)?;
        if lead.abs() <= SINGULARITY_THRESHOLD {
            return Err(HomeostatError::SingularChannel { output, t, value: lead });
        }
        Ok(-relation.partial(&p, Symbol::Control)? / lead)
    })?;
    for &t in &times {
        channel.alpha(t)?;
    }
    Ok(channel)
}

/// Numbers of independent controls `m` and flat outputs `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatIoProfile {
    pub m: usize,
    pub p: usize,
}

pub fn validate_flat_io(profile: FlatIoProfile) -> Result<(), HomeostatError> {
    if profile.m != profile.p {
        return Err(HomeostatError::FlatIoMismatch {
            m: profile.m,
            p: profile.p,
        });
    }
    Ok(())
}

/// `u1* = (ẏ1* − y1*) / y1*²` for the two-input example system.
pub fn nominal_u1(y1_ref: &ReferenceTrajectory, t: f64) -> Result<f64, HomeostatError> {
    let y = y1_ref.eval(t, 0)?;
    let dy = y1_ref.eval(t, 1)?;
    if y.abs() <= SINGULARITY_THRESHOLD {
        return Err(HomeostatError::FlatnessSingularity {
            t,
            what: "y1*",
            value: y,
        });
    }
    Ok((dy - y) / (y * y))
}

/// `u2* = (y2*‴ + ÿ2* − ẏ2* − y2*) / (y1*·u1*)` for the two-input example system.
pub fn nominal_u2(y1_ref: &ReferenceTrajectory, y2_ref: &ReferenceTrajectory, t: f64) -> Result<f64, HomeostatError> {
    nominal_u2_with(y1_ref, y2_ref, t, 1.0, 1.0)
}

/// `u2*` with the coefficients of `ẏ2*` and `y2*` replaced.
pub(crate) fn nominal_u2_with(
    y1_ref: &ReferenceTrajectory,
    y2_ref: &ReferenceTrajectory,
    t: f64,
    c_dy: f64,
    c_y: f64,
) -> Result<f64, HomeostatError> {
    let u1 = nominal_u1(y1_ref, t)?;
    let den = y1_ref.eval(t, 0)? * u1;
    if den.abs() <= SINGULARITY_THRESHOLD {
        return Err(HomeostatError::FlatnessSingularity {
            t,
            what: "y1*·u1*",
            value: den,
        });
    }
    let y2 = y2_ref.jet(t, 3)?;
    Ok((y2[3] + y2[2] - c_dy * y2[1] - c_y * y2[0]) / den)
}

/// `E1 = ẏ1 − y1 − y1²·u1`, the first relation of the example system.
pub fn example_relation_u1() -> ImplicitFlatRelation {
    ImplicitFlatRelation::new(vec![1, 0], 0, |p| {
        let (y1, dy1) = (p.y(0, 0), p.y(0, 1));
        dy1 - y1 - y1 * y1 * p.control
    })
}

/// `E2 = y2‴ + ÿ2 − ẏ2 − y2 − y1·u1·u2` with `u1` eliminated through `E1`,
/// so `y1·u1 = (ẏ1 − y1)/y1` and the relation involves flat outputs and `u2` only.
pub fn example_relation_u2() -> ImplicitFlatRelation {
    ImplicitFlatRelation::new(vec![1, 3], 1, |p| {
        let (y1, dy1) = (p.y(0, 0), p.y(0, 1));
        let y1u1 = (dy1 - y1) / y1;
        p.y(1, 3) + p.y(1, 2) - p.y(1, 1) - p.y(1, 0) - y1u1 * p.control
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrator() -> ImplicitFlatRelation {
        ImplicitFlatRelation::new(vec![1], 0, |p| p.y(0, 1) - p.control)
    }

    #[test]
    fn e1_on_constant_reference() {
        let refs = [ReferenceTrajectory::constant(2.0), ReferenceTrajectory::constant(0.0)];
        let ch = derive_channel(&example_relation_u1(), &refs, 0, (0.0, 10.0), None).unwrap();
        assert_eq!(ch.order(), 1);
        let a = ch.alpha(3.0).unwrap();
        assert!((a - 4.0).abs() < 1e-6 * 4.0, "{a}");
    }

    #[test]
    fn integrator_has_unit_gain() {
        let refs = [ReferenceTrajectory::smoothstep(0.0, 3.0, 1.0, 4.0).unwrap()];
        let ch = derive_channel(&integrator(), &refs, 0, (0.0, 5.0), None).unwrap();
        assert_eq!(ch.order(), 1);
        for t in [0.0, 1.7, 2.5, 5.0] {
            assert!((ch.alpha(t).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn e2_with_order_override() {
        let y1 = ReferenceTrajectory::smoothstep(1.0, 1.5, 2.0, 8.0).unwrap();
        let y2 = ReferenceTrajectory::smoothstep(0.0, 1.0, 1.0, 6.0).unwrap();
        let refs = [y1.clone(), y2];
        let rel = example_relation_u2();
        // the smallest-index rule alone picks order 1
        assert_eq!(derive_channel(&rel, &refs, 1, (0.0, 10.0), None).unwrap().order(), 1);
        let ch = derive_channel(&rel, &refs, 1, (0.0, 10.0), Some(2)).unwrap();
        assert_eq!(ch.order(), 2);
        for i in 0..=20 {
            let t = 0.5 * i as f64;
            let expected = y1.eval(t, 1).unwrap() / y1.eval(t, 0).unwrap() - 1.0;
            let via_u1 = y1.eval(t, 0).unwrap() * nominal_u1(&y1, t).unwrap();
            assert!((expected - via_u1).abs() < 1e-12);
            let a = ch.alpha(t).unwrap();
            assert!(
                (a - expected).abs() <= 1e-6 * expected.abs(),
                "t={t}: {a} vs {expected}"
            );
        }
    }

    #[test]
    fn degenerate_relation() {
        // E = y − u carries no derivative of y
        let rel = ImplicitFlatRelation::new(vec![1], 0, |p| p.y(0, 0) - p.control);
        let refs = [ReferenceTrajectory::constant(1.0)];
        assert_eq!(
            derive_channel(&rel, &refs, 0, (0.0, 1.0), None).unwrap_err(),
            HomeostatError::DegenerateRelation { output: 0 }
        );
    }

    #[test]
    fn singular_leading_partial_names_time() {
        // E = y·ẏ − u: ∂E/∂ẏ = y vanishes where the reference crosses zero
        let rel = ImplicitFlatRelation::new(vec![1], 0, |p| p.y(0, 0) * p.y(0, 1) - p.control);
        let refs = [ReferenceTrajectory::polynomial(vec![-1.0, 1.0], 0.0, 2.0).unwrap()];
        let err = derive_channel(&rel, &refs, 0, (0.0, 2.0), Some(1)).unwrap_err();
        match err {
            HomeostatError::SingularChannel { t, .. } => assert!((t - 1.0).abs() < 1e-9, "{t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_gain_on_zero_reference() {
        // ẏ = y·u degenerates at y = 0
        let rel = ImplicitFlatRelation::new(vec![1], 0, |p| p.y(0, 1) - p.y(0, 0) * p.control);
        let refs = [ReferenceTrajectory::constant(0.0)];
        assert!(matches!(
            derive_channel(&rel, &refs, 0, (0.0, 1.0), None),
            Err(HomeostatError::SingularChannel { .. })
        ));
    }

    #[test]
    fn finite_difference_partials() {
        let e1 = example_relation_u1();
        let p = FlatPoint::new(vec![vec![2.0, 0.0], vec![0.0]], 0.0);
        let d = finite_diff_partial(&e1, Symbol::Control, &p, None).unwrap();
        assert!((d + 4.0).abs() < 1e-6, "{d}");

        let p = FlatPoint::new(vec![vec![0.3, -1.2]], 0.7);
        let d = finite_diff_partial(&integrator(), Symbol::Output { index: 0, order: 1 }, &p, None).unwrap();
        assert!((d - 1.0).abs() < 1e-9);

        // y1 = 1, u1 = −1 means ẏ1 = 0 through E1
        let e2 = example_relation_u2();
        let p = FlatPoint::new(vec![vec![1.0, 0.0], vec![0.0; 4]], 0.0);
        let d = finite_diff_partial(&e2, Symbol::Control, &p, None).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "{d}");

        assert!(matches!(
            finite_diff_partial(&e2, Symbol::Control, &p, Some(0.0)),
            Err(HomeostatError::InvalidStep(_))
        ));
        let blowup = ImplicitFlatRelation::new(vec![0], 0, |p| 1.0 / p.control.abs().min(0.0));
        assert_eq!(
            finite_diff_partial(&blowup, Symbol::Control, &p, None),
            Err(HomeostatError::NonFiniteResidual)
        );
    }

    #[test]
    fn analytic_partials_take_precedence() {
        let rel = example_relation_u1().with_partials(|p, s| match s {
            Symbol::Output { index: 0, order: 1 } => 1.0,
            Symbol::Output { index: 0, order: 0 } => -1.0 - 2.0 * p.y(0, 0) * p.control,
            Symbol::Control => -p.y(0, 0) * p.y(0, 0),
            _ => 0.0,
        });
        let y1 = ReferenceTrajectory::smoothstep(0.8, 1.6, 1.0, 3.0).unwrap();
        let refs = [y1.clone(), ReferenceTrajectory::constant(0.0)];
        let ch = derive_channel(&rel, &refs, 0, (0.0, 4.0), None).unwrap();
        for t in [0.0, 1.5, 2.0, 3.9] {
            let y = y1.eval(t, 0).unwrap();
            assert!((ch.alpha(t).unwrap() - y * y).abs() < 1e-12);
        }
    }

    #[test]
    fn nominal_controls() {
        let one = ReferenceTrajectory::constant(1.0);
        assert_eq!(nominal_u1(&one, 0.0).unwrap(), -1.0);
        // ẏ1* = y1* = 2 at t = 0 on y1*(t) = 2 + 2t
        let ramp = ReferenceTrajectory::polynomial(vec![2.0, 2.0], 0.0, 1.0).unwrap();
        assert_eq!(nominal_u1(&ramp, 0.0).unwrap(), 0.0);
        assert!(matches!(
            nominal_u1(&ReferenceTrajectory::constant(0.0), 1.0),
            Err(HomeostatError::FlatnessSingularity { .. })
        ));

        assert_eq!(nominal_u2(&one, &ReferenceTrajectory::constant(3.0), 0.0).unwrap(), 3.0);
        assert_eq!(nominal_u2(&one, &ReferenceTrajectory::constant(0.0), 0.0).unwrap(), 0.0);
        assert!(matches!(
            nominal_u2(&ramp, &ReferenceTrajectory::constant(1.0), 0.0),
            Err(HomeostatError::FlatnessSingularity { what: "y1*·u1*", .. })
        ));
    }

    #[test]
    fn flat_io_profiles() {
        assert!(validate_flat_io(FlatIoProfile { m: 2, p: 2 }).is_ok());
        assert!(validate_flat_io(FlatIoProfile { m: 1, p: 1 }).is_ok());
        let err = validate_flat_io(FlatIoProfile { m: 2, p: 1 }).unwrap_err();
        assert!(err.to_string().contains("p = m"));
    }

    #[test]
    fn nominal_controls_zero_the_relations() {
        let y1 = ReferenceTrajectory::smoothstep_sequence(1.0, &[(5.0, 25.0, 1.5), (60.0, 90.0, 0.8)]).unwrap();
        let y2 = ReferenceTrajectory::smoothstep_sequence(0.0, &[(10.0, 40.0, 1.0), (70.0, 100.0, -0.5)]).unwrap();
        let refs = [y1.clone(), y2.clone()];
        let (e1, e2) = (example_relation_u1(), example_relation_u2());
        for i in 0..=300 {
            let t = 0.5 * i as f64;
            let u1 = nominal_u1(&y1, t).unwrap();
            let u2 = nominal_u2(&y1, &y2, t).unwrap();
            let r1 = e1.residual(&FlatPoint::new(e1.jets_at(&refs, t).unwrap(), u1));
            let r2 = e2.residual(&FlatPoint::new(e2.jets_at(&refs, t).unwrap(), u2));
            assert!(r1.abs() <= 1e-8 && r2.abs() <= 1e-8, "t={t}: {r1} {r2}");
        }
    }

    #[test]
    fn gain_is_invariant_under_scaling() {
        let y1 = ReferenceTrajectory::smoothstep(1.0, 2.0, 0.0, 5.0).unwrap();
        let refs = [y1, ReferenceTrajectory::constant(0.0)];
        let base = derive_channel(&example_relation_u1(), &refs, 0, (0.0, 5.0), None).unwrap();
        for c in [-3.0, 0.25, 7.5] {
            let scaled = derive_channel(&example_relation_u1().scaled(c), &refs, 0, (0.0, 5.0), None).unwrap();
            for t in [0.0, 1.0, 2.5, 4.0] {
                let (a, b) = (base.alpha(t).unwrap(), scaled.alpha(t).unwrap());
                assert!((a - b).abs() <= 1e-9 * a.abs(), "c={c} t={t}: {a} vs {b}");
            }
        }
    }
}
