//! Time grids, sampled series, sliding windows and smooth reference trajectories.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("sampling period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("time grid needs at least one step")]
    EmptyGrid,
    #[error("t = {t} lies outside the trajectory horizon [{start}, {end}]")]
    OutsideHorizon { t: f64, start: f64, end: f64 },
    #[error("derivative of order {order} requested, trajectory provides up to {max}")]
    OrderTooHigh { order: usize, max: usize },
    #[error("interval end {end} must be after start {start}")]
    InvalidInterval { start: f64, end: f64 },
    #[error("segments must be contiguous: gap or overlap at {0}")]
    Discontiguous(f64),
    #[error("derivative {order} jumps at segment join t = {t}: {left} vs {right}")]
    NotSmooth {
        t: f64,
        order: usize,
        left: f64,
        right: f64,
    },
    #[error("a trajectory needs at least one segment")]
    NoSegments,
    #[error("t = {0} is not a grid point")]
    OffGrid(f64),
    #[error("window length {span} is not a positive multiple of the sampling period {h}")]
    WindowNotMultiple { span: f64, h: f64 },
    #[error("window of length {span} ending at t = {t} starts before the first sample")]
    WarmUp { t: f64, span: f64 },
    #[error("no sample recorded yet at t = {0}")]
    NotRecorded(f64),
    #[error("series is full ({0} samples)")]
    SeriesFull(usize),
    #[error("non-finite sample value {0}")]
    NonFinite(f64),
    #[error("a window needs at least two samples, got {0}")]
    WindowTooShort(usize),
}

/// Uniform sampling grid. Point `k` sits at `t0 + k·h`, computed directly so
/// long horizons do not accumulate drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    h: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, h: f64, n_steps: usize) -> Result<Self, SignalError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(SignalError::InvalidPeriod(h));
        }
        if n_steps == 0 {
            return Err(SignalError::EmptyGrid);
        }
        Ok(Self { t0, h, n_steps })
    }

    /// Grid covering `[t0, t0 + duration]`, rounding the step count to the nearest integer.
    pub fn covering(t0: f64, h: f64, duration: f64) -> Result<Self, SignalError> {
        if !(h.is_finite() && h > 0.0) {
            return Err(SignalError::InvalidPeriod(h));
        }
        let n = (duration / h).round();
        if !(n.is_finite() && n >= 1.0) {
            return Err(SignalError::EmptyGrid);
        }
        Self::new(t0, h, n as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn period(&self) -> f64 {
        self.h
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of grid points, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Index of the grid point at `t`, tolerating round-off of `1e-9·h`.
    pub fn index_of(&self, t: f64) -> Result<usize, SignalError> {
        let k = ((t - self.t0) / self.h).round();
        if !k.is_finite() || k < 0.0 {
            return Err(SignalError::OffGrid(t));
        }
        let k = k as usize;
        if (self.time(k) - t).abs() > 1e-9 * self.h {
            return Err(SignalError::OffGrid(t));
        }
        Ok(k)
    }

    /// Number of periods in `span`; errors unless `span` is a positive integer multiple of `h`.
    pub fn periods_in(&self, span: f64) -> Result<usize, SignalError> {
        let m = (span / self.h).round();
        if !(m.is_finite() && m >= 1.0) || (m * self.h - span).abs() > 1e-9 * span.abs() {
            return Err(SignalError::WindowNotMultiple { span, h: self.h });
        }
        Ok(m as usize)
    }
}

/// Values recorded one per grid point, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SampledSeries {
    pub fn new(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: Vec::with_capacity(grid.len()),
        }
    }

    pub fn from_values(grid: TimeGrid, values: Vec<f64>) -> Result<Self, SignalError> {
        if values.len() > grid.len() {
            return Err(SignalError::SeriesFull(grid.len()));
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(bad));
        }
        Ok(Self { grid, values })
    }

    pub fn push(&mut self, value: f64) -> Result<(), SignalError> {
        if !value.is_finite() {
            return Err(SignalError::NonFinite(value));
        }
        if self.values.len() == self.grid.len() {
            return Err(SignalError::SeriesFull(self.grid.len()));
        }
        self.values.push(value);
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniformly sampled window over `σ ∈ [0, span]`; the last sample sits at `σ = span`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    span: f64,
    values: Vec<f64>,
}

impl Window {
    pub fn new(span: f64, values: Vec<f64>) -> Result<Self, SignalError> {
        if !(span.is_finite() && span > 0.0) {
            return Err(SignalError::InvalidInterval { start: 0.0, end: span });
        }
        if values.len() < 2 {
            return Err(SignalError::WindowTooShort(values.len()));
        }
        Ok(Self { span, values })
    }

    /// Samples a function of `σ` on `n` uniform points over `[0, span]`.
    pub fn from_fn(span: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, SignalError> {
        let last = n.saturating_sub(1).max(1) as f64;
        let values = (0..n).map(|i| f(span * i as f64 / last)).collect();
        Self::new(span, values)
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn step(&self) -> f64 {
        self.span / (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.span * i as f64 / (self.values.len() - 1) as f64
    }

    /// `(σ, value)` pairs.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.sigma(i), v))
    }

    /// Pointwise map, keeping the grid.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Window {
        Window {
            span: self.span,
            values: self.samples().map(|(s, v)| f(s, v)).collect(),
        }
    }
}

/// The last `span` seconds of `series` ending at grid time `t`, re-indexed to `σ ∈ [0, span]`.
///
/// Returns [`SignalError::WarmUp`] when `t - span` precedes the first grid point.
pub fn window_slice(series: &SampledSeries, t: f64, span: f64) -> Result<Window, SignalError> {
    let grid = series.grid();
    let m = grid.periods_in(span)?;
    let k = grid.index_of(t)?;
    if k < m {
        return Err(SignalError::WarmUp { t, span });
    }
    if k >= series.len() {
        return Err(SignalError::NotRecorded(t));
    }
    Window::new(span, series.values()[k - m..=k].to_vec())
}

/// One polynomial piece valid on `[start, end]`:
/// `offset + gain · Σ cᵢ τⁱ` with `τ = (t - origin) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    start: f64,
    end: f64,
    origin: f64,
    scale: f64,
    offset: f64,
    gain: f64,
    coeffs: Vec<f64>,
}

impl Segment {
    pub fn new(start: f64, end: f64, origin: f64, coeffs: Vec<f64>) -> Result<Self, SignalError> {
        if !(end > start) || !origin.is_finite() {
            return Err(SignalError::InvalidInterval { start, end });
        }
        Ok(Self {
            start,
            end,
            origin,
            scale: 1.0,
            offset: 0.0,
            gain: 1.0,
            coeffs,
        })
    }

    /// Normalized piece: keeps integer coefficients exact so boundary
    /// derivatives of the smoothstep cancel without round-off.
    fn normalized(start: f64, end: f64, offset: f64, gain: f64, coeffs: Vec<f64>) -> Result<Self, SignalError> {
        let mut seg = Self::new(start, end, start, coeffs)?;
        seg.scale = end - start;
        seg.offset = offset;
        seg.gain = gain;
        Ok(seg)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `order`-th derivative at `t` (no interval check).
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let x = (t - self.origin) / self.scale;
        let mut acc = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate().skip(order).rev() {
            acc = acc * x + c * falling_factorial(i, order);
        }
        let scaled = self.gain * acc / self.scale.powi(order as i32);
        if order == 0 {
            self.offset + scaled
        } else {
            scaled
        }
    }
}

fn falling_factorial(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).fold(1.0, |acc, v| acc * v as f64)
}

/// Piecewise-polynomial reference with exact derivatives up to `max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    segments: Vec<Segment>,
    max_order: usize,
}

/// Default highest derivative order, enough for the third derivative of the
/// example system's second flat output.
pub const DEFAULT_MAX_ORDER: usize = 3;

// Normalized degree-7 smoothstep 35τ⁴ − 84τ⁵ + 70τ⁶ − 20τ⁷.
const SMOOTHSTEP7: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0];

impl ReferenceTrajectory {
    /// Joins contiguous segments, checking `C^(max_order-1)` continuity at each join.
    pub fn from_segments(segments: Vec<Segment>, max_order: usize) -> Result<Self, SignalError> {
        if segments.is_empty() {
            return Err(SignalError::NoSegments);
        }
        for pair in segments.windows(2) {
            let (left, right) = (&pair[0], &pair[1]);
            if left.end != right.start {
                return Err(SignalError::Discontiguous(left.end));
            }
            let t = left.end;
            for order in 0..max_order {
                let (a, b) = (left.eval(t, order), right.eval(t, order));
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(SignalError::NotSmooth {
                        t,
                        order,
                        left: a,
                        right: b,
                    });
                }
            }
        }
        Ok(Self { segments, max_order })
    }

    /// `value` for all time.
    pub fn constant(value: f64) -> Self {
        Self {
            segments: vec![Segment {
                start: f64::NEG_INFINITY,
                end: f64::INFINITY,
                origin: 0.0,
                scale: 1.0,
                offset: 0.0,
                gain: 1.0,
                coeffs: vec![value],
            }],
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    /// A single polynomial `Σ cᵢ (t - start)ⁱ` on `[start, end]`.
    pub fn polynomial(coeffs: Vec<f64>, start: f64, end: f64) -> Result<Self, SignalError> {
        let origin = if start.is_finite() { start } else { 0.0 };
        Self::from_segments(vec![Segment::new(start, end, origin, coeffs)?], DEFAULT_MAX_ORDER)
    }

    /// Holds `y_from`, moves to `y_to` over `[t_start, t_end]` with vanishing
    /// first to third derivatives at both ends, then holds `y_to`.
    pub fn smoothstep(y_from: f64, y_to: f64, t_start: f64, t_end: f64) -> Result<Self, SignalError> {
        Self::smoothstep_sequence(y_from, &[(t_start, t_end, y_to)])
    }

    /// Chains smoothsteps `(start, end, target)` starting from `initial`.
    /// Transitions must be ordered and non-overlapping.
    pub fn smoothstep_sequence(initial: f64, transitions: &[(f64, f64, f64)]) -> Result<Self, SignalError> {
        let mut segments = Vec::with_capacity(2 * transitions.len() + 1);
        let mut level = initial;
        let mut cursor = f64::NEG_INFINITY;
        for &(t_start, t_end, target) in transitions {
            if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
                return Err(SignalError::InvalidInterval {
                    start: t_start,
                    end: t_end,
                });
            }
            if t_start < cursor {
                return Err(SignalError::Discontiguous(t_start));
            }
            if t_start > cursor {
                segments.push(Segment::new(cursor, t_start, 0.0, vec![level])?);
            }
            if target == level {
                segments.push(Segment::new(t_start, t_end, 0.0, vec![level])?);
            } else {
                segments.push(Segment::normalized(
                    t_start,
                    t_end,
                    level,
                    target - level,
                    SMOOTHSTEP7.to_vec(),
                )?);
            }
            level = target;
            cursor = t_end;
        }
        segments.push(Segment::new(cursor, f64::INFINITY, 0.0, vec![level])?);
        Self::from_segments(segments, DEFAULT_MAX_ORDER)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.segments[0].start, self.segments[self.segments.len() - 1].end)
    }

    /// `order`-th derivative at `t`. At a join the later segment is used.
    pub fn eval(&self, t: f64, order: usize) -> Result<f64, SignalError> {
        if order > self.max_order {
            return Err(SignalError::OrderTooHigh {
                order,
                max: self.max_order,
            });
        }
        let (start, end) = self.horizon();
        if !(t >= start && t <= end) {
            return Err(SignalError::OutsideHorizon { t, start, end });
        }
        let idx = self.segments.partition_point(|s| s.start <= t).saturating_sub(1);
        Ok(self.segments[idx].eval(t, order))
    }

    /// Value and derivatives `0..=order` at `t`.
    pub fn jet(&self, t: f64, order: usize) -> Result<Vec<f64>, SignalError> {
        (0..=order).map(|k| self.eval(t, k)).collect()
    }
}

/// Free-function form of [`ReferenceTrajectory::eval`].
pub fn eval_trajectory(traj: &ReferenceTrajectory, t: f64, order: usize) -> Result<f64, SignalError> {
    traj.eval(t, order)
}

/// Free-function form of [`ReferenceTrajectory::smoothstep`].
pub fn make_smoothstep(y_from: f64, y_to: f64, t_start: f64, t_end: f64) -> Result<ReferenceTrajectory, SignalError> {
    ReferenceTrajectory::smoothstep(y_from, y_to, t_start, t_end)
}
