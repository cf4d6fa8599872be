//! Control pulses `g₁(t)`, `g₂(t)` and their noise perturbation profiles.
//!
//! Every shape produced here satisfies the symmetric pulse condition
//! `g₂(t) = g₁(−t)`, so a shape is fully described by `g₁`.

mod construct;
mod interp;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::ode::DEFAULT_HALF_WINDOW;
use crate::error::{Error, Result};
use crate::hilbert::{Cavity, PureState, KAPPA};

pub use construct::{initial_point, ConstructionConfig, ALPHA2_FLOOR};
pub use interp::MonotoneCubic;

pub(crate) use construct::integrate_reduced;
use construct::Construction;

/// Couplings below this magnitude (in units of κ) are treated as zero when
/// reporting a pulse's support.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

/// The `t ≥ 0` half of `g₁`, from which the full pulse is constructed.
pub trait SeedPulse: Send + Sync {
    fn value(&self, t: f64) -> f64;

    /// Time derivative; defaults to a central difference.
    fn derivative(&self, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1.0);
        (self.value(t + h) - self.value((t - h).max(0.0))) / (t + h - (t - h).max(0.0))
    }

    /// Time after which the seed is identically zero, if any.
    fn end_time(&self) -> Option<f64> {
        None
    }

    /// Times at which the seed is not smooth.
    fn knots(&self) -> Vec<f64> {
        Vec::new()
    }

    fn describe(&self) -> String {
        "user seed".to_string()
    }
}

/// Closure-backed seed with an optional analytic derivative.
pub struct FnSeed<F, D = fn(f64) -> f64> {
    f: F,
    df: Option<D>,
    end: Option<f64>,
    label: String,
}

impl<F: Fn(f64) -> f64 + Send + Sync> FnSeed<F> {
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { f, df: None, end: None, label: label.into() }
    }
}

impl<F, D> FnSeed<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    pub fn with_derivative<D2: Fn(f64) -> f64 + Send + Sync>(self, df: D2) -> FnSeed<F, D2> {
        FnSeed { f: self.f, df: Some(df), end: self.end, label: self.label }
    }

    pub fn ending_at(mut self, end: f64) -> Self {
        self.end = Some(end);
        self
    }
}

impl<F, D> SeedPulse for FnSeed<F, D>
where
    F: Fn(f64) -> f64 + Send + Sync,
    D: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, t: f64) -> f64 {
        match self.end {
            Some(end) if t > end => 0.0,
            _ => (self.f)(t),
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match (&self.df, self.end) {
            (_, Some(end)) if t > end => 0.0,
            (Some(df), _) => df(t),
            (None, _) => {
                let h = 1e-6 * t.abs().max(1.0);
                let lo = (t - h).max(0.0);
                ((self.f)(t + h) - (self.f)(lo)) / (t + h - lo)
            }
        }
    }

    fn end_time(&self) -> Option<f64> {
        self.end
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// `κ sech(κt)` restricted to `t ≥ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SechSeed;

impl SeedPulse for SechSeed {
    fn value(&self, t: f64) -> f64 {
        sech(t)
    }

    fn derivative(&self, t: f64) -> f64 {
        -sech(t) * t.tanh()
    }

    fn describe(&self) -> String {
        "sech seed".to_string()
    }
}

/// Constant coupling for `t ≥ 0`, the comparison seed shipped with the tool.
///
/// Not a published pulse: it is a stand-in for a comparison shape whose exact
/// form must be supplied by the user. A positive level keeps `g₁(+∞) > 0`,
/// which guarantees a complete transfer. Above `κ/2` the reduced system is
/// underdamped and the mirrored half turns negative, so the default sits at
/// critical damping.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceSeed {
    pub level: f64,
}

impl Default for ReferenceSeed {
    fn default() -> Self {
        Self { level: 0.5 * KAPPA }
    }
}

impl SeedPulse for ReferenceSeed {
    fn value(&self, _t: f64) -> f64 {
        self.level
    }

    fn derivative(&self, _t: f64) -> f64 {
        0.0
    }

    fn describe(&self) -> String {
        format!("reference seed (constant {}; not a published shape)", self.level)
    }
}

/// Discretised pulse: `values[j] = g₁(jT/n)` for `j < n`, and `g₁(T) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPulse {
    pub end_time: f64,
    pub values: Vec<f64>,
}

impl SampledPulse {
    pub fn new(end_time: f64, values: Vec<f64>) -> Result<Self> {
        let p = Self { end_time, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 {
            return Err(Error::Contract(format!("sampled pulse needs at least 2 points, got {}", self.values.len())));
        }
        if !(self.end_time > 0.0) || !self.end_time.is_finite() {
            return Err(Error::Contract(format!("end time must be positive, got {}", self.end_time)));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidPulse(format!("sampled values must be finite and nonnegative, got {v}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Knot times `t_j = jT/n`, `j = 0..=n` (the last knot is the pinned zero).
    pub fn knot_times(&self) -> Vec<f64> {
        let n = self.values.len();
        // jT/n rounds away from T at j = n for some T
        (0..=n).map(|j| if j == n { self.end_time } else { j as f64 * self.end_time / n as f64 }).collect()
    }

    pub fn interpolant(&self) -> Result<MonotoneCubic> {
        let mut ys = self.values.clone();
        ys.push(0.0);
        MonotoneCubic::new(self.knot_times(), ys)
    }
}

/// Interpolated seed built from a [`SampledPulse`]; zero after `T`.
#[derive(Debug, Clone)]
pub struct SampledSeed {
    curve: MonotoneCubic,
    end_time: f64,
}

impl SeedPulse for SampledSeed {
    fn value(&self, t: f64) -> f64 {
        if t > self.end_time {
            0.0
        } else {
            self.curve.value(t)
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        if t > self.end_time {
            0.0
        } else {
            self.curve.derivative(t)
        }
    }

    fn end_time(&self) -> Option<f64> {
        Some(self.end_time)
    }

    fn knots(&self) -> Vec<f64> {
        self.curve.knots().to_vec()
    }

    fn describe(&self) -> String {
        format!("sampled seed ({} points, T = {})", self.curve.knots().len() - 1, self.end_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseKind {
    AnalyticSech,
    CiracConstructed,
    Sampled,
    Zero,
}

impl fmt::Display for PulseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseKind::AnalyticSech => "analytic-sech",
            PulseKind::CiracConstructed => "cirac-constructed",
            PulseKind::Sampled => "sampled",
            PulseKind::Zero => "zero",
        })
    }
}

enum Source {
    Sech,
    Zero,
    Constructed(Construction),
}

struct ShapeInner {
    kind: PulseKind,
    source: Source,
    sampled: Option<SampledPulse>,
    label: String,
}

/// A symmetric pair of control pulses `(g₁, g₂)` with `g₂(t) = g₁(−t)`.
///
/// Cheap to clone; evaluation is pure.
#[derive(Clone)]
pub struct PulseShape {
    inner: Arc<ShapeInner>,
}

impl fmt::Debug for PulseShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PulseShape").field("kind", &self.inner.kind).field("label", &self.inner.label).finish()
    }
}

impl PulseShape {
    pub fn kind(&self) -> PulseKind {
        self.inner.kind
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    /// The sampled description, for shapes built by [`sampled_to_shape`].
    pub fn sampled(&self) -> Option<&SampledPulse> {
        self.inner.sampled.as_ref()
    }

    pub fn g1(&self, t: f64) -> f64 {
        match &self.inner.source {
            Source::Sech => sech(t),
            Source::Zero => 0.0,
            Source::Constructed(c) => {
                if t >= 0.0 {
                    c.seed_value(t)
                } else {
                    c.mirrored_value(-t)
                }
            }
        }
    }

    pub fn g2(&self, t: f64) -> f64 {
        self.g1(-t)
    }

    pub fn g1_derivative(&self, t: f64) -> f64 {
        match &self.inner.source {
            Source::Sech => -sech(t) * t.tanh(),
            Source::Zero => 0.0,
            Source::Constructed(c) => {
                if t >= 0.0 {
                    c.seed_derivative(t)
                } else {
                    -c.mirrored_derivative(-t)
                }
            }
        }
    }

    pub fn g2_derivative(&self, t: f64) -> f64 {
        -self.g1_derivative(-t)
    }

    pub fn value(&self, cavity: Cavity, t: f64) -> f64 {
        match cavity {
            Cavity::Left => self.g1(t),
            Cavity::Right => self.g2(t),
        }
    }

    pub fn derivative(&self, cavity: Cavity, t: f64) -> f64 {
        match cavity {
            Cavity::Left => self.g1_derivative(t),
            Cavity::Right => self.g2_derivative(t),
        }
    }

    /// Times (both signs) at which either pulse has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.inner.source {
            Source::Constructed(c) => {
                let mut pts: Vec<f64> = c.seed.knots();
                pts.push(c.seed.end_time().unwrap_or(c.horizon()));
                pts.push(0.0);
                let mirrored: Vec<f64> = pts.iter().map(|t| -t).collect();
                pts.extend(mirrored);
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                pts
            }
            _ => Vec::new(),
        }
    }

    /// Half-width of the default simulation window for this shape: the
    /// standard 15/κ of tail beyond the end of a finite seed.
    pub fn recommended_half_window(&self) -> f64 {
        match &self.inner.source {
            Source::Constructed(c) => DEFAULT_HALF_WINDOW + c.seed.end_time().unwrap_or(c.horizon()),
            _ => DEFAULT_HALF_WINDOW,
        }
    }

    /// `[t_lo, t_hi]` outside which both couplings stay below
    /// [`SUPPORT_CUTOFF`] (scanned on a 0.01/κ grid out to 100/κ).
    pub fn support(&self) -> (f64, f64) {
        if self.inner.kind == PulseKind::Zero {
            return (0.0, 0.0);
        }
        let step = 0.01;
        let mut hi = 0.0;
        let mut k = 0usize;
        while (k as f64) * step <= 100.0 {
            let t = k as f64 * step;
            if self.g1(t).abs() >= SUPPORT_CUTOFF || self.g1(-t).abs() >= SUPPORT_CUTOFF {
                hi = t;
            }
            k += 1;
        }
        (-hi, hi)
    }

    /// Final `α₁` of the reduced trajectory; zero for a perfect transfer.
    pub fn construction_residual_alpha1(&self) -> Option<f64> {
        match &self.inner.source {
            Source::Constructed(c) => Some(c.final_alpha1()),
            _ => None,
        }
    }

    /// Zero-jump residual along the reduced construction trajectory.
    pub fn construction_max_residual(&self) -> Option<f64> {
        match &self.inner.source {
            Source::Constructed(c) => Some(c.max_residual()),
            _ => None,
        }
    }

    /// `(α₁(u), β_a(u))` of the construction trajectory for `u ≥ 0`.
    pub fn construction_state(&self, u: f64) -> Option<(f64, f64)> {
        match &self.inner.source {
            Source::Constructed(c) => Some(c.state(u)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        format!("{} ({})", self.inner.label, self.inner.kind)
    }
}

pub(crate) fn sech(t: f64) -> f64 {
    1.0 / t.cosh()
}

/// The closed-form transfer pulse `g₁ = g₂ = κ sech(κt)`.
pub fn sech_pulse() -> PulseShape {
    PulseShape {
        inner: Arc::new(ShapeInner {
            kind: PulseKind::AnalyticSech,
            source: Source::Sech,
            sampled: None,
            label: "sech".to_string(),
        }),
    }
}

/// Both couplings identically zero.
pub fn zero_pulse() -> PulseShape {
    PulseShape {
        inner: Arc::new(ShapeInner {
            kind: PulseKind::Zero,
            source: Source::Zero,
            sampled: None,
            label: "zero".to_string(),
        }),
    }
}

/// Closed-form state along the sech transfer.
pub fn sech_reference_state(t: f64) -> PureState {
    let tanh = t.tanh();
    PureState {
        alpha1: 0.5 * (1.0 - tanh),
        alpha2: 0.5 * (1.0 + tanh),
        beta_s: 0.0,
        beta_a: -sech(t) * FRAC_1_SQRT_2,
        time: t,
    }
}

/// Builds the full symmetric pulse from its `t ≥ 0` half.
pub fn cirac_construct(seed: Arc<dyn SeedPulse>) -> Result<PulseShape> {
    cirac_construct_with(seed, &ConstructionConfig::default())
}

pub fn cirac_construct_with(seed: Arc<dyn SeedPulse>, cfg: &ConstructionConfig) -> Result<PulseShape> {
    let label = seed.describe();
    let construction = Construction::build(seed, cfg)?;
    Ok(PulseShape {
        inner: Arc::new(ShapeInner {
            kind: PulseKind::CiracConstructed,
            source: Source::Constructed(construction),
            sampled: None,
            label,
        }),
    })
}

/// Interpolates a sampled pulse and mirrors it into a full shape.
pub fn sampled_to_shape(p: &SampledPulse) -> Result<PulseShape> {
    sampled_to_shape_with(p, &ConstructionConfig::default())
}

pub fn sampled_to_shape_with(p: &SampledPulse, cfg: &ConstructionConfig) -> Result<PulseShape> {
    let seed = sampled_seed(p)?;
    let label = format!("sampled n={} T={}", p.len(), p.end_time);
    let construction = Construction::build(Arc::new(seed), cfg)?;
    Ok(PulseShape {
        inner: Arc::new(ShapeInner {
            kind: PulseKind::Sampled,
            source: Source::Constructed(construction),
            sampled: Some(p.clone()),
            label,
        }),
    })
}

pub(crate) fn sampled_seed(p: &SampledPulse) -> Result<SampledSeed> {
    p.validate()?;
    let curve = p.interpolant()?;
    let lowest = curve.minimum();
    if lowest < 0.0 {
        return Err(Error::InvalidPulse(format!("interpolant dips below zero (minimum {lowest:e})")));
    }
    Ok(SampledSeed { curve, end_time: p.end_time })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Amplitude,
    Timing,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Amplitude => "amplitude",
            NoiseKind::Timing => "timing",
        })
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "amplitude" => Ok(NoiseKind::Amplitude),
            "timing" => Ok(NoiseKind::Timing),
            other => Err(Error::Contract(format!("unknown noise kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationKind {
    /// `Δg_j = g_j`.
    Amplitude,
    /// `Δg₂ = g₂′`.
    Timing,
    /// `Δg_j ≡ 0`.
    Null,
}

/// Shape `Δg_j(t)` of the stochastic perturbation on one pulse.
#[derive(Debug, Clone)]
pub struct PerturbationProfile {
    target: Cavity,
    kind: PerturbationKind,
    shape: PulseShape,
}

impl PerturbationProfile {
    pub fn target(&self) -> Cavity {
        self.target
    }

    pub fn kind(&self) -> PerturbationKind {
        self.kind
    }

    /// The vanishing perturbation on `target`.
    pub fn null(shape: &PulseShape, target: Cavity) -> Self {
        Self { target, kind: PerturbationKind::Null, shape: shape.clone() }
    }

    pub fn delta_g(&self, t: f64) -> f64 {
        match self.kind {
            PerturbationKind::Amplitude => self.shape.value(self.target, t),
            PerturbationKind::Timing => self.shape.g2_derivative(t),
            PerturbationKind::Null => 0.0,
        }
    }
}

/// Perturbation profile for a noise source on one pulse. Timing noise is
/// only meaningful on pulse 2, since pulse 1 fixes the time origin.
pub fn perturbation(shape: &PulseShape, kind: NoiseKind, target: Cavity) -> Result<PerturbationProfile> {
    let kind = match kind {
        NoiseKind::Amplitude => PerturbationKind::Amplitude,
        NoiseKind::Timing => {
            if target != Cavity::Right {
                return Err(Error::Contract(
                    "timing noise is defined relative to pulse 1 and must target pulse 2".into(),
                ));
            }
            PerturbationKind::Timing
        }
    };
    Ok(PerturbationProfile { target, kind, shape: shape.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sech_pulse_values() {
        let p = sech_pulse();
        assert_eq!(p.g1(0.0), 1.0);
        assert_eq!(p.g1(2.7), p.g1(-2.7));
        for k in -50..=50 {
            let t = k as f64 * 0.3;
            assert!((p.g2(t) - p.g1(-t)).abs() < 1e-15);
        }
        assert_eq!(p.kind(), PulseKind::AnalyticSech);
        let (lo, hi) = p.support();
        assert!(hi > 23.0 && hi < 24.5 && lo == -hi, "support {lo}..{hi}");
    }

    #[test]
    fn sech_reference_values() {
        let s = sech_reference_state(0.0);
        assert_eq!(s.alpha1, 0.5);
        assert_eq!(s.alpha2, 0.5);
        assert_abs_diff_eq!(s.beta_a, -FRAC_1_SQRT_2, epsilon = 1e-15);
        let late = sech_reference_state(40.0);
        assert_abs_diff_eq!(late.alpha2, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(late.alpha1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(late.beta_a, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sech_reference_state(1.3).norm_sq(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn initial_point_for_unit_seed() {
        let (a, b) = initial_point(1.0);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b, -FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn sech_is_a_fixed_point_of_the_construction() {
        let shape = cirac_construct(Arc::new(SechSeed)).unwrap();
        let mut worst = 0.0f64;
        for k in 1..=1000 {
            let t = -10.0 * k as f64 / 1000.0;
            worst = worst.max((shape.g1(t) - sech(t)).abs());
        }
        assert!(worst < 1e-8, "max deviation {worst:e}");
        for k in 0..=100 {
            let t = -10.0 + 0.2 * k as f64;
            assert_eq!(shape.g2(t), shape.g1(-t));
        }
    }

    #[test]
    fn constructed_derivative_matches_finite_difference() {
        let shape = cirac_construct(Arc::new(SechSeed)).unwrap();
        for &t in &[-4.0, -1.5, -0.3, 0.7, 2.0] {
            let h = 1e-5;
            let fd = (shape.g1(t + h) - shape.g1(t - h)) / (2.0 * h);
            assert!((fd - shape.g1_derivative(t)).abs() < 1e-6, "t = {t}");
            let fd2 = (shape.g2(t + h) - shape.g2(t - h)) / (2.0 * h);
            assert!((fd2 - shape.g2_derivative(t)).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn construction_rejects_bad_seeds() {
        let zero = Arc::new(FnSeed::new("zero at origin", |_t| 0.0));
        assert!(matches!(cirac_construct(zero), Err(Error::InvalidSeed(_))));
        let negative = Arc::new(FnSeed::new("dips negative", |t: f64| 1.0 - t));
        assert!(matches!(cirac_construct(negative), Err(Error::InvalidSeed(_))));
    }

    #[test]
    fn sampled_shape_interpolates_knots() {
        let p = SampledPulse::new(4.0, vec![1.0, 0.5]).unwrap();
        let shape = sampled_to_shape(&p).unwrap();
        assert_abs_diff_eq!(shape.g1(0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.g1(2.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.g1(4.0), 0.0, epsilon = 1e-15);
        for t in [4.0001, 5.0, 17.0, 100.0] {
            assert_eq!(shape.g1(t), 0.0);
        }
        assert_eq!(shape.kind(), PulseKind::Sampled);
        assert_eq!(shape.recommended_half_window(), 19.0);
    }

    #[test]
    fn three_point_knots() {
        let p = SampledPulse::new(6.0, vec![1.0, 0.6, 0.3]).unwrap();
        let knots = p.knot_times();
        assert_eq!(knots, vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn sampled_pulse_validation() {
        assert!(SampledPulse::new(4.0, vec![1.0]).is_err());
        assert!(SampledPulse::new(0.0, vec![1.0, 0.5]).is_err());
        assert!(matches!(SampledPulse::new(4.0, vec![1.0, -0.5]), Err(Error::InvalidPulse(_))));
    }

    #[test]
    fn perturbation_profiles() {
        let p = sech_pulse();
        let amp = perturbation(&p, NoiseKind::Amplitude, Cavity::Left).unwrap();
        assert_eq!(amp.delta_g(0.0), 1.0);
        let timing = perturbation(&p, NoiseKind::Timing, Cavity::Right).unwrap();
        assert_eq!(timing.delta_g(0.0), 0.0);
        let expected = -sech(1.0) * 1.0f64.tanh();
        assert_abs_diff_eq!(timing.delta_g(1.0), expected, epsilon = 1e-15);
        assert!(matches!(perturbation(&p, NoiseKind::Timing, Cavity::Left), Err(Error::Contract(_))));
        assert_eq!(PerturbationProfile::null(&p, Cavity::Left).delta_g(0.3), 0.0);
    }

    #[test]
    fn noise_kind_parses() {
        assert_eq!("Amplitude".parse::<NoiseKind>().unwrap(), NoiseKind::Amplitude);
        assert_eq!("timing".parse::<NoiseKind>().unwrap(), NoiseKind::Timing);
        assert!("phase".parse::<NoiseKind>().is_err());
    }
}
