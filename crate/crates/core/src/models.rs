//! Local models of the sampled loss and their exact one-step solvers.
//!
//! A step solves
//!
//! ```text
//! x+ = argmin_y  f_x(y; s) + phi(y) + ||y - x||^2 / (2 alpha)
//! ```
//!
//! over `R^d` for the sample loss `f(y; s) = |<a, y>^2 - b|`. Every model
//! here only moves along `a` (plus a shrink toward the origin under a ridge
//! term), so each step reduces to a scalar problem with a closed form or a
//! short candidate enumeration.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVectorView;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, Vector};

/// One observation `(a, b)`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    a: DVectorView<'a, f64>,
    b: f64,
}

fn sign0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl<'a> Sample<'a> {
    pub fn new(a: DVectorView<'a, f64>, b: f64) -> Self {
        Sample { a, b }
    }

    pub fn from_vector(a: &'a Vector, b: f64) -> Self {
        Sample::new(DVectorView::from_slice(a.as_slice(), a.len()), b)
    }

    pub fn a(&self) -> &DVectorView<'a, f64> {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn inner(&self, x: &Vector) -> f64 {
        self.a.dot(x)
    }

    /// `c(x) = <a, x>^2 - b`.
    pub fn residual(&self, x: &Vector) -> f64 {
        let t = self.inner(x);
        t * t - self.b
    }

    /// `grad c(x) = 2 <a, x> a`.
    pub fn residual_grad(&self, x: &Vector) -> Vector {
        self.a * (2.0 * self.inner(x))
    }

    /// `f(x; s) = |c(x)|`.
    pub fn value(&self, x: &Vector) -> f64 {
        self.residual(x).abs()
    }

    /// `sign(c(x)) grad c(x)` with `sign(0) = 0`.
    pub fn subgradient(&self, x: &Vector) -> Vector {
        let t = self.inner(x);
        self.a * (2.0 * t * sign0(t * t - self.b))
    }

    /// `2 ||a||^2`, the weak convexity modulus of `f(.; s)`.
    pub fn weak_convexity_constant(&self) -> f64 {
        2.0 * self.a.norm_squared()
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("iterate"));
        }
        if !self.b.is_finite() || self.a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// `f(x; s) + <g, y - x>`.
    Subgradient,
    /// `|c(x) + <grad c(x), y - x>|`.
    ProxLinear,
    /// `f(y; s) + (lambda_s / 2) ||y - x||^2`.
    ProxPoint,
    /// Proximal-point model restricted to the ball `||y - x|| <= epsilon`.
    GuardedProxPoint { epsilon: f64 },
}

/// Default ball radius for the guarded model.
pub const DEFAULT_GUARD_RADIUS: f64 = 1.0;

impl ModelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelKind::GuardedProxPoint { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => Err(
                Error::InvalidParameter(format!("guard radius must be positive, got {epsilon}")),
            ),
            _ => Ok(()),
        }
    }

    /// One model step with `lambda_s = 2 ||a||^2` for the proximal models.
    pub fn step(&self, x: &Vector, sample: &Sample<'_>, alpha: f64, reg: Regularizer) -> Result<StepResult> {
        match *self {
            ModelKind::Subgradient => step_subgradient(x, sample, alpha, reg),
            ModelKind::ProxLinear => step_proxlinear(x, sample, alpha, reg),
            ModelKind::ProxPoint => step_proxpoint(x, sample, alpha, sample.weak_convexity_constant(), reg),
            ModelKind::GuardedProxPoint { epsilon } => {
                if reg != Regularizer::None {
                    return Err(Error::InvalidParameter(
                        "the guarded model is only solved without a regularizer".into(),
                    ));
                }
                step_guarded(x, sample, alpha, sample.weak_convexity_constant(), epsilon)
            }
        }
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Subgradient => f.write_str("sgm"),
            ModelKind::ProxLinear => f.write_str("proxlin"),
            ModelKind::ProxPoint => f.write_str("proxpt"),
            ModelKind::GuardedProxPoint { epsilon } => write!(f, "guarded:{epsilon}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim() {
            "sgm" => ModelKind::Subgradient,
            "proxlin" => ModelKind::ProxLinear,
            "proxpt" => ModelKind::ProxPoint,
            "guarded" => ModelKind::GuardedProxPoint {
                epsilon: DEFAULT_GUARD_RADIUS,
            },
            other => match other.strip_prefix("guarded:") {
                Some(eps) => ModelKind::GuardedProxPoint {
                    epsilon: eps
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad guard radius {eps:?}")))?,
                },
                None => return Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
            },
        };
        kind.validate()?;
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Regularizer {
    #[default]
    None,
    /// `(lambda / 2) ||x||^2`.
    Ridge(f64),
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::Ridge(l) if !(l > 0.0 && l.is_finite()) => {
                Err(Error::InvalidParameter(format!("ridge weight must be positive, got {l}")))
            }
            _ => Ok(()),
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::Ridge(l) => l,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * self.weight() * x.norm_squared()
    }

    /// Gradient at `x`.
    pub fn gradient(&self, x: &Vector) -> Vector {
        x * self.weight()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub x_next: Vector,
    /// `f_x(x) + phi(x) - f_x(x+) - phi(x+)`; nonnegative up to round-off.
    pub model_decrease: f64,
}

fn check_step(x: &Vector, sample: &Sample<'_>, alpha: f64, reg: Regularizer) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("stepsize must be positive, got {alpha}")));
    }
    reg.validate()?;
    sample.check(x)
}

fn finish(kind: ModelKind, x: &Vector, x_next: Vector, sample: &Sample<'_>, lambda_s: f64, reg: Regularizer) -> Result<StepResult> {
    if !all_finite(&x_next) {
        return Err(Error::NonFinite("step result"));
    }
    let before = model_value(kind, x, x, sample, lambda_s)? + reg.value(x);
    let after = model_value(kind, x, &x_next, sample, lambda_s)? + reg.value(&x_next);
    Ok(StepResult {
        x_next,
        model_decrease: before - after,
    })
}

/// Value of the model `f_x(y; s)`.
pub fn model_value(kind: ModelKind, x: &Vector, y: &Vector, sample: &Sample<'_>, lambda_s: f64) -> Result<f64> {
    if x.len() != sample.dim() || y.len() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            got: if x.len() != sample.dim() { x.len() } else { y.len() },
        });
    }
    let value = match kind {
        ModelKind::Subgradient => sample.value(x) + sample.subgradient(x).dot(&(y - x)),
        ModelKind::ProxLinear => (sample.residual(x) + sample.residual_grad(x).dot(&(y - x))).abs(),
        ModelKind::ProxPoint => sample.value(y) + 0.5 * lambda_s * (y - x).norm_squared(),
        ModelKind::GuardedProxPoint { epsilon } => {
            let dist = (y - x).norm();
            if dist > epsilon * (1.0 + 1e-12) {
                f64::INFINITY
            } else {
                sample.value(y) + 0.5 * lambda_s * dist * dist
            }
        }
    };
    Ok(value)
}

/// Stochastic subgradient step; under a ridge term the exact minimizer
/// `x / (1 + alpha lambda) - alpha / (1 + alpha lambda) g`.
pub fn step_subgradient(x: &Vector, sample: &Sample<'_>, alpha: f64, reg: Regularizer) -> Result<StepResult> {
    check_step(x, sample, alpha, reg)?;
    let g = sample.subgradient(x);
    let shrink = 1.0 + alpha * reg.weight();
    let x_next = (x - g * alpha) / shrink;
    finish(ModelKind::Subgradient, x, x_next, sample, 0.0, reg)
}

/// `argmin_y |b + <a, y>| + ||y - x0||^2 / 2 = x0 - clamp(lambda, -1, 1) a`
/// with `lambda = (<x0, a> + b) / ||a||^2`. Returns `x0` when `a = 0`.
pub fn prox_abs_linear(a: &Vector, b: f64, x0: &Vector) -> Vector {
    let a2 = a.norm_squared();
    if a2 == 0.0 {
        return x0.clone();
    }
    let lambda = (x0.dot(a) + b) / a2;
    x0 - a * lambda.clamp(-1.0, 1.0)
}

/// Stochastic prox-linear step.
///
/// Scaling the subproblem by `alpha' = alpha / (1 + alpha lambda)` and
/// recentering at `x' = x / (1 + alpha lambda)` gives the canonical form of
/// [`prox_abs_linear`] with `a~ = alpha' grad c(x)` and
/// `b~ = alpha' (c(x) - <grad c(x), x>)`.
pub fn step_proxlinear(x: &Vector, sample: &Sample<'_>, alpha: f64, reg: Regularizer) -> Result<StepResult> {
    check_step(x, sample, alpha, reg)?;
    let shrink = 1.0 + alpha * reg.weight();
    let scaled_alpha = alpha / shrink;
    let center = x / shrink;
    let v = sample.residual_grad(x);
    let x_next = if v.norm_squared() == 0.0 {
        center
    } else {
        let a_t = &v * scaled_alpha;
        let b_t = scaled_alpha * (sample.residual(x) - v.dot(x));
        prox_abs_linear(&a_t, b_t, &center)
    };
    finish(ModelKind::ProxLinear, x, x_next, sample, 0.0, reg)
}

fn scalar_objective(u0: f64, b: f64, penalty: f64, w: f64) -> f64 {
    let t = u0 + w;
    (t * t - b).abs() + 0.5 * penalty * w * w
}

fn scalar_candidates(u0: f64, b: f64, penalty: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    // branch t^2 >= b: (u0 + w)^2 - b + p w^2 / 2
    let w_up = -2.0 * u0 / (2.0 + penalty);
    let t = u0 + w_up;
    if t * t >= b {
        out.push(w_up);
    }
    // branch t^2 <= b: b - (u0 + w)^2 + p w^2 / 2
    if penalty != 2.0 {
        let w_down = 2.0 * u0 / (penalty - 2.0);
        let t = u0 + w_down;
        if t * t <= b {
            out.push(w_down);
        }
    }
    if b >= 0.0 {
        let r = b.sqrt();
        out.push(r - u0);
        out.push(-r - u0);
    }
    out
}

fn argmin_candidates(u0: f64, b: f64, penalty: f64, candidates: impl IntoIterator<Item = f64>) -> f64 {
    let mut best_w = 0.0_f64;
    let mut best_v = f64::INFINITY;
    for w in candidates {
        let v = scalar_objective(u0, b, penalty, w);
        if v < best_v || (v == best_v && w.abs() < best_w.abs()) {
            best_v = v;
            best_w = w;
        }
    }
    best_w
}

/// Global minimizer of `|(u0 + w)^2 - b| + penalty w^2 / 2` over `w`.
///
/// Both smooth branches are quadratics, so the minimizer is one of: the
/// stationary point of a branch lying inside that branch, a kink
/// `w = +-sqrt(b) - u0`, or `w = 0`. Ties go to the smaller `|w|`.
pub fn prox_scalar(u0: f64, b: f64, penalty: f64) -> f64 {
    argmin_candidates(u0, b, penalty, scalar_candidates(u0, b, penalty))
}

/// [`prox_scalar`] restricted to `|w| <= bound`.
pub fn prox_scalar_bounded(u0: f64, b: f64, penalty: f64, bound: f64) -> f64 {
    let inside = scalar_candidates(u0, b, penalty)
        .into_iter()
        .filter(|w| w.abs() <= bound);
    argmin_candidates(u0, b, penalty, inside.chain([-bound, bound]))
}

/// Stochastic proximal-point step with weak convexity constant `lambda_s`.
///
/// The minimizer has the form `y = x' + (w / ||a||^2) a`, where `x'` is the
/// center of the combined quadratic; `w = <a, y - x'>` solves
/// [`prox_scalar`] with penalty `(lambda_s + 1/alpha + lambda) / ||a||^2`.
pub fn step_proxpoint(x: &Vector, sample: &Sample<'_>, alpha: f64, lambda_s: f64, reg: Regularizer) -> Result<StepResult> {
    check_step(x, sample, alpha, reg)?;
    if !(lambda_s >= 0.0 && lambda_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda_s must be nonnegative, got {lambda_s}")));
    }
    let prox_weight = lambda_s + 1.0 / alpha;
    let total = prox_weight + reg.weight();
    let center = x * (prox_weight / total);
    let a2 = sample.a.norm_squared();
    let x_next = if a2 == 0.0 {
        center
    } else {
        let w = prox_scalar(sample.a.dot(&center), sample.b, total / a2);
        &center + sample.a * (w / a2)
    };
    finish(ModelKind::ProxPoint, x, x_next, sample, lambda_s, reg)
}

/// Proximal-point step constrained to `||y - x|| <= epsilon`.
pub fn step_guarded(x: &Vector, sample: &Sample<'_>, alpha: f64, lambda_s: f64, epsilon: f64) -> Result<StepResult> {
    check_step(x, sample, alpha, Regularizer::None)?;
    let kind = ModelKind::GuardedProxPoint { epsilon };
    kind.validate()?;
    if !(lambda_s >= 0.0 && lambda_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda_s must be nonnegative, got {lambda_s}")));
    }
    let a2 = sample.a.norm_squared();
    let x_next = if a2 == 0.0 {
        x.clone()
    } else {
        let penalty = (lambda_s + 1.0 / alpha) / a2;
        let w = prox_scalar_bounded(sample.inner(x), sample.b, penalty, epsilon * a2.sqrt());
        x + sample.a * (w / a2)
    };
    finish(kind, x, x_next, sample, lambda_s, Regularizer::None)
}
