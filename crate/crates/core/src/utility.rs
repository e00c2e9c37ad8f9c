//! The loss-averse utility index.
//!
//! The index is built from a gain-domain function `φ₁` (increasing,
//! concave, `φ₁(0) = 0`), a reference point `c`, and a steepness ratio
//! `θ ∈ (0, 1]`:
//!
//! ```text
//! φ(x) = φ₁(x − c)                 for x ≥ c
//! φ(x) = −θ⁻¹ φ₁(−θ (x − c))      for x < c
//! ```
//!
//! The construction is continuously differentiable at `c`, concave on
//! gains and convex on losses, and for θ < 1 strictly loss averse: the
//! mixed lottery `(c+x, ½; c−x, ½)` is strictly worse than `c` for sure.
//! The unique λ restoring indifference in `(x, λp; −λx, p) ∼ 0` is
//! `λ = θ⁻¹`, so `θ⁻¹ − 1` serves as a behavioral measure of loss
//! aversion.

use std::fmt;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Centralized numeric tolerances.
///
/// `identity` guards analytic identities verified by floating-point
/// evaluation on a grid; `exact` guards facts that should hold to
/// round-off (e.g. `φ₁(0) = 0`).
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub identity: f64,
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            identity: 1e-10,
            exact: 1e-12,
        }
    }
}

/// Validation grid for φ₁: x ∈ {0, 0.01, …, 10}.
///
/// A grid check cannot prove monotonicity or concavity; it is a cheap
/// heuristic that catches sign errors in user-supplied callables.
const GRID_STEP: f64 = 0.01;
const GRID_POINTS: usize = 1001;

fn grid() -> impl Iterator<Item = f64> {
    (0..GRID_POINTS).map(|i| i as f64 * GRID_STEP)
}

#[derive(Clone)]
enum Phi1Kind {
    Exponential,
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// The gain-domain index φ₁: ℝ₊ → ℝ.
#[derive(Clone)]
pub struct Phi1Spec {
    kind: Phi1Kind,
}

impl fmt::Debug for Phi1Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Phi1Kind::Exponential => write!(f, "Phi1Spec::Exponential"),
            Phi1Kind::Custom { name, .. } => write!(f, "Phi1Spec::Custom({name})"),
        }
    }
}

impl Phi1Spec {
    /// The built-in exponential index `φ₁(x) = 1 − e^{−x}`.
    pub fn exponential() -> Self {
        Phi1Spec {
            kind: Phi1Kind::Exponential,
        }
    }

    /// A user-supplied index, grid-checked at construction of the
    /// [`UtilityIndex`]. Smoothness and derivative bounds are declared by
    /// the caller, not machine-checked.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Phi1Spec {
            kind: Phi1Kind::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            Phi1Kind::Exponential => 1.0 - (-x).exp(),
            Phi1Kind::Custom { f, .. } => f(x),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Phi1Kind::Exponential => "exponential".into(),
            Phi1Kind::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    fn validate(&self, tol: &Tolerances) -> Result<()> {
        let at_zero = self.eval(0.0);
        if at_zero.abs() > tol.exact {
            return Err(Error::Validation(format!(
                "phi1(0) = {at_zero:e}, must vanish"
            )));
        }
        let values: Vec<f64> = grid().map(|x| self.eval(x)).collect();
        for (i, w) in values.windows(2).enumerate() {
            if w[1] - w[0] <= 0.0 {
                return Err(Error::Validation(format!(
                    "phi1 not strictly increasing near x = {}",
                    i as f64 * GRID_STEP
                )));
            }
        }
        for (i, w) in values.windows(3).enumerate() {
            let second = w[2] - 2.0 * w[1] + w[0];
            if second > tol.exact {
                return Err(Error::Validation(format!(
                    "phi1 not concave near x = {}",
                    (i + 1) as f64 * GRID_STEP
                )));
            }
        }
        Ok(())
    }
}

/// The loss-averse index φ.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct UtilityIndex {
    phi1: Phi1Spec,
    c: f64,
    theta: f64,
}

impl UtilityIndex {
    /// Builds the index, grid-validating φ₁ and, for θ < 1, strict loss
    /// aversion `−φ(c−x) > φ(c+x)`.
    ///
    /// θ may be any value in (0, 1]; the coupling θ = σ̲/σ̄ required by
    /// the limit theorems is a property of the *limit*, not of the index,
    /// and is enforced where those limits are computed.
    pub fn new(phi1: Phi1Spec, c: f64, theta: f64) -> Result<Self> {
        Self::with_tolerances(phi1, c, theta, &Tolerances::default())
    }

    pub fn with_tolerances(phi1: Phi1Spec, c: f64, theta: f64, tol: &Tolerances) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Parameter(format!(
                "theta must lie in (0, 1], got {theta}"
            )));
        }
        if !c.is_finite() {
            return Err(Error::Parameter(format!("c must be finite, got {c}")));
        }
        phi1.validate(tol)?;
        let u = UtilityIndex { phi1, c, theta };
        if theta < 1.0 {
            for x in grid().skip(1) {
                if -(u.eval(c - x)) <= u.eval(c + x) {
                    return Err(Error::Validation(format!(
                        "strict loss aversion fails at x = {x}: -phi(c-x) <= phi(c+x)"
                    )));
                }
            }
        }
        Ok(u)
    }

    /// The exponential instance `φ₁(x) = 1 − e^{−x}`.
    pub fn exponential(c: f64, theta: f64) -> Result<Self> {
        Self::new(Phi1Spec::exponential(), c, theta)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi1(&self) -> &Phi1Spec {
        &self.phi1
    }

    /// Evaluates φ; total on ℝ.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.c {
            self.phi1.eval(x - self.c)
        } else {
            -self.phi1.eval(-self.theta * (x - self.c)) / self.theta
        }
    }

    /// The behavioral loss-aversion measure `θ⁻¹ − 1`.
    ///
    /// Self-verifies the defining indifference `λp·φ(c+x) + p·φ(c−λx) = 0`
    /// with `λ = θ⁻¹` over a grid of `(x, p)`; a violation means the
    /// supplied φ₁ does not actually satisfy its contract.
    pub fn loss_aversion_measure(&self) -> Result<f64> {
        let tol = Tolerances::default();
        let lambda = 1.0 / self.theta;
        for i in 1..=20 {
            let x = 0.5 * i as f64;
            for p in [0.1, 0.5, 0.9] {
                let lhs = lambda * p * self.eval(self.c + x) + p * self.eval(self.c - lambda * x);
                if lhs.abs() > tol.identity {
                    return Err(Error::SelfCheck(format!(
                        "indifference identity off by {lhs:e} at x={x}, p={p}"
                    )));
                }
            }
        }
        Ok(lambda - 1.0)
    }
}

impl Serialize for UtilityIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            phi1: String,
            c: f64,
            theta: f64,
            #[serde(skip)]
            _p: &'a (),
        }
        Repr {
            phi1: self.phi1.name(),
            c: self.c,
            theta: self.theta,
            _p: &(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UtilityIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            phi1: String,
            c: f64,
            theta: f64,
        }
        let r = Repr::deserialize(deserializer)?;
        let phi1 = match r.phi1.as_str() {
            "exponential" => Phi1Spec::exponential(),
            other => {
                return Err(D::Error::custom(format!(
                    "phi1 '{other}' cannot be deserialized; custom indices require programmatic construction"
                )))
            }
        };
        UtilityIndex::new(phi1, r.c, r.theta).map_err(D::Error::custom)
    }
}
