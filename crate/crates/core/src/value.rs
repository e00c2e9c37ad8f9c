//! The limiting value `V = ∫ φ(y) q(y) dy` and the interpolation
//! functions `H_t`.
//!
//! `V` is the large-horizon limit of the bandit values `V_n` whenever the
//! utility's θ equals σ̲/σ̄ and both share the reference point `c`; that
//! coupling is a hypothesis of the limit theorem, so the quadrature route
//! refuses to run without it. For the exponential index the integral also
//! has a closed form, which serves as an independent second route.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::obm::{self, ObmParams};
use crate::quad;
use crate::utility::UtilityIndex;

/// How a [`ValueResult`] was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueMethod {
    Quadrature,
    ClosedFormExponential,
}

/// A limiting value with its provenance and quadrature error estimate.
#[derive(Debug, Clone, Serialize)]
pub struct ValueResult {
    pub v: f64,
    pub method: ValueMethod,
    pub error_estimate: f64,
    pub params: ObmParams,
}

/// Quadrature target; the closed form is exact, so its reported estimate
/// is zero.
const QUAD_TOL: f64 = 1e-9;

fn check_coupling(u: &UtilityIndex, p: &ObmParams) -> Result<()> {
    let ratio = p.theta();
    if (u.theta() - ratio).abs() > 1e-12 || u.c() != p.c {
        return Err(Error::Coupling {
            theta: u.theta(),
            ratio,
            utility_c: u.c(),
            params_c: p.c,
        });
    }
    Ok(())
}

/// `V = ∫ φ(y) q(y) dy` by adaptive quadrature, split at the threshold.
///
/// Requires the coupling θ = σ̲/σ̄ and matching reference points; the
/// limit formula is proved only under that hypothesis.
pub fn value_by_quadrature(u: &UtilityIndex, p: &ObmParams) -> Result<ValueResult> {
    check_coupling(u, p)?;
    let hi = p.sigma_high;
    let lo_bound = p.c.min(0.0) - 12.0 * hi;
    let hi_bound = p.c.max(0.0) + 12.0 * hi;
    let r = quad::integrate_split(
        |y| u.eval(y) * obm::time1_pdf(p, y),
        lo_bound,
        hi_bound,
        &[p.c],
        QUAD_TOL,
    );
    Ok(ValueResult {
        v: r.value,
        method: ValueMethod::Quadrature,
        error_estimate: r.error_estimate,
        params: *p,
    })
}

/// Closed form of `V` for the exponential index `φ₁(x) = 1 − e^{−x}`,
/// with θ = σ̲/σ̄ implied.
pub fn value_exponential_closed_form(c: f64, sigma_low: f64, sigma_high: f64) -> Result<ValueResult> {
    let p = ObmParams::new(sigma_low, sigma_high, c)?;
    let (lo, hi) = (sigma_low, sigma_high);
    let cdf = obm::normal_cdf;
    let v = if c <= 0.0 {
        cdf(-c / lo) - cdf(c / lo)
            + (lo * lo / 2.0).exp()
                * ((-c).exp() * cdf(-lo + c / lo) - c.exp() * cdf(-lo - c / lo))
    } else {
        let t = lo / hi;
        (hi / lo)
            * (cdf(-c / hi) - cdf(c / hi)
                + (lo * lo / 2.0).exp()
                    * ((-t * c).exp() * cdf(-lo + c / hi) - (t * c).exp() * cdf(-lo - c / hi)))
    };
    Ok(ValueResult {
        v,
        method: ValueMethod::ClosedFormExponential,
        error_estimate: 0.0,
        params: p,
    })
}

/// `H_t(x) = E[φ(Y_{1+h}^{t,x,c})] = ∫ φ(y) q^c(t, x; 1+h, y) dy`.
///
/// At `t = 1+h` this is `φ(x)` itself. Defined for `0 ≤ t ≤ 1+h`, `h > 0`.
pub fn ht_value(u: &UtilityIndex, p: &ObmParams, t: f64, x: f64, h: f64) -> Result<f64> {
    check_coupling(u, p)?;
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("h must be positive, got {h}")));
    }
    let horizon = 1.0 + h;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Parameter(format!(
            "t must lie in [0, 1+h] = [0, {horizon}], got {t}"
        )));
    }
    if t == horizon {
        return Ok(u.eval(x));
    }
    let spread = 12.0 * p.sigma_high * (horizon - t).sqrt();
    let lo_bound = x.min(p.c) - spread;
    let hi_bound = x.max(p.c) + spread;
    let r = quad::integrate_split(
        |y| u.eval(y) * obm::transition_density(p, t, x, horizon, y).unwrap(),
        lo_bound,
        hi_bound,
        &[p.c],
        QUAD_TOL,
    );
    Ok(r.value)
}
