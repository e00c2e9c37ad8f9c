//! Oscillating Brownian motion.
//!
//! The driftless diffusion `dY = σ(Y) dB` whose volatility takes the value
//! `σ̲` on `[c, ∞)` and `σ̄` on `(−∞, c)`. Its transition density is known
//! in closed form (a free Gaussian term plus a reflected term weighted by
//! `(σ̄−σ̲)/(σ̄+σ̲)`), which gives exact time-1 densities and tail
//! probabilities; paths are sampled by Euler–Maruyama.
//!
//! Sign conventions: the threshold itself belongs to the low-volatility
//! branch, so `σ(c) = σ̲` and `sgn(y−c)` is taken as `+1` at `y = c`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal cdf via the complementary error function,
/// `Φ(x) = erfc(−x/√2)/2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal pdf scaled to standard deviation `sigma`.
fn gauss_pdf(y: f64, sigma: f64) -> f64 {
    (-0.5 * (y / sigma) * (y / sigma)).exp() / (SQRT_2PI * sigma)
}

/// Parameters of the oscillating Brownian motion: volatilities on the two
/// sides of the threshold `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObmParams {
    pub sigma_low: f64,
    pub sigma_high: f64,
    pub c: f64,
}

impl ObmParams {
    pub fn new(sigma_low: f64, sigma_high: f64, c: f64) -> Result<Self> {
        if !(sigma_low > 0.0 && sigma_low.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma_low must be positive, got {sigma_low}"
            )));
        }
        if !(sigma_high >= sigma_low && sigma_high.is_finite()) {
            return Err(Error::Parameter(format!(
                "need sigma_low <= sigma_high, got {sigma_low} > {sigma_high}"
            )));
        }
        if !c.is_finite() {
            return Err(Error::Parameter(format!("c must be finite, got {c}")));
        }
        Ok(ObmParams {
            sigma_low,
            sigma_high,
            c,
        })
    }

    /// σ̲/σ̄ ∈ (0, 1].
    pub fn theta(&self) -> f64 {
        self.sigma_low / self.sigma_high
    }

    /// The two-valued volatility, closed on the right: `σ(c) = σ̲`.
    pub fn sigma_at(&self, y: f64) -> f64 {
        if y >= self.c {
            self.sigma_low
        } else {
            self.sigma_high
        }
    }

    /// `(σ̄ − σ̲)/(σ̄ + σ̲)`, the reflection weight.
    fn skew(&self) -> f64 {
        (self.sigma_high - self.sigma_low) / (self.sigma_high + self.sigma_low)
    }
}

/// Transition density `q^c(t, x; s, y)` of the oscillating Brownian
/// motion, for `t < s`.
pub fn transition_density(p: &ObmParams, t: f64, x: f64, s: f64, y: f64) -> Result<f64> {
    if !(s > t) {
        return Err(Error::Parameter(format!(
            "transition density needs s > t, got t={t}, s={s}"
        )));
    }
    let dt = s - t;
    let sx = p.sigma_at(x);
    let sy = p.sigma_at(y);
    let sgn = if y >= p.c { 1.0 } else { -1.0 };
    let zx = (x - p.c) / sx;
    let zy = (y - p.c) / sy;
    let pref = 1.0 / ((2.0 * std::f64::consts::PI * dt).sqrt() * sy);
    let free = (-(zx - zy) * (zx - zy) / (2.0 * dt)).exp();
    let refl = (-(zx.abs() + zy.abs()) * (zx.abs() + zy.abs()) / (2.0 * dt)).exp();
    Ok(pref * (free + p.skew() * sgn * refl))
}

/// Density of `W₁^c` (the time-1 value started at 0).
///
/// Written out branch by branch rather than delegating to
/// [`transition_density`], so the two can check each other. A path from 0
/// that ends on the far side of the threshold carries the transmission
/// weight `2σ_near/(σ̄+σ̲)` on a Gaussian in the scale-converted distance;
/// a path ending on the near side gets the free Gaussian plus or minus
/// the reflected image.
pub fn time1_pdf(p: &ObmParams, y: f64) -> f64 {
    let (lo, hi, c) = (p.sigma_low, p.sigma_high, p.c);
    let r = p.skew();
    if c >= 0.0 {
        // start 0 lies at or below the threshold (high-volatility side
        // unless c = 0, where the formulas coincide)
        if y >= c {
            let z = c / hi + (y - c) / lo;
            (2.0 * hi / (hi + lo)) * (-0.5 * z * z).exp() / (SQRT_2PI * lo)
        } else {
            gauss_pdf(y, hi) - r * gauss_pdf(2.0 * c - y, hi)
        }
    } else {
        // start 0 lies above the threshold, in the low-volatility region
        if y >= c {
            gauss_pdf(y, lo) + r * gauss_pdf(y - 2.0 * c, lo)
        } else {
            let z = -c / lo + (c - y) / hi;
            (2.0 * lo / (hi + lo)) * (-0.5 * z * z).exp() / (SQRT_2PI * hi)
        }
    }
}

/// `P*(W₁^c ≥ c)`.
pub fn indicator_prob(p: &ObmParams) -> f64 {
    let (lo, hi, c) = (p.sigma_low, p.sigma_high, p.c);
    if c > 0.0 {
        2.0 * hi / (hi + lo) * normal_cdf(-c / hi)
    } else {
        1.0 - 2.0 * lo / (hi + lo) * normal_cdf(c / lo)
    }
}

/// A sampled path on a uniform time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ObmPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
}

/// Euler–Maruyama path on `[0, t_end]` with `n_steps` uniform steps,
/// volatility evaluated at the left endpoint of each step.
///
/// Deterministic given `seed`; the generator is stream 0 of that seed.
pub fn sample_path(p: &ObmParams, start: f64, t_end: f64, n_steps: u32, seed: u64) -> Result<ObmPath> {
    if n_steps < 1 {
        return Err(Error::Parameter("n_steps must be >= 1".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::Parameter(format!("t_end must be positive, got {t_end}")));
    }
    let dt = t_end / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut rng = rng::stream(seed, 0);
    let mut times = Vec::with_capacity(n_steps as usize + 1);
    let mut values = Vec::with_capacity(n_steps as usize + 1);
    times.push(0.0);
    values.push(start);
    let mut x = start;
    for i in 1..=n_steps {
        let z = rng::standard_normal(&mut rng);
        x += p.sigma_at(x) * sqrt_dt * z;
        times.push(i as f64 * dt);
        values.push(x);
    }
    Ok(ObmPath {
        times,
        values,
        seed,
    })
}

/// Endpoint samples of `reps` independent paths, path `i` drawn from
/// stream `(seed, i)`. Parallel but bit-reproducible.
pub fn sample_endpoints(
    p: &ObmParams,
    start: f64,
    t_end: f64,
    n_steps: u32,
    reps: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_steps < 1 || reps < 1 {
        return Err(Error::Parameter("need n_steps >= 1 and reps >= 1".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::Parameter(format!("t_end must be positive, got {t_end}")));
    }
    let dt = t_end / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let out: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::stream(seed, rep);
            let mut x = start;
            for _ in 0..n_steps {
                let z = rng::standard_normal(&mut rng);
                x += p.sigma_at(x) * sqrt_dt * z;
            }
            x
        })
        .collect();
    Ok(out)
}
