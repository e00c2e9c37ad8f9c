//! Bandit environments, beliefs, path probabilities, and strategies.
//!
//! Two belief systems are modeled. In the no-learning environment each
//! arm has a fixed zero-mean outcome distribution that never updates, so
//! repeated pulls of one arm are i.i.d. while adaptive strategies still
//! induce non-product laws. In the two-armed learning environment the two
//! variances {p̲, p̄} are known but their assignment to arms `a`/`b` is
//! not; the decision-maker carries a Bayesian posterior μ_n for the event
//! "arm a is the low-variance arm", updated additively in log-odds.
//!
//! All outcome supports are scaled to a common integer lattice at
//! construction, so histories and dynamic programs work in exact integer
//! sums.

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_DENOMINATOR: i64 = 1_000_000;

/// Reconstructs the rational a float denotes, capped at denominator 10^6.
pub(crate) fn rational_of(x: f64) -> Result<Ratio<i64>> {
    if !x.is_finite() {
        return Err(Error::Parameter(format!("{x} is not a rational value")));
    }
    let r = Ratio::<i64>::approximate_float(x)
        .ok_or_else(|| Error::Parameter(format!("{x} has no rational representation")))?;
    if r.denom().abs() > MAX_DENOMINATOR {
        return Err(Error::Parameter(format!(
            "{x} needs denominator {} > {MAX_DENOMINATOR}; outcomes must sit on a coarse lattice",
            r.denom()
        )));
    }
    let back = *r.numer() as f64 / *r.denom() as f64;
    if (back - x).abs() > 1e-9 * x.abs().max(1.0) {
        return Err(Error::Parameter(format!(
            "{x} is not representable as a small rational"
        )));
    }
    Ok(r)
}

/// Exact comparison of an integer lattice sum against `c·scale·√n`.
///
/// Whenever `n` is a perfect square the threshold is rational and the
/// comparison (including ties) is exact; otherwise the threshold is
/// irrational, ties are impossible, and the comparison is decided by
/// squaring in 128-bit integers. No float ever enters, so boundary atoms
/// are never misclassified.
#[derive(Debug, Clone)]
pub(crate) struct LatticeThreshold {
    /// c·scale as a reduced rational.
    num: i128,
    den: i128,
    n: u64,
    /// √n when n is a perfect square.
    exact_root: Option<u64>,
}

impl LatticeThreshold {
    pub fn new(c: f64, scale: i64, n: u64) -> Result<Self> {
        let r = rational_of(c)?;
        let scaled = Ratio::new(*r.numer() as i128 * scale as i128, *r.denom() as i128);
        // keeps num^2 * n comfortably inside i128
        if scaled.numer().abs() > 1_000_000_000_000 || n > 1_000_000_000 {
            return Err(Error::Parameter(format!(
                "threshold c*scale = {c}*{scale} at n = {n} is out of the exact-comparison range"
            )));
        }
        let root = (n as f64).sqrt().round() as u64;
        let exact_root = if root.checked_mul(root) == Some(n) {
            Some(root)
        } else {
            None
        };
        Ok(LatticeThreshold {
            num: *scaled.numer(),
            den: *scaled.denom(),
            n,
            exact_root,
        })
    }

    /// Orders `sum` against the threshold value.
    pub fn cmp(&self, sum: i64) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        let sum = sum as i128;
        if let Some(root) = self.exact_root {
            // sum ? num*root/den
            return (sum * self.den).cmp(&(self.num * root as i128));
        }
        if self.num == 0 {
            return sum.cmp(&0);
        }
        if self.num > 0 {
            if sum <= 0 {
                return Less;
            }
            (sum * self.den).pow(2).cmp(&(self.num * self.num * self.n as i128))
        } else {
            if sum >= 0 {
                return Greater;
            }
            // both negative: sum >= thr  <=>  sum^2 <= thr^2
            (self.num * self.num * self.n as i128).cmp(&(sum * self.den).pow(2))
        }
    }

    /// `sum/scale/√n ≥ c`, inclusive.
    pub fn at_or_above(&self, sum: i64) -> bool {
        self.cmp(sum) != std::cmp::Ordering::Less
    }

    /// `sum/scale/√n ≤ c`, inclusive.
    pub fn at_or_below(&self, sum: i64) -> bool {
        self.cmp(sum) != std::cmp::Ordering::Greater
    }

    pub fn is_boundary(&self, sum: i64) -> bool {
        self.cmp(sum) == std::cmp::Ordering::Equal
    }
}

/// One arm of a no-learning menu: a finite zero-mean pmf on rational
/// outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmSpec {
    #[serde(default)]
    pub id: String,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
}

/// A validated arm with its lattice representation.
#[derive(Debug, Clone)]
pub struct Arm {
    pub id: String,
    pub support: Vec<f64>,
    pub probs: Vec<f64>,
    /// Support scaled to the menu's integer lattice.
    pub lattice: Vec<i64>,
    pub variance: f64,
    pub sigma: f64,
    cum: Vec<f64>,
}

impl Arm {
    /// Draws an outcome index from the pmf given a uniform in [0, 1).
    pub(crate) fn draw(&self, u: f64) -> usize {
        for (k, c) in self.cum.iter().enumerate() {
            if u < *c {
                return k;
            }
        }
        self.cum.len() - 1
    }
}

/// Result of environment validation: the variance extremes plus warnings.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub sigma_low: f64,
    pub sigma_high: f64,
    /// σ̲ = σ̄: every arm is equivalent in the limit.
    pub trivial: bool,
    pub messages: Vec<String>,
}

/// A menu of fixed arms; beliefs never update.
#[derive(Debug, Clone)]
pub struct NoLearningEnv {
    arms: Vec<Arm>,
    scale: i64,
    idx_low: usize,
    idx_high: usize,
    max_step: i64,
}

impl NoLearningEnv {
    pub fn new(specs: Vec<ArmSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Validation("empty arm list".into()));
        }
        // common lattice: lcm of all outcome denominators
        let mut scale: i64 = 1;
        for spec in &specs {
            if spec.support.is_empty() || spec.support.len() != spec.probs.len() {
                return Err(Error::Validation(format!(
                    "arm '{}': support and probs must be non-empty and equal length",
                    spec.id
                )));
            }
            for &o in &spec.support {
                let r = rational_of(o)?;
                scale = scale.lcm(r.denom());
            }
        }
        let mut arms = Vec::with_capacity(specs.len());
        for (i, spec) in specs.into_iter().enumerate() {
            let id = if spec.id.is_empty() {
                format!("arm{i}")
            } else {
                spec.id.clone()
            };
            let total: f64 = spec.probs.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "arm '{id}': probabilities sum to {total}, not 1"
                )));
            }
            if spec.probs.iter().any(|&p| p <= 0.0) {
                return Err(Error::Validation(format!(
                    "arm '{id}': zero-probability outcome breaks full support"
                )));
            }
            let mean: f64 = spec.support.iter().zip(&spec.probs).map(|(o, p)| o * p).sum();
            if mean.abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "arm '{id}': mean {mean} differs from 0"
                )));
            }
            let variance: f64 = spec.support.iter().zip(&spec.probs).map(|(o, p)| o * o * p).sum();
            if variance <= 0.0 {
                return Err(Error::Validation(format!("arm '{id}': zero variance")));
            }
            let lattice: Vec<i64> = spec
                .support
                .iter()
                .map(|&o| {
                    let r = rational_of(o)?;
                    Ok(r.numer() * (scale / r.denom()))
                })
                .collect::<Result<_>>()?;
            let mut cum = Vec::with_capacity(spec.probs.len());
            let mut acc = 0.0;
            for &p in &spec.probs {
                acc += p;
                cum.push(acc);
            }
            arms.push(Arm {
                id,
                support: spec.support,
                probs: spec.probs,
                lattice,
                variance,
                sigma: variance.sqrt(),
                cum,
            });
        }
        // deterministic extremes: among ties pick the lexicographically
        // smallest id
        let idx_low = (0..arms.len())
            .min_by(|&i, &j| {
                arms[i]
                    .variance
                    .partial_cmp(&arms[j].variance)
                    .unwrap()
                    .then_with(|| arms[i].id.cmp(&arms[j].id))
            })
            .unwrap();
        let idx_high = (0..arms.len())
            .min_by(|&i, &j| {
                arms[j]
                    .variance
                    .partial_cmp(&arms[i].variance)
                    .unwrap()
                    .then_with(|| arms[i].id.cmp(&arms[j].id))
            })
            .unwrap();
        let max_step = arms
            .iter()
            .flat_map(|a| a.lattice.iter().map(|o| o.abs()))
            .max()
            .unwrap();
        Ok(NoLearningEnv {
            arms,
            scale,
            idx_low,
            idx_high,
            max_step,
        })
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn sigma_low(&self) -> f64 {
        self.arms[self.idx_low].sigma
    }

    pub fn sigma_high(&self) -> f64 {
        self.arms[self.idx_high].sigma
    }

    pub fn var_low(&self) -> f64 {
        self.arms[self.idx_low].variance
    }

    pub fn var_high(&self) -> f64 {
        self.arms[self.idx_high].variance
    }

    pub fn low_arm(&self) -> usize {
        self.idx_low
    }

    pub fn high_arm(&self) -> usize {
        self.idx_high
    }

    pub(crate) fn max_step(&self) -> i64 {
        self.max_step
    }

    pub fn arm_index(&self, id: &str) -> Result<usize> {
        self.arms
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| Error::Parameter(format!("no arm named '{id}'")))
    }

    pub fn validate(&self) -> ValidationReport {
        let trivial = self.sigma_low() == self.sigma_high();
        let mut messages = Vec::new();
        if trivial {
            messages.push(
                "sigma_low = sigma_high: all arms are asymptotically equivalent (trivial case)"
                    .into(),
            );
        }
        ValidationReport {
            sigma_low: self.sigma_low(),
            sigma_high: self.sigma_high(),
            trivial,
            messages,
        }
    }
}

/// Label of an arm in the two-armed learning model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArmChoice {
    A,
    B,
}

/// The classic two-armed model: outcomes in {1, 0, −1}, variances
/// {p̲, p̄} known, assignment to arms unknown with prior μ₁ on
/// "arm a has p̲".
#[derive(Debug, Clone, Copy)]
pub struct TwoArmedEnv {
    p_low: f64,
    p_high: f64,
    mu1: f64,
    /// log(p̲/p̄), the log-odds increment for a nonzero outcome.
    log_nonzero: f64,
    /// log((1−p̲)/(1−p̄)), the increment for a zero outcome.
    log_zero: f64,
}

impl TwoArmedEnv {
    pub fn new(p_low: f64, p_high: f64, mu1: f64) -> Result<Self> {
        if !(p_low > 0.0 && p_low < p_high && p_high < 1.0) {
            return Err(Error::Validation(format!(
                "need 0 < p_low < p_high < 1, got p_low={p_low}, p_high={p_high}"
            )));
        }
        if !(0.0..=1.0).contains(&mu1) {
            return Err(Error::Validation(format!("mu1 must lie in [0,1], got {mu1}")));
        }
        Ok(TwoArmedEnv {
            p_low,
            p_high,
            mu1,
            log_nonzero: (p_low / p_high).ln(),
            log_zero: ((1.0 - p_low) / (1.0 - p_high)).ln(),
        })
    }

    pub fn p_low(&self) -> f64 {
        self.p_low
    }

    pub fn p_high(&self) -> f64 {
        self.p_high
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    /// σ̲² = p̲.
    pub fn sigma_low(&self) -> f64 {
        self.p_low.sqrt()
    }

    /// σ̄² = p̄.
    pub fn sigma_high(&self) -> f64 {
        self.p_high.sqrt()
    }

    pub fn theta(&self) -> f64 {
        self.sigma_low() / self.sigma_high()
    }

    pub(crate) fn log_increments(&self) -> (f64, f64) {
        (self.log_nonzero, self.log_zero)
    }

    /// Probability that the pulled arm yields a nonzero outcome, given
    /// the current belief. Each of ±1 then has half of it.
    pub fn effective_p(&self, mu: f64, arm: ArmChoice) -> f64 {
        match arm {
            ArmChoice::A => mu * self.p_low + (1.0 - mu) * self.p_high,
            ArmChoice::B => mu * self.p_high + (1.0 - mu) * self.p_low,
        }
    }

    pub fn validate(&self) -> ValidationReport {
        ValidationReport {
            sigma_low: self.sigma_low(),
            sigma_high: self.sigma_high(),
            trivial: false,
            messages: Vec::new(),
        }
    }
}

/// Posterior belief stored as log-odds of "arm a has the low variance".
///
/// Additive updates in log-odds avoid underflow on long runs; certainty
/// is the absorbing pair ±∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    log_odds: f64,
}

impl BeliefState {
    pub fn from_mu(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Parameter(format!("mu must lie in [0,1], got {mu}")));
        }
        let log_odds = if mu == 0.0 {
            f64::NEG_INFINITY
        } else if mu == 1.0 {
            f64::INFINITY
        } else {
            (mu / (1.0 - mu)).ln()
        };
        Ok(BeliefState { log_odds })
    }

    pub fn log_odds(&self) -> f64 {
        self.log_odds
    }

    pub fn mu(&self) -> f64 {
        if self.log_odds == f64::INFINITY {
            1.0
        } else if self.log_odds == f64::NEG_INFINITY {
            0.0
        } else {
            1.0 / (1.0 + (-self.log_odds).exp())
        }
    }
}

/// One Bayesian update after pulling `arm` and observing `outcome`.
///
/// The increment depends on the outcome only through the zero/nonzero
/// distinction, with sign + for arm a and − for arm b.
pub fn posterior_update(
    env: &TwoArmedEnv,
    belief: BeliefState,
    arm: ArmChoice,
    outcome: i8,
) -> Result<BeliefState> {
    if !matches!(outcome, -1..=1) {
        return Err(Error::Parameter(format!(
            "outcome must be one of {{1, 0, -1}}, got {outcome}"
        )));
    }
    let step = if outcome == 0 {
        env.log_zero
    } else {
        env.log_nonzero
    };
    let signed = match arm {
        ArmChoice::A => step,
        ArmChoice::B => -step,
    };
    Ok(BeliefState {
        log_odds: belief.log_odds + signed,
    })
}

/// Pull counts per Eq. of the induced frequency vector: trials of each
/// arm and how many of them produced outcome 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PullCounts {
    pub a: u32,
    pub b: u32,
    pub a_zero: u32,
    pub b_zero: u32,
}

/// The state a strategy sees before stage `stage`: the lattice cumulative
/// sum and, in the learning model, the counts and posterior.
///
/// Actions are not stored: given the strategy, the action history is
/// replayable from outcomes alone.
#[derive(Debug, Clone)]
pub struct History {
    pub stage: u32,
    pub sum: i64,
    pub counts: PullCounts,
    pub belief: Option<BeliefState>,
}

impl History {
    pub fn initial(env: &Environment) -> History {
        let belief = match env {
            Environment::NoLearning(_) => None,
            Environment::TwoArmed(e) => Some(BeliefState::from_mu(e.mu1()).unwrap()),
        };
        History {
            stage: 1,
            sum: 0,
            counts: PullCounts::default(),
            belief,
        }
    }

    pub fn real_sum(&self, scale: i64) -> f64 {
        self.sum as f64 / scale as f64
    }
}

/// A pmf over real-valued outcomes.
#[derive(Debug, Clone, Serialize)]
pub struct OutcomePmf {
    pub outcomes: Vec<f64>,
    pub probs: Vec<f64>,
}

/// A bandit belief system.
#[derive(Debug, Clone)]
pub enum Environment {
    NoLearning(NoLearningEnv),
    TwoArmed(TwoArmedEnv),
}

impl Environment {
    pub fn scale(&self) -> i64 {
        match self {
            Environment::NoLearning(e) => e.scale(),
            Environment::TwoArmed(_) => 1,
        }
    }

    pub fn sigma_low(&self) -> f64 {
        match self {
            Environment::NoLearning(e) => e.sigma_low(),
            Environment::TwoArmed(e) => e.sigma_low(),
        }
    }

    pub fn sigma_high(&self) -> f64 {
        match self {
            Environment::NoLearning(e) => e.sigma_high(),
            Environment::TwoArmed(e) => e.sigma_high(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            Environment::NoLearning(e) => e.validate(),
            Environment::TwoArmed(e) => e.validate(),
        }
    }

    pub fn from_config(config: EnvironmentConfig) -> Result<Self> {
        match config {
            EnvironmentConfig::NoLearning { arms } => {
                Ok(Environment::NoLearning(NoLearningEnv::new(arms)?))
            }
            EnvironmentConfig::TwoArmed { p_low, p_high, mu1 } => {
                Ok(Environment::TwoArmed(TwoArmedEnv::new(p_low, p_high, mu1)?))
            }
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let config: EnvironmentConfig =
            serde_json::from_str(json).map_err(|e| Error::Validation(format!("bad env JSON: {e}")))?;
        Environment::from_config(config)
    }

    /// The serializable form this environment was built from.
    pub fn to_config(&self) -> EnvironmentConfig {
        match self {
            Environment::NoLearning(e) => EnvironmentConfig::NoLearning {
                arms: e
                    .arms()
                    .iter()
                    .map(|a| ArmSpec {
                        id: a.id.clone(),
                        support: a.support.clone(),
                        probs: a.probs.clone(),
                    })
                    .collect(),
            },
            Environment::TwoArmed(e) => EnvironmentConfig::TwoArmed {
                p_low: e.p_low(),
                p_high: e.p_high(),
                mu1: e.mu1(),
            },
        }
    }
}

/// Serialized form of an environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    NoLearning { arms: Vec<ArmSpec> },
    TwoArmed { p_low: f64, p_high: f64, mu1: f64 },
}

/// One-step-ahead conditional pmf for every candidate arm at the given
/// history.
pub fn one_step_conditional(env: &Environment, state: &History) -> Result<Vec<(String, OutcomePmf)>> {
    match env {
        Environment::NoLearning(e) => Ok(e
            .arms()
            .iter()
            .map(|a| {
                (
                    a.id.clone(),
                    OutcomePmf {
                        outcomes: a.support.clone(),
                        probs: a.probs.clone(),
                    },
                )
            })
            .collect()),
        Environment::TwoArmed(e) => {
            let mu = state
                .belief
                .ok_or_else(|| Error::Parameter("two-armed history carries no belief".into()))?
                .mu();
            let mut out = Vec::with_capacity(2);
            for (label, arm) in [("a", ArmChoice::A), ("b", ArmChoice::B)] {
                let p = e.effective_p(mu, arm);
                out.push((
                    label.to_string(),
                    OutcomePmf {
                        outcomes: vec![1.0, 0.0, -1.0],
                        probs: vec![p / 2.0, 1.0 - p, p / 2.0],
                    },
                ));
            }
            Ok(out)
        }
    }
}

/// Rule of a custom decision table. All present conditions must hold for
/// the rule to fire; `sum` conditions are in payoff (real) units.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DecisionRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_leq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_gt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_lt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_geq: Option<f64>,
    pub arm: String,
}

/// A total decision table: the first matching rule wins, otherwise the
/// default arm is pulled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTable {
    #[serde(default)]
    pub rules: Vec<DecisionRule>,
    #[serde(rename = "default")]
    pub default_arm: String,
}

impl DecisionTable {
    fn decide(&self, stage: u32, real_sum: f64, mu: Option<f64>) -> Result<&str> {
        for rule in &self.rules {
            if let Some(s) = rule.stage {
                if s != stage {
                    continue;
                }
            }
            if let Some(v) = rule.sum_leq {
                if !(real_sum <= v) {
                    continue;
                }
            }
            if let Some(v) = rule.sum_gt {
                if !(real_sum > v) {
                    continue;
                }
            }
            if rule.mu_lt.is_some() || rule.mu_geq.is_some() {
                let mu = mu.ok_or_else(|| {
                    Error::Parameter("belief conditions require a learning environment".into())
                })?;
                if let Some(v) = rule.mu_lt {
                    if !(mu < v) {
                        continue;
                    }
                }
                if let Some(v) = rule.mu_geq {
                    if !(mu >= v) {
                        continue;
                    }
                }
            }
            return Ok(&rule.arm);
        }
        Ok(&self.default_arm)
    }
}

/// The strategies studied here.
///
/// `SStarNoLearn` switches between the extreme arms on the sign of the
/// cumulative sum (high variance while at or below zero). `SStarHorizon`
/// is its horizon-indexed version for reference points c ≠ 0: high
/// variance while `Σ/√n ≤ c`. `SStarLearning` is the myopic rule of the
/// two-armed model. `SingleArm` always pulls one arm. `Custom` evaluates
/// a decision table.
#[derive(Debug, Clone)]
pub enum Strategy {
    SStarNoLearn,
    SStarHorizon { horizon: u64, c: f64 },
    SStarLearning,
    SingleArm(String),
    Custom(DecisionTable),
}

impl Strategy {
    pub fn custom_from_json(json: &str) -> Result<Self> {
        let table: DecisionTable = serde_json::from_str(json)
            .map_err(|e| Error::Validation(format!("bad decision table JSON: {e}")))?;
        Ok(Strategy::Custom(table))
    }

    /// Compiled decision rule over a no-learning menu.
    pub(crate) fn compile_no_learn(&self, env: &NoLearningEnv) -> Result<NoLearnPolicy> {
        match self {
            Strategy::SStarNoLearn => Ok(NoLearnPolicy::Switching {
                high: env.high_arm(),
                low: env.low_arm(),
            }),
            Strategy::SStarHorizon { horizon, c } => Ok(NoLearnPolicy::HorizonSwitching {
                high: env.high_arm(),
                low: env.low_arm(),
                threshold: LatticeThreshold::new(*c, env.scale(), *horizon)?,
            }),
            Strategy::SStarLearning => Err(Error::Parameter(
                "s_star_learning needs a two-armed learning environment".into(),
            )),
            Strategy::SingleArm(id) => Ok(NoLearnPolicy::Fixed(env.arm_index(id)?)),
            Strategy::Custom(table) => {
                // arm names must resolve now, not mid-simulation
                for rule in &table.rules {
                    env.arm_index(&rule.arm)?;
                    if rule.mu_lt.is_some() || rule.mu_geq.is_some() {
                        return Err(Error::Parameter(
                            "belief conditions require a learning environment".into(),
                        ));
                    }
                }
                env.arm_index(&table.default_arm)?;
                Ok(NoLearnPolicy::Table {
                    table: table.clone(),
                    scale: env.scale(),
                    arm_of: env
                        .arms()
                        .iter()
                        .map(|a| a.id.clone())
                        .collect::<Vec<_>>(),
                })
            }
        }
    }

    /// Compiled decision rule over the two-armed learning model.
    pub(crate) fn compile_two_armed(&self) -> Result<TwoArmPolicy> {
        match self {
            Strategy::SStarLearning => Ok(TwoArmPolicy::Myopic),
            Strategy::SingleArm(id) => match id.as_str() {
                "a" => Ok(TwoArmPolicy::Fixed(ArmChoice::A)),
                "b" => Ok(TwoArmPolicy::Fixed(ArmChoice::B)),
                other => Err(Error::Parameter(format!(
                    "two-armed arms are named 'a' and 'b', got '{other}'"
                ))),
            },
            Strategy::Custom(table) => {
                for rule in &table.rules {
                    if rule.arm != "a" && rule.arm != "b" {
                        return Err(Error::Parameter(format!(
                            "two-armed arms are named 'a' and 'b', got '{}'",
                            rule.arm
                        )));
                    }
                }
                if table.default_arm != "a" && table.default_arm != "b" {
                    return Err(Error::Parameter(format!(
                        "two-armed arms are named 'a' and 'b', got '{}'",
                        table.default_arm
                    )));
                }
                Ok(TwoArmPolicy::Table(table.clone()))
            }
            Strategy::SStarNoLearn | Strategy::SStarHorizon { .. } => Err(Error::Parameter(
                "this strategy needs a no-learning menu".into(),
            )),
        }
    }
}

/// Compiled decision rule on (stage, lattice sum) for no-learning menus.
#[derive(Debug, Clone)]
pub(crate) enum NoLearnPolicy {
    Switching { high: usize, low: usize },
    HorizonSwitching {
        high: usize,
        low: usize,
        threshold: LatticeThreshold,
    },
    Fixed(usize),
    Table {
        table: DecisionTable,
        scale: i64,
        arm_of: Vec<String>,
    },
}

impl NoLearnPolicy {
    pub fn arm(&self, stage: u32, sum: i64) -> usize {
        match self {
            NoLearnPolicy::Switching { high, low } => {
                if sum <= 0 {
                    *high
                } else {
                    *low
                }
            }
            NoLearnPolicy::HorizonSwitching {
                high,
                low,
                threshold,
            } => {
                if threshold.at_or_below(sum) {
                    *high
                } else {
                    *low
                }
            }
            NoLearnPolicy::Fixed(i) => *i,
            NoLearnPolicy::Table {
                table,
                scale,
                arm_of,
            } => {
                let id = table
                    .decide(stage, sum as f64 / *scale as f64, None)
                    .expect("no-learning table validated at compile time");
                arm_of.iter().position(|a| a == id).unwrap()
            }
        }
    }
}

/// Compiled decision rule on (stage, lattice sum, μ) for the two-armed
/// model.
#[derive(Debug, Clone)]
pub(crate) enum TwoArmPolicy {
    Myopic,
    Fixed(ArmChoice),
    Table(DecisionTable),
}

impl TwoArmPolicy {
    pub fn arm(&self, stage: u32, sum: i64, mu: f64) -> ArmChoice {
        match self {
            TwoArmPolicy::Myopic => {
                // stage 1 pulls a by definition; afterwards a exactly when
                // losses pair with "a is risky" or gains with "a is safe";
                // the tie mu = 1/2 falls to b
                if stage == 1 || (sum <= 0 && mu < 0.5) || (sum > 0 && mu > 0.5) {
                    ArmChoice::A
                } else {
                    ArmChoice::B
                }
            }
            TwoArmPolicy::Fixed(arm) => *arm,
            TwoArmPolicy::Table(table) => {
                match table
                    .decide(stage, sum as f64, Some(mu))
                    .expect("two-armed table supplies mu")
                {
                    "a" => ArmChoice::A,
                    _ => ArmChoice::B,
                }
            }
        }
    }
}

/// The arm the strategy pulls at the given history. Returns the arm id.
pub fn strategy_decide(s: &Strategy, env: &Environment, state: &History) -> Result<String> {
    match env {
        Environment::NoLearning(e) => {
            let policy = s.compile_no_learn(e)?;
            let idx = policy.arm(state.stage, state.sum);
            Ok(e.arms()[idx].id.clone())
        }
        Environment::TwoArmed(_) => {
            let policy = s.compile_two_armed()?;
            let mu = state
                .belief
                .ok_or_else(|| Error::Parameter("two-armed history carries no belief".into()))?
                .mu();
            Ok(match policy.arm(state.stage, state.sum, mu) {
                ArmChoice::A => "a".into(),
                ArmChoice::B => "b".into(),
            })
        }
    }
}

/// Ex ante probability of the outcome prefix `outcomes` under `P^s`,
/// via the two-scenario partial-exchangeability mixture.
///
/// The strategy is replayed to recover the pull schedule and the induced
/// frequency vector; the probability then depends on the path only
/// through that vector.
pub fn path_probability(env: &TwoArmedEnv, s: &Strategy, outcomes: &[i8]) -> Result<f64> {
    let policy = s.compile_two_armed()?;
    let mut belief = BeliefState::from_mu(env.mu1())?;
    let mut sum: i64 = 0;
    let mut counts = PullCounts::default();
    for (i, &w) in outcomes.iter().enumerate() {
        if !matches!(w, -1..=1) {
            return Err(Error::Parameter(format!(
                "outcome must be one of {{1, 0, -1}}, got {w}"
            )));
        }
        let stage = (i + 1) as u32;
        let arm = policy.arm(stage, sum, belief.mu());
        match arm {
            ArmChoice::A => {
                counts.a += 1;
                if w == 0 {
                    counts.a_zero += 1;
                }
            }
            ArmChoice::B => {
                counts.b += 1;
                if w == 0 {
                    counts.b_zero += 1;
                }
            }
        }
        belief = posterior_update(env, belief, arm, w)?;
        sum += w as i64;
    }
    let (pl, ph) = (env.p_low(), env.p_high());
    let half = |p: f64| p / 2.0;
    let scenario = |p_a: f64, p_b: f64| {
        half(p_a).powi((counts.a - counts.a_zero) as i32)
            * half(p_b).powi((counts.b - counts.b_zero) as i32)
            * (1.0 - p_a).powi(counts.a_zero as i32)
            * (1.0 - p_b).powi(counts.b_zero as i32)
    };
    Ok(env.mu1() * scenario(pl, ph) + (1.0 - env.mu1()) * scenario(ph, pl))
}

/// Validates an environment and reports the variance extremes.
pub fn validate_env(env: &Environment) -> ValidationReport {
    env.validate()
}
