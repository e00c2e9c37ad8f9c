//! Monte Carlo simulation of strategies under their induced laws.
//!
//! Replication `r` draws from ChaCha stream `(seed, r)`, aggregation is a
//! fixed-order pairwise reduction, and integer tallies are
//! order-independent, so a report is bit-identical for a given
//! `(environment, strategy, options)` regardless of thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{ArmChoice, Environment, NoLearnPolicy, Strategy, TwoArmPolicy, TwoArmedEnv};
use crate::error::{Error, Result};
use crate::rng;
use crate::utility::UtilityIndex;

/// Weighting of the cumulative sum inside φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// φ(Σ/√n), the regime with a nondegenerate limit.
    Sqrt,
    /// φ(Σ/n), the law-of-large-numbers regime; every strategy's value
    /// collapses to φ(0).
    Linear,
}

/// Simulation knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimOptions {
    pub reps: u64,
    pub seed: u64,
    pub scaling: Scaling,
    /// Start N of the persistence window [N, n].
    pub persistence_start: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            reps: 100_000,
            seed: 0,
            scaling: Scaling::Sqrt,
            persistence_start: 10,
        }
    }
}

/// Pull tallies by realized conditional variance class.
///
/// In a fixed menu the class is the arm's variance (middle arms count as
/// `other`). In the learning model a pull's conditional variance is the
/// belief mixture `μ p̲ + (1−μ) p̄`, classified toward the nearer
/// extreme; the exactly-central value (μ = ½) is `other`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub low: u64,
    pub high: u64,
    pub other: u64,
}

/// Aggregates of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub reps: u64,
    pub horizon: u64,
    pub scaling: Scaling,
    pub seed: u64,
    pub value_estimate: f64,
    /// Sample standard deviation / √reps.
    pub std_error: f64,
    /// Share of all pulls (over reps × stages) per variance class;
    /// the three shares sum to one.
    pub pull_freq_low: f64,
    pub pull_freq_high: f64,
    pub pull_freq_other: f64,
    /// Stage-n pulls per class, for the limiting relative-frequency law.
    pub final_stage_pulls: ClassCounts,
    /// The window [N, n] the persistence events were checked on.
    pub persistence_window: (u64, u64),
    /// Replications with Σ_k ≤ 0 for every k in the window.
    pub persist_nonpositive: u64,
    /// Replications with Σ_k > 0 for every k in the window.
    pub persist_positive: u64,
    /// Replications whose final sum satisfies Σ_n ≥ 0.
    pub final_nonneg: u64,
    /// Histogram of μ_n over 20 equal bins of [0, 1] (learning runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub posterior_hist: Option<Vec<u64>>,
}

/// Which arm truly carries the low outcome probability p̲.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthAssignment {
    /// p_a = p̲
    ALow,
    /// p_a = p̄
    AHigh,
}

/// Posterior convergence fractions.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorReport {
    pub reps: u64,
    pub horizon: u64,
    pub seed: u64,
    pub truth: TruthAssignment,
    /// Under the true law Q^s: fraction of paths whose μ_n lies beyond
    /// 0.99 toward the truth.
    pub frac_certain_toward_truth: f64,
    /// Under the decision-maker's law P^s: fraction with
    /// min(μ_n, 1−μ_n) < 0.01.
    pub frac_converged_mixture: f64,
    /// μ₁ ∈ {0, 1}: the prior is absorbing and cannot converge to a
    /// contradicting truth.
    pub degenerate_prior: bool,
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Default, Clone, Copy)]
struct RepStats {
    pulls: ClassCounts,
    final_class: Option<Class>,
    persist_nonpos: bool,
    persist_pos: bool,
    final_nonneg: bool,
    mu_final: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Low,
    High,
    Other,
}

impl ClassCounts {
    fn bump(&mut self, class: Class) {
        match class {
            Class::Low => self.low += 1,
            Class::High => self.high += 1,
            Class::Other => self.other += 1,
        }
    }
}

/// Simulates `s` for `opts.reps` replications of horizon `n` and returns
/// the aggregate report.
pub fn simulate_paths(
    env: &Environment,
    s: &Strategy,
    u: &UtilityIndex,
    n: u64,
    opts: &SimOptions,
) -> Result<SimReport> {
    simulate_paths_with_values(env, s, u, n, opts).map(|(r, _)| r)
}

/// Like [`simulate_paths`], additionally returning the per-replication
/// utility draws (replication order).
pub fn simulate_paths_with_values(
    env: &Environment,
    s: &Strategy,
    u: &UtilityIndex,
    n: u64,
    opts: &SimOptions,
) -> Result<(SimReport, Vec<f64>)> {
    if opts.reps < 1 {
        return Err(Error::Parameter("reps must be >= 1".into()));
    }
    if n < 1 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    let (values, stats): (Vec<f64>, Vec<RepStats>) = match env {
        Environment::NoLearning(menu) => {
            let policy = s.compile_no_learn(menu)?;
            let classes: Vec<Class> = menu
                .arms()
                .iter()
                .map(|a| {
                    if a.variance == menu.var_low() {
                        Class::Low
                    } else if a.variance == menu.var_high() {
                        Class::High
                    } else {
                        Class::Other
                    }
                })
                .collect();
            (0..opts.reps)
                .into_par_iter()
                .map(|rep| menu_rep(menu, &policy, &classes, u, n, opts, rep))
                .unzip()
        }
        Environment::TwoArmed(e) => {
            let policy = s.compile_two_armed()?;
            (0..opts.reps)
                .into_par_iter()
                .map(|rep| learn_rep(e, &policy, u, n, opts, rep, SampleLaw::Mixture))
                .unzip()
        }
    };

    let reps = opts.reps;
    let mean = pairwise_sum(&values) / reps as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std_error = if reps > 1 {
        (pairwise_sum(&sq) / (reps - 1) as f64).sqrt() / (reps as f64).sqrt()
    } else {
        0.0
    };

    let mut pulls = ClassCounts::default();
    let mut final_stage = ClassCounts::default();
    let mut persist_nonpos = 0u64;
    let mut persist_pos = 0u64;
    let mut final_nonneg = 0u64;
    let mut hist: Option<Vec<u64>> = matches!(env, Environment::TwoArmed(_)).then(|| vec![0u64; 20]);
    for st in &stats {
        pulls.low += st.pulls.low;
        pulls.high += st.pulls.high;
        pulls.other += st.pulls.other;
        if let Some(c) = st.final_class {
            final_stage.bump(c);
        }
        persist_nonpos += st.persist_nonpos as u64;
        persist_pos += st.persist_pos as u64;
        final_nonneg += st.final_nonneg as u64;
        if let (Some(h), Some(mu)) = (hist.as_mut(), st.mu_final) {
            h[((mu * 20.0) as usize).min(19)] += 1;
        }
    }
    let total_pulls = (pulls.low + pulls.high + pulls.other) as f64;
    let window_start = opts.persistence_start.max(1);
    let report = SimReport {
        reps,
        horizon: n,
        scaling: opts.scaling,
        seed: opts.seed,
        value_estimate: mean,
        std_error,
        pull_freq_low: pulls.low as f64 / total_pulls,
        pull_freq_high: pulls.high as f64 / total_pulls,
        pull_freq_other: pulls.other as f64 / total_pulls,
        final_stage_pulls: final_stage,
        persistence_window: (window_start, n),
        persist_nonpositive: persist_nonpos,
        persist_positive: persist_pos,
        final_nonneg,
        posterior_hist: hist,
    };
    Ok((report, values))
}

fn scaled_arg(sum: i64, scale: i64, n: u64, scaling: Scaling) -> f64 {
    let real = sum as f64 / scale as f64;
    match scaling {
        Scaling::Sqrt => real / (n as f64).sqrt(),
        Scaling::Linear => real / n as f64,
    }
}

fn menu_rep(
    menu: &crate::bandit::NoLearningEnv,
    policy: &NoLearnPolicy,
    classes: &[Class],
    u: &UtilityIndex,
    n: u64,
    opts: &SimOptions,
    rep: u64,
) -> (f64, RepStats) {
    let mut rng = rng::stream(opts.seed, rep);
    let window_start = opts.persistence_start.max(1);
    let mut sum: i64 = 0;
    let mut st = RepStats {
        persist_nonpos: true,
        persist_pos: true,
        ..Default::default()
    };
    for i in 1..=n {
        let arm_idx = policy.arm(i as u32, sum);
        let arm = &menu.arms()[arm_idx];
        let k = arm.draw(rng.random::<f64>());
        sum += arm.lattice[k];
        st.pulls.bump(classes[arm_idx]);
        if i == n {
            st.final_class = Some(classes[arm_idx]);
        }
        if i >= window_start {
            st.persist_nonpos &= sum <= 0;
            st.persist_pos &= sum > 0;
        }
    }
    st.final_nonneg = sum >= 0;
    (u.eval(scaled_arg(sum, menu.scale(), n, opts.scaling)), st)
}

enum SampleLaw {
    /// The decision-maker's law P^s: outcomes from the belief mixture.
    Mixture,
    /// A true law Q^s with a fixed assignment of {p̲, p̄} to the arms.
    Truth(TruthAssignment),
}

fn learn_rep(
    env: &TwoArmedEnv,
    policy: &TwoArmPolicy,
    u: &UtilityIndex,
    n: u64,
    opts: &SimOptions,
    rep: u64,
    law: SampleLaw,
) -> (f64, RepStats) {
    let mut rng = rng::stream(opts.seed, rep);
    let window_start = opts.persistence_start.max(1);
    let (pl, ph) = (env.p_low(), env.p_high());
    let mid = 0.5 * (pl + ph);
    let mut belief = crate::bandit::BeliefState::from_mu(env.mu1()).unwrap();
    let mut sum: i64 = 0;
    let mut st = RepStats {
        persist_nonpos: true,
        persist_pos: true,
        ..Default::default()
    };
    for i in 1..=n {
        let mu = belief.mu();
        let arm = policy.arm(i as u32, sum, mu);
        let p_belief = env.effective_p(mu, arm);
        let p_draw = match law {
            SampleLaw::Mixture => p_belief,
            SampleLaw::Truth(TruthAssignment::ALow) => match arm {
                ArmChoice::A => pl,
                ArmChoice::B => ph,
            },
            SampleLaw::Truth(TruthAssignment::AHigh) => match arm {
                ArmChoice::A => ph,
                ArmChoice::B => pl,
            },
        };
        let v = rng.random::<f64>();
        let outcome: i8 = if v < p_draw / 2.0 {
            1
        } else if v < p_draw {
            -1
        } else {
            0
        };
        sum += outcome as i64;
        belief = crate::bandit::posterior_update(env, belief, arm, outcome).unwrap();
        let class = if p_belief < mid {
            Class::Low
        } else if p_belief > mid {
            Class::High
        } else {
            Class::Other
        };
        st.pulls.bump(class);
        if i == n {
            st.final_class = Some(class);
        }
        if i >= window_start {
            st.persist_nonpos &= sum <= 0;
            st.persist_pos &= sum > 0;
        }
    }
    st.final_nonneg = sum >= 0;
    st.mu_final = Some(belief.mu());
    (u.eval(scaled_arg(sum, 1, n, opts.scaling)), st)
}

/// Posterior convergence under the true law and under the
/// decision-maker's own law.
///
/// Truth-law replications use streams `(seed, 0..reps)`; mixture-law
/// replications use `(seed, reps..2reps)`.
pub fn posterior_consistency(
    env: &TwoArmedEnv,
    truth: TruthAssignment,
    s: &Strategy,
    n: u64,
    reps: u64,
    seed: u64,
) -> Result<PosteriorReport> {
    if reps < 1 || n < 1 {
        return Err(Error::Parameter("need reps >= 1 and horizon >= 1".into()));
    }
    let policy = s.compile_two_armed()?;
    let u = UtilityIndex::exponential(0.0, env.theta().min(1.0))?;
    let opts = SimOptions {
        reps,
        seed,
        scaling: Scaling::Sqrt,
        persistence_start: 1,
    };
    let toward_truth = |mu: f64| match truth {
        TruthAssignment::ALow => mu > 0.99,
        TruthAssignment::AHigh => mu < 0.01,
    };
    let certain: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let (_, st) = learn_rep(env, &policy, &u, n, &opts, rep, SampleLaw::Truth(truth));
            toward_truth(st.mu_final.unwrap()) as u64
        })
        .sum();
    let opts_mix = SimOptions { seed, ..opts };
    let converged: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let (_, st) = learn_rep(env, &policy, &u, n, &opts_mix, reps + rep, SampleLaw::Mixture);
            let mu = st.mu_final.unwrap();
            (mu.min(1.0 - mu) < 0.01) as u64
        })
        .sum();
    Ok(PosteriorReport {
        reps,
        horizon: n,
        seed,
        truth,
        frac_certain_toward_truth: certain as f64 / reps as f64,
        frac_converged_mixture: converged as f64 / reps as f64,
        degenerate_prior: env.mu1() == 0.0 || env.mu1() == 1.0,
    })
}
