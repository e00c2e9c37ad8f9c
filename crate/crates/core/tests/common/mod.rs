//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles deliberately avoid the library's lattice-state DP: the
//! expectimax recursions walk the full history tree with no state
//! aggregation (beliefs recomputed by direct Bayes), and the tree
//! enumerators literally build every pure decision tree.

#![allow(dead_code)]

use labandit_core::{ArmSpec, Environment, NoLearningEnv, TwoArmedEnv, UtilityIndex};

/// The reference menu: arms ±0.5 and ±1, both fair coins.
pub fn reference_menu() -> Environment {
    Environment::NoLearning(reference_menu_raw())
}

pub fn reference_menu_raw() -> NoLearningEnv {
    NoLearningEnv::new(vec![
        ArmSpec {
            id: "low".into(),
            support: vec![0.5, -0.5],
            probs: vec![0.5, 0.5],
        },
        ArmSpec {
            id: "high".into(),
            support: vec![1.0, -1.0],
            probs: vec![0.5, 0.5],
        },
    ])
    .unwrap()
}

/// The same extremes plus a redundant middle arm (±0.75).
pub fn menu_with_middle_arm() -> Environment {
    Environment::NoLearning(
        NoLearningEnv::new(vec![
            ArmSpec {
                id: "low".into(),
                support: vec![0.5, -0.5],
                probs: vec![0.5, 0.5],
            },
            ArmSpec {
                id: "mid".into(),
                support: vec![0.75, -0.75],
                probs: vec![0.5, 0.5],
            },
            ArmSpec {
                id: "high".into(),
                support: vec![1.0, -1.0],
                probs: vec![0.5, 0.5],
            },
        ])
        .unwrap(),
    )
}

pub fn learning_env_raw() -> TwoArmedEnv {
    TwoArmedEnv::new(0.2, 0.8, 0.5).unwrap()
}

pub fn learning_env() -> Environment {
    Environment::TwoArmed(learning_env_raw())
}

pub fn exp_utility() -> UtilityIndex {
    UtilityIndex::exponential(0.0, 0.5).unwrap()
}

// -------------------------------------------------------------------
// expectimax over the raw history tree
// -------------------------------------------------------------------

/// Optimal value over the full (arm, outcome) history tree of a menu.
pub fn expectimax_menu(env: &NoLearningEnv, u: &UtilityIndex, n: u64) -> f64 {
    fn rec(env: &NoLearningEnv, u: &UtilityIndex, n: u64, stage: u64, sum: i64) -> f64 {
        if stage > n {
            return u.eval(sum as f64 / (env.scale() as f64 * (n as f64).sqrt()));
        }
        let mut best = f64::NEG_INFINITY;
        for arm in env.arms() {
            let mut acc = 0.0;
            for (o, p) in arm.lattice.iter().zip(&arm.probs) {
                acc += p * rec(env, u, n, stage + 1, sum + o);
            }
            if acc > best {
                best = acc;
            }
        }
        best
    }
    rec(env, u, n, 1, 0)
}

/// Likelihood of one outcome under a known nonzero-probability.
fn lik(p: f64, outcome: i8) -> f64 {
    if outcome == 0 {
        1.0 - p
    } else {
        p / 2.0
    }
}

/// One-step probability and direct-Bayes posterior for the two-armed
/// model; `mu` is the prior that arm a carries p_low.
pub fn bayes_step(env: &TwoArmedEnv, mu: f64, arm_a: bool, outcome: i8) -> (f64, f64) {
    let (pl, ph) = (env.p_low(), env.p_high());
    // scenario 1: p_a = p_low; scenario 2: p_a = p_high
    let (p1, p2) = if arm_a { (pl, ph) } else { (ph, pl) };
    let w1 = mu * lik(p1, outcome);
    let w2 = (1.0 - mu) * lik(p2, outcome);
    let prob = w1 + w2;
    let posterior = if prob > 0.0 { w1 / prob } else { mu };
    (prob, posterior)
}

/// Optimal value over the full history tree of the learning model,
/// with beliefs maintained by direct Bayes (no log-odds).
pub fn expectimax_learn(env: &TwoArmedEnv, u: &UtilityIndex, n: u64) -> f64 {
    fn rec(env: &TwoArmedEnv, u: &UtilityIndex, n: u64, stage: u64, sum: i64, mu: f64) -> f64 {
        if stage > n {
            return u.eval(sum as f64 / (n as f64).sqrt());
        }
        let mut best = f64::NEG_INFINITY;
        for arm_a in [true, false] {
            let mut acc = 0.0;
            for outcome in [1i8, 0, -1] {
                let (prob, post) = bayes_step(env, mu, arm_a, outcome);
                acc += prob * rec(env, u, n, stage + 1, sum + outcome as i64, post);
            }
            if acc > best {
                best = acc;
            }
        }
        best
    }
    rec(env, u, n, 1, 0, env.mu1())
}

// -------------------------------------------------------------------
// literal enumeration of pure decision trees
// -------------------------------------------------------------------

/// Expected values of EVERY pure decision tree of depth `n` over the
/// menu. The maximum is the brute-force optimal value.
pub fn all_tree_values_menu(env: &NoLearningEnv, u: &UtilityIndex, n: u64) -> Vec<f64> {
    fn rec(env: &NoLearningEnv, u: &UtilityIndex, n: u64, stage: u64, sum: i64) -> Vec<f64> {
        if stage > n {
            return vec![u.eval(sum as f64 / (env.scale() as f64 * (n as f64).sqrt()))];
        }
        let mut out = Vec::new();
        for arm in env.arms() {
            let children: Vec<Vec<f64>> = arm
                .lattice
                .iter()
                .map(|o| rec(env, u, n, stage + 1, sum + o))
                .collect();
            // cartesian product over per-outcome subtree choices
            let mut picks = vec![0usize; children.len()];
            loop {
                let mut acc = 0.0;
                for (k, p) in arm.probs.iter().enumerate() {
                    acc += p * children[k][picks[k]];
                }
                out.push(acc);
                let mut i = 0;
                loop {
                    if i == picks.len() {
                        break;
                    }
                    picks[i] += 1;
                    if picks[i] < children[i].len() {
                        break;
                    }
                    picks[i] = 0;
                    i += 1;
                }
                if i == picks.len() {
                    break;
                }
            }
        }
        out
    }
    rec(env, u, n, 1, 0)
}

/// Expected values of every pure decision tree of the learning model.
pub fn all_tree_values_learn(env: &TwoArmedEnv, u: &UtilityIndex, n: u64) -> Vec<f64> {
    fn rec(env: &TwoArmedEnv, u: &UtilityIndex, n: u64, stage: u64, sum: i64, mu: f64) -> Vec<f64> {
        if stage > n {
            return vec![u.eval(sum as f64 / (n as f64).sqrt())];
        }
        let mut out = Vec::new();
        for arm_a in [true, false] {
            let mut probs = [0.0f64; 3];
            let mut children: Vec<Vec<f64>> = Vec::with_capacity(3);
            for (k, outcome) in [1i8, 0, -1].into_iter().enumerate() {
                let (prob, post) = bayes_step(env, mu, arm_a, outcome);
                probs[k] = prob;
                children.push(rec(env, u, n, stage + 1, sum + outcome as i64, post));
            }
            let mut picks = [0usize; 3];
            loop {
                let acc = probs[0] * children[0][picks[0]]
                    + probs[1] * children[1][picks[1]]
                    + probs[2] * children[2][picks[2]];
                out.push(acc);
                let mut i = 0;
                loop {
                    if i == 3 {
                        break;
                    }
                    picks[i] += 1;
                    if picks[i] < children[i].len() {
                        break;
                    }
                    picks[i] = 0;
                    i += 1;
                }
                if i == 3 {
                    break;
                }
            }
        }
        out
    }
    rec(env, u, n, 1, 0, env.mu1())
}

pub fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Enumerates all 3^n outcome paths of the two-armed model.
pub fn all_paths(n: u32) -> Vec<Vec<i8>> {
    let mut out = Vec::with_capacity(3usize.pow(n));
    for code in 0..3u32.pow(n) {
        let mut rest = code;
        let mut path = Vec::with_capacity(n as usize);
        for _ in 0..n {
            path.push([-1i8, 0, 1][(rest % 3) as usize]);
            rest /= 3;
        }
        out.push(path);
    }
    out
}
