//! Property tests: probability identities, density identities, and
//! strategy dominance.

mod common;

use common::*;
use proptest::prelude::*;

use labandit_core::bandit::{
    one_step_conditional, path_probability, posterior_update, strategy_decide, ArmChoice,
    BeliefState, DecisionRule, DecisionTable, History, Strategy, TwoArmedEnv,
};
use labandit_core::dp::{self, DpOptions};
use labandit_core::obm::{self, ObmParams};
use labandit_core::value::ht_value;
use labandit_core::{quad, Environment, UtilityIndex};

const OPTS: DpOptions = DpOptions {
    keep_table: false,
    layer_cap: 100_000_000,
};

/// Chain-rule product of one-step conditionals along a path, maintained
/// through the public history API only.
fn chain_probability(env: &TwoArmedEnv, s: &Strategy, outcomes: &[i8]) -> f64 {
    let wrapped = Environment::TwoArmed(*env);
    let mut state = History::initial(&wrapped);
    let mut product = 1.0;
    for &w in outcomes {
        let arm_id = strategy_decide(s, &wrapped, &state).unwrap();
        let pmfs = one_step_conditional(&wrapped, &state).unwrap();
        let (_, pmf) = pmfs.iter().find(|(id, _)| *id == arm_id).unwrap();
        let k = pmf
            .outcomes
            .iter()
            .position(|o| *o == w as f64)
            .unwrap();
        product *= pmf.probs[k];
        let arm = if arm_id == "a" {
            ArmChoice::A
        } else {
            ArmChoice::B
        };
        state.belief = Some(
            posterior_update(env, state.belief.unwrap(), arm, w).unwrap(),
        );
        state.sum += w as i64;
        state.stage += 1;
        match arm {
            ArmChoice::A => {
                state.counts.a += 1;
                if w == 0 {
                    state.counts.a_zero += 1;
                }
            }
            ArmChoice::B => {
                state.counts.b += 1;
                if w == 0 {
                    state.counts.b_zero += 1;
                }
            }
        }
    }
    product
}

#[test]
fn chain_rule_exhaustive_up_to_n6() {
    let env = learning_env_raw();
    let fixed_b = Strategy::Custom(DecisionTable {
        rules: vec![DecisionRule {
            stage: Some(1),
            arm: "a".into(),
            ..Default::default()
        }],
        default_arm: "b".into(),
    });
    let strategies = [
        Strategy::SStarLearning,
        Strategy::SingleArm("a".into()),
        fixed_b,
    ];
    for n in 1..=6u32 {
        for s in &strategies {
            let mut total = 0.0;
            for path in all_paths(n) {
                let p = path_probability(&env, s, &path).unwrap();
                let q = chain_probability(&env, s, &path);
                assert!(
                    (p - q).abs() < 1e-12,
                    "n={n} path={path:?}: mixture {p} vs chain {q}"
                );
                total += p;
            }
            assert!((total - 1.0).abs() < 1e-12, "n={n}: total {total}");
        }
    }
}

fn schedule_table(schedule: &[ArmChoice]) -> Strategy {
    Strategy::Custom(DecisionTable {
        rules: schedule
            .iter()
            .enumerate()
            .map(|(i, arm)| DecisionRule {
                stage: Some(i as u32 + 1),
                arm: match arm {
                    ArmChoice::A => "a".into(),
                    ArmChoice::B => "b".into(),
                },
                ..Default::default()
            })
            .collect(),
        default_arm: "a".into(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_is_a_martingale(
        p_low in 0.05f64..0.45,
        spread in 0.1f64..0.5,
        mu in 0.001f64..0.999,
        arm_a in any::<bool>(),
    ) {
        let env = TwoArmedEnv::new(p_low, p_low + spread, mu).unwrap();
        let arm = if arm_a { ArmChoice::A } else { ArmChoice::B };
        let belief = BeliefState::from_mu(mu).unwrap();
        let p_eff = env.effective_p(mu, arm);
        let mut expected_posterior = 0.0;
        for (outcome, prob) in [(1i8, p_eff / 2.0), (0, 1.0 - p_eff), (-1, p_eff / 2.0)] {
            let post = posterior_update(&env, belief, arm, outcome).unwrap();
            expected_posterior += prob * post.mu();
        }
        prop_assert!((expected_posterior - mu).abs() < 1e-12,
            "E[mu'] = {expected_posterior} vs mu = {mu}");
    }

    #[test]
    fn posterior_sees_only_the_zero_split(
        p_low in 0.05f64..0.45,
        spread in 0.1f64..0.5,
        mu in 0.01f64..0.99,
        arm_a in any::<bool>(),
    ) {
        let env = TwoArmedEnv::new(p_low, p_low + spread, mu).unwrap();
        let arm = if arm_a { ArmChoice::A } else { ArmChoice::B };
        let belief = BeliefState::from_mu(mu).unwrap();
        let up = posterior_update(&env, belief, arm, 1).unwrap();
        let down = posterior_update(&env, belief, arm, -1).unwrap();
        prop_assert_eq!(up.log_odds(), down.log_odds());
    }

    #[test]
    fn path_probability_is_partially_exchangeable(
        schedule in proptest::collection::vec(any::<bool>(), 2..=5),
        seed_path in proptest::collection::vec(0u8..3, 2..=5),
        pick in any::<(u8, u8)>(),
    ) {
        let n = schedule.len().min(seed_path.len());
        let schedule: Vec<ArmChoice> = schedule[..n]
            .iter()
            .map(|a| if *a { ArmChoice::A } else { ArmChoice::B })
            .collect();
        let path: Vec<i8> = seed_path[..n].iter().map(|k| [-1i8, 0, 1][*k as usize]).collect();
        // positions pulled by the same arm, chosen from the picks
        let same: Vec<usize> = {
            let target = schedule[(pick.0 as usize) % n];
            (0..n).filter(|i| schedule[*i] == target).collect()
        };
        prop_assume!(same.len() >= 2);
        let i = same[(pick.0 as usize) % same.len()];
        let j = same[(pick.1 as usize) % same.len()];
        let env = learning_env_raw();
        let s = schedule_table(&schedule);
        let p1 = path_probability(&env, &s, &path).unwrap();
        let mut swapped = path.clone();
        swapped.swap(i, j);
        let p2 = path_probability(&env, &s, &swapped).unwrap();
        prop_assert!((p1 - p2).abs() <= 1e-14 * p1.max(p2).max(1e-30),
            "swap ({i},{j}): {p1} vs {p2}");
    }

    #[test]
    fn time1_pdf_agrees_with_transition_density(
        lo in 0.2f64..1.5,
        widen in 0.0f64..1.5,
        c in -1.5f64..1.5,
        y in -4.0f64..4.0,
    ) {
        let p = ObmParams::new(lo, lo + widen, c).unwrap();
        let a = obm::time1_pdf(&p, y);
        let b = obm::transition_density(&p, 0.0, 0.0, 1.0, y).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "y={y}: {a} vs {b}");
    }

    #[test]
    fn time1_pdf_normalizes_with_zero_mean(
        lo in 0.3f64..1.2,
        widen in 0.0f64..1.0,
        c in -1.2f64..1.2,
    ) {
        let p = ObmParams::new(lo, lo + widen, c).unwrap();
        let hi = p.sigma_high;
        let span = 13.0 * hi + c.abs();
        let mass = quad::integrate_split(|y| obm::time1_pdf(&p, y), -span, span, &[c], 1e-9);
        prop_assert!((mass.value - 1.0).abs() < 1e-7, "mass {}", mass.value);
        // the process is a driftless martingale started at 0
        let mean = quad::integrate_split(|y| y * obm::time1_pdf(&p, y), -span, span, &[c], 1e-9);
        prop_assert!(mean.value.abs() < 1e-7, "mean {}", mean.value);
    }

    #[test]
    fn indicator_prob_decreases_in_c(
        lo in 0.3f64..1.2,
        widen in 0.05f64..1.0,
        c1 in -2.0f64..2.0,
        bump in 0.01f64..2.0,
    ) {
        let p1 = ObmParams::new(lo, lo + widen, c1).unwrap();
        let p2 = ObmParams::new(lo, lo + widen, c1 + bump).unwrap();
        prop_assert!(obm::indicator_prob(&p2) <= obm::indicator_prob(&p1) + 1e-12);
    }

    #[test]
    fn custom_strategies_never_beat_the_optimum(
        stage_rule_arm in any::<bool>(),
        threshold in -1.0f64..1.0,
        default_a in any::<bool>(),
        n in 1u64..=5,
    ) {
        let env = learning_env();
        let u = exp_utility();
        let table = DecisionTable {
            rules: vec![
                DecisionRule {
                    stage: Some(1),
                    arm: if stage_rule_arm { "a".into() } else { "b".into() },
                    ..Default::default()
                },
                DecisionRule {
                    sum_leq: Some(threshold),
                    arm: "a".into(),
                    ..Default::default()
                },
            ],
            default_arm: if default_a { "a".into() } else { "b".into() },
        };
        let v = dp::value_n(&env, &u, n, &OPTS).unwrap().value;
        let us = dp::strategy_value_n(&env, &Strategy::Custom(table), &u, n, &OPTS)
            .unwrap()
            .value;
        prop_assert!(us <= v + 1e-12, "n={n}: {us} > {v}");
    }
}

#[test]
fn interpolant_curvature_signs() {
    // H_t is concave above the threshold and convex below it
    let p = ObmParams::new(0.5, 1.0, 0.0).unwrap();
    let u = UtilityIndex::exponential(0.0, 0.5).unwrap();
    let (t, h, dx) = (0.5, 0.1, 0.25);
    for i in 0..=10 {
        let x = 0.25 + 0.25 * i as f64;
        let second = ht_value(&u, &p, t, x + dx, h).unwrap()
            - 2.0 * ht_value(&u, &p, t, x, h).unwrap()
            + ht_value(&u, &p, t, x - dx, h).unwrap();
        assert!(second <= 1e-7, "x={x}: {second}");
        let second = ht_value(&u, &p, t, -x + dx, h).unwrap()
            - 2.0 * ht_value(&u, &p, t, -x, h).unwrap()
            + ht_value(&u, &p, t, -x - dx, h).unwrap();
        assert!(second >= -1e-7, "x={}: {second}", -x);
    }
}

#[test]
fn chapman_kolmogorov_through_intermediate_times() {
    let p = ObmParams::new(0.5, 1.0, 0.0).unwrap();
    let x = 0.3;
    for t in [0.25, 0.5, 0.75] {
        for y in [-0.8, 0.0, 1.2] {
            let direct = obm::transition_density(&p, 0.0, x, 1.0, y).unwrap();
            let span = 12.0;
            let composed = quad::integrate_split(
                |z| {
                    obm::transition_density(&p, 0.0, x, t, z).unwrap()
                        * obm::transition_density(&p, t, z, 1.0, y).unwrap()
                },
                -span,
                span,
                &[p.c],
                1e-9,
            )
            .value;
            assert!(
                (direct - composed).abs() < 1e-6,
                "t={t} y={y}: {direct} vs {composed}"
            );
        }
    }
}
