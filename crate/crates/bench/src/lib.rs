//! Shared fixtures for the benchmark targets.

use labandit_core::{ArmSpec, Environment, NoLearningEnv, TwoArmedEnv, UtilityIndex};

/// The two-arm reference menu: ±0.5 and ±1, both fair.
pub fn reference_menu() -> Environment {
    Environment::NoLearning(
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
        .unwrap(),
    )
}

/// The two-armed learning model with p̲ = 0.2, p̄ = 0.8, uniform prior.
pub fn reference_learning() -> Environment {
    Environment::TwoArmed(TwoArmedEnv::new(0.2, 0.8, 0.5).unwrap())
}

/// Exponential utility with c = 0 and θ = 1/2.
pub fn reference_utility() -> UtilityIndex {
    UtilityIndex::exponential(0.0, 0.5).unwrap()
}
