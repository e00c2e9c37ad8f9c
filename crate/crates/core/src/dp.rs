//! Exact finite-horizon values by backward induction.
//!
//! The n-horizon optimal value `V_n = sup_s E[φ(Σ X_i / √n)]` is computed
//! exactly: the supremum over all history-dependent strategies equals the
//! backward recursion `value = max over arms of Σ pmf · next_value`
//! because the set of induced laws is closed under pasting one-step
//! conditionals, which yields the law of iterated upper expectations.
//!
//! State spaces are integer lattices. A no-learning menu needs only
//! (stage, cumulative sum). The two-armed learning model adds the pair
//! `Δ₁ = (f_a − f_{a,0}) − (f_b − f_{b,0})`, `Δ₂ = f_{a,0} − f_{b,0}`,
//! which is sufficient because the posterior log-odds is
//! `logit(μ₁) + Δ₁·log(p̲/p̄) + Δ₂·log((1−p̲)/(1−p̄))`; this keeps the
//! learning DP polynomial (one stage holds O(n³) states).
//!
//! Reachable learning states obey two parity constraints — `sum ≡ Δ₁` and
//! `Δ₂ ≡ stage−1−Δ₁ (mod 2)` — which the layer layout exploits, storing
//! only every other lattice point.
//!
//! Values are plain f64: each stage is a convex combination followed by a
//! max, so round-off grows at most linearly in the horizon and stays
//! orders of magnitude below the tolerances used anywhere downstream.

use rayon::prelude::*;

use crate::bandit::{
    ArmChoice, Environment, History, LatticeThreshold, NoLearnPolicy, NoLearningEnv, Strategy,
    TwoArmPolicy, TwoArmedEnv,
};
use crate::error::{Error, Result};
use crate::utility::UtilityIndex;

/// Knobs for a DP run.
#[derive(Debug, Clone, Copy)]
pub struct DpOptions {
    /// Retain every stage layer (values + argmax) for inspection. Off by
    /// default: large horizons only need two rolling layers.
    pub keep_table: bool,
    /// Cap on the largest single stage layer (and, with `keep_table`, on
    /// the total number of retained states).
    pub layer_cap: u64,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            keep_table: false,
            layer_cap: 100_000_000,
        }
    }
}

/// Outcome of a DP run.
#[derive(Debug)]
pub struct DpRun {
    pub value: f64,
    /// States in the largest stage layer.
    pub max_layer_states: u64,
    /// Terminal lattice atoms sitting exactly on the indicator threshold
    /// (zero for utility terminals); these atoms drive the O(1/√n)
    /// parity oscillation of indicator values.
    pub boundary_atoms: u64,
    pub table: Option<DpTable>,
}

/// A retained table: per-stage values and argmax records.
#[derive(Debug)]
pub struct DpTable {
    pub horizon: u64,
    pub scale: i64,
    kind: TableKind,
}

#[derive(Debug)]
enum TableKind {
    Menu {
        arm_ids: Vec<String>,
        /// layers[i] is stage i+1; the last layer is terminal.
        layers: Vec<MenuLayer>,
    },
    Learn {
        layers: Vec<LearnLayer>,
    },
}

#[derive(Debug)]
struct MenuLayer {
    /// sums run −m..m (every integer).
    m: i64,
    values: Vec<f64>,
    argmax: Option<Vec<u8>>,
}

#[derive(Debug)]
struct LearnLayer {
    shape: LearnShape,
    values: Vec<f64>,
    argmax: Option<Vec<u8>>,
}

/// One row of a dumped table.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub stage: u64,
    pub sum: i64,
    pub d1: Option<i64>,
    pub d2: Option<i64>,
    pub value: f64,
    pub argmax: Option<String>,
}

impl DpTable {
    /// Value of the continuation problem at the given stage and lattice
    /// sum (menu tables).
    pub fn value_at(&self, stage: u64, sum: i64) -> Option<f64> {
        match &self.kind {
            TableKind::Menu { layers, .. } => {
                let layer = layers.get(stage as usize - 1)?;
                if sum.abs() > layer.m {
                    return None;
                }
                Some(layer.values[(sum + layer.m) as usize])
            }
            TableKind::Learn { .. } => None,
        }
    }

    /// Value at a learning state (stage, sum, Δ₁, Δ₂).
    pub fn learn_value_at(&self, stage: u64, sum: i64, d1: i64, d2: i64) -> Option<f64> {
        match &self.kind {
            TableKind::Learn { layers } => {
                let layer = layers.get(stage as usize - 1)?;
                let idx = layer.shape.checked_value_index(d1, d2, sum)?;
                Some(layer.values[idx])
            }
            TableKind::Menu { .. } => None,
        }
    }

    /// Optimal arm recorded at a menu state.
    pub fn argmax_at(&self, stage: u64, sum: i64) -> Option<&str> {
        match &self.kind {
            TableKind::Menu { layers, arm_ids } => {
                let layer = layers.get(stage as usize - 1)?;
                if sum.abs() > layer.m {
                    return None;
                }
                let arm = layer.argmax.as_ref()?[(sum + layer.m) as usize];
                arm_ids.get(arm as usize).map(|s| s.as_str())
            }
            TableKind::Learn { .. } => None,
        }
    }

    /// Optimal arm at a learning state.
    pub fn learn_argmax_at(&self, stage: u64, sum: i64, d1: i64, d2: i64) -> Option<ArmChoice> {
        match &self.kind {
            TableKind::Learn { layers } => {
                let layer = layers.get(stage as usize - 1)?;
                let idx = layer.shape.checked_value_index(d1, d2, sum)?;
                match layer.argmax.as_ref()?[idx] {
                    0 => Some(ArmChoice::A),
                    _ => Some(ArmChoice::B),
                }
            }
            TableKind::Menu { .. } => None,
        }
    }

    /// All rows, terminal layer included, for CSV dumps.
    pub fn rows(&self) -> Vec<TableRow> {
        let mut out = Vec::new();
        match &self.kind {
            TableKind::Menu { layers, arm_ids } => {
                for (i, layer) in layers.iter().enumerate() {
                    for (j, v) in layer.values.iter().enumerate() {
                        let argmax = layer
                            .argmax
                            .as_ref()
                            .map(|a| arm_ids[a[j] as usize].clone());
                        out.push(TableRow {
                            stage: i as u64 + 1,
                            sum: j as i64 - layer.m,
                            d1: None,
                            d2: None,
                            value: *v,
                            argmax,
                        });
                    }
                }
            }
            TableKind::Learn { layers } => {
                for (i, layer) in layers.iter().enumerate() {
                    layer.shape.for_each_state(|d1, d2, s, idx| {
                        let argmax = layer.argmax.as_ref().map(|a| {
                            match a[idx] {
                                0 => "a",
                                _ => "b",
                            }
                            .to_string()
                        });
                        out.push(TableRow {
                            stage: i as u64 + 1,
                            sum: s,
                            d1: Some(d1),
                            d2: Some(d2),
                            value: layer.values[idx],
                            argmax,
                        });
                    });
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------
// learning-layer geometry
// ---------------------------------------------------------------------

/// Index layout of one learning stage layer with k = stage − 1 pulls
/// taken. States are grouped by Δ₁ (contiguous), then Δ₂, then sum; sums
/// within a group step by 2 thanks to the parity constraints.
#[derive(Debug)]
struct LearnShape {
    k: i64,
    /// first pair index per Δ₁ value (index Δ₁ + k)
    d1_pair_base: Vec<usize>,
    /// first value index per Δ₁ value, plus a trailing total
    d1_value_base: Vec<usize>,
    /// first value index per (Δ₁, Δ₂) pair
    pair_value_base: Vec<usize>,
    total: usize,
}

impl LearnShape {
    fn new(k: i64) -> LearnShape {
        let width = (2 * k + 1) as usize;
        let mut d1_pair_base = Vec::with_capacity(width);
        let mut d1_value_base = Vec::with_capacity(width + 1);
        let mut pair_value_base = Vec::new();
        let mut pairs = 0usize;
        let mut values = 0usize;
        for d1 in -k..=k {
            d1_pair_base.push(pairs);
            d1_value_base.push(values);
            let m1 = k - d1.abs();
            let mut d2 = -m1;
            while d2 <= m1 {
                pair_value_base.push(values);
                values += (k - d2.abs()) as usize + 1;
                pairs += 1;
                d2 += 2;
            }
        }
        d1_value_base.push(values);
        LearnShape {
            k,
            d1_pair_base,
            d1_value_base,
            pair_value_base,
            total: values,
        }
    }

    #[inline]
    fn pair_index(&self, d1: i64, d2: i64) -> usize {
        let m1 = self.k - d1.abs();
        self.d1_pair_base[(d1 + self.k) as usize] + ((d2 + m1) / 2) as usize
    }

    #[inline]
    fn pair_base(&self, d1: i64, d2: i64) -> usize {
        self.pair_value_base[self.pair_index(d1, d2)]
    }

    /// Bounds- and parity-checked state index.
    fn checked_value_index(&self, d1: i64, d2: i64, s: i64) -> Option<usize> {
        let k = self.k;
        if d1.abs() + d2.abs() > k || s.abs() + d2.abs() > k {
            return None;
        }
        if (s - d1).rem_euclid(2) != 0 || (d2 - (k - d1)).rem_euclid(2) != 0 {
            return None;
        }
        let m = k - d2.abs();
        Some(self.pair_base(d1, d2) + ((s + m) / 2) as usize)
    }

    fn for_each_state(&self, mut f: impl FnMut(i64, i64, i64, usize)) {
        let k = self.k;
        for d1 in -k..=k {
            let m1 = k - d1.abs();
            let mut d2 = -m1;
            while d2 <= m1 {
                let m = k - d2.abs();
                let base = self.pair_base(d1, d2);
                let mut s = -m;
                let mut j = 0usize;
                while s <= m {
                    f(d1, d2, s, base + j);
                    s += 2;
                    j += 1;
                }
                d2 += 2;
            }
        }
    }
}

// ---------------------------------------------------------------------
// terminals and modes
// ---------------------------------------------------------------------

enum Terminal<'a> {
    Utility(&'a UtilityIndex),
    Indicator(&'a LatticeThreshold),
}

impl Terminal<'_> {
    fn eval(&self, sum: i64, scale: i64, sqrt_n: f64) -> f64 {
        match self {
            Terminal::Utility(u) => u.eval(sum as f64 / (scale as f64 * sqrt_n)),
            Terminal::Indicator(t) => {
                if t.at_or_above(sum) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

enum MenuMode {
    Optimize,
    Policy(NoLearnPolicy),
}

enum LearnMode {
    Optimize,
    Policy(TwoArmPolicy),
}

// ---------------------------------------------------------------------
// public operations
// ---------------------------------------------------------------------

/// Exact optimal value `V_n` with an argmax table on request.
///
/// Ties in the argmax break toward the lower-variance arm, then toward
/// the lexicographically smaller id; the value itself is unaffected.
pub fn value_n(env: &Environment, u: &UtilityIndex, n: u64, opts: &DpOptions) -> Result<DpRun> {
    match env {
        Environment::NoLearning(e) => menu_dp(e, Terminal::Utility(u), MenuMode::Optimize, n, opts),
        Environment::TwoArmed(e) => learn_dp(e, Terminal::Utility(u), LearnMode::Optimize, n, opts),
    }
}

/// Exact expected utility `U_n(s)` of one strategy.
///
/// The strategy must be a function of the DP state; every builtin is.
pub fn strategy_value_n(
    env: &Environment,
    s: &Strategy,
    u: &UtilityIndex,
    n: u64,
    opts: &DpOptions,
) -> Result<DpRun> {
    match env {
        Environment::NoLearning(e) => menu_dp(
            e,
            Terminal::Utility(u),
            MenuMode::Policy(s.compile_no_learn(e)?),
            n,
            opts,
        ),
        Environment::TwoArmed(e) => learn_dp(
            e,
            Terminal::Utility(u),
            LearnMode::Policy(s.compile_two_armed()?),
            n,
            opts,
        ),
    }
}

/// `sup_s P^s(Σ X_i / √n ≥ c)` by backward induction with an inclusive
/// indicator terminal, compared on the lattice in exact arithmetic.
pub fn upper_indicator_prob_n(env: &Environment, c: f64, n: u64, opts: &DpOptions) -> Result<DpRun> {
    let threshold = LatticeThreshold::new(c, env.scale(), n)?;
    match env {
        Environment::NoLearning(e) => menu_dp(
            e,
            Terminal::Indicator(&threshold),
            MenuMode::Optimize,
            n,
            opts,
        ),
        Environment::TwoArmed(e) => learn_dp(
            e,
            Terminal::Indicator(&threshold),
            LearnMode::Optimize,
            n,
            opts,
        ),
    }
}

/// Both sides of the rectangularity variance identity at a history:
/// enumeration of `max over arms of h(Σ)·σ_arm²` against
/// `σ̄²[h(Σ)]⁺ − σ̲²[h(Σ)]⁻`.
pub fn rect_identity_check<F: Fn(f64) -> f64>(
    h: F,
    state: &History,
    env: &NoLearningEnv,
) -> (f64, f64) {
    let hv = h(state.real_sum(env.scale()));
    let lhs = env
        .arms()
        .iter()
        .map(|a| hv * a.variance)
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = env.var_high() * hv.max(0.0) - env.var_low() * (-hv).max(0.0);
    (lhs, rhs)
}

// ---------------------------------------------------------------------
// no-learning sweep
// ---------------------------------------------------------------------

fn menu_dp(
    env: &NoLearningEnv,
    terminal: Terminal<'_>,
    mode: MenuMode,
    n: u64,
    opts: &DpOptions,
) -> Result<DpRun> {
    if n == 0 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    let step = env.max_step();
    let terminal_m = step
        .checked_mul(n as i64)
        .ok_or_else(|| Error::Parameter("horizon overflows the lattice".into()))?;
    let largest = 2 * terminal_m as u64 + 1;
    if largest > opts.layer_cap {
        return Err(Error::StateSpace {
            needed: largest,
            cap: opts.layer_cap,
        });
    }
    if opts.keep_table {
        let total: u64 = (0..=n).map(|i| 2 * step as u64 * i + 1).sum();
        if total > opts.layer_cap {
            return Err(Error::StateSpace {
                needed: total,
                cap: opts.layer_cap,
            });
        }
    }
    let sqrt_n = (n as f64).sqrt();
    let scale = env.scale();

    // preference order for ties: variance ascending, then id
    let mut order: Vec<usize> = (0..env.arms().len()).collect();
    order.sort_by(|&i, &j| {
        env.arms()[i]
            .variance
            .partial_cmp(&env.arms()[j].variance)
            .unwrap()
            .then_with(|| env.arms()[i].id.cmp(&env.arms()[j].id))
    });

    let mut boundary_atoms = 0u64;
    if let Terminal::Indicator(t) = &terminal {
        for s in -terminal_m..=terminal_m {
            if t.is_boundary(s) {
                boundary_atoms += 1;
            }
        }
    }

    let mut next: Vec<f64> = (-terminal_m..=terminal_m)
        .map(|s| terminal.eval(s, scale, sqrt_n))
        .collect();
    let mut layers: Vec<MenuLayer> = Vec::new();
    if opts.keep_table {
        layers.push(MenuLayer {
            m: terminal_m,
            values: next.clone(),
            argmax: None,
        });
    }

    let want_argmax = opts.keep_table && matches!(mode, MenuMode::Optimize);
    let mut value = 0.0;
    for i in (1..=n).rev() {
        let m_cur = step * (i as i64 - 1);
        let len = (2 * m_cur + 1) as usize;
        let mut cur = vec![0.0f64; len];
        let mut argmax: Option<Vec<u8>> = want_argmax.then(|| vec![0u8; len]);
        for j in 0..len {
            let s = j as i64 - m_cur;
            match &mode {
                MenuMode::Optimize => {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_arm = 0usize;
                    for &ai in &order {
                        let arm = &env.arms()[ai];
                        let mut acc = 0.0;
                        for (o, p) in arm.lattice.iter().zip(&arm.probs) {
                            acc += p * next[(j as i64 + o + step) as usize];
                        }
                        if acc > best {
                            best = acc;
                            best_arm = ai;
                        }
                    }
                    cur[j] = best;
                    if let Some(a) = argmax.as_mut() {
                        a[j] = best_arm as u8;
                    }
                }
                MenuMode::Policy(p) => {
                    let arm = &env.arms()[p.arm(i as u32, s)];
                    let mut acc = 0.0;
                    for (o, pr) in arm.lattice.iter().zip(&arm.probs) {
                        acc += pr * next[(j as i64 + o + step) as usize];
                    }
                    cur[j] = acc;
                }
            }
        }
        if i == 1 {
            value = cur[m_cur as usize];
        }
        if opts.keep_table {
            layers.push(MenuLayer {
                m: m_cur,
                values: cur.clone(),
                argmax,
            });
        }
        next = cur;
    }
    let table = opts.keep_table.then(|| {
        layers.reverse();
        DpTable {
            horizon: n,
            scale,
            kind: TableKind::Menu {
                arm_ids: env.arms().iter().map(|a| a.id.clone()).collect(),
                layers,
            },
        }
    });
    Ok(DpRun {
        value,
        max_layer_states: largest,
        boundary_atoms,
        table,
    })
}

// ---------------------------------------------------------------------
// two-armed learning sweep
// ---------------------------------------------------------------------

fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

fn learn_dp(
    env: &TwoArmedEnv,
    terminal: Terminal<'_>,
    mode: LearnMode,
    n: u64,
    opts: &DpOptions,
) -> Result<DpRun> {
    if n == 0 {
        return Err(Error::Parameter("horizon must be >= 1".into()));
    }
    if n > 100_000 {
        return Err(Error::Parameter(
            "learning horizons beyond 1e5 overflow the O(n^3) state space".into(),
        ));
    }
    let terminal_shape = LearnShape::new(n as i64);
    let largest = terminal_shape.total as u64;
    if largest > opts.layer_cap {
        return Err(Error::StateSpace {
            needed: largest,
            cap: opts.layer_cap,
        });
    }
    let sqrt_n = (n as f64).sqrt();
    let (log_nonzero, log_zero) = env.log_increments();
    let l1 = crate::bandit::BeliefState::from_mu(env.mu1()).unwrap().log_odds();
    let (pl, ph) = (env.p_low(), env.p_high());

    let mut boundary_atoms = 0u64;
    if let Terminal::Indicator(t) = &terminal {
        for s in -(n as i64)..=(n as i64) {
            if t.is_boundary(s) {
                boundary_atoms += 1;
            }
        }
    }

    // terminal layer: value depends on the sum alone
    let phi_of: Vec<f64> = (-(n as i64)..=(n as i64))
        .map(|s| terminal.eval(s, 1, sqrt_n))
        .collect();
    let mut next_shape = terminal_shape;
    let mut next = vec![0.0f64; next_shape.total];
    next_shape.for_each_state(|_, _, s, idx| {
        next[idx] = phi_of[(s + n as i64) as usize];
    });

    let mut layers: Vec<LearnLayer> = Vec::new();
    let mut total_kept = next_shape.total as u64;
    let want_argmax = opts.keep_table && matches!(mode, LearnMode::Optimize);
    if opts.keep_table {
        layers.push(LearnLayer {
            shape: LearnShape::new(n as i64),
            values: next.clone(),
            argmax: None,
        });
    }

    let mut value = 0.0;
    for i in (1..=n).rev() {
        let k = i as i64 - 1;
        let shape = LearnShape::new(k);
        if opts.keep_table {
            total_kept += shape.total as u64;
            if total_kept > opts.layer_cap {
                return Err(Error::StateSpace {
                    needed: total_kept,
                    cap: opts.layer_cap,
                });
            }
        }
        let mut cur = vec![0.0f64; shape.total];
        let mut argmax: Option<Vec<u8>> = want_argmax.then(|| vec![0u8; shape.total]);

        // hand each Δ₁ its contiguous slice so the sweep can run in
        // parallel without locks
        let mut value_slices: Vec<&mut [f64]> = Vec::with_capacity((2 * k + 1) as usize);
        let mut arg_slices: Vec<Option<&mut [u8]>> = Vec::with_capacity((2 * k + 1) as usize);
        {
            let mut rest: &mut [f64] = &mut cur;
            let mut arg_rest: Option<&mut [u8]> = argmax.as_deref_mut();
            for d1 in -k..=k {
                let len = shape.d1_value_base[(d1 + k + 1) as usize]
                    - shape.d1_value_base[(d1 + k) as usize];
                let (head, tail) = rest.split_at_mut(len);
                value_slices.push(head);
                rest = tail;
                arg_slices.push(match arg_rest.take() {
                    Some(a) => {
                        let (h, t) = a.split_at_mut(len);
                        arg_rest = Some(t);
                        Some(h)
                    }
                    None => None,
                });
            }
        }

        let next_ref = &next;
        let next_shape_ref = &next_shape;
        let shape_ref = &shape;
        let mode_ref = &mode;
        value_slices
            .into_par_iter()
            .zip(arg_slices.into_par_iter())
            .enumerate()
            .for_each(|(d1_idx, (slice, mut args))| {
                let d1 = d1_idx as i64 - k;
                let m1 = k - d1.abs();
                let slice_base = shape_ref.d1_value_base[(d1 + k) as usize];
                let mut d2 = -m1;
                while d2 <= m1 {
                    let mu = sigmoid(l1 + d1 as f64 * log_nonzero + d2 as f64 * log_zero);
                    let pa = mu * pl + (1.0 - mu) * ph;
                    let pb = mu * ph + (1.0 - mu) * pl;
                    let m = k - d2.abs();
                    let base_cur = shape_ref.pair_base(d1, d2) - slice_base;
                    let base_a_up = next_shape_ref.pair_base(d1 + 1, d2);
                    let base_b_up = next_shape_ref.pair_base(d1 - 1, d2);
                    let base_a_zero = next_shape_ref.pair_base(d1, d2 + 1);
                    let base_b_zero = next_shape_ref.pair_base(d1, d2 - 1);
                    let m_up = k + 1 - d2.abs();
                    let m_a_zero = k + 1 - (d2 + 1).abs();
                    let m_b_zero = k + 1 - (d2 - 1).abs();
                    let mut s = -m;
                    let mut j = 0usize;
                    while s <= m {
                        let hi = ((s + 1 + m_up) / 2) as usize;
                        let va = 0.5 * pa * (next_ref[base_a_up + hi] + next_ref[base_a_up + hi - 1])
                            + (1.0 - pa) * next_ref[base_a_zero + ((s + m_a_zero) / 2) as usize];
                        let vb = 0.5 * pb * (next_ref[base_b_up + hi] + next_ref[base_b_up + hi - 1])
                            + (1.0 - pb) * next_ref[base_b_zero + ((s + m_b_zero) / 2) as usize];
                        let (v, arm) = match mode_ref {
                            LearnMode::Optimize => {
                                // ties go to the lower conditional
                                // variance, then to arm a
                                if pa <= pb {
                                    if vb > va {
                                        (vb, 1u8)
                                    } else {
                                        (va, 0u8)
                                    }
                                } else if va > vb {
                                    (va, 0u8)
                                } else {
                                    (vb, 1u8)
                                }
                            }
                            LearnMode::Policy(p) => match p.arm(i as u32, s, mu) {
                                ArmChoice::A => (va, 0u8),
                                ArmChoice::B => (vb, 1u8),
                            },
                        };
                        slice[base_cur + j] = v;
                        if let Some(a) = args.as_mut() {
                            a[base_cur + j] = arm;
                        }
                        s += 2;
                        j += 1;
                    }
                    d2 += 2;
                }
            });

        if i == 1 {
            value = cur[0];
        }
        if opts.keep_table {
            layers.push(LearnLayer {
                shape: LearnShape::new(k),
                values: cur.clone(),
                argmax,
            });
        }
        next = cur;
        next_shape = shape;
    }

    let table = opts.keep_table.then(|| {
        layers.reverse();
        DpTable {
            horizon: n,
            scale: 1,
            kind: TableKind::Learn { layers },
        }
    });
    Ok(DpRun {
        value,
        max_layer_states: largest,
        boundary_atoms,
        table,
    })
}
