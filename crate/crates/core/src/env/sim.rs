use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::energy::pair_gain;
use super::{EnvConfig, ResourcePattern, RESOURCE_LEVELS};
use crate::error::{check_len, Error, Result};
use crate::rng::{seeded_rng, SimRng};

/// Observable network condition at the start of a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub slot: usize,
    /// Available V2V radio resource (MHz).
    pub resource_mhz: f64,
    /// Objects to perceive, per pair.
    pub workloads: Vec<u32>,
    /// Transmitter-receiver distance (m), per pair.
    pub distances: Vec<f64>,
}

impl NetworkState {
    /// Network input: `(W / 7, n_i / n_max, d_i / d_max)`.
    pub fn features(&self, config: &EnvConfig) -> Vec<f64> {
        let w_scale = RESOURCE_LEVELS[RESOURCE_LEVELS.len() - 1];
        let mut f = Vec::with_capacity(config.state_dim());
        f.push(self.resource_mhz / w_scale);
        f.extend(
            self.workloads
                .iter()
                .map(|&n| n as f64 / config.workload_max as f64),
        );
        f.extend(self.distances.iter().map(|&d| d / config.dist_max_m));
        f
    }
}

/// Perception mode per pair: `false` = stand-alone, `true` = cooperative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub modes: Vec<bool>,
}

impl Action {
    pub fn all_sp(n_pairs: usize) -> Self {
        Self {
            modes: vec![false; n_pairs],
        }
    }

    /// The `index`-th action in lexicographic order (pair 0 is the most
    /// significant bit).
    pub fn from_index(index: usize, n_pairs: usize) -> Self {
        Self {
            modes: (0..n_pairs)
                .map(|i| (index >> (n_pairs - 1 - i)) & 1 == 1)
                .collect(),
        }
    }

    pub fn n_cooperative(&self) -> usize {
        self.modes.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_state: NetworkState,
    pub per_pair_gain: Vec<f64>,
    pub per_pair_feasible: Vec<bool>,
}

fn draw_resource<R: Rng + ?Sized>(mean: f64, config: &EnvConfig, rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let w = mean + config.sigma_mhz * z;
        if w >= config.resource_floor_mhz {
            return w;
        }
    }
}

/// Initial state of an episode: all randomness comes from `rng`.
pub fn reset<R: Rng + ?Sized>(
    config: &EnvConfig,
    pattern: &ResourcePattern,
    rng: &mut R,
) -> Result<NetworkState> {
    pattern.check_slots(config.slots)?;
    let resource_mhz = draw_resource(pattern.means()[0], config, rng);
    let workloads = (0..config.n_pairs)
        .map(|_| rng.random_range(config.workload_min..=config.workload_max))
        .collect();
    let distances = (0..config.n_pairs)
        .map(|_| {
            if config.dist_min_m == config.dist_max_m {
                config.dist_min_m
            } else {
                rng.random_range(config.dist_min_m..config.dist_max_m)
            }
        })
        .collect();
    Ok(NetworkState {
        slot: 0,
        resource_mhz,
        workloads,
        distances,
    })
}

/// Per-pair normalised gains and feasibility of `action` in `state`.
///
/// The available resource is split equally among the cooperating pairs.
pub fn immediate_gains(
    state: &NetworkState,
    action: &Action,
    config: &EnvConfig,
) -> Result<(Vec<f64>, Vec<bool>)> {
    check_len("action", config.n_pairs, action.modes.len())?;
    check_len("state workloads", config.n_pairs, state.workloads.len())?;
    check_len("state distances", config.n_pairs, state.distances.len())?;
    let m = action.n_cooperative();
    let bandwidth = if m == 0 {
        0.0
    } else {
        state.resource_mhz / m as f64
    };
    let mut gains = Vec::with_capacity(config.n_pairs);
    let mut feasible = Vec::with_capacity(config.n_pairs);
    for i in 0..config.n_pairs {
        let (g, ok) = pair_gain(
            action.modes[i],
            state.workloads[i] as f64,
            state.distances[i],
            bandwidth,
            config,
        );
        gains.push(g);
        feasible.push(ok);
    }
    Ok((gains, feasible))
}

/// Total reward of `action` in `state` without advancing time.
pub fn immediate_reward(state: &NetworkState, action: &Action, config: &EnvConfig) -> Result<f64> {
    let (gains, _) = immediate_gains(state, action, config)?;
    Ok(gains.iter().sum())
}

fn walk<R: Rng + ?Sized>(p: f64, rng: &mut R) -> i8 {
    let u: f64 = rng.random();
    if u < p {
        -1
    } else if u < 2.0 * p {
        1
    } else {
        0
    }
}

/// Applies `action` and samples the next state.
pub fn step<R: Rng + ?Sized>(
    state: &NetworkState,
    action: &Action,
    config: &EnvConfig,
    pattern: &ResourcePattern,
    rng: &mut R,
) -> Result<StepOutcome> {
    if state.slot >= config.slots {
        return Err(Error::EpisodeFinished {
            slot: state.slot,
            slots: config.slots,
        });
    }
    pattern.check_slots(config.slots)?;
    let (per_pair_gain, per_pair_feasible) = immediate_gains(state, action, config)?;
    let reward = per_pair_gain.iter().sum();

    let next_slot = state.slot + 1;
    // the terminal state reuses the last slot's mean
    let mean = pattern.means()[next_slot.min(config.slots - 1)];
    let resource_mhz = draw_resource(mean, config, rng);
    let mut workloads = Vec::with_capacity(config.n_pairs);
    let mut distances = Vec::with_capacity(config.n_pairs);
    for i in 0..config.n_pairs {
        let dn = walk(config.walk_prob, rng) as i64 * config.workload_step as i64;
        let n = (state.workloads[i] as i64 + dn)
            .clamp(config.workload_min as i64, config.workload_max as i64);
        workloads.push(n as u32);
        let dd = walk(config.walk_prob, rng) as f64 * config.distance_step_m;
        distances.push((state.distances[i] + dd).clamp(config.dist_min_m, config.dist_max_m));
    }
    Ok(StepOutcome {
        reward,
        next_state: NetworkState {
            slot: next_slot,
            resource_mhz,
            workloads,
            distances,
        },
        per_pair_gain,
        per_pair_feasible,
    })
}

/// Exhaustive search over all `2^n_pairs` actions on the immediate reward.
/// Ties go to the lexicographically smallest action.
pub fn brute_force_best_action(state: &NetworkState, config: &EnvConfig) -> Result<(Action, f64)> {
    if config.n_pairs > 12 {
        return Err(Error::Config(format!(
            "brute force supports at most 12 pairs, got {}",
            config.n_pairs
        )));
    }
    let mut best = (Action::all_sp(config.n_pairs), f64::NEG_INFINITY);
    for idx in 0..1usize << config.n_pairs {
        let action = Action::from_index(idx, config.n_pairs);
        let r = immediate_reward(state, &action, config)?;
        if r > best.1 {
            best = (action, r);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
enum Dynamics {
    Stochastic(ResourcePattern),
    /// Every slot shows the same state; used for single-state bandit checks.
    Frozen(NetworkState),
}

/// One episode-capable environment instance with its own random stream.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    dynamics: Dynamics,
    rng: SimRng,
    state: NetworkState,
}

impl Env {
    pub fn new(config: EnvConfig, pattern: ResourcePattern, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let state = reset(&config, &pattern, &mut rng)?;
        Ok(Self {
            config,
            dynamics: Dynamics::Stochastic(pattern),
            rng,
            state,
        })
    }

    pub fn frozen(config: EnvConfig, state: NetworkState) -> Result<Self> {
        config.validate()?;
        check_len("frozen state workloads", config.n_pairs, state.workloads.len())?;
        check_len("frozen state distances", config.n_pairs, state.distances.len())?;
        let state = NetworkState { slot: 0, ..state };
        Ok(Self {
            config,
            dynamics: Dynamics::Frozen(state.clone()),
            rng: seeded_rng(0),
            state,
        })
    }

    /// Restarts the episode with a new seed.
    pub fn reset(&mut self, seed: u64) -> Result<&NetworkState> {
        self.rng = seeded_rng(seed);
        self.state = match &self.dynamics {
            Dynamics::Stochastic(pattern) => reset(&self.config, pattern, &mut self.rng)?,
            Dynamics::Frozen(s) => s.clone(),
        };
        Ok(&self.state)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.config.slots
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        let outcome = match &self.dynamics {
            Dynamics::Stochastic(pattern) => {
                step(&self.state, action, &self.config, pattern, &mut self.rng)?
            }
            Dynamics::Frozen(frozen) => {
                if self.state.slot >= self.config.slots {
                    return Err(Error::EpisodeFinished {
                        slot: self.state.slot,
                        slots: self.config.slots,
                    });
                }
                let (per_pair_gain, per_pair_feasible) =
                    immediate_gains(&self.state, action, &self.config)?;
                StepOutcome {
                    reward: per_pair_gain.iter().sum(),
                    next_state: NetworkState {
                        slot: self.state.slot + 1,
                        ..frozen.clone()
                    },
                    per_pair_gain,
                    per_pair_feasible,
                }
            }
        };
        self.state = outcome.next_state.clone();
        Ok(outcome)
    }
}

/// Writes `slot,W,n1..nP,d1..dP,a1..aP,reward` rows.
pub fn write_trajectory_csv<W: Write>(
    mut w: W,
    n_pairs: usize,
    rows: &[(NetworkState, Action, f64)],
) -> Result<()> {
    let mut header = vec!["slot".to_string(), "W".to_string()];
    header.extend((1..=n_pairs).map(|i| format!("n{i}")));
    header.extend((1..=n_pairs).map(|i| format!("d{i}")));
    header.extend((1..=n_pairs).map(|i| format!("a{i}")));
    header.push("reward".into());
    writeln!(w, "{}", header.join(","))?;
    for (state, action, reward) in rows {
        let mut fields = vec![state.slot.to_string(), state.resource_mhz.to_string()];
        fields.extend(state.workloads.iter().map(|n| n.to_string()));
        fields.extend(state.distances.iter().map(|d| d.to_string()));
        fields.extend(action.modes.iter().map(|&m| u8::from(m).to_string()));
        fields.push(reward.to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EnvConfig {
        EnvConfig::default()
    }

    fn task(level: f64) -> ResourcePattern {
        ResourcePattern::constant(level, 75).unwrap()
    }

    #[test]
    fn reset_is_deterministic_and_in_range() {
        let a = Env::new(cfg(), task(6.0), 17).unwrap();
        let b = Env::new(cfg(), task(6.0), 17).unwrap();
        assert_eq!(a.state(), b.state());
        let s = a.state();
        assert_eq!(s.slot, 0);
        assert!(s.resource_mhz > 0.0);
        assert!(s.workloads.iter().all(|&n| (5..=20).contains(&n)));
        assert!(s.distances.iter().all(|&d| (10.0..=100.0).contains(&d)));
    }

    #[test]
    fn zero_sigma_gives_exact_mean() {
        let c = EnvConfig {
            sigma_mhz: 0.0,
            ..cfg()
        };
        let env = Env::new(c, task(5.0), 4).unwrap();
        assert_eq!(env.state().resource_mhz, 5.0);
    }

    #[test]
    fn reset_resource_sample_mean() {
        let c = cfg();
        let p = task(5.0);
        let mut rng = seeded_rng(2024);
        let n = 1000;
        let mean: f64 = (0..n)
            .map(|_| reset(&c, &p, &mut rng).unwrap().resource_mhz)
            .sum::<f64>()
            / n as f64;
        assert!((4.97..=5.03).contains(&mean), "{mean}");
    }

    #[test]
    fn all_sp_reward_is_zero() {
        let mut env = Env::new(cfg(), task(7.0), 1).unwrap();
        while !env.is_done() {
            let out = env.step(&Action::all_sp(3)).unwrap();
            assert_eq!(out.reward, 0.0);
            assert!(out.per_pair_feasible.iter().all(|&f| f));
        }
    }

    #[test]
    fn stepping_past_the_end_fails() {
        let c = EnvConfig { slots: 2, ..cfg() };
        let mut env = Env::new(c, ResourcePattern::constant(5.0, 2).unwrap(), 0).unwrap();
        env.step(&Action::all_sp(3)).unwrap();
        env.step(&Action::all_sp(3)).unwrap();
        assert!(matches!(
            env.step(&Action::all_sp(3)),
            Err(Error::EpisodeFinished { .. })
        ));
    }

    #[test]
    fn favourable_single_cp_is_positive() {
        let s = NetworkState {
            slot: 0,
            resource_mhz: 7.0,
            workloads: vec![20, 10, 10],
            distances: vec![10.0, 50.0, 50.0],
        };
        let a = Action {
            modes: vec![true, false, false],
        };
        assert!(immediate_reward(&s, &a, &cfg()).unwrap() > 0.0);
    }

    #[test]
    fn brute_force_enumeration() {
        assert_eq!(
            Action::from_index(1, 3).modes,
            vec![false, false, true]
        );
        assert_eq!(Action::from_index(4, 3).modes, vec![true, false, false]);
        // hopeless links: every CP choice is infeasible
        let s = NetworkState {
            slot: 0,
            resource_mhz: 0.5,
            workloads: vec![20, 20, 20],
            distances: vec![100.0; 3],
        };
        let (a, r) = brute_force_best_action(&s, &cfg()).unwrap();
        assert_eq!(a, Action::all_sp(3));
        assert_eq!(r, 0.0);
        let big = EnvConfig { n_pairs: 13, ..cfg() };
        assert!(brute_force_best_action(&s, &big).is_err());
    }

    #[test]
    fn frozen_env_repeats_state() {
        let s = NetworkState {
            slot: 3,
            resource_mhz: 6.0,
            workloads: vec![12, 8, 15],
            distances: vec![20.0, 30.0, 40.0],
        };
        let c = EnvConfig { slots: 4, ..cfg() };
        let mut env = Env::frozen(c, s).unwrap();
        let a = Action::from_index(2, 3);
        let first = env.step(&a).unwrap();
        let second = env.step(&a).unwrap();
        assert_eq!(first.reward, second.reward);
        assert_eq!(first.next_state.workloads, second.next_state.workloads);
        assert_eq!(second.next_state.slot, 2);
    }

    #[test]
    fn trajectory_csv_header() {
        let s = NetworkState {
            slot: 0,
            resource_mhz: 5.5,
            workloads: vec![5, 6],
            distances: vec![10.0, 20.0],
        };
        let mut out = Vec::new();
        write_trajectory_csv(&mut out, 2, &[(s, Action::from_index(1, 2), 0.25)]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "slot,W,n1,n2,d1,d2,a1,a2,reward\n0,5.5,5,6,10,20,0,1,0.25\n"
        );
    }
}
