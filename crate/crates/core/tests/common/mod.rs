//! Test-only oracles shared by the integration targets.
#![allow(dead_code)]

use rand::Rng;
use twintier::diffcore::{backward, forward, gaussian_log_prob, GaussianHead, MlpSpec, ParamVector};
use twintier::env::{
    brute_force_best_action, immediate_reward, reset, Action, EnvConfig, NetworkState, ResourcePattern,
};
use twintier::ppo::{
    collect_batch, discretize, policy_loss_and_grad, ppo_update_with_state, value_loss_and_grad,
    AgentParams, AgentSpec, PolicyObjective, PpoConfig, Sample, Task, TrainerState,
};
use twintier::registry::{
    AttributeDef, AttributeKind, AttributeSchema, AttributeValue, AttributeVector, CategoryPath, MetaModel, Registry,
};
use twintier::orchestrator::{run_scenario, ScenarioScript};
use twintier::rng::{derive_seed, seeded_rng, SimRng};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-5;
pub const GRAD_ABS_TOL: f64 = 1e-7;

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = work[i];
            work[i] = orig + FD_STEP;
            let up = f(&work);
            work[i] = orig - FD_STEP;
            let down = f(&work);
            work[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// A partial passes when it is within the absolute tolerance or within the
/// relative tolerance of the finite-difference value.
pub fn partial_matches(analytic: f64, numeric: f64) -> bool {
    let err = (analytic - numeric).abs();
    err <= GRAD_ABS_TOL || err <= GRAD_REL_TOL * numeric.abs().max(analytic.abs())
}

#[derive(Debug, Default, Clone)]
pub struct GradReport {
    pub instances: usize,
    pub partials: usize,
    pub mismatches: usize,
    pub worst: f64,
}

impl GradReport {
    fn absorb(&mut self, analytic: &[f64], numeric: &[f64]) {
        assert_eq!(analytic.len(), numeric.len());
        self.instances += 1;
        for (&a, &n) in analytic.iter().zip(numeric) {
            self.partials += 1;
            if !partial_matches(a, n) {
                self.mismatches += 1;
            }
            let rel = (a - n).abs() / n.abs().max(1e-12);
            let err = (a - n).abs().min(rel);
            self.worst = self.worst.max(err);
        }
    }

    pub fn merge(&mut self, other: &GradReport) {
        self.instances += other.instances;
        self.partials += other.partials;
        self.mismatches += other.mismatches;
        self.worst = self.worst.max(other.worst);
    }

    pub fn ok(&self) -> bool {
        self.instances > 0 && self.mismatches == 0
    }
}

fn random_vec(rng: &mut SimRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random MLP, random input, linear loss `c . f(x)`.
pub fn check_mlp(seed: u64) -> GradReport {
    let mut rng = seeded_rng(seed);
    let depth = rng.random_range(2..5);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..6)).collect();
    let spec = MlpSpec::new(sizes).unwrap();
    let params = ParamVector::new(random_vec(&mut rng, spec.param_count(), 1.0));
    let input = random_vec(&mut rng, spec.input_dim(), 1.0);
    let c = random_vec(&mut rng, spec.output_dim(), 1.0);
    let analytic = backward(&spec, &params, &input, &c).unwrap();
    let f = |p: &[f64]| -> f64 {
        let out = forward(&spec, &ParamVector::new(p.to_vec()), &input).unwrap();
        out.iter().zip(&c).map(|(o, w)| o * w).sum()
    };
    let numeric = fd_gradient(&f, params.as_slice());
    let mut report = GradReport::default();
    report.absorb(analytic.as_slice(), &numeric);
    report
}

/// Random diagonal Gaussian; partials with respect to mean and log-std.
pub fn check_gaussian(seed: u64) -> GradReport {
    let mut rng = seeded_rng(seed);
    let dim = rng.random_range(1..5);
    let mean = random_vec(&mut rng, dim, 2.0);
    let log_std = random_vec(&mut rng, dim, 1.0);
    let action = random_vec(&mut rng, dim, 2.0);
    let head = GaussianHead::new(mean.clone(), log_std.clone()).unwrap();
    let (dm, ds) = head.log_prob_grad(&action).unwrap();
    let mut x = mean.clone();
    x.extend_from_slice(&log_std);
    let f = |v: &[f64]| -> f64 {
        let h = GaussianHead::new(v[..dim].to_vec(), v[dim..].to_vec()).unwrap();
        gaussian_log_prob(&h, &action).unwrap()
    };
    let numeric = fd_gradient(&f, &x);
    let mut analytic = dm;
    analytic.extend(ds);
    let mut report = GradReport::default();
    report.absorb(&analytic, &numeric);
    report
}

/// Small random agent plus a batch whose behaviour log-probs put ratios on
/// both sides of the clip range, away from the kinks.
pub fn random_policy_batch(seed: u64, eps: f64) -> (AgentSpec, ParamVector, ParamVector, Vec<Sample>) {
    let mut rng = seeded_rng(seed);
    let state_dim = rng.random_range(2..5);
    let action_dim = rng.random_range(1..4);
    let hidden = rng.random_range(2..6);
    let spec = AgentSpec::new(state_dim, action_dim, hidden);
    let init = spec.init(&mut rng);
    let mut policy = init.policy.clone();
    let n_net = spec.policy_net.param_count();
    for v in &mut policy.as_mut_slice()[n_net..] {
        *v = rng.random_range(-1.0..0.5);
    }
    let n = rng.random_range(4..12);
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let features = random_vec(&mut rng, state_dim, 1.0);
        let raw_action = random_vec(&mut rng, action_dim, 1.5);
        let head = spec
            .head(
                &AgentParams {
                    policy: policy.clone(),
                    value: init.value.clone(),
                },
                &features,
            )
            .unwrap();
        let lp = gaussian_log_prob(&head, &raw_action).unwrap();
        let old_log_prob = lp - rng.random_range(-0.5..0.5);
        let ratio = (lp - old_log_prob).exp();
        if (ratio - (1.0 - eps)).abs() < 1e-3 || (ratio - (1.0 + eps)).abs() < 1e-3 {
            continue;
        }
        samples.push(Sample {
            features,
            raw_action,
            old_log_prob,
            advantage: rng.random_range(-2.0..2.0),
            target: rng.random_range(-5.0..5.0),
        });
    }
    (spec, policy, init.value, samples)
}

pub fn check_surrogate(seed: u64, objective: PolicyObjective) -> GradReport {
    let eps = match objective {
        PolicyObjective::Clipped { eps } => eps,
        PolicyObjective::Vanilla => 0.2,
    };
    let (spec, policy, _, samples) = random_policy_batch(seed, eps);
    let (_, analytic) = policy_loss_and_grad(&spec, &policy, &samples, objective).unwrap();
    let f = |p: &[f64]| -> f64 {
        policy_loss_and_grad(&spec, &ParamVector::new(p.to_vec()), &samples, objective)
            .unwrap()
            .0
    };
    let numeric = fd_gradient(&f, policy.as_slice());
    let mut report = GradReport::default();
    report.absorb(analytic.as_slice(), &numeric);
    report
}

pub fn check_value_loss(seed: u64) -> GradReport {
    let (spec, _, value, samples) = random_policy_batch(seed, 0.2);
    let (_, analytic) = value_loss_and_grad(&spec, &value, &samples).unwrap();
    let f = |p: &[f64]| -> f64 {
        value_loss_and_grad(&spec, &ParamVector::new(p.to_vec()), &samples)
            .unwrap()
            .0
    };
    let numeric = fd_gradient(&f, value.as_slice());
    let mut report = GradReport::default();
    report.absorb(analytic.as_slice(), &numeric);
    report
}

/// The full gradient suite over `instances` random seeds per family.
pub fn gradient_suite(instances: u64) -> Vec<(&'static str, GradReport)> {
    let mut families: Vec<(&'static str, GradReport)> = vec![
        ("mlp", GradReport::default()),
        ("gaussian", GradReport::default()),
        ("clipped surrogate", GradReport::default()),
        ("vanilla surrogate", GradReport::default()),
        ("value loss", GradReport::default()),
    ];
    for s in 0..instances {
        families[0].1.merge(&check_mlp(1000 + s));
        families[1].1.merge(&check_gaussian(2000 + s));
        families[2].1.merge(&check_surrogate(3000 + s, PolicyObjective::Clipped { eps: 0.2 }));
        families[3].1.merge(&check_surrogate(4000 + s, PolicyObjective::Vanilla));
        families[4].1.merge(&check_value_loss(5000 + s));
    }
    families
}

/// Episodes per update in the frozen-state bandit.
pub const BANDIT_BATCH: usize = 64;
pub const BANDIT_UPDATES: usize = 200;
pub const BANDIT_FRACTION: f64 = 0.95;

pub fn random_network_state(seed: u64, config: &EnvConfig) -> NetworkState {
    let mut rng = seeded_rng(seed);
    let pattern = ResourcePattern::uniform_random(config.slots, &mut rng);
    reset(config, &pattern, &mut rng).unwrap()
}

#[derive(Debug, Clone)]
pub struct BanditOutcome {
    pub best: f64,
    /// Update count after which the greedy action first met the target.
    pub reached_at: Option<usize>,
    pub final_greedy: f64,
}

/// Reward of the policy's most likely binary action (mean thresholded).
pub fn greedy_reward(spec: &AgentSpec, agent: &AgentParams, state: &NetworkState, config: &EnvConfig) -> f64 {
    let head = spec.head(agent, &state.features(config)).unwrap();
    let action = discretize(&head.mean);
    immediate_reward(state, &action, config).unwrap()
}

/// PPO on a single frozen state with one-slot episodes.
pub fn run_bandit(state_seed: u64, train_seed: u64) -> BanditOutcome {
    let config = EnvConfig {
        slots: 1,
        ..EnvConfig::default()
    };
    let state = random_network_state(state_seed, &EnvConfig::default());
    let (_, best) = brute_force_best_action(&state, &config).unwrap();
    let spec = AgentSpec::for_env(&config);
    let mut agent = spec.init(&mut seeded_rng(train_seed));
    let task = Task::frozen(state_seed, config.clone(), state.clone());
    let ppo = PpoConfig {
        episodes_per_epoch: BANDIT_BATCH,
        ..PpoConfig::default()
    };
    let target = BANDIT_FRACTION * best;
    let mut rng = seeded_rng(derive_seed(train_seed, 7));
    let mut reached_at = None;
    let mut trainer = TrainerState::new(&spec, ppo.optimizer);
    for update in 1..=BANDIT_UPDATES {
        let batch = collect_batch(&task, &spec, &agent, ppo.episodes_per_epoch, &mut rng).unwrap();
        if let Ok((next, _)) = ppo_update_with_state(&spec, &agent, &batch, &ppo, &mut trainer) {
            agent = next;
        }
        if reached_at.is_none() && greedy_reward(&spec, &agent, &state, &config) >= target {
            reached_at = Some(update);
        }
    }
    BanditOutcome {
        best,
        reached_at,
        final_greedy: greedy_reward(&spec, &agent, &state, &config),
    }
}

pub const REGISTRY_CASES: u64 = 1000;
pub const REGISTRY_OPERATIONS: usize = 10_000;
pub const INMF: &str = "cp_mode_selection";

/// Random schema of depth 1 to 4 mixing categorical and continuous levels.
pub fn random_schema(rng: &mut SimRng) -> AttributeSchema {
    let depth = rng.random_range(1..5);
    let defs = (0..depth)
        .map(|i| {
            let name = format!("a{i}");
            if rng.random_bool(0.5) {
                let vocab: Vec<String> = (0..rng.random_range(2..4)).map(|v| format!("v{v}")).collect();
                let refs: Vec<&str> = vocab.iter().map(String::as_str).collect();
                AttributeDef::categorical(&name, &refs)
            } else {
                AttributeDef::continuous(&name, 0.0, 10.0, rng.random_range(2..5))
            }
        })
        .collect();
    AttributeSchema::new(defs).unwrap()
}

pub fn random_attrs(schema: &AttributeSchema, rng: &mut SimRng) -> AttributeVector {
    let mut attrs = AttributeVector::new();
    for def in schema.attributes() {
        match &def.kind {
            AttributeKind::Categorical { vocabulary } => {
                let v = &vocabulary[rng.random_range(0..vocabulary.len())];
                attrs.set(&def.name, v.as_str());
            }
            AttributeKind::Continuous { .. } => attrs.set(&def.name, rng.random_range(-1.0..11.0)),
        }
    }
    attrs
}

/// Discrete value by scanning bin lower edges instead of the floor formula.
fn oracle_value(def: &AttributeDef, value: &AttributeValue) -> String {
    match (&def.kind, value) {
        (AttributeKind::Categorical { .. }, AttributeValue::Category(v)) => v.clone(),
        (AttributeKind::Continuous { min, max, bin_count, .. }, AttributeValue::Number(v)) => {
            let width = (max - min) / *bin_count as f64;
            let bin = (0..*bin_count).rev().find(|k| *v >= min + *k as f64 * width).unwrap_or(0);
            def.values()[bin].clone()
        }
        _ => panic!("oracle given mismatched value"),
    }
}

/// Deepest model-bearing prefix found by scanning every prefix from the root down.
pub fn oracle_match(registry: &Registry, attrs: &AttributeVector, inmf: &str) -> Option<CategoryPath> {
    let mut steps = Vec::new();
    for def in registry.schema().attributes() {
        match attrs.values.get(&def.name) {
            Some(v) => steps.push((def.name.clone(), oracle_value(def, v))),
            None => break,
        }
    }
    let mut best = None;
    for depth in 0..=steps.len() {
        let prefix = CategoryPath(steps[..depth].to_vec());
        if registry.model(&prefix, inmf).is_some() {
            best = Some(prefix);
        }
    }
    registry.model(&CategoryPath::root(), inmf)?;
    best
}

pub struct RegistryCase {
    pub registry: Registry,
    pub query: AttributeVector,
}

/// Registry with random PLVNs and models on random prefixes (the super model
/// is missing one time in ten), plus a query that may omit trailing attributes.
pub fn random_registry_case(seed: u64) -> RegistryCase {
    let mut rng = seeded_rng(seed);
    let schema = random_schema(&mut rng);
    let mut registry = Registry::new(schema.clone());
    let spec = AgentSpec::new(3, 1, 2);
    let params = spec.init(&mut rng);
    let model = MetaModel { spec, params };
    for id in 0..rng.random_range(0..20) {
        registry.register_plvn(id, &random_attrs(&schema, &mut rng)).unwrap();
    }
    if rng.random_bool(0.9) {
        registry.install_model(&CategoryPath::root(), INMF, model.clone()).unwrap();
    }
    for _ in 0..rng.random_range(0..8) {
        let full = schema.normalize_discretize(&random_attrs(&schema, &mut rng)).unwrap();
        let depth = rng.random_range(0..=full.depth());
        let inmf = if rng.random_bool(0.8) { INMF } else { "other" };
        registry.install_model(&full.prefix(depth), inmf, model.clone()).unwrap();
    }
    let mut query = random_attrs(&schema, &mut rng);
    if rng.random_bool(0.3) {
        let cut = rng.random_range(0..schema.depth());
        for def in &schema.attributes()[cut..] {
            query.values.remove(&def.name);
        }
    }
    RegistryCase { registry, query }
}

/// Cases where the implementation agrees with the prefix-scan oracle.
pub fn registry_oracle_agreement(cases: u64) -> u64 {
    (0..cases)
        .filter(|&seed| {
            let case = random_registry_case(90_000 + seed);
            let got = case.registry.least_general_match(&case.query, INMF).ok().map(|(p, _)| p);
            got == oracle_match(&case.registry, &case.query, INMF)
        })
        .count() as u64
}

/// Random register / re-register / deregister sequence; returns the first
/// operation index after which ancestor closure fails.
pub fn closure_violation(seed: u64, operations: usize) -> Option<(usize, String)> {
    let mut rng = seeded_rng(seed);
    let schema = AttributeSchema::new(vec![
        AttributeDef::categorical("hour", &["Day", "Night"]),
        AttributeDef::categorical("city", &["Toronto", "Waterloo", "Ottawa"]),
        AttributeDef::categorical("road", &["Highway", "Urban"]),
        AttributeDef::continuous("avg_resources", 5.0, 7.0, 3),
    ])
    .unwrap();
    let mut registry = Registry::new(schema.clone());
    for op in 0..operations {
        let id = rng.random_range(0..64);
        if rng.random_bool(0.1) {
            let _ = registry.deregister_plvn(id);
        } else {
            registry.register_plvn(id, &random_attrs(&schema, &mut rng)).unwrap();
        }
        if let Err(e) = registry.check_ancestor_closure() {
            return Some((op, e));
        }
    }
    None
}

pub const DRIFT_SWITCH_EPISODE: u64 = 60;
pub const DRIFT_WINDOWS: u64 = 2;

/// Drift scenario: one μ≡7 PLVN, a short root meta-training, attach, then
/// monitoring with a switch to μ≡5 after three full windows.
pub fn drift_script(seed: u64) -> String {
    format!(
        r#"
seed = {seed}
seeds = [{seed}]
meta_iterations = 20

[[plvn]]
id = 1
pattern = "constant:7"
switch = [{{ at_episode = {DRIFT_SWITCH_EPISODE}, pattern = "constant:5" }}]

[[stage]]
kind = "offline"
category = "root"

[[stage]]
kind = "attach"
epochs = 60

[[stage]]
kind = "monitor"
episodes = 120
epochs = 10
"#
    )
}

/// Monitored episode of the first retrain at or after the switch, and the
/// number of retrains before it.
pub fn drift_retrain(seed: u64) -> (Option<u64>, usize) {
    let script = ScenarioScript::parse(&drift_script(seed)).expect("drift script is valid");
    let out = run_scenario(&script).expect("drift scenario runs");
    let early = out.retrains.iter().filter(|(_, r)| r.episode < DRIFT_SWITCH_EPISODE).count();
    let first = out.retrains.iter().map(|(_, r)| r.episode).find(|&e| e >= DRIFT_SWITCH_EPISODE);
    (first, early)
}

/// Whether the retrain at `episode` closed one of the first two windows
/// after the switch.
pub fn within_drift_windows(episode: Option<u64>, window: u64) -> bool {
    episode.is_some_and(|e| e < DRIFT_SWITCH_EPISODE + DRIFT_WINDOWS * window)
}

pub const ACCOUNTING_STATES: u64 = 10_000;
pub const ORACLE_GAIN_REL_TOL: f64 = 1e-12;

/// Per-pair gain written directly from the energy model: stand-alone pairs
/// gain nothing; a cooperative pair saves the difference between two
/// stand-alone pipelines and one fused pipeline after the V2V transfer,
/// normalised by the stand-alone energy at the middle workload.
pub fn oracle_pair_gain(cooperative: bool, workload: f64, distance: f64, bandwidth_mhz: f64, c: &EnvConfig) -> f64 {
    if !cooperative {
        return 0.0;
    }
    let t = c.deadline_s;
    let sp = |n: f64| {
        let cycles = n * c.cycles_per_object;
        2.0 * c.energy_coeff * cycles.powi(3) / (t * t)
    };
    if bandwidth_mhz <= 0.0 {
        return -c.infeasible_penalty;
    }
    let snr = 10f64.powf((c.snr0_db - 10.0 * c.pathloss_exp * (distance / c.ref_dist_m).log10()) / 10.0);
    let rate = bandwidth_mhz * 1e6 * (1.0 + snr).log2();
    let tx = workload * c.feature_bits_per_object / rate;
    let cycles = c.cp_compute_ratio * workload * c.cycles_per_object;
    if tx >= t || cycles / (t - tx) > c.f_max {
        return -c.infeasible_penalty;
    }
    let cp = c.energy_coeff * cycles.powi(3) / ((t - tx) * (t - tx));
    let reference = sp(0.5 * f64::from(c.workload_min + c.workload_max));
    (sp(workload) - cp) / reference
}

#[derive(Debug, Default, Clone)]
pub struct AccountingReport {
    pub states: u64,
    pub sp_nonzero: u64,
    pub sum_mismatch: u64,
    pub oracle_mismatch: u64,
    pub worst_oracle_rel: f64,
}

/// All-SP and random-action steps on random states: SP reward must be
/// exactly zero, the step reward must be the left-to-right sum of the
/// reported per-pair gains, and each gain must match the oracle.
pub fn reward_accounting(states: u64) -> AccountingReport {
    let config = EnvConfig::default();
    let pattern = ResourcePattern::constant(6.0, config.slots).unwrap();
    let mut report = AccountingReport::default();
    for s in 0..states {
        let state = random_network_state(70_000 + s, &config);
        let mut rng = seeded_rng(derive_seed(s, 5));
        report.states += 1;
        let sp = twintier::env::step(&state, &Action::all_sp(config.n_pairs), &config, &pattern, &mut rng).unwrap();
        if sp.reward.to_bits() != 0f64.to_bits() || sp.per_pair_gain.iter().any(|g| *g != 0.0) {
            report.sp_nonzero += 1;
        }
        let action = Action::from_index(rng.random_range(0..1usize << config.n_pairs), config.n_pairs);
        let out = twintier::env::step(&state, &action, &config, &pattern, &mut rng).unwrap();
        let summed = out.per_pair_gain.iter().fold(0.0, |acc, g| acc + g);
        if out.reward.to_bits() != summed.to_bits() {
            report.sum_mismatch += 1;
        }
        let m = action.n_cooperative();
        let bw = if m == 0 { 0.0 } else { state.resource_mhz / m as f64 };
        for i in 0..config.n_pairs {
            let want = oracle_pair_gain(
                action.modes[i],
                f64::from(state.workloads[i]),
                state.distances[i],
                bw,
                &config,
            );
            let got = out.per_pair_gain[i];
            let rel = (got - want).abs() / want.abs().max(1e-300);
            if got != want {
                report.worst_oracle_rel = report.worst_oracle_rel.max(rel);
            }
            if got != want && rel > ORACLE_GAIN_REL_TOL {
                report.oracle_mismatch += 1;
            }
        }
    }
    report
}
