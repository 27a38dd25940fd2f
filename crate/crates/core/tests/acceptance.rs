//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the lines appear in order
//! and uncaptured. Exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use twintier::env::{EnvConfig, ResourcePattern};
use twintier::experiment::{
    median, run_case_study, write_outputs, CurveSummary, Method, Profile, RunConfig, RunOutcome,
};
use twintier::meta::{adaptation_report, inner_adapt, reptile_delta, MetaConfig, Payload};
use twintier::orchestrator::{run_scenario, RetrainPolicy, ScenarioScript};
use twintier::ppo::{AgentSpec, Task};
use twintier::registry::{fraction_distance, FractionVector};
use twintier::rng::seeded_rng;

const GRADIENT_INSTANCES: u64 = 20;
const GRADIENT_BUDGET: Duration = Duration::from_secs(60);
const REPTILE_TOL: f64 = 1e-10;
const REPTILE_INSTANCES: u64 = 5;
const BANDIT_STATES: u64 = 10;
const BANDIT_REQUIRED: usize = 8;
const BANDIT_BUDGET: Duration = Duration::from_secs(300);
const CASE_STUDY_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const CASE_STUDY_BUDGET: Duration = Duration::from_secs(30 * 60);
const COMPARABLE_REWARD: f64 = 0.95;
const SQRT_HALF_TOL: f64 = 1e-12;
const DRIFT_RUNS: u64 = 5;
const DRIFT_REQUIRED: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, started: Instant, v: Verdict) -> bool {
    println!(
        "criterion {id} [{name}]: {} ({:.1}s) {}",
        if v.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        v.detail
    );
    v.pass
}

fn gradients() -> Verdict {
    let started = Instant::now();
    let families = gradient_suite(GRADIENT_INSTANCES);
    let elapsed = started.elapsed();
    let ok = families.iter().all(|(_, r)| r.ok() && r.instances as u64 >= GRADIENT_INSTANCES);
    let detail = families
        .iter()
        .map(|(n, r)| format!("{n}: {}/{} partials ok", r.partials - r.mismatches, r.partials))
        .collect::<Vec<_>>()
        .join(", ");
    Verdict {
        pass: ok && elapsed < GRADIENT_BUDGET,
        detail,
    }
}

/// Largest entry of `|g_fomaml + delta / beta|` with the second round forced
/// equal to the first, and the same quantity divided by beta.
fn reptile_gap(seed: u64, beta: f64) -> (f64, f64) {
    let config = EnvConfig {
        slots: 10,
        ..EnvConfig::default()
    };
    let spec = AgentSpec::for_env(&config);
    let meta = spec.init(&mut seeded_rng(seed));
    let task = Task::with_pattern(seed, config.clone(), ResourcePattern::constant(6.0, config.slots).unwrap());
    let cfg = MetaConfig {
        inner_lr: beta,
        inner_steps: 1,
        episodes_per_task: 4,
        ..MetaConfig::default()
    };
    let inner = inner_adapt(&spec, &meta, &task, &cfg, &mut seeded_rng(seed + 1)).unwrap();
    let fomaml = adaptation_report(&spec, task.id, &inner.adapted, &inner.first_round, &cfg).unwrap();
    let reptile = reptile_delta(task.id, &meta, &inner.adapted, inner.inner_loss).unwrap();
    let (Payload::Gradient(g), Payload::Delta(d)) = (&fomaml.payload, &reptile.payload) else {
        unreachable!()
    };
    let g = g.flatten();
    let d = d.flatten();
    let gap = g
        .as_slice()
        .iter()
        .zip(d.as_slice())
        .map(|(g, d)| (g + d / beta).abs())
        .fold(0.0, f64::max);
    (gap, gap / beta)
}

fn reptile_identity() -> Verdict {
    let beta = MetaConfig::default().inner_lr;
    let gaps: Vec<(f64, f64)> = (0..REPTILE_INSTANCES).map(|s| reptile_gap(s, beta)).collect();
    let worst = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let scaling: Vec<String> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&b| format!("beta={b:e}: gap/beta={:.3e}", reptile_gap(0, b).1))
        .collect();
    Verdict {
        pass: worst <= REPTILE_TOL,
        detail: format!(
            "max |g + delta/beta| = {worst:.3e} at beta={beta:e} (tolerance {REPTILE_TOL:e}); {}",
            scaling.join(", ")
        ),
    }
}

fn accounting() -> Verdict {
    let r = reward_accounting(ACCOUNTING_STATES);
    Verdict {
        pass: r.states == ACCOUNTING_STATES && r.sp_nonzero == 0 && r.sum_mismatch == 0 && r.oracle_mismatch == 0,
        detail: format!(
            "{} states; all-SP non-zero: {}; sum mismatches: {}; oracle mismatches: {} (worst rel {:.1e})",
            r.states, r.sp_nonzero, r.sum_mismatch, r.oracle_mismatch, r.worst_oracle_rel
        ),
    }
}

fn bandit() -> Verdict {
    let started = Instant::now();
    let outcomes: Vec<BanditOutcome> = (0..BANDIT_STATES).map(|s| run_bandit(s, 500 + s)).collect();
    let reached = outcomes.iter().filter(|o| o.reached_at.is_some()).count();
    let elapsed = started.elapsed();
    let detail = outcomes
        .iter()
        .map(|o| o.reached_at.map_or("-".to_string(), |u| u.to_string()))
        .collect::<Vec<_>>()
        .join(" ");
    Verdict {
        pass: reached >= BANDIT_REQUIRED && elapsed < BANDIT_BUDGET,
        detail: format!("{reached}/{BANDIT_STATES} states reached 95% of optimum; updates needed: {detail}"),
    }
}

struct MethodStats {
    converged: f64,
    speed: f64,
    entropy0: f64,
}

fn method_stats(outcome: &RunOutcome, method: Method, epochs: usize) -> MethodStats {
    let s: Vec<CurveSummary> = outcome.summaries(method);
    // a curve that never reaches its level counts as taking the whole budget
    let speed: Vec<f64> = s.iter().map(|c| c.epochs_to_90.unwrap_or(epochs) as f64).collect();
    MethodStats {
        converged: median(&s.iter().map(|c| c.converged_reward).collect::<Vec<_>>()),
        speed: median(&speed),
        entropy0: median(&s.iter().map(|c| c.initial_entropy).collect::<Vec<_>>()),
    }
}

fn case_study() -> (Verdict, Verdict) {
    let started = Instant::now();
    let config = RunConfig {
        seeds: CASE_STUDY_SEEDS.to_vec(),
        ..RunConfig::new(Profile::Desk)
    };
    let outcome = run_case_study(&config).expect("case study runs");
    let elapsed = started.elapsed();
    let failed = outcome.failures();
    if !failed.is_empty() {
        let detail = format!("failed seeds: {failed:?}");
        return (
            Verdict { pass: false, detail: detail.clone() },
            Verdict { pass: false, detail },
        );
    }
    let random = method_stats(&outcome, Method::PpoRandom, config.epochs);
    let ml = method_stats(&outcome, Method::PpoMl, config.epochs);
    let tl = method_stats(&outcome, Method::PpoTl, config.epochs);
    let comparable = if random.converged >= 0.0 {
        ml.converged >= COMPARABLE_REWARD * random.converged
    } else {
        ml.converged >= random.converged / COMPARABLE_REWARD
    };
    let checks = [
        ("ML faster than random", ml.speed < random.speed),
        ("ML faster than TL", ml.speed < tl.speed),
        ("ML reward comparable to random", comparable),
        ("TL reward not above ML", tl.converged <= ml.converged),
        ("runtime", elapsed < CASE_STUDY_BUDGET),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let summary = format!(
        "median e90 random/ML/TL = {}/{}/{}; median converged = {:.3}/{:.3}/{:.3}",
        random.speed, ml.speed, tl.speed, random.converged, ml.converged, tl.converged
    );
    let five = Verdict {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            summary
        } else {
            format!("{summary}; failed: {}", failed.join(", "))
        },
    };
    let six = Verdict {
        pass: tl.entropy0 < ml.entropy0,
        detail: format!("median epoch-0 entropy TL {:.4} vs ML {:.4}", tl.entropy0, ml.entropy0),
    };
    (five, six)
}

fn registry() -> Verdict {
    let agree = registry_oracle_agreement(REGISTRY_CASES);
    let closure = closure_violation(77, REGISTRY_OPERATIONS);
    Verdict {
        pass: agree == REGISTRY_CASES && closure.is_none(),
        detail: format!(
            "oracle agreement {agree}/{REGISTRY_CASES}; closure after {REGISTRY_OPERATIONS} operations: {}",
            closure.map_or("holds".to_string(), |(op, e)| format!("broken at {op}: {e}"))
        ),
    }
}

fn drift() -> Verdict {
    let d = fraction_distance(&FractionVector::from_values(&[1.0, 0.0]), &FractionVector::from_values(&[0.5, 0.5]));
    let distance_ok = (d - 0.5f64.sqrt()).abs() <= SQRT_HALF_TOL;
    let window = RetrainPolicy::default().window as u64;
    let runs: Vec<(Option<u64>, usize)> = (0..DRIFT_RUNS).map(drift_retrain).collect();
    let detected = runs.iter().filter(|(e, _)| within_drift_windows(*e, window)).count();
    let detail = runs
        .iter()
        .map(|(e, early)| format!("{}(+{early} before)", e.map_or("none".to_string(), |e| e.to_string())))
        .collect::<Vec<_>>()
        .join(" ");
    Verdict {
        pass: distance_ok && detected >= DRIFT_REQUIRED,
        detail: format!(
            "distance {d:.15} (|err| {:.1e}); switch at episode {DRIFT_SWITCH_EPISODE} detected within {DRIFT_WINDOWS} windows in {detected}/{DRIFT_RUNS} runs; first retrain episodes: {detail}",
            (d - 0.5f64.sqrt()).abs()
        ),
    }
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let small = RunConfig {
        epochs: 3,
        seeds: vec![0, 1],
        meta: MetaConfig {
            iterations: 2,
            ..RunConfig::new(Profile::Desk).meta
        },
        ..RunConfig::new(Profile::Desk)
    };
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for run in ["a", "b"] {
        let outcome = run_case_study(&small).unwrap();
        write_outputs(&small, &outcome, &tmp.path().join(run).join("case_study")).unwrap();
        let script = ScenarioScript::parse(&drift_script(11)).unwrap();
        run_scenario(&script).unwrap().write(&tmp.path().join(run).join("scenario")).unwrap();
    }
    let a = files_under(&tmp.path().join("a"));
    let b = files_under(&tmp.path().join("b"));
    for (name, bytes) in &a {
        let relevant = name.ends_with(".csv") || name.ends_with(".jsonl");
        if !relevant {
            continue;
        }
        compared += 1;
        if b.get(name) != Some(bytes) {
            mismatched.push(name.clone());
        }
    }
    let same_listing = a.keys().eq(b.keys());
    Verdict {
        pass: same_listing && mismatched.is_empty() && compared > 0,
        detail: format!("{compared} CSV/JSONL files compared, {} differ {mismatched:?}", mismatched.len()),
    }
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    all &= report(1, "gradient suite", t, gradients());
    let t = Instant::now();
    all &= report(2, "reptile identity", t, reptile_identity());
    let t = Instant::now();
    all &= report(3, "SP-zero and reward accounting", t, accounting());
    let t = Instant::now();
    all &= report(4, "frozen-state oracle optimality", t, bandit());
    let t = Instant::now();
    let (five, six) = case_study();
    all &= report(5, "case-study ordering", t, five);
    all &= report(6, "entropy at adaptation start", t, six);
    let t = Instant::now();
    all &= report(7, "registry oracle and closure", t, registry());
    let t = Instant::now();
    all &= report(8, "drift machinery", t, drift());
    let t = Instant::now();
    all &= report(9, "determinism", t, determinism());
    if !all {
        println!("acceptance: some criteria FAILED");
        std::process::exit(1);
    }
    println!("acceptance: all criteria PASS");
}
