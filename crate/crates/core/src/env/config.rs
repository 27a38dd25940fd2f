use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean radio-resource levels (MHz) a slot may take: low, medium, high.
pub const RESOURCE_LEVELS: [f64; 3] = [5.0, 6.0, 7.0];

/// Physical and simulation constants of the cooperative-perception network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub n_pairs: usize,
    /// Human-driven vehicles. They only act through the shared resource
    /// process, so this is recorded but never branched on.
    pub n_hdvs: usize,
    /// Slots per episode.
    pub slots: usize,
    /// Standard deviation of the available radio resource (MHz).
    pub sigma_mhz: f64,
    /// Lower truncation point of the resource draw (MHz).
    pub resource_floor_mhz: f64,
    /// Per-slot perception deadline (s).
    pub deadline_s: f64,
    /// CPU cycles per object in stand-alone mode.
    pub cycles_per_object: f64,
    /// Fraction of the stand-alone demand left after feature fusion.
    pub cp_compute_ratio: f64,
    pub feature_bits_per_object: f64,
    /// Maximum CPU frequency (cycles/s).
    pub f_max: f64,
    /// Effective switched capacitance (J s^2 / cycle^3).
    pub energy_coeff: f64,
    pub snr0_db: f64,
    pub ref_dist_m: f64,
    pub pathloss_exp: f64,
    pub workload_min: u32,
    pub workload_max: u32,
    pub dist_min_m: f64,
    pub dist_max_m: f64,
    /// Reward charged for a cooperative pair that misses the deadline.
    pub infeasible_penalty: f64,
    pub walk_prob: f64,
    pub workload_step: u32,
    pub distance_step_m: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_pairs: 3,
            n_hdvs: 10,
            slots: 75,
            sigma_mhz: 0.3,
            resource_floor_mhz: 0.5,
            deadline_s: 0.1,
            cycles_per_object: 1e7,
            cp_compute_ratio: 0.6,
            feature_bits_per_object: 2e5,
            f_max: 3e9,
            energy_coeff: 1e-28,
            snr0_db: 30.0,
            ref_dist_m: 10.0,
            pathloss_exp: 2.0,
            workload_min: 5,
            workload_max: 20,
            dist_min_m: 10.0,
            dist_max_m: 100.0,
            infeasible_penalty: 1.0,
            walk_prob: 0.3,
            workload_step: 1,
            distance_step_m: 5.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_pairs == 0 {
            problems.push("n_pairs must be at least 1".to_string());
        }
        if self.slots == 0 {
            problems.push("slots must be at least 1".to_string());
        }
        let positive = [
            ("deadline_s", self.deadline_s),
            ("cycles_per_object", self.cycles_per_object),
            ("feature_bits_per_object", self.feature_bits_per_object),
            ("f_max", self.f_max),
            ("energy_coeff", self.energy_coeff),
            ("ref_dist_m", self.ref_dist_m),
            ("pathloss_exp", self.pathloss_exp),
            ("dist_min_m", self.dist_min_m),
            ("resource_floor_mhz", self.resource_floor_mhz),
            ("infeasible_penalty", self.infeasible_penalty),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sigma_mhz.is_finite() && self.sigma_mhz >= 0.0) {
            problems.push(format!("sigma_mhz must be non-negative, got {}", self.sigma_mhz));
        }
        if !(self.cp_compute_ratio > 0.0 && self.cp_compute_ratio < 1.0) {
            problems.push(format!(
                "cp_compute_ratio must lie in (0,1), got {}",
                self.cp_compute_ratio
            ));
        }
        if self.workload_min == 0 || self.workload_min > self.workload_max {
            problems.push(format!(
                "workload range [{}, {}] is empty or starts at 0",
                self.workload_min, self.workload_max
            ));
        }
        if !(self.dist_min_m <= self.dist_max_m) {
            problems.push(format!(
                "distance range [{}, {}] is empty",
                self.dist_min_m, self.dist_max_m
            ));
        }
        if !(0.0..=0.5).contains(&self.walk_prob) {
            problems.push(format!("walk_prob must lie in [0, 0.5], got {}", self.walk_prob));
        }
        if RESOURCE_LEVELS.iter().any(|&l| l < self.resource_floor_mhz) {
            problems.push("resource_floor_mhz exceeds a resource level".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Length of the feature vector fed to the networks.
    pub fn state_dim(&self) -> usize {
        1 + 2 * self.n_pairs
    }

    pub fn median_workload(&self) -> f64 {
        (self.workload_min + self.workload_max) as f64 / 2.0
    }
}

/// Per-slot mean of the available radio resource over one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePattern {
    mu: Vec<f64>,
}

impl ResourcePattern {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::Config("resource pattern is empty".into()));
        }
        if let Some(bad) = mu.iter().find(|v| !RESOURCE_LEVELS.contains(v)) {
            return Err(Error::Config(format!(
                "resource mean {bad} MHz is not one of {RESOURCE_LEVELS:?}"
            )));
        }
        Ok(Self { mu })
    }

    pub fn constant(level_mhz: f64, slots: usize) -> Result<Self> {
        Self::new(vec![level_mhz; slots])
    }

    /// Every slot mean drawn uniformly from the resource levels.
    pub fn uniform_random<R: Rng + ?Sized>(slots: usize, rng: &mut R) -> Self {
        let mu = (0..slots)
            .map(|_| RESOURCE_LEVELS[rng.random_range(0..RESOURCE_LEVELS.len())])
            .collect();
        Self { mu }
    }

    pub fn means(&self) -> &[f64] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn check_slots(&self, slots: usize) -> Result<()> {
        if self.mu.len() != slots {
            return Err(Error::Config(format!(
                "resource pattern has {} slots, episode has {slots}",
                self.mu.len()
            )));
        }
        Ok(())
    }

    /// Parses the one-line file form: comma-separated means in MHz.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mu = line
            .trim()
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad resource mean {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mu)
    }

    pub fn to_line(&self) -> String {
        self.mu
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn mean_level(&self) -> f64 {
        self.mu.iter().sum::<f64>() / self.mu.len() as f64
    }
}
