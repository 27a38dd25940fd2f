use rand::Rng;

use crate::env::{EnvConfig, ResourcePattern};
use crate::error::{Error, Result};
use crate::ppo::Task;
use crate::rng::SimRng;

/// Source of individual learning tasks for meta-training.
///
/// Draws happen sequentially on the caller's thread, so a sampler may keep
/// state between draws.
pub trait TaskSampler {
    fn sample(&mut self, task_id: u64, rng: &mut SimRng) -> Result<Task>;
}

/// Per-slot resource means drawn uniformly from the resource levels.
#[derive(Debug, Clone)]
pub struct UniformPatternSampler {
    pub config: EnvConfig,
}

impl TaskSampler for UniformPatternSampler {
    fn sample(&mut self, task_id: u64, rng: &mut SimRng) -> Result<Task> {
        let pattern = ResourcePattern::uniform_random(self.config.slots, rng);
        Ok(Task::with_pattern(task_id, self.config.clone(), pattern))
    }
}

/// Always the same pattern.
#[derive(Debug, Clone)]
pub struct FixedPatternSampler {
    pub config: EnvConfig,
    pub pattern: ResourcePattern,
}

impl TaskSampler for FixedPatternSampler {
    fn sample(&mut self, task_id: u64, _rng: &mut SimRng) -> Result<Task> {
        Ok(Task::with_pattern(task_id, self.config.clone(), self.pattern.clone()))
    }
}

/// Uniform draws from a fixed pool, e.g. the PLVNs of one registry category.
/// The pool index of every draw is kept in `draws`.
#[derive(Debug, Clone)]
pub struct PoolSampler {
    pool: Vec<Task>,
    pub draws: Vec<usize>,
}

impl PoolSampler {
    pub fn new(pool: Vec<Task>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::Config("task pool is empty".into()));
        }
        Ok(Self { pool, draws: Vec::new() })
    }

    pub fn pool(&self) -> &[Task] {
        &self.pool
    }
}

impl TaskSampler for PoolSampler {
    fn sample(&mut self, task_id: u64, rng: &mut SimRng) -> Result<Task> {
        let i = rng.random_range(0..self.pool.len());
        self.draws.push(i);
        Ok(Task {
            id: task_id,
            ..self.pool[i].clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RESOURCE_LEVELS;
    use crate::rng::seeded_rng;

    #[test]
    fn uniform_patterns_stay_in_support() {
        let mut s = UniformPatternSampler {
            config: EnvConfig::default(),
        };
        let mut rng = seeded_rng(1);
        for id in 0..20 {
            let t = s.sample(id, &mut rng).unwrap();
            assert_eq!(t.id, id);
            match t.dynamics {
                crate::ppo::TaskDynamics::Pattern(p) => {
                    assert_eq!(p.len(), 75);
                    assert!(p.means().iter().all(|m| RESOURCE_LEVELS.contains(m)));
                }
                _ => panic!("expected a pattern task"),
            }
        }
    }

    #[test]
    fn pool_sampler_is_uniform() {
        let cfg = EnvConfig::default();
        let pool = (0..4)
            .map(|i| Task::with_pattern(i, cfg.clone(), ResourcePattern::constant(5.0, 75).unwrap()))
            .collect();
        let mut s = PoolSampler::new(pool).unwrap();
        let mut rng = seeded_rng(2);
        for id in 0..10_000 {
            s.sample(id, &mut rng).unwrap();
        }
        for k in 0..4 {
            let f = s.draws.iter().filter(|&&d| d == k).count() as f64 / 1e4;
            assert!((0.22..=0.28).contains(&f), "{k}: {f}");
        }
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(PoolSampler::new(Vec::new()).is_err());
    }
}
