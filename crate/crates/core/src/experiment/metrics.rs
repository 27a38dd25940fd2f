/// Trailing window used when deciding that a curve has reached a level.
pub const TRAILING_WINDOW: usize = 10;
/// Fraction of the run (from the end) whose median is the converged value.
pub const CONVERGED_TAIL: f64 = 0.1;

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of the last 10% of epochs (at least one epoch).
pub fn converged_reward(rewards: &[f64]) -> f64 {
    let tail = ((rewards.len() as f64 * CONVERGED_TAIL).ceil() as usize).clamp(1, rewards.len());
    median(&rewards[rewards.len() - tail..])
}

/// Level a curve must reach to count as within `fraction` of `target`.
///
/// For negative targets "90% of" is read as "no more than 10% worse".
pub fn fraction_level(target: f64, fraction: f64) -> f64 {
    target - (1.0 - fraction) * target.abs()
}

/// First epoch whose trailing median (over up to [`TRAILING_WINDOW`] epochs)
/// reaches `fraction` of the run's converged reward.
pub fn epochs_to_fraction(rewards: &[f64], fraction: f64) -> Option<usize> {
    if rewards.is_empty() {
        return None;
    }
    let level = fraction_level(converged_reward(rewards), fraction);
    (0..rewards.len()).find(|&i| {
        let start = (i + 1).saturating_sub(TRAILING_WINDOW);
        median(&rewards[start..=i]) >= level
    })
}
