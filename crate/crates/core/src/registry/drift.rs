use serde::{Deserialize, Serialize};

/// Fractions of a node's PLVNs per child, labelled by child value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionVector {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl FractionVector {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(labels.len(), values.len(), "one label per fraction");
        Self { labels, values }
    }

    /// Unlabelled vector; entries are named by position.
    pub fn from_values(values: &[f64]) -> Self {
        Self::new((0..values.len()).map(|i| i.to_string()).collect(), values.to_vec())
    }

    pub fn get(&self, label: &str) -> f64 {
        self.labels
            .iter()
            .position(|l| l == label)
            .map_or(0.0, |i| self.values[i])
    }
}

/// Euclidean distance between two fraction vectors. Labels missing on one
/// side count as zero, so the vectors are compared over the union of labels.
pub fn fraction_distance(a: &FractionVector, b: &FractionVector) -> f64 {
    let mut union: Vec<&str> = a.labels.iter().map(String::as_str).collect();
    for l in &b.labels {
        if !union.contains(&l.as_str()) {
            union.push(l);
        }
    }
    union
        .iter()
        .map(|l| (a.get(l) - b.get(l)).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftThresholds {
    pub frac: f64,
    pub loss: f64,
}

impl Default for DriftThresholds {
    fn default() -> Self {
        Self { frac: 0.3, loss: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub insufficient_data: bool,
    /// Distance between the latest fraction snapshot and the one `window`
    /// snapshots earlier.
    pub fraction_distance: Option<f64>,
    pub fraction_fired: bool,
    /// Trailing-window mean over previous-window mean of the adaptation loss.
    pub previous_loss: f64,
    pub trailing_loss: f64,
    pub loss_fired: bool,
}

impl DriftReport {
    pub fn alarm(&self) -> bool {
        self.fraction_fired || self.loss_fired
    }

    /// Which conditions fired, e.g. `"fraction+loss"`, or `"none"`.
    pub fn describe(&self) -> &'static str {
        match (self.insufficient_data, self.fraction_fired, self.loss_fired) {
            (true, _, _) => "insufficient data",
            (_, true, true) => "fraction+loss",
            (_, true, false) => "fraction",
            (_, false, true) => "loss",
            _ => "none",
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Drift check over a loss history and a series of fraction snapshots.
///
/// The loss condition fires when the trailing window's mean exceeds the
/// previous window's mean by more than `loss * |previous|`.
pub fn drift_check(
    losses: &[f64],
    snapshots: &[FractionVector],
    window: usize,
    thresholds: &DriftThresholds,
) -> DriftReport {
    let n = losses.len();
    if window == 0 || n < 2 * window {
        return DriftReport {
            insufficient_data: true,
            fraction_distance: None,
            fraction_fired: false,
            previous_loss: f64::NAN,
            trailing_loss: f64::NAN,
            loss_fired: false,
        };
    }
    let previous_loss = mean(&losses[n - 2 * window..n - window]);
    let trailing_loss = mean(&losses[n - window..]);
    let loss_fired = trailing_loss - previous_loss > thresholds.loss * previous_loss.abs();
    let fraction_distance = match snapshots.len() {
        0 | 1 => None,
        k => Some(fraction_distance(&snapshots[k - 1], &snapshots[(k - 1).saturating_sub(window)])),
    };
    DriftReport {
        insufficient_data: false,
        fraction_distance,
        fraction_fired: fraction_distance.is_some_and(|d| d > thresholds.frac),
        previous_loss,
        trailing_loss,
        loss_fired,
    }
}
