//! Computing-energy model of the two perception modes.
//!
//! Dynamic CPU energy for `c` cycles at frequency `f` is `kappa * c * f^2`, and
//! every pipeline runs at the lowest frequency that meets the slot deadline.

use super::EnvConfig;

/// Energy (J) of stand-alone perception for a pair with `workload` objects.
/// Both vehicles of the pair process their own full view.
pub fn sp_energy(workload: f64, config: &EnvConfig) -> f64 {
    let cycles = workload * config.cycles_per_object;
    let freq = cycles / config.deadline_s;
    2.0 * config.energy_coeff * cycles * freq * freq
}

/// Frequency a single stand-alone vehicle needs to finish `workload` objects.
pub fn sp_frequency(workload: f64, config: &EnvConfig) -> f64 {
    workload * config.cycles_per_object / config.deadline_s
}

/// Spectral efficiency (bit/s/Hz) of the V2V link at `distance_m`.
pub fn spectral_efficiency(distance_m: f64, config: &EnvConfig) -> f64 {
    let snr_db =
        config.snr0_db - 10.0 * config.pathloss_exp * (distance_m / config.ref_dist_m).log10();
    (1.0 + 10f64.powf(snr_db / 10.0)).log2()
}

/// Energy of cooperative perception and whether the deadline can be met.
///
/// Feature data first crosses the V2V link; the receiver then runs a single
/// fused pipeline on the reduced demand within the remaining time. Infeasible
/// configurations return `(0.0, false)`.
pub fn cp_energy_and_feasibility(
    workload: f64,
    distance_m: f64,
    bandwidth_mhz: f64,
    config: &EnvConfig,
) -> (f64, bool) {
    if !(bandwidth_mhz > 0.0) {
        return (0.0, false);
    }
    let rate = bandwidth_mhz * 1e6 * spectral_efficiency(distance_m, config);
    let t_tx = workload * config.feature_bits_per_object / rate;
    if t_tx >= config.deadline_s {
        return (0.0, false);
    }
    let cycles = workload * config.cp_compute_ratio * config.cycles_per_object;
    let freq = cycles / (config.deadline_s - t_tx);
    if freq > config.f_max {
        return (0.0, false);
    }
    (config.energy_coeff * cycles * freq * freq, true)
}

/// Normalisation constant of the reward: stand-alone energy at the median workload.
pub fn reference_energy(config: &EnvConfig) -> f64 {
    sp_energy(config.median_workload(), config)
}

/// Normalised gain of one pair; `bandwidth_mhz` is only used in CP mode.
pub fn pair_gain(
    cooperative: bool,
    workload: f64,
    distance_m: f64,
    bandwidth_mhz: f64,
    config: &EnvConfig,
) -> (f64, bool) {
    if !cooperative {
        return (0.0, true);
    }
    let (cp, feasible) = cp_energy_and_feasibility(workload, distance_m, bandwidth_mhz, config);
    if feasible {
        ((sp_energy(workload, config) - cp) / reference_energy(config), true)
    } else {
        (-config.infeasible_penalty, false)
    }
}
