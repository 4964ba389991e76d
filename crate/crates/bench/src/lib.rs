//! Instances shared by the benchmarks under `benches/`.

use capmarket_core::fixtures::{random_instance, two_producer};
use capmarket_core::MarketInstance;

/// Seeds of the random instances that are timed.
pub const SEEDS: [u64; 3] = [3, 17, 45];

/// Named instances, smallest first.
pub fn cases() -> Vec<(String, MarketInstance)> {
    let mut out = vec![("two-producer".to_string(), two_producer())];
    out.extend(SEEDS.iter().map(|&s| (format!("random-{s}"), random_instance(s))));
    out
}

/// A ten-point cap grid bracketing the base cap of `inst`.
pub fn cap_grid(inst: &MarketInstance) -> Vec<f64> {
    (1..=10).map(|k| inst.policy.cap_mean * (0.8 + 0.04 * f64::from(k))).collect()
}
