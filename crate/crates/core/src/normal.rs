//! Standard normal distribution helpers.

use crate::error::{Error, Result};

/// Standard normal CDF, evaluated through `erfc` to keep the lower tail accurate.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Acklam's rational approximation, relative error below 1.2e-9.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn rational_quantile(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -rational_quantile(1.0 - p)
    }
}

/// Inverse of the standard normal CDF on the open interval (0, 1).
pub fn inv_norm_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail so that 1 - p never loses digits.
    let (tail, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let x = rational_quantile(tail);
    let x = x - (norm_cdf(x) - tail) / norm_pdf(x);
    Ok(sign * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if norm_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn median_is_zero() {
        assert_eq!(inv_norm_cdf(0.5).unwrap(), 0.0);
    }

    #[test]
    fn five_percent_quantile() {
        let x = inv_norm_cdf(0.05).unwrap();
        assert!((x - bisect(0.05)).abs() < 1e-9);
        assert!((x + 1.644_853_626_951_472_2).abs() < 1e-9);
    }

    #[test]
    fn antisymmetric() {
        for i in 1..200 {
            let p = i as f64 / 400.0;
            let lo = inv_norm_cdf(p).unwrap();
            let hi = inv_norm_cdf(1.0 - p).unwrap();
            assert!((lo + hi).abs() < 1e-9, "p={p}");
        }
    }

    #[test]
    fn matches_bisection_across_tails() {
        for &p in &[1e-10, 1e-6, 1e-3, 0.01, 0.0243, 0.0244, 0.3, 0.7, 0.99, 1.0 - 1e-6] {
            let x = inv_norm_cdf(p).unwrap();
            assert!((x - bisect(p)).abs() < 1e-9, "p={p}: {x} vs {}", bisect(p));
        }
    }

    #[test]
    fn rejects_endpoints() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(inv_norm_cdf(p), Err(Error::ProbabilityOutOfRange(_))));
        }
    }
}
