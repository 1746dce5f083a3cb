//! Deterministic sample points in a coordinate box.

use crate::chart::ChartPoint;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in base `b`.
pub fn radical_inverse(mut index: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// `count` Halton points scaled into `domain`, starting at sequence index
/// `offset + 1`. Points are kept off the box faces by a 5% margin.
pub fn halton(domain: &[(f64, f64)], count: usize, offset: u64) -> Vec<ChartPoint> {
    assert!(domain.len() <= PRIMES.len(), "too many coordinates for the Halton table");
    (0..count as u64)
        .map(|k| {
            let vals: Vec<f64> = domain
                .iter()
                .enumerate()
                .map(|(d, &(lo, hi))| {
                    let s = radical_inverse(offset + k + 1, PRIMES[d]);
                    let w = hi - lo;
                    lo + 0.05 * w + 0.9 * w * s
                })
                .collect();
            ChartPoint::from_values(&vals)
        })
        .collect()
}

/// The default sample set: the box center followed by `count − 1` Halton
/// points, shifted along the sequence by `seed`.
pub fn default_samples(domain: &[(f64, f64)], count: usize, seed: u64) -> Vec<ChartPoint> {
    let center: Vec<f64> = domain.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let mut out = vec![ChartPoint::from_values(&center)];
    out.extend(halton(domain, count.saturating_sub(1), seed));
    out
}
