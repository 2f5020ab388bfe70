//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Reference erf independent of the library: the positive-term series
/// `erf z = (2/√π) e^{−z²} Σ 2ⁿ z^{2n+1} / (1·3···(2n+1))` for `|z| ≤ 2.5`,
/// and the Laplace continued fraction for `erfc` beyond.
pub fn erf_reference(z: f64) -> f64 {
    let a = z.abs();
    let v = if a <= 2.5 {
        let mut term = a;
        let mut sum = a;
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= 2.0 * a * a / (2.0 * n + 1.0);
            sum += term;
        }
        2.0 / PI.sqrt() * (-a * a).exp() * sum
    } else {
        // erfc a = e^{−a²}/√π · 1/(a + (1/2)/(a + 1/(a + (3/2)/(a + ...))))
        let mut frac = a;
        for n in (1..=80).rev() {
            frac = a + (n as f64 / 2.0) / frac;
        }
        1.0 - (-a * a).exp() / PI.sqrt() / frac
    };
    v.copysign(z)
}

/// `|a − b| ≤ rel·max(|a|, |b|)`, treating two zeros as equal.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}
