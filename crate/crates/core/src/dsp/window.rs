//! Window functions.

use std::f64::consts::PI;

/// Zeroth-order modified Bessel function of the first kind.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Hamming window `0.54 - 0.46 cos(2 pi k / (N - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / denom).cos())
        .collect()
}

/// Kaiser window evaluated at offset `d` from the centre of a window with
/// half-width `half`. Zero outside `|d| <= half`.
pub fn kaiser_at(d: f64, half: f64, beta: f64) -> f64 {
    if half == 0.0 {
        return 1.0;
    }
    let r = d / half;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

/// Symmetric Kaiser window of `len` points.
pub fn kaiser(len: usize, beta: f64) -> Vec<f64> {
    let half = (len as f64 - 1.0) / 2.0;
    (0..len)
        .map(|k| kaiser_at((k as f64 - half).abs(), half, beta))
        .collect()
}
