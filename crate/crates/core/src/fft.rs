//! Iterative radix-2 FFT over `Complex64`, enough for fast convolution and
//! frequency-domain filter design without pulling in a std-only FFT crate.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math;

/// In-place forward transform (`e^{-i...}` kernel, unscaled).
///
/// # Panics
/// If `data.len()` is not a power of two.
pub fn forward(data: &mut [Complex64]) {
    transform(data, false);
}

/// In-place inverse transform, scaled by `1/n`.
pub fn inverse(data: &mut [Complex64]) {
    transform(data, true);
    let scale = 1.0 / data.len() as f64;
    for x in data.iter_mut() {
        *x *= scale;
    }
}

/// Forward transform of a real signal zero-padded to `n`.
pub fn forward_real(signal: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    forward(&mut buf);
    buf
}

fn transform(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    // Twiddles evaluated directly rather than by recurrence; long transforms
    // otherwise drift.
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| {
            let phase = sign * 2.0 * core::f64::consts::PI * k as f64 / n as f64;
            Complex64::new(math::cos(phase), math::sin(phase))
        })
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}
