//! Discrete Fourier transforms of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey kernel. Every
//! other length goes through Bluestein's chirp-z reformulation, which turns
//! an N-point DFT into a circular convolution of power-of-two length
//! M >= 2N - 1 evaluated with the same radix-2 kernel.

use std::f64::consts::PI;

use num_complex::Complex64;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        }
    }
}

/// Unnormalized transform in place: `X(k) = sum_n x(n) exp(sign * j 2 pi k n / N)`.
pub(crate) fn transform_in_place(buf: &mut [Complex64], dir: Direction) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, dir);
    } else {
        bluestein(buf, dir);
    }
}

fn radix2(buf: &mut [Complex64], dir: Direction) {
    let n = buf.len();
    let bits = n.trailing_zeros();

    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let sign = dir.sign();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // Twiddles are evaluated directly rather than by repeated
                // multiplication so the error does not grow with N.
                let w = Complex64::from_polar(1.0, step * k as f64);
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

fn bluestein(buf: &mut [Complex64], dir: Direction) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = dir.sign();

    // chirp[k] = exp(sign * j pi k^2 / N); k^2 is reduced mod 2N to keep the
    // argument small.
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            Complex64::from_polar(1.0, sign * PI * k2 / n as f64)
        })
        .collect();

    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (k, slot) in a.iter_mut().take(n).enumerate() {
        *slot = buf[k] * chirp[k];
    }

    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        let c = chirp[k].conj();
        b[k] = c;
        b[m - k] = c;
    }

    radix2(&mut a, Direction::Forward);
    radix2(&mut b, Direction::Forward);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, Direction::Inverse);

    let scale = 1.0 / m as f64;
    for k in 0..n {
        buf[k] = a[k] * scale * chirp[k];
    }
}
