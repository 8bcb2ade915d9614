//! Fourier transforms, the discrete Hilbert transform, and amplitude/phase
//! decomposition of analytic signals.

mod fft;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use fft::{transform_in_place, Direction};

/// Default guard added under the square root of the envelope.
pub const DEFAULT_EPS: f64 = 1e-12;

/// A non-empty sequence of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSeries(Vec<f64>);

/// A non-empty sequence of finite complex numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSeries(Vec<Complex64>);

impl RealSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("series must not be empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(RealSeries(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_complex(&self) -> ComplexSeries {
        ComplexSeries(self.0.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }
}

impl ComplexSeries {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("series must not be empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(ComplexSeries(values))
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.im).collect()
    }
}

/// Instantaneous amplitude and principal-value phase of an analytic signal.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopePhase {
    pub envelope: RealSeries,
    pub phase: RealSeries,
}

/// Which discrete Hilbert operator to apply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HilbertVariant {
    /// Quadrature multiplier: -j on positive bins, +j on negative bins, zero at
    /// DC and Nyquist. Real in, real out.
    #[default]
    Standard,
    /// Negative-frequency bins negated with no quadrature factor; complex output.
    AppendixLiteral,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HilbertOutput {
    Real(RealSeries),
    Complex(ComplexSeries),
}

pub fn dft(x: &ComplexSeries) -> ComplexSeries {
    let mut buf = x.0.clone();
    transform_in_place(&mut buf, Direction::Forward);
    ComplexSeries(buf)
}

pub fn idft(x: &ComplexSeries) -> ComplexSeries {
    let mut buf = x.0.clone();
    inverse_in_place(&mut buf);
    ComplexSeries(buf)
}

fn inverse_in_place(buf: &mut [Complex64]) {
    transform_in_place(buf, Direction::Inverse);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn require_hilbert_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "Hilbert transform needs at least 2 samples, got {n}"
        )));
    }
    Ok(())
}

/// Standard discrete Hilbert transform of a real series.
pub fn hilbert(x: &RealSeries) -> Result<RealSeries> {
    require_hilbert_len(x.len())?;
    Ok(RealSeries(hilbert_real(&x.0)))
}

/// Sign-flip operator: `Y(k) = X(k)` for `k <= N/2`, `-X(k)` above, then the
/// inverse transform. Generally complex even for real input.
pub fn hilbert_appendix_literal(x: &RealSeries) -> Result<ComplexSeries> {
    let n = x.len();
    require_hilbert_len(n)?;
    let mut buf: Vec<Complex64> = x.0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(&mut buf, Direction::Forward);
    for (k, v) in buf.iter_mut().enumerate() {
        if 2 * k > n {
            *v = -*v;
        }
    }
    inverse_in_place(&mut buf);
    Ok(ComplexSeries(buf))
}

pub fn hilbert_with(x: &RealSeries, variant: HilbertVariant) -> Result<HilbertOutput> {
    match variant {
        HilbertVariant::Standard => hilbert(x).map(HilbertOutput::Real),
        HilbertVariant::AppendixLiteral => hilbert_appendix_literal(x).map(HilbertOutput::Complex),
    }
}

/// Frequency-domain Hilbert multiplier for bin `k` of an `n`-point transform.
pub(crate) fn hilbert_multiplier(k: usize, n: usize) -> Complex64 {
    if k == 0 || 2 * k == n {
        Complex64::new(0.0, 0.0)
    } else if 2 * k < n {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::new(0.0, 1.0)
    }
}

/// Unchecked standard transform on a raw slice. Callers guarantee `len >= 2`.
pub(crate) fn hilbert_real(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(&mut buf, Direction::Forward);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= hilbert_multiplier(k, n);
    }
    inverse_in_place(&mut buf);
    debug_assert!({
        let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        buf.iter().all(|c| c.im.abs() < 1e-10 * scale * n as f64)
    });
    buf.into_iter().map(|c| c.re).collect()
}

/// `x + j H(x)`. The real part is the input, bit for bit.
pub fn analytic_signal(x: &RealSeries) -> Result<ComplexSeries> {
    let h = hilbert(x)?;
    Ok(ComplexSeries(
        x.0.iter().zip(h.0).map(|(&re, im)| Complex64::new(re, im)).collect(),
    ))
}

pub fn envelope_and_phase(xa: &ComplexSeries, eps: f64) -> Result<EnvelopePhase> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let envelope = xa.0.iter().map(|c| envelope_value(c.re, c.im, eps)).collect();
    let phase = xa.0.iter().map(|c| phase_value(c.re, c.im, eps)).collect();
    Ok(EnvelopePhase {
        envelope: RealSeries(envelope),
        phase: RealSeries(phase),
    })
}

#[inline]
pub(crate) fn envelope_value(re: f64, im: f64, eps: f64) -> f64 {
    (re * re + im * im + eps).sqrt()
}

/// True where the envelope falls below `sqrt(2 eps)`, i.e. `re^2 + im^2 < eps`.
#[inline]
pub(crate) fn is_degenerate(re: f64, im: f64, eps: f64) -> bool {
    re * re + im * im < eps
}

/// Principal value in `(-pi, pi]`, zero at degenerate points.
#[inline]
pub(crate) fn phase_value(re: f64, im: f64, eps: f64) -> f64 {
    if is_degenerate(re, im, eps) {
        return 0.0;
    }
    let p = im.atan2(re);
    if p <= -PI {
        PI
    } else {
        p
    }
}
