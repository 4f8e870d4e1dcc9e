//! The Krein H-function H(r) = (1/pi) ∫_0^∞ g(k) cos(kr) dk.
//!
//! Production values come from closed forms per segment. `h_quadrature`
//! integrates g(k)cos(kr) numerically and exists only as a cross-check.

use crate::gk::{Component, GkModel, GkSegment, SegmentKind, Tail};
use crate::quadrature::{self, QuadError};
use crate::specfun::{self, SeriesControl, SpecfunError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HfunError {
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HfunError>;

/// Above x_a = k_a r = 35 the tail uses the large-argument expansion.
/// At 20 the b3 series A_3, B_3 still truncates at ~1e-6 relative; by 35
/// both branches agree to ~1e-10.
pub const TAIL_SWITCH: f64 = 35.0;

/// H(0), H(h), ..., H(3n h).
#[derive(Debug, Clone, PartialEq)]
pub struct HTable {
    pub h: f64,
    pub values: Vec<f64>,
}

impl HTable {
    pub fn new(h: f64, values: Vec<f64>) -> Self {
        Self { h, values }
    }

    /// H_k with H_{-k} = H_k.
    #[inline]
    pub fn at(&self, k: isize) -> f64 {
        self.values[k.unsigned_abs()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The same table with every entry multiplied by `eps`.
    pub fn scaled(&self, eps: f64) -> Self {
        Self::new(self.h, self.values.iter().map(|v| v * eps).collect())
    }
}

/// -(1/pi)∫_0^{k_cut} cos(kr) dk = -sin(k_cut r)/(pi r).
pub fn h_flat(k_cut: f64, r: f64) -> f64 {
    let r = r.abs();
    if r == 0.0 {
        return -k_cut / PI;
    }
    let x = k_cut * r;
    // sin(x)/x loses nothing for small x, but keep the limit exact
    if x < 1e-8 {
        -k_cut / PI * (1.0 - x * x / 6.0)
    } else {
        -x.sin() / (PI * r)
    }
}

/// (1/pi)∫_{k1}^{k2} a exp(-(k-k~)^2/2b^2) cos(kr) dk via the complex error function.
pub fn h_gaussian(comp: &Component, k1: f64, k2: f64, r: f64) -> Result<f64> {
    if !(comp.b > 0.0) || !(k1 < k2) {
        return Err(HfunError::Invalid(format!(
            "gaussian needs b > 0 and k1 < k2 (b = {}, [{k1}, {k2}])",
            comp.b
        )));
    }
    if comp.a == 0.0 {
        return Ok(0.0);
    }
    let r = r.abs();
    let (a, b, kt) = (comp.a, comp.b, comp.k_tilde);
    let ctrl = SeriesControl::erf_default();
    let s2b = SQRT_2 * b;
    let shift = 0.5 * b * b * r * r;
    let im = -b * r / SQRT_2;
    let y1 = Complex64::new((k1 - kt) / s2b, im);
    let y2 = Complex64::new((k2 - kt) / s2b, im);
    let diff = specfun::erf_scaled(y2, shift, &ctrl)? - specfun::erf_scaled(y1, shift, &ctrl)?;
    let (s, c) = (kt * r).sin_cos();
    Ok(a * b / (2.0 * PI).sqrt() * (c * diff.re - s * diff.im))
}

/// (1/pi)∫_{k_lo}^{k_hi} a exp(-b(k-k~)) cos(kr) dk in closed form.
pub fn h_exponential(comp: &Component, k_lo: f64, k_hi: f64, r: f64) -> Result<f64> {
    if !(comp.b > 0.0) || !(k_lo < k_hi) {
        return Err(HfunError::Invalid(format!(
            "exponential needs b > 0 and k_lo < k_hi (b = {}, [{k_lo}, {k_hi}])",
            comp.b
        )));
    }
    let r = r.abs();
    let (a, b, kt) = (comp.a, comp.b, comp.k_tilde);
    let edge = |k: f64| {
        let (s, c) = (k * r).sin_cos();
        (-b * (k - kt)).exp() * (r * s - b * c)
    };
    Ok(a / (PI * (b * b + r * r)) * (edge(k_hi) - edge(k_lo)))
}

/// (1/pi)∫_{k_a}^∞ (b1/k^2 + b2/k^4 + b3/k^6) cos(kr) dk.
///
/// Below x_a = [`TAIL_SWITCH`] the sine-integral form is used; above it the
/// expansion in 1/x_a, truncated at its smallest term.
pub fn h_asymptotic(tail: &Tail, k_a: f64, r: f64) -> Result<f64> {
    if !(k_a > 0.0) {
        return Err(HfunError::Invalid(format!("k_a must be positive, got {k_a}")));
    }
    let r = r.abs();
    if k_a * r < TAIL_SWITCH {
        h_asymptotic_small(tail, k_a, r)
    } else {
        h_asymptotic_large(tail, k_a, r)
    }
}

/// Small-x_a branch (sine integral plus polynomial corrections).
pub fn h_asymptotic_small(tail: &Tail, k_a: f64, r: f64) -> Result<f64> {
    let (b1, b2, b3) = (tail.b1, tail.b2, tail.b3);
    let x = k_a * r;
    let x2 = x * x;
    let si = specfun::sine_integral(x, &SeriesControl::si_default())?;
    let (sx, cx) = x.sin_cos();
    let (x0, x1, x2p) = (1.0, x2 - 2.0, 24.0 - 2.0 * x2 + x2 * x2);
    let (y0, y1) = (1.0, x2 - 6.0);
    let ka3 = k_a.powi(3);
    let ka5 = k_a.powi(5);
    let r3 = r.powi(3);
    let r5 = r.powi(5);
    let v = (b1 * r - b2 * r3 / 6.0 + b3 * r5 / 120.0) * (si - FRAC_PI_2)
        + (b1 * x0 / k_a - b2 * x1 / (6.0 * ka3) + b3 * x2p / (120.0 * ka5)) * cx
        - r * (b2 * y0 / (6.0 * k_a * k_a) - b3 * y1 / (120.0 * k_a.powi(4))) * sx;
    Ok(v / PI)
}

/// Large-x_a branch. The A_i, B_i sums are asymptotic and are cut at
/// their smallest term.
pub fn h_asymptotic_large(tail: &Tail, k_a: f64, r: f64) -> Result<f64> {
    let x = k_a * r;
    let inv2 = 1.0 / (x * x);
    // sum_j (-1)^{i+j} (2(i+j)+off)! / x^{2j}
    let series = |i: usize, off: isize| -> Result<f64> {
        let fact = |n: isize| (1..=n).fold(1.0f64, |p, k| p * k as f64);
        let first_n = 2 * i as isize + off;
        let mut term = fact(first_n) * if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut sum = term;
        let mut last = term.abs();
        for j in 1..200 {
            let n = first_n + 2 * j as isize;
            let next = -term * ((n - 1) * n) as f64 * inv2;
            if next.abs() >= last {
                if j == 1 {
                    return Err(SpecfunError::DivergentTail { modulus: x }.into());
                }
                break;
            }
            term = next;
            sum += term;
            last = term.abs();
            if last <= 1e-17 * sum.abs() {
                break;
            }
        }
        Ok(sum)
    };
    let (a1, a2, a3) = (series(1, -1)?, series(2, -1)?, series(3, -1)?);
    let (bb1, bb2, bb3) = (series(1, 0)?, series(2, 0)?, series(3, 0)?);
    let (b1, b2, b3) = (tail.b1, tail.b2, tail.b3);
    let ka3 = k_a.powi(3);
    let ka5 = k_a.powi(5);
    let (sx, cx) = x.sin_cos();
    let v = (b1 * a1 / k_a - b2 * a2 / (6.0 * ka3) + b3 * a3 / (120.0 * ka5)) * sx / x
        - (b1 * bb1 / k_a - b2 * bb2 / (6.0 * ka3) + b3 * bb3 / (120.0 * ka5)) * cx / (x * x);
    Ok(v / PI)
}

/// A e^{-w r} / (2w), the transform of A/(k^2 + w^2) over [0, ∞).
pub fn h_lorentzian(amplitude: f64, width: f64, r: f64) -> f64 {
    amplitude * (-width * r.abs()).exp() / (2.0 * width)
}

fn segment_h(seg: &GkSegment, r: f64) -> Result<f64> {
    Ok(match &seg.kind {
        SegmentKind::Flat => h_flat(seg.k_end, r) - h_flat(seg.k_start, r),
        SegmentKind::GaussianSum { k1, components } => {
            let mut v = h_flat(seg.k_end, r) - h_flat(seg.k_start, r);
            for c in components {
                v += h_gaussian(c, *k1, seg.k_end, r)?;
            }
            v
        }
        SegmentKind::ExponentialSum { sign, components } => {
            let mut v = 0.0;
            for c in components {
                v += h_exponential(c, seg.k_start, seg.k_end, r)?;
            }
            sign * v
        }
        SegmentKind::Lorentzian { amplitude, width } => h_lorentzian(*amplitude, *width, r),
        SegmentKind::AsymptoticTail(t) => h_asymptotic(t, seg.k_start, r)?,
    })
}

/// Sum of the closed-form components of every segment.
pub fn h_total(model: &GkModel, r: f64) -> Result<f64> {
    let mut total = 0.0;
    for seg in &model.segments {
        total += segment_h(seg, r)?;
    }
    Ok(total)
}

/// (1/pi)∫_0^∞ g(k) dk from the closed forms at r = 0, segment by segment.
pub fn h_zero_by_segments(model: &GkModel) -> Result<Vec<f64>> {
    model.segments.iter().map(|s| segment_h(s, 0.0)).collect()
}

/// ∫_K^∞ k^{-n} e^{ikr} dk for K r well above n, by repeated integration by
/// parts: I_n = i K^{-n} e^{iKr}/r - i (n/r) I_{n+1}.
fn power_tail_integral(n: u32, big_k: f64, r: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let phase = Complex64::from_polar(1.0, big_k * r);
    let mut sum = Complex64::new(0.0, 0.0);
    // term_m = i^{m+1} (-1)^m n(n+1)...(n+m-1) K^{-n-m} e^{iKr} / r^{m+1}
    let mut coeff = i * big_k.powi(-(n as i32)) / r;
    let mut last = f64::INFINITY;
    for m in 0..400 {
        let mag = coeff.norm();
        if mag >= last {
            break;
        }
        sum += coeff;
        last = mag;
        if mag <= 1e-18 * sum.norm() {
            break;
        }
        coeff *= -i * (n + m) as f64 / (big_k * r);
    }
    sum * phase
}

/// Numerical oracle: adaptive Gauss-Kronrod on [0, K], K >= max(k_max, 50/r),
/// split at segment edges and at the half-periods of cos(kr), plus the
/// remainder beyond K integrated analytically term by term.
pub fn h_quadrature(model: &GkModel, r: f64, k_max: f64) -> Result<f64> {
    let r = r.abs();
    let finite_top = model.k_max_finite();
    let mut big_k = k_max.max(finite_top);
    if r > 0.0 {
        big_k = big_k.max(50.0 / r);
    }
    // the analytic remainder of a Lorentzian converges only for K > width
    for s in &model.segments {
        if let SegmentKind::Lorentzian { width, .. } = &s.kind {
            big_k = big_k.max(10.0 * width.abs());
        }
    }
    let mut cuts: Vec<f64> = model
        .segments
        .iter()
        .flat_map(|s| [s.k_start, s.k_end])
        .filter(|k| k.is_finite() && *k < big_k)
        .collect();
    // Gaussian centres deserve their own panel edges
    for s in &model.segments {
        if let SegmentKind::GaussianSum { components, .. } = &s.kind {
            for c in components {
                for m in [-6.0, -3.0, 0.0, 3.0, 6.0] {
                    let k = c.k_tilde + m * c.b;
                    if k > s.k_start && k < s.k_end {
                        cuts.push(k);
                    }
                }
            }
        }
    }
    if r > 0.0 {
        let half = PI / r;
        let count = (big_k / half).floor() as usize;
        if count > 2_000_000 {
            return Err(HfunError::Invalid(format!("r = {r} needs too many panels")));
        }
        cuts.extend((1..=count).map(|m| m as f64 * half));
    }
    cuts.push(0.0);
    cuts.push(big_k);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    let f = |k: f64| crate::gk::eval_gk(model, k) * (k * r).cos();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        // Kronrod nodes are interior, so a panel never samples a segment edge
        total += quadrature::adaptive(&f, a, b, 1e-13 * (b - a), 1e-14, 400)?;
    }
    total += remainder_beyond(model, big_k, r);
    Ok(total / PI)
}

/// ∫_K^∞ g(k) cos(kr) dk for the unbounded last segment.
fn remainder_beyond(model: &GkModel, big_k: f64, r: f64) -> f64 {
    let Some(last) = model.segments.last() else {
        return 0.0;
    };
    if last.k_end.is_finite() {
        return 0.0;
    }
    // g as a sum of c_n k^{-n}
    let terms: Vec<(u32, f64)> = match &last.kind {
        SegmentKind::AsymptoticTail(t) => vec![(2, t.b1), (4, t.b2), (6, t.b3)],
        SegmentKind::Lorentzian { amplitude, width } => {
            let w2 = width * width;
            let ratio = w2 / (big_k * big_k);
            assert!(ratio < 0.25, "cutoff too low for the Lorentzian expansion");
            let mut v = Vec::new();
            let mut c = *amplitude;
            for m in 0..40u32 {
                v.push((2 * m + 2, c));
                c *= -w2;
                if (c / big_k.powi(2 * m as i32 + 4)).abs() < 1e-30 {
                    break;
                }
            }
            v
        }
        _ => return 0.0,
    };
    terms
        .into_iter()
        .map(|(n, c)| {
            if r == 0.0 {
                c * big_k.powi(1 - n as i32) / (n as f64 - 1.0)
            } else {
                c * power_tail_integral(n, big_k, r).re
            }
        })
        .sum()
}

/// H(0), H(h), ..., H(3n h) from [`h_total`], evaluated in parallel.
pub fn build_h_table(model: &GkModel, h: f64, n: usize) -> Result<HTable> {
    if !(h > 0.0) || n < 1 {
        return Err(HfunError::Invalid(format!("need h > 0 and n >= 1 (h = {h}, n = {n})")));
    }
    let values = (0..=3 * n)
        .into_par_iter()
        .map(|k| h_total(model, k as f64 * h))
        .collect::<Result<Vec<f64>>>()?;
    Ok(HTable::new(h, values))
}
