//! Special functions consumed by the analytic H-function components:
//! the complex error function, the sine integral, the asymptotic series
//! of Tricomi's confluent hypergeometric function and the Pochhammer symbol.
//!
//! Every evaluator exposes both of its representations so callers (and
//! tests) can cross-check the convergent series against the asymptotic one.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Complex argument/result type used throughout the kernel.
pub type ComplexValue = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("{function}: series did not reach rel_tol {rel_tol:e} within {max_terms} terms")]
    NonConvergence {
        function: &'static str,
        max_terms: usize,
        rel_tol: f64,
    },
    #[error("asymptotic series diverges from its first correction term (|z| = {modulus})")]
    DivergentTail { modulus: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, SpecfunError>;

/// Truncation and branch-switch controls for a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub rel_tol: f64,
    pub switch_radius: f64,
}

impl SeriesControl {
    pub fn new(max_terms: usize, rel_tol: f64, switch_radius: f64) -> Result<Self> {
        if max_terms < 1 {
            return Err(SpecfunError::InvalidArgument("max_terms must be >= 1".into()));
        }
        if !(rel_tol > 0.0) || !(switch_radius > 0.0) {
            return Err(SpecfunError::InvalidArgument(
                "rel_tol and switch_radius must be positive".into(),
            ));
        }
        Ok(Self {
            max_terms,
            rel_tol,
            switch_radius,
        })
    }

    /// Defaults for `erf_complex`: Kummer series inside |z| < 4.
    pub fn erf_default() -> Self {
        Self {
            max_terms: 600,
            rel_tol: 1e-15,
            switch_radius: 4.0,
        }
    }

    /// Defaults for `sine_integral`: power series below x = 8.
    pub fn si_default() -> Self {
        Self {
            max_terms: 400,
            rel_tol: 1e-15,
            switch_radius: 8.0,
        }
    }
}

/// Complex Kahan accumulator.
#[derive(Default, Clone, Copy)]
struct KahanComplex {
    sum: Complex64,
    carry: Complex64,
}

impl KahanComplex {
    fn add(&mut self, term: Complex64) {
        let y = term - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// erf(z) from the confluent hypergeometric representation
/// erf(z) = (2/sqrt(pi)) z Phi(1/2, 3/2; -z^2).
///
/// Off the real axis the terms grow to ~exp(|z|^2) before the alternating
/// sum settles near 1, so the sum is carried in double-double.
pub fn erf_series(z: ComplexValue, ctrl: &SeriesControl) -> Result<ComplexValue> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(SpecfunError::InvalidArgument(format!("non-finite argument {z}")));
    }
    let zr = DoubleDouble::from(z.re);
    let zi = DoubleDouble::from(z.im);
    // w = -z^2, exact in double-double
    let w = ComplexDd {
        re: zi * zi - zr * zr,
        im: -(DoubleDouble::from(2.0) * zr * zi),
    };
    let mut t = ComplexDd::one();
    let mut sum = ComplexDd::one();
    let w_norm = w.to_c64().norm();
    for n in 1..ctrl.max_terms {
        t = t.mul(&w).div(n as f64);
        let term = t.div((2 * n + 1) as f64);
        sum = sum.add(&term);
        let tn = term.to_c64().norm();
        if tn <= ctrl.rel_tol * 1e-3 * sum.to_c64().norm() && (n as f64) > w_norm {
            return Ok(z * sum.to_c64() * FRAC_2_SQRT_PI);
        }
    }
    Err(SpecfunError::NonConvergence {
        function: "erf_series",
        max_terms: ctrl.max_terms,
        rel_tol: ctrl.rel_tol,
    })
}

#[derive(Debug, Clone, Copy)]
struct ComplexDd {
    re: DoubleDouble,
    im: DoubleDouble,
}

impl ComplexDd {
    fn one() -> Self {
        Self {
            re: DoubleDouble::from(1.0),
            im: DoubleDouble::from(0.0),
        }
    }
    fn mul(&self, o: &Self) -> Self {
        Self {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
    fn div(&self, d: f64) -> Self {
        Self {
            re: self.re / d,
            im: self.im / d,
        }
    }
    fn add(&self, o: &Self) -> Self {
        Self {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// Optimally truncated bracket 1 - 1/(2z^2) + 1*3/(2z^2)^2 - ... of the
/// large-|z| expansion. Returns the sum and the magnitude of the last
/// term that was kept.
fn erfc_asymptotic_bracket(z: Complex64, max_terms: usize, rel_tol: f64) -> (Complex64, f64) {
    let inv = 1.0 / (2.0 * z * z);
    let mut acc = KahanComplex::default();
    let mut term = Complex64::new(1.0, 0.0);
    acc.add(term);
    let mut last = 1.0;
    for n in 1..max_terms {
        let next = -term * inv * (2 * n - 1) as f64;
        let m = next.norm();
        if m >= last {
            break;
        }
        term = next;
        acc.add(term);
        last = m;
        if m <= rel_tol * 1e-3 {
            break;
        }
    }
    let _ = rel_tol;
    (acc.sum, last)
}

/// erf(z) from the large-argument expansion
/// erf(z) = 1 - exp(-z^2)/(sqrt(pi) z) [1 - 1/(2z^2) + ...] (Re z >= 0;
/// the left half-plane follows from oddness).
pub fn erf_asymptotic(z: ComplexValue, ctrl: &SeriesControl) -> Result<ComplexValue> {
    erf_asymptotic_scaled(z, 0.0, ctrl)
}

/// exp(-shift) * erf(z) using the asymptotic branch, with the shift folded
/// into the exponent so that exp(-z^2) never overflows on its own.
fn erf_asymptotic_scaled(z: Complex64, shift: f64, ctrl: &SeriesControl) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(SpecfunError::DivergentTail { modulus: 0.0 });
    }
    let (sign, zz) = if z.re < 0.0 { (-1.0, -z) } else { (1.0, z) };
    let (bracket, last) = erfc_asymptotic_bracket(zz, ctrl.max_terms, ctrl.rel_tol);
    let tail_factor = (-zz * zz - shift).exp() / (zz * PI.sqrt());
    let lead = (-shift).exp();
    let value = Complex64::new(lead, 0.0) - tail_factor * bracket;
    let err = tail_factor.norm() * last;
    if !(err <= ctrl.rel_tol * value.norm().max(f64::MIN_POSITIVE)) {
        return Err(SpecfunError::NonConvergence {
            function: "erf_asymptotic",
            max_terms: ctrl.max_terms,
            rel_tol: ctrl.rel_tol,
        });
    }
    Ok(value * sign)
}

/// Complex error function. |z| < switch_radius uses the Kummer series,
/// otherwise the asymptotic expansion. Near the imaginary axis, where the
/// asymptotic bracket cannot reach `rel_tol`, the series is used instead.
pub fn erf_complex(z: ComplexValue, ctrl: &SeriesControl) -> Result<ComplexValue> {
    erf_scaled(z, 0.0, ctrl)
}

/// exp(-shift) * erf(z). The Gaussian H-component multiplies erf by
/// exp(-b^2 r^2 / 2), which cancels the exp(+Im(z)^2) growth of erf.
pub(crate) fn erf_scaled(z: Complex64, shift: f64, ctrl: &SeriesControl) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(SpecfunError::InvalidArgument(format!("non-finite argument {z}")));
    }
    if z.re == 0.0 && z.im == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // oddness, exact by construction
    if z.re < 0.0 || (z.re == 0.0 && z.im < 0.0) {
        return erf_scaled(-z, shift, ctrl).map(|v| -v);
    }
    if z.norm() < ctrl.switch_radius {
        return erf_series(z, ctrl).map(|v| v * (-shift).exp());
    }
    match erf_asymptotic_scaled(z, shift, ctrl) {
        Ok(v) => Ok(v),
        Err(SpecfunError::NonConvergence { .. }) => {
            erf_series(z, ctrl).map(|v| v * (-shift).exp())
        }
        Err(e) => Err(e),
    }
}

/// Rising factorial (a)_n = a (a+1) ... (a+n-1); (a)_0 = 1.
pub fn pochhammer(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a + i as f64))
}

/// Asymptotic series Psi(a, c; z) ~ z^-a sum_{n=0}^N (a)_n (a-c+1)_n / (n! (-z)^n).
///
/// Summation stops early at the smallest-magnitude term once the terms
/// start growing (optimal truncation).
pub fn tricomi_psi_asymptotic(a: f64, c: f64, z: ComplexValue, n_max: usize) -> Result<ComplexValue> {
    psi_asymptotic_with_error(a, c, z, n_max).map(|(v, _)| v)
}

/// Same as [`tricomi_psi_asymptotic`], also returning the magnitude of the
/// last retained term (an error estimate for alternating series).
pub fn psi_asymptotic_with_error(
    a: f64,
    c: f64,
    z: ComplexValue,
    n_max: usize,
) -> Result<(ComplexValue, f64)> {
    if z.norm() == 0.0 {
        return Err(SpecfunError::DivergentTail { modulus: 0.0 });
    }
    let mut acc = KahanComplex::default();
    let mut term = Complex64::new(1.0, 0.0);
    acc.add(term);
    let mut last = 1.0;
    for n in 1..=n_max {
        let factor = (a + (n - 1) as f64) * (a - c + n as f64) / n as f64;
        let next = term * factor / (-z);
        let m = next.norm();
        if m > last {
            if n == 1 {
                return Err(SpecfunError::DivergentTail { modulus: z.norm() });
            }
            break;
        }
        term = next;
        acc.add(term);
        last = m;
        if m == 0.0 {
            break;
        }
    }
    let prefactor = (-a * z.ln()).exp();
    Ok((prefactor * acc.sum, last * prefactor.norm()))
}

/// Psi(1, 1; z) = exp(z) E1(z) by its continued fraction
/// 1/(z+1- 1/(z+3- 4/(z+5- ...))), modified Lentz.
fn psi_11_continued_fraction(z: Complex64, max_terms: usize, rel_tol: f64) -> Result<Complex64> {
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..max_terms {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        if c.norm() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() <= rel_tol {
            return Ok(h);
        }
    }
    Err(SpecfunError::NonConvergence {
        function: "psi_continued_fraction",
        max_terms,
        rel_tol,
    })
}

/// Psi(1,1; z) for |z| >= 1 off the negative real axis: asymptotic series
/// when optimal truncation already meets `rel_tol`, continued fraction
/// otherwise.
fn psi_11(z: Complex64, ctrl: &SeriesControl) -> Result<Complex64> {
    let (value, err) = psi_asymptotic_with_error(1.0, 1.0, z, ctrl.max_terms)?;
    if err <= ctrl.rel_tol * value.norm() {
        return Ok(value);
    }
    psi_11_continued_fraction(z, ctrl.max_terms.max(2000), ctrl.rel_tol.max(1e-16))
}

/// Si(x) by the power series x - x^3/(3*3!) + x^5/(5*5!) - ...,
/// accumulated in double-double arithmetic so the alternating terms
/// (which reach ~e^x / x before shrinking) do not destroy the result.
pub fn si_series(x: f64, ctrl: &SeriesControl) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(SpecfunError::InvalidArgument(format!("Si needs finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let x2 = DoubleDouble::from(x) * DoubleDouble::from(x);
    let mut power = DoubleDouble::from(x); // x^(2k+1)/(2k+1)!
    let mut sum = power;
    for k in 1..ctrl.max_terms {
        let denom = ((2 * k) * (2 * k + 1)) as f64;
        power = (power * x2) / denom;
        let term = power / (2 * k + 1) as f64;
        if k % 2 == 1 {
            sum = sum - term;
        } else {
            sum = sum + term;
        }
        if term.hi.abs() <= ctrl.rel_tol * 1e-3 * sum.hi.abs() && (2 * k) as f64 > x {
            return Ok(sum.to_f64());
        }
    }
    Err(SpecfunError::NonConvergence {
        function: "si_series",
        max_terms: ctrl.max_terms,
        rel_tol: ctrl.rel_tol,
    })
}

/// Si(x) = pi/2 - (i/2) e^{-ix} Psi(1,1; ix) + (i/2) e^{ix} Psi(1,1; -ix).
pub fn si_asymptotic(x: f64, ctrl: &SeriesControl) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SpecfunError::InvalidArgument(format!("Si asymptotic needs x > 0, got {x}")));
    }
    let i = Complex64::new(0.0, 1.0);
    let ix = Complex64::new(0.0, x);
    let p_plus = psi_11(ix, ctrl)?;
    let p_minus = psi_11(-ix, ctrl)?;
    let value = FRAC_PI_2 - 0.5 * i * (-ix).exp() * p_plus + 0.5 * i * ix.exp() * p_minus;
    Ok(value.re)
}

/// Sine integral Si(x) = int_0^x sin(t)/t dt for x >= 0.
pub fn sine_integral(x: f64, ctrl: &SeriesControl) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(SpecfunError::InvalidArgument(format!("Si needs finite x >= 0, got {x}")));
    }
    if x < ctrl.switch_radius {
        si_series(x, ctrl)
    } else {
        si_asymptotic(x, ctrl)
    }
}

/// Unevaluated pair (hi, lo) with |lo| <= ulp(hi)/2.
#[derive(Debug, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleDouble {
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl std::ops::Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl std::ops::Div<f64> for DoubleDouble {
    type Output = Self;
    fn div(self, d: f64) -> Self {
        let q1 = self.hi / d;
        // remainder self - q1 * d, exactly
        let p = q1 * d;
        let pe = q1.mul_add(d, -p);
        let (s, e) = two_sum(self.hi, -p);
        let r = s + (e - pe + self.lo);
        let q2 = r / d;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }
    }
}
