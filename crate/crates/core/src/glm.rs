//! Bound-state ladder on a fixed radial grid.
//!
//! Energies are E = -Cγ² for bound states and E = Ck² in the continuum, so
//! every solution obeys φ'' = (V/C + s)φ with s = γ² or s = -k². States are
//! added one at a time through V_k = V_{k-1} - 2C(ln D)'',
//! D = 1 + C_k∫_0^r φ², and removed again with the Abraham-Moses formula.

use crate::potential::{PotentialCurve, PotentialError};
use crate::quadrature;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmError {
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("regular solution overflowed at r = {r}; shorten the grid")]
    Overflow { r: f64 },
    #[error("1 + C_k∫φ² = {value:e} at r = {r}; the norming constant is invalid")]
    NonPositiveDenominator { r: f64, value: f64 },
    #[error("the determinant route needs distinct gammas (got {0} twice)")]
    DegenerateGammas(f64),
    #[error("eigenfunction has not decayed at the grid end (ψ²(R)/max ψ² = {ratio:e})")]
    TailTooShort { ratio: f64 },
    #[error("potential has not decayed at the grid end (|V|/C = {v_over_c:e}, k² = {k2:e})")]
    NoAsymptoticRegion { v_over_c: f64, k2: f64 },
    #[error("Bargmann parameters must be positive and distinct (a = {a}, b = {b})")]
    DegenerateParameters { a: f64, b: f64 },
    #[error("Wronskian changes sign near r = {r}")]
    WronskianZero { r: f64 },
    #[error("no bound state number {level} (the potential holds {count})")]
    NoBoundState { level: usize, count: usize },
    #[error("invalid bound state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, GlmError>;

/// E = -Cγ², with norming constant C_n defined by ∫C_n φ_n² dr = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundStateSpec {
    pub gamma: f64,
    pub norm_const: f64,
}

impl BoundStateSpec {
    pub fn new(gamma: f64, norm_const: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(norm_const >= 0.0) || !norm_const.is_finite() {
            return Err(GlmError::InvalidState(format!("gamma = {gamma}, C = {norm_const}")));
        }
        Ok(Self { gamma, norm_const })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    /// k = iγ
    Imaginary(f64),
    Real(f64),
}

impl Energy {
    fn shift(self) -> f64 {
        match self {
            Energy::Imaginary(g) => g * g,
            Energy::Real(k) => -k * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularSolution {
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub energy: Energy,
}

/// Uniform grid for bound-state work: extent ≥ 10/γ_min, step ≤ 1/(40 γ_max),
/// and the step count a multiple of three.
pub fn bound_state_grid(gammas: &[f64]) -> (f64, usize) {
    let gmin = gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let gmax = gammas.iter().copied().fold(0.0, f64::max);
    let extent = 10.0 / gmin;
    let mut n = (extent * 40.0 * gmax).ceil() as usize;
    n += (3 - n % 3) % 3;
    (extent / n as f64, n)
}

/// V at the midpoints of every interval, from the cubic through four
/// neighbouring samples (one-sided at the ends).
fn midpoint_values(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n < 4 {
        return v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    (0..n - 1)
        .map(|i| {
            if i == 0 {
                (5.0 * v[0] + 15.0 * v[1] - 5.0 * v[2] + v[3]) / 16.0
            } else if i == n - 2 {
                (v[n - 4] - 5.0 * v[n - 3] + 15.0 * v[n - 2] + 5.0 * v[n - 1]) / 16.0
            } else {
                (-v[i - 1] + 9.0 * v[i] + 9.0 * v[i + 1] - v[i + 2]) / 16.0
            }
        })
        .collect()
}

const OVERFLOW: f64 = 1e250;

/// RK4 for φ'' = (V/C + s)φ across the whole grid, forward from node 0 or
/// backward from the last node.
fn integrate(pot: &PotentialCurve, s: f64, y0: f64, dy0: f64, forward: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = pot.uniform_step()?;
    let n = pot.len();
    let q: Vec<f64> = pot.v.iter().map(|v| v / pot.c + s).collect();
    let qm = midpoint_values(&q);
    let mut y = vec![0.0; n];
    let mut dy = vec![0.0; n];
    let (start, step) = if forward { (0usize, h) } else { (n - 1, -h) };
    y[start] = y0;
    dy[start] = dy0;
    let (mut u, mut du) = (y0, dy0);
    for t in 0..n - 1 {
        let (i, j, mid) = if forward { (t, t + 1, qm[t]) } else { (n - 1 - t, n - 2 - t, qm[n - 2 - t]) };
        let (qa, qb) = (q[i], q[j]);
        let k1 = (du, qa * u);
        let k2 = (du + 0.5 * step * k1.1, mid * (u + 0.5 * step * k1.0));
        let k3 = (du + 0.5 * step * k2.1, mid * (u + 0.5 * step * k2.0));
        let k4 = (du + step * k3.1, qb * (u + step * k3.0));
        u += step / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        du += step / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !(u.abs() < OVERFLOW && du.abs() < OVERFLOW) {
            return Err(GlmError::Overflow { r: pot.r[j] });
        }
        y[j] = u;
        dy[j] = du;
    }
    Ok((y, dy))
}

fn check_origin(pot: &PotentialCurve) -> Result<f64> {
    let h = pot.uniform_step()?;
    if pot.r[0].abs() > 1e-12 * h {
        return Err(GlmError::InvalidState(format!("grid must start at r = 0, starts at {}", pot.r[0])));
    }
    if pot.len() < 4 {
        return Err(PotentialError::TooShort { need: 4, got: pot.len() }.into());
    }
    Ok(h)
}

/// φ(iγ, r) with φ(0) = 0, φ'(0) = 1.
pub fn regular_solution(pot: &PotentialCurve, gamma: f64) -> Result<RegularSolution> {
    regular_solution_at(pot, Energy::Imaginary(gamma))
}

pub fn regular_solution_at(pot: &PotentialCurve, energy: Energy) -> Result<RegularSolution> {
    check_origin(pot)?;
    let (phi, dphi) = integrate(pot, energy.shift(), 0.0, 1.0, true)?;
    Ok(RegularSolution { r: pot.r.clone(), phi, dphi, energy })
}

fn with_v(pot: &PotentialCurve, v: Vec<f64>) -> PotentialCurve {
    PotentialCurve { r: pot.r.clone(), v, c: pot.c }
}

/// Adds the bound state E = -Cγ² with norming constant C_k. Returns the new
/// potential and its eigenfunction φ/D.
pub fn add_bound_state(pot: &PotentialCurve, state: BoundStateSpec) -> Result<(PotentialCurve, RegularSolution)> {
    let h = check_origin(pot)?;
    let sol = regular_solution(pot, state.gamma)?;
    let ck = state.norm_const;
    let sq: Vec<f64> = sol.phi.iter().map(|p| p * p).collect();
    let integral = quadrature::cumulative(&sq, h);
    let mut v = Vec::with_capacity(pot.len());
    let mut psi = Vec::with_capacity(pot.len());
    let mut dpsi = Vec::with_capacity(pot.len());
    for i in 0..pot.len() {
        let d = 1.0 + ck * integral[i];
        if !(d > 0.0) {
            return Err(GlmError::NonPositiveDenominator { r: pot.r[i], value: d });
        }
        let (p, dp) = (sol.phi[i], sol.dphi[i]);
        // (ln D)'' = D''/D - (D'/D)², D' = C_k φ², D'' = 2 C_k φ φ'
        let ln_dd = 2.0 * ck * p * dp / d - (ck * p * p / d).powi(2);
        v.push(pot.v[i] - 2.0 * pot.c * ln_dd);
        psi.push(p / d);
        dpsi.push(dp / d - ck * p.powi(3) / (d * d));
    }
    Ok((with_v(pot, v), RegularSolution { r: pot.r.clone(), phi: psi, dphi: dpsi, energy: sol.energy }))
}

/// ∫_0^∞ C ψ², with the tail beyond the grid taken as ψ(R)²/(2γ).
pub fn norming_integral(psi: &RegularSolution, norm_const: f64) -> Result<f64> {
    let h = (psi.r[psi.r.len() - 1] - psi.r[0]) / (psi.r.len() - 1) as f64;
    let gamma = match psi.energy {
        Energy::Imaginary(g) => g,
        Energy::Real(_) => return Err(GlmError::InvalidState("norming needs a bound-state solution".into())),
    };
    let sq: Vec<f64> = psi.phi.iter().map(|p| p * p).collect();
    let body = *quadrature::cumulative(&sq, h).last().unwrap();
    Ok(norm_const * (body + sq[sq.len() - 1] / (2.0 * gamma)))
}

/// Two states at once through V₂ = V₀ - 2C(ln det C₂)'', with the 2×2 matrix
/// C11 = 1 + C1∫φa², C12 = C1∫φaφb, C21 = (C2/C1)C12, C22 = 1 + C2∫φb².
pub fn add_two_states_det(pot: &PotentialCurve, s1: BoundStateSpec, s2: BoundStateSpec) -> Result<PotentialCurve> {
    let h = check_origin(pot)?;
    if (s1.gamma - s2.gamma).abs() <= 1e-12 * s1.gamma.max(s2.gamma) {
        return Err(GlmError::DegenerateGammas(s1.gamma));
    }
    let a = regular_solution(pot, s1.gamma)?;
    let b = regular_solution(pot, s2.gamma)?;
    let (c1, c2) = (s1.norm_const, s2.norm_const);
    let n = pot.len();
    let prod = |f: &dyn Fn(usize) -> f64| quadrature::cumulative(&(0..n).map(f).collect::<Vec<_>>(), h);
    let iaa = prod(&|i| a.phi[i] * a.phi[i]);
    let ibb = prod(&|i| b.phi[i] * b.phi[i]);
    let iab = prod(&|i| a.phi[i] * b.phi[i]);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let (pa, da, pb, db) = (a.phi[i], a.dphi[i], b.phi[i], b.dphi[i]);
        // det = C11 C22 - C2 C1 (∫φaφb)², written without dividing by C1
        let x11 = 1.0 + c1 * iaa[i];
        let x22 = 1.0 + c2 * ibb[i];
        let x12 = iab[i];
        let det = x11 * x22 - c1 * c2 * x12 * x12;
        let d1 = c1 * pa * pa * x22 + x11 * c2 * pb * pb - 2.0 * c1 * c2 * x12 * pa * pb;
        let d2 = 2.0 * c1 * pa * da * x22 + 2.0 * c1 * pa * pa * c2 * pb * pb + x11 * 2.0 * c2 * pb * db
            - 2.0 * c1 * c2 * ((pa * pb).powi(2) + x12 * (da * pb + pa * db));
        if !(det > 0.0) {
            return Err(GlmError::NonPositiveDenominator { r: pot.r[i], value: det });
        }
        v.push(pot.v[i] - 2.0 * pot.c * (d2 / det - (d1 / det).powi(2)));
    }
    Ok(with_v(pot, v))
}

/// f(r) = C22 - C1 C2 β12²/C11, the determinant divided by the one-state
/// denominator; equal to 1 + C2∫φ₁²(iγ2) along the ladder.
pub fn two_state_ratio(pot: &PotentialCurve, s1: BoundStateSpec, s2: BoundStateSpec) -> Result<Vec<f64>> {
    let h = check_origin(pot)?;
    let a = regular_solution(pot, s1.gamma)?;
    let b = regular_solution(pot, s2.gamma)?;
    let n = pot.len();
    let iaa = quadrature::cumulative(&(0..n).map(|i| a.phi[i] * a.phi[i]).collect::<Vec<_>>(), h);
    let ibb = quadrature::cumulative(&(0..n).map(|i| b.phi[i] * b.phi[i]).collect::<Vec<_>>(), h);
    let iab = quadrature::cumulative(&(0..n).map(|i| a.phi[i] * b.phi[i]).collect::<Vec<_>>(), h);
    Ok((0..n)
        .map(|i| 1.0 + s2.norm_const * (ibb[i] - s1.norm_const * iab[i] * iab[i] / (1.0 + s1.norm_const * iaa[i])))
        .collect())
}

/// Removes the lowest level: V + 2C{2ψψ'/T + (ψ²/T)²}, T = ∫_r^∞ψ². The
/// normalisation of ψ does not matter.
pub fn remove_top_bound_state(pot: &PotentialCurve, psi: &RegularSolution) -> Result<PotentialCurve> {
    let h = pot.uniform_step()?;
    if psi.phi.len() != pot.len() {
        return Err(PotentialError::Length(pot.len(), psi.phi.len()).into());
    }
    let gamma = match psi.energy {
        Energy::Imaginary(g) if g > 0.0 => g,
        _ => return Err(GlmError::InvalidState("removal needs a bound-state eigenfunction".into())),
    };
    let sq: Vec<f64> = psi.phi.iter().map(|p| p * p).collect();
    let peak = sq.iter().copied().fold(0.0, f64::max);
    let last = sq[sq.len() - 1];
    if last > 1e-12 * peak {
        return Err(GlmError::TailTooShort { ratio: last / peak });
    }
    let extra = last / (2.0 * gamma);
    let tail = quadrature::cumulative_tail(&sq, h);
    let v = (0..pot.len())
        .map(|i| {
            let t = tail[i] + extra;
            if t <= 0.0 {
                return pot.v[i];
            }
            let (p, dp) = (psi.phi[i], psi.dphi[i]);
            pot.v[i] + 2.0 * pot.c * (2.0 * p * dp / t + (p * p / t).powi(2))
        })
        .collect();
    Ok(with_v(pot, v))
}

/// Sign changes of φ(iγ) on the grid: with a Dirichlet wall at the grid end
/// this is the number of levels below -Cγ².
pub fn count_levels_below(pot: &PotentialCurve, gamma: f64) -> Result<usize> {
    let sol = regular_solution(pot, gamma)?;
    let mut count = 0;
    let mut prev = 1.0;
    for &p in &sol.phi[1..] {
        if p != 0.0 {
            if p.signum() != prev {
                count += 1;
            }
            prev = p.signum();
        }
    }
    Ok(count)
}

/// γ of every level, deepest first, by bisection on the level count.
pub fn bound_state_gammas(pot: &PotentialCurve) -> Result<Vec<f64>> {
    let vmin = pot.v.iter().copied().fold(f64::INFINITY, f64::min);
    if !(vmin < 0.0) {
        return Ok(Vec::new());
    }
    let gmax = (-vmin / pot.c).sqrt() * 1.0001;
    let total = count_levels_below(pot, 0.0)?;
    let mut out = Vec::with_capacity(total);
    for level in 0..total {
        // level `level` is the largest γ with count(γ) ≥ level + 1
        let (mut lo, mut hi) = (0.0, gmax);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_levels_below(pot, mid)? > level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

/// Eigenfunction at the level γ, built by forward integration from the origin
/// and backward integration from the grid end, joined at the outer turning
/// point. Normalised like a regular solution (ψ'(0) = 1).
pub fn matched_eigenfunction(pot: &PotentialCurve, gamma: f64) -> Result<RegularSolution> {
    let fwd = regular_solution(pot, gamma)?;
    let s = gamma * gamma;
    let n = pot.len();
    let m = (0..n)
        .rev()
        .find(|&i| pot.v[i] / pot.c + s < 0.0)
        .ok_or_else(|| GlmError::InvalidState(format!("no classically allowed region at gamma = {gamma}")))?;
    let (bwd, dbwd) = integrate(pot, s, 1.0, -gamma, false)?;
    let scale = fwd.phi[m] / bwd[m];
    let mut phi = fwd.phi;
    let mut dphi = fwd.dphi;
    for i in m + 1..n {
        phi[i] = scale * bwd[i];
        dphi[i] = scale * dbwd[i];
    }
    Ok(RegularSolution { r: pot.r.clone(), phi, dphi, energy: Energy::Imaginary(gamma) })
}

/// γ and eigenfunction of level `level` (0 = deepest).
pub fn bound_state(pot: &PotentialCurve, level: usize) -> Result<(f64, RegularSolution)> {
    let gammas = bound_state_gammas(pot)?;
    let g = *gammas.get(level).ok_or(GlmError::NoBoundState { level, count: gammas.len() })?;
    Ok((g, matched_eigenfunction(pot, g)?))
}

fn check_decayed(pot: &PotentialCurve, k2: f64) -> Result<()> {
    let start = pot.len() - pot.len() / 10 - 1;
    let v_over_c = pot.v[start..].iter().fold(0.0f64, |m, v| m.max(v.abs())) / pot.c;
    if v_over_c > 1e-6 * k2 {
        return Err(GlmError::NoAsymptoticRegion { v_over_c, k2 });
    }
    Ok(())
}

/// |F(k)| from φ(k, r) → |F| sin(kr + δ)/k at the grid end.
pub fn jost_modulus_forward(pot: &PotentialCurve, ks: &[f64]) -> Result<Vec<f64>> {
    ks.iter()
        .map(|&k| {
            check_decayed(pot, k * k)?;
            let sol = regular_solution_at(pot, Energy::Real(k))?;
            let (p, dp) = (sol.phi[sol.phi.len() - 1], sol.dphi[sol.dphi.len() - 1]);
            Ok(k * (p * p + (dp / k).powi(2)).sqrt())
        })
        .collect()
}

/// Deformation ΔV = -2C{ln W[f(ia), φ(ib)]}'' of the Bargmann factor
/// (k + ia)/(k + ib). f is the Jost solution (∝ e^{-ar} at the grid end)
/// and W' = (b² - a²) f φ. When -Cb² is a level of `pot` the Wronskian is
/// taken from the tail, W = -(b² - a²)∫_r^∞ fφ, with φ the matched
/// eigenfunction; otherwise from the origin, W = f(0) + (b² - a²)∫_0^r fφ.
pub fn bargmann_deform(pot: &PotentialCurve, a: f64, b: f64) -> Result<PotentialCurve> {
    if !(a > 0.0 && b > 0.0) || (a - b).abs() <= 1e-12 * a.max(b) {
        return Err(GlmError::DegenerateParameters { a, b });
    }
    let h = check_origin(pot)?;
    check_decayed(pot, a.min(b).powi(2))?;
    let n = pot.len();
    let (f, df) = integrate(pot, a * a, 1.0, -a, false)?;
    let bound = count_levels_below(pot, b * (1.0 - 1e-4))? > count_levels_below(pot, b * (1.0 + 1e-4))?;
    let phi = if bound { matched_eigenfunction(pot, b)? } else { regular_solution(pot, b)? };
    let k = b * b - a * a;
    let fp: Vec<f64> = (0..n).map(|i| f[i] * phi.phi[i]).collect();
    let w: Vec<f64> = if bound {
        let extra = fp[n - 1] / (a + b);
        quadrature::cumulative_tail(&fp, h).iter().map(|t| -k * (t + extra)).collect()
    } else {
        quadrature::cumulative(&fp, h).iter().map(|t| f[0] + k * t).collect()
    };
    let sign = w[0].signum();
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        if w[i].signum() != sign || w[i] == 0.0 {
            return Err(GlmError::WronskianZero { r: pot.r[i] });
        }
        let w1 = k * fp[i];
        let w2 = k * (df[i] * phi.phi[i] + f[i] * phi.dphi[i]);
        v.push(pot.v[i] - 2.0 * pot.c * (w2 / w[i] - (w1 / w[i]).powi(2)));
    }
    Ok(with_v(pot, v))
}

/// Replaces the level -Cb² by -Ca²: the deformation removes -Cb², and the
/// new level is then added with norming constant `c_a`.
pub fn bargmann_replace(pot: &PotentialCurve, a: f64, b: f64, c_a: f64) -> Result<(PotentialCurve, RegularSolution)> {
    let deformed = bargmann_deform(pot, a, b)?;
    add_bound_state(&deformed, BoundStateSpec::new(a, c_a)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticsReport {
    pub slope_fit: f64,
    /// -4C ΣC_j
    pub slope_predicted: f64,
    pub rate_fit: f64,
    /// 2γ of the shallowest state
    pub rate_predicted: f64,
}

impl AsymptoticsReport {
    pub fn slope_ratio(&self) -> f64 {
        self.slope_fit / self.slope_predicted
    }

    pub fn rate_ratio(&self) -> f64 {
        self.rate_fit / self.rate_predicted
    }
}

/// Fits V_n - V_0 to a line through the origin on r ≤ 0.1/γ_max and to a
/// decaying exponential on 3/γ ≤ r ≤ 6/γ (γ of the shallowest state).
/// With no states every field is zero.
pub fn check_asymptotics(vn: &PotentialCurve, v0: &PotentialCurve, states: &[BoundStateSpec]) -> AsymptoticsReport {
    if states.is_empty() {
        return AsymptoticsReport { slope_fit: 0.0, slope_predicted: 0.0, rate_fit: 0.0, rate_predicted: 0.0 };
    }
    let diff: Vec<f64> = vn.v.iter().zip(&v0.v).map(|(a, b)| a - b).collect();
    let gmax = states.iter().map(|s| s.gamma).fold(0.0, f64::max);
    let gmin = states.iter().map(|s| s.gamma).fold(f64::INFINITY, f64::min);
    let sum_c: f64 = states.iter().map(|s| s.norm_const).sum();

    let (mut num, mut den) = (0.0, 0.0);
    for (r, d) in vn.r.iter().zip(&diff) {
        if *r > 0.0 && *r <= 0.1 / gmax {
            num += r * d;
            den += r * r;
        }
    }
    let slope_fit = if den > 0.0 { num / den } else { f64::NAN };

    let pts: Vec<(f64, f64)> = vn
        .r
        .iter()
        .zip(&diff)
        .filter(|(r, d)| **r >= 3.0 / gmin && **r <= 6.0 / gmin && **d != 0.0)
        .map(|(r, d)| (*r, d.abs().ln()))
        .collect();
    let rate_fit = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
        -sxy / sxx
    } else {
        f64::NAN
    };
    AsymptoticsReport { slope_fit, slope_predicted: -4.0 * vn.c * sum_c, rate_fit, rate_predicted: 2.0 * gmin }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(h: f64, n: usize) -> PotentialCurve {
        PotentialCurve::zero(h, n, 1.0)
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// V₁ for one state on the free base, from the closed-form integral
    /// ∫_0^r sinh²(γs)/γ² ds = (sinh γr cosh γr - γr)/(2γ³).
    fn free_one_state(gamma: f64, c1: f64, r: f64) -> f64 {
        let (s, c) = ((gamma * r).sinh(), (gamma * r).cosh());
        let d = 1.0 + c1 * (s * c - gamma * r) / (2.0 * gamma.powi(3));
        let d1 = c1 * s * s / (gamma * gamma);
        let d2 = 2.0 * c1 * s * c / gamma;
        -2.0 * (d2 / d - (d1 / d).powi(2))
    }

    #[test]
    fn grid_rule() {
        let (h, n) = bound_state_grid(&[1.0, 0.5]);
        assert!(h * n as f64 >= 20.0 - 1e-9);
        assert!(h <= 1.0 / 40.0);
        assert_eq!(n % 3, 0);
    }

    #[test]
    fn free_regular_solution() {
        let gamma = 1.3;
        let pot = free(0.005, 800);
        let sol = regular_solution(&pot, gamma).unwrap();
        for (r, p) in sol.r.iter().zip(&sol.phi) {
            if *r > 0.0 && *r <= 5.0 / gamma {
                let exact = (gamma * r).sinh() / gamma;
                assert!((p / exact - 1.0).abs() < 1e-8, "r={r}");
            }
        }
        assert!((sol.phi[1] / 0.005 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn regular_solution_fourth_order() {
        let run = |n: usize| {
            let pot = PotentialCurve::from_fn(2.0 / n as f64, n, 1.0, |r| 0.5 * r * r - 2.0).unwrap();
            *regular_solution(&pot, 0.7).unwrap().phi.last().unwrap()
        };
        let (a, b, c) = (run(50), run(100), run(200));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn overflow_is_reported() {
        let pot = free(1.0, 2000);
        assert!(matches!(regular_solution(&pot, 1.0), Err(GlmError::Overflow { .. })));
    }

    #[test]
    fn one_state_on_free_base() {
        let pot = free(0.005, 6000);
        let (v1, psi) = add_bound_state(&pot, BoundStateSpec::new(1.0, 0.1).unwrap()).unwrap();
        for (r, v) in v1.r.iter().zip(&v1.v) {
            assert!((v - free_one_state(1.0, 0.1, *r)).abs() < 1e-6, "r={r}");
        }
        assert!((norming_integral(&psi, 0.1).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_norming_constant_is_identity() {
        let pot = PotentialCurve::from_fn(0.01, 300, 1.0, |r| (-r).exp()).unwrap();
        let (v1, _) = add_bound_state(&pot, BoundStateSpec::new(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(v1.v, pot.v);
    }

    #[test]
    fn negative_norming_constant_fails() {
        let pot = free(0.01, 600);
        let bad = BoundStateSpec { gamma: 1.0, norm_const: -1.0 };
        assert!(matches!(add_bound_state(&pot, bad), Err(GlmError::NonPositiveDenominator { .. })));
    }

    #[test]
    fn determinant_and_sequential_routes_agree() {
        let pot = free(0.005, 6000);
        let s1 = BoundStateSpec::new(1.0, 0.1).unwrap();
        let s2 = BoundStateSpec::new(0.5, 0.02).unwrap();
        let (v1, _) = add_bound_state(&pot, s1).unwrap();
        let (v2, _) = add_bound_state(&v1, s2).unwrap();
        let det = add_two_states_det(&pot, s1, s2).unwrap();
        let scale = v2.max_abs();
        assert!(max_abs_diff(&det.v, &v2.v) <= 1e-6 * scale);

        // C2 = 0 collapses to the one-state potential
        let single = add_two_states_det(&pot, s1, BoundStateSpec::new(0.5, 0.0).unwrap()).unwrap();
        assert!(max_abs_diff(&single.v, &v1.v) <= 1e-12 * v1.max_abs());
        assert!(matches!(add_two_states_det(&pot, s1, s1), Err(GlmError::DegenerateGammas(_))));
    }

    /// det C₂ / C11 is the second denominator of the ladder.
    #[test]
    fn two_state_ratio_is_ladder_denominator() {
        let h = 0.0025;
        let pot = free(h, 6000);
        let s1 = BoundStateSpec::new(1.0, 0.1).unwrap();
        let s2 = BoundStateSpec::new(0.5, 0.02).unwrap();
        let f = two_state_ratio(&pot, s1, s2).unwrap();
        let (v1, _) = add_bound_state(&pot, s1).unwrap();
        let phi = regular_solution(&v1, 0.5).unwrap();
        let sq: Vec<f64> = phi.phi.iter().map(|p| p * p).collect();
        let ladder: Vec<f64> = quadrature::cumulative(&sq, h).iter().map(|i| 1.0 + 0.02 * i).collect();
        for (x, y) in f.iter().zip(&ladder) {
            assert!((x / y - 1.0).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn add_remove_roundtrip() {
        let pot = free(0.005, 6000);
        let (v1, psi) = add_bound_state(&pot, BoundStateSpec::new(1.0, 0.1).unwrap()).unwrap();
        let back = remove_top_bound_state(&v1, &psi).unwrap();
        assert!(back.max_abs() <= 1e-5 * v1.max_abs());

        // scale invariance
        let mut scaled = psi.clone();
        scaled.phi.iter_mut().for_each(|p| *p *= 7.0);
        scaled.dphi.iter_mut().for_each(|p| *p *= 7.0);
        let again = remove_top_bound_state(&v1, &scaled).unwrap();
        assert!(max_abs_diff(&again.v, &back.v) <= 1e-12 * v1.max_abs());

        // a non-free base, with the eigenfunction found by shooting
        let base = PotentialCurve::from_fn(0.005, 6000, 1.0, |r| 0.8 * (-(r - 1.0).powi(2)).exp()).unwrap();
        let (v1, psi) = add_bound_state(&base, BoundStateSpec::new(1.0, 0.1).unwrap()).unwrap();
        let back = remove_top_bound_state(&v1, &psi).unwrap();
        assert!(max_abs_diff(&back.v, &base.v) <= 1e-5 * base.max_abs());
        let (g, shot) = bound_state(&v1, 0).unwrap();
        assert!((g - 1.0).abs() < 1e-6);
        let back = remove_top_bound_state(&v1, &shot).unwrap();
        assert!(max_abs_diff(&back.v, &base.v) <= 1e-4 * base.max_abs());
    }

    #[test]
    fn short_tail_is_rejected() {
        let pot = free(0.01, 300);
        let (v1, psi) = add_bound_state(&pot, BoundStateSpec::new(1.0, 0.1).unwrap()).unwrap();
        assert!(matches!(remove_top_bound_state(&v1, &psi), Err(GlmError::TailTooShort { .. })));
    }

    #[test]
    fn three_level_well_removal() {
        // -λ(λ+1)/cosh²r with λ = 6 has half-line levels γ = 5, 3, 1
        let pot = PotentialCurve::from_fn(0.0025, 9000, 1.0, |r| -42.0 / r.cosh().powi(2)).unwrap();
        let gammas = bound_state_gammas(&pot).unwrap();
        assert_eq!(gammas.len(), 3);
        for (g, want) in gammas.iter().zip([5.0, 3.0, 1.0]) {
            assert!((g - want).abs() < 1e-5, "{g} vs {want}");
        }
        let mut current = pot;
        let area = |p: &PotentialCurve| *quadrature::cumulative(&p.v, 0.0025).last().unwrap();
        let mut depth = area(&current);
        for removed in 1..=3 {
            let (g, psi) = bound_state(&current, 0).unwrap();
            current = remove_top_bound_state(&current, &psi).unwrap();
            let left = bound_state_gammas(&current).unwrap();
            assert_eq!(left.len(), 3 - removed);
            for (g, want) in left.iter().zip([3.0, 1.0].iter().skip(removed - 1)) {
                assert!((g - want).abs() < 1e-3, "{g} vs {want}");
            }
            // each removal makes the well shallower: ∫ΔV = 4Cγ
            let new_depth = area(&current);
            assert!((new_depth - depth - 4.0 * g).abs() < 1e-3 * g, "{new_depth} vs {depth} after {removed}");
            depth = new_depth;
        }
    }

    #[test]
    fn free_jost_modulus_is_one() {
        let pot = free(0.005, 3000);
        for f in jost_modulus_forward(&pot, &[0.3, 1.0, 4.0]).unwrap() {
            assert!((f - 1.0).abs() < 1e-8, "{f}");
        }
        let bump = PotentialCurve::from_fn(0.01, 300, 1.0, |_| 1.0).unwrap();
        assert!(matches!(jost_modulus_forward(&bump, &[1.0]), Err(GlmError::NoAsymptoticRegion { .. })));
    }

    #[test]
    fn asymptotics_single_state() {
        let pot = free(0.005, 6000);
        let state = BoundStateSpec::new(1.0, 0.1).unwrap();
        let (v1, _) = add_bound_state(&pot, state).unwrap();
        let rep = check_asymptotics(&v1, &pot, &[state]);
        assert!((rep.slope_ratio() - 1.0).abs() < 0.1, "{rep:?}");
        assert!((rep.rate_ratio() - 1.0).abs() < 0.05, "{rep:?}");
        let none = check_asymptotics(&pot, &pot, &[]);
        assert_eq!(none.slope_fit, 0.0);
    }

    #[test]
    fn bargmann_rejects_equal_parameters() {
        let pot = free(0.005, 6000);
        assert!(matches!(bargmann_deform(&pot, 1.0, 1.0), Err(GlmError::DegenerateParameters { .. })));
    }

    #[test]
    fn bargmann_moves_the_level() {
        let pot = free(0.005, 6000);
        let (v1, _) = add_bound_state(&pot, BoundStateSpec::new(1.0, 0.1).unwrap()).unwrap();
        let deformed = bargmann_deform(&v1, 0.8, 1.0).unwrap();
        // the factor (k + ia)/(k + ib) takes the level away
        assert!(bound_state_gammas(&deformed).unwrap().is_empty());
        let ks = [0.5, 1.0, 2.0, 3.0];
        let before = jost_modulus_forward(&v1, &ks).unwrap();
        let after = jost_modulus_forward(&deformed, &ks).unwrap();
        for ((k, f1), f2) in ks.iter().zip(&before).zip(&after) {
            let factor = ((k * k + 0.64) / (k * k + 1.0)).sqrt();
            assert!((f2 - factor * f1).abs() < 1e-4, "k={k}");
        }
        // free base: V(0) = -2C(b² - a²)
        assert!((deformed.v[0] + 2.0 * (1.0 - 0.64)).abs() < 1e-4, "{}", deformed.v[0]);
        let (replaced, _) = bargmann_replace(&v1, 0.8, 1.0, 0.1).unwrap();
        let g = bound_state_gammas(&replaced).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0] / 0.8 - 1.0).abs() < 1e-6);
    }
}
