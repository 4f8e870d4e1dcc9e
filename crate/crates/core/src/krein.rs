//! Discretised Krein equation
//!
//!   Γ_x(s) + H(s) + ∫_0^x Γ_x(t) H(t - s) dt = 0,   x = 2r,
//!
//! its diagonal G(x) = Γ_x(x), and the potential V₀(r) = 4C(G² - dG/dx)
//! of the partner without bound states.
//!
//! The integral uses the composite 3/8 rule on m = 3n intervals, giving the
//! dense system (I + ΔU)Γ = -H with U_{kj} = g_j H_{|j-k|}.

use crate::gk::GkModel;
use crate::hfun::{self, HTable, HfunError};
use crate::linalg::{self, LinalgError};
use crate::potential::{PotentialCurve, PotentialError};
use crate::quadrature::{self, QuadError};
use log::debug;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KreinError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Hfun(#[from] HfunError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("H table has {have} samples, {need} needed")]
    TableTooShort { have: usize, need: usize },
    #[error("need at least 3 G samples on a uniform grid, got {0}")]
    GridTooCoarse(usize),
    #[error("G samples are not on a uniform x grid")]
    NonUniformGrid,
    #[error("r = {r}, r' = {rp} do not fall on grid nodes")]
    OffGrid { r: f64, rp: f64 },
}

pub type Result<T> = std::result::Result<T, KreinError>;

/// Per-x results of the Krein solve.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinSolution {
    pub h: f64,
    /// (x, G(x)) with x = 3n h.
    pub g_values: Vec<(f64, f64)>,
    /// Γ_{3n,0}, the first element of each solution vector.
    pub gamma_first: Option<Vec<f64>>,
}

/// Weights Δ·g_i of the composite 3/8 rule on m = 3n intervals.
pub fn quadrature_weights(m: usize, h: f64) -> Result<Vec<f64>> {
    Ok(quadrature::weights(m, h)?)
}

/// The matrix I + ΔU of the m = 3n system, row-major.
pub fn system_matrix(table: &HTable, n: usize) -> Result<Vec<f64>> {
    let m = 3 * n;
    if table.len() < m + 1 {
        return Err(KreinError::TableTooShort { have: table.len(), need: m + 1 });
    }
    let w = quadrature::weights(m, table.h)?;
    let dim = m + 1;
    let mut a = vec![0.0; dim * dim];
    for k in 0..dim {
        let row = &mut a[k * dim..(k + 1) * dim];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = w[j] * table.values[j.abs_diff(k)];
        }
        row[k] += 1.0;
    }
    Ok(a)
}

/// Full solution vector Γ_{3n,0..3n}. n = 0 gives the trivial Γ_{0,0} = -H₀.
pub fn solve_gamma_full(table: &HTable, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        if table.is_empty() {
            return Err(KreinError::TableTooShort { have: 0, need: 1 });
        }
        return Ok(vec![-table.values[0]]);
    }
    let mut a = system_matrix(table, n)?;
    let mut rhs: Vec<f64> = table.values[..=3 * n].iter().map(|v| -v).collect();
    let stats = linalg::solve_in_place(&mut a, &mut rhs)?;
    debug!("krein solve n={n}: min relative pivot {:.3e}", stats.min_rel_pivot);
    Ok(rhs)
}

/// G(x) = Γ_{3n,3n} for each n in `n_list` (solved independently, in parallel).
pub fn g_function(table: &HTable, n_list: &[usize]) -> Result<KreinSolution> {
    let need = n_list.iter().max().map_or(1, |n| 3 * n + 1);
    if table.len() < need {
        return Err(KreinError::TableTooShort { have: table.len(), need });
    }
    let mut sorted: Vec<usize> = n_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let solved = sorted
        .par_iter()
        .map(|&n| solve_gamma_full(table, n).map(|g| (n, g[0], *g.last().unwrap())))
        .collect::<Result<Vec<_>>>()?;
    Ok(KreinSolution {
        h: table.h,
        g_values: solved.iter().map(|&(n, _, g)| (3.0 * n as f64 * table.h, g)).collect(),
        gamma_first: Some(solved.iter().map(|&(_, f, _)| f).collect()),
    })
}

fn pattern_at(m: usize, j: usize) -> f64 {
    // g^{(m)}_j, with the empty rule at m = 0
    if m == 0 {
        0.0
    } else if j == 0 || j == m {
        1.0
    } else if j % 3 == 0 {
        2.0
    } else {
        3.0
    }
}

/// Second-order coefficient S_m of the Γ_{m,0} recurrence.
pub fn s_m(table: &HTable, m: usize) -> f64 {
    let h = |k: usize| table.values[k];
    if m == 0 {
        // direct: Σ_{i,j} g_i g_j H_i H_|i-j| H_j over the first panel
        let g = [1.0, 3.0, 3.0, 1.0];
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += g[i] * g[j] * h(i) * h(i.abs_diff(j)) * h(j);
            }
        }
        return s;
    }
    let mut sum = 0.0;
    for j in 0..m {
        sum += pattern_at(m, j)
            * h(j)
            * (h(m) * h(m - j) + 3.0 * h(m + 1) * h(m + 1 - j) + 3.0 * h(m + 2) * h(m + 2 - j) + h(m + 3) * h(m + 3 - j));
    }
    2.0 * sum
        + h(0) * (3.0 * h(m).powi(2) + 9.0 * h(m + 1).powi(2) + 9.0 * h(m + 2).powi(2) + h(m + 3).powi(2))
        + 6.0 * h(1) * (h(m + 3) * h(m + 2) + 3.0 * h(m + 2) * h(m + 1) + 2.0 * h(m + 1) * h(m))
        + 6.0 * h(2) * (h(m + 3) * h(m + 1) + 2.0 * h(m + 2) * h(m))
        + 4.0 * h(3) * h(m + 3) * h(m)
}

fn panel_sq(table: &HTable, m: usize) -> f64 {
    let h = |k: usize| table.values[k];
    h(m).powi(2) + 3.0 * h(m + 1).powi(2) + 3.0 * h(m + 2).powi(2) + h(m + 3).powi(2)
}

/// Γ_{m,0} by stepping Γ_{m+3,0} = Γ_{m,0} + Δ(H_m² + 3H_{m+1}² + 3H_{m+2}² + H_{m+3}²) - Δ²S_m
/// up from Γ_{0,0} = -H₀, keeping terms through Δ^order.
pub fn gamma_first_series(table: &HTable, m: usize, order: usize) -> Result<f64> {
    if m % 3 != 0 {
        return Err(QuadError::NotMultipleOfThree(m).into());
    }
    if table.len() < m + 1 {
        return Err(KreinError::TableTooShort { have: table.len(), need: m + 1 });
    }
    let delta = 3.0 * table.h / 8.0;
    let mut g = -table.values[0];
    let mut k = 0;
    while k < m {
        if order >= 1 {
            g += delta * panel_sq(table, k);
        }
        if order >= 2 {
            g -= delta * delta * s_m(table, k);
        }
        k += 3;
    }
    Ok(g)
}

/// [G(x)]² at x = m h from 8G² = H_m² + 3H_{m+1}² + 3H_{m+2}² + H_{m+3}² - Δ S_m.
pub fn g_squared_series(table: &HTable, m: usize) -> Result<f64> {
    if m % 3 != 0 {
        return Err(QuadError::NotMultipleOfThree(m).into());
    }
    if table.len() < m + 4 {
        return Err(KreinError::TableTooShort { have: table.len(), need: m + 4 });
    }
    let delta = 3.0 * table.h / 8.0;
    Ok((panel_sq(table, m) - delta * s_m(table, m)) / 8.0)
}

/// V₀(r) = 4C(G² - dG/dx) at r = x/2. dG/dx by centred differences,
/// second-order one-sided at the two ends.
pub fn potential_from_g(sol: &KreinSolution, c: f64) -> Result<PotentialCurve> {
    let n = sol.g_values.len();
    if n < 3 {
        return Err(KreinError::GridTooCoarse(n));
    }
    let x: Vec<f64> = sol.g_values.iter().map(|p| p.0).collect();
    let g: Vec<f64> = sol.g_values.iter().map(|p| p.1).collect();
    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;
    if !(dx > 0.0) || x.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx) {
        return Err(KreinError::NonUniformGrid);
    }
    let deriv = derivative(&g, dx);
    let v = (0..n).map(|i| 4.0 * c * (g[i] * g[i] - deriv[i])).collect();
    Ok(PotentialCurve::new(x.iter().map(|x| x / 2.0).collect(), v, c)?)
}

/// Second-order finite-difference derivative on a uniform grid.
pub fn derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "derivative needs three samples");
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * dx);
    }
    d
}

/// Gelfand-Levitan kernel without bound states, G(r, r') = H(r - r') - H(r + r').
pub fn gl_kernel_nobound(model: &GkModel, r: f64, rp: f64) -> Result<f64> {
    Ok(hfun::h_total(model, r - rp)? - hfun::h_total(model, r + rp)?)
}

/// K(r, r') = Γ_{2r}(r - r') - Γ_{2r}(r + r') from the full solution at x = 2r.
/// Both 2r/(3h) and (r ± r')/h must be integers.
pub fn kernel_from_gamma(table: &HTable, r: f64, rp: f64) -> Result<f64> {
    let h = table.h;
    let on_grid = |v: f64| {
        let k = (v / h).round();
        ((v / h - k).abs() < 1e-6).then_some(k as usize)
    };
    let off = KreinError::OffGrid { r, rp };
    if !(rp >= 0.0 && rp <= r) {
        return Err(off);
    }
    let m = on_grid(2.0 * r).ok_or_else(|| off.clone())?;
    if m % 3 != 0 {
        return Err(off);
    }
    let lo = on_grid(r - rp).ok_or_else(|| off.clone())?;
    let hi = on_grid(r + rp).ok_or(off)?;
    let gamma = solve_gamma_full(table, m / 3)?;
    Ok(gamma[lo] - gamma[hi])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_table(h: f64, n: usize, eps: f64) -> HTable {
        HTable::new(h, (0..=3 * n).map(|k| eps * 1.5 * (-(k as f64) * h).exp()).collect())
    }

    #[test]
    fn weights_match_rule() {
        let w = quadrature_weights(3, 1.0).unwrap();
        assert_eq!(w, vec![0.375, 1.125, 1.125, 0.375]);
        assert!(quadrature_weights(7, 1.0).is_err());
    }

    #[test]
    fn matrix_structure() {
        let t = toy_table(0.1, 3, 1.0);
        let a = system_matrix(&t, 3).unwrap();
        let g = quadrature::pattern(9).unwrap();
        let delta = 0.375 * 0.1;
        for k in 0..10 {
            for j in 0..10 {
                let want = if j == k { 1.0 } else { 0.0 } + delta * g[j] * t.values[j.abs_diff(k)];
                assert_eq!(a[k * 10 + j], want);
            }
        }
    }

    #[test]
    fn zero_kernel() {
        let t = HTable::new(0.1, vec![0.0; 31]);
        assert!(solve_gamma_full(&t, 10).unwrap().iter().all(|v| *v == 0.0));
        let sol = g_function(&t, &[0, 5, 10]).unwrap();
        assert!(sol.g_values.iter().all(|p| p.1 == 0.0));
        assert_eq!(gamma_first_series(&t, 9, 2).unwrap(), 0.0);
        assert_eq!(g_squared_series(&t, 9).unwrap(), 0.0);
        let v = potential_from_g(&sol, 1.0).unwrap();
        assert!(v.v.iter().all(|x| *x == 0.0));
        assert_eq!(kernel_from_gamma(&t, 0.6, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn g_at_origin() {
        let t = toy_table(0.1, 2, 1.0);
        let sol = g_function(&t, &[0, 2]).unwrap();
        assert_eq!(sol.g_values[0], (0.0, -1.5));
    }

    #[test]
    fn first_neumann_term_dominates_for_small_kernels() {
        let eps = 1e-6;
        let t = toy_table(0.01, 30, eps);
        let g = solve_gamma_full(&t, 30).unwrap();
        let hx = t.values[90];
        assert!((g[90] + hx).abs() < 1e-3 * hx.abs());
    }

    #[test]
    fn first_order_step_from_origin() {
        let t = toy_table(0.1, 1, 1.0);
        let d = 0.375 * 0.1;
        let h = &t.values;
        let want = -h[0] + d * (h[0] * h[0] + 3.0 * h[1] * h[1] + 3.0 * h[2] * h[2] + h[3] * h[3]);
        assert_eq!(gamma_first_series(&t, 3, 1).unwrap(), want);
        assert!(gamma_first_series(&t, 4, 1).is_err());
    }

    /// The recurrence coefficient must equal the difference of the
    /// second-order Neumann terms of consecutive systems.
    #[test]
    fn s_m_equals_neumann_difference() {
        let t = HTable::new(0.1, (0..40).map(|k| ((k as f64) * 0.37).sin() + 0.2).collect());
        let second = |m: usize| {
            let mut s = 0.0;
            for i in 0..=m {
                for j in 0..=m {
                    s += pattern_at(m, i) * pattern_at(m, j) * t.values[i] * t.values[i.abs_diff(j)] * t.values[j];
                }
            }
            s
        };
        for m in [0, 3, 6, 12, 21] {
            let want = second(m + 3) - second(m);
            let got = s_m(&t, m);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "m={m}: {got} vs {want}");
        }
    }

    #[test]
    fn potential_exact_for_quadratic_g() {
        let (a, b, c) = (0.3, -0.2, 0.05);
        let g_values: Vec<(f64, f64)> = (0..8).map(|i| {
            let x = i as f64 * 0.3;
            (x, a + b * x + c * x * x)
        }).collect();
        let sol = KreinSolution { h: 0.1, g_values: g_values.clone(), gamma_first: None };
        let v = potential_from_g(&sol, 2.0).unwrap();
        for (i, (x, g)) in g_values.iter().enumerate() {
            let want = 8.0 * (g * g - b - 2.0 * c * x);
            assert!((v.v[i] - want).abs() < 1e-12);
            assert_eq!(v.r[i], x / 2.0);
        }
        let short = KreinSolution { h: 0.1, g_values: g_values[..2].to_vec(), gamma_first: None };
        assert!(matches!(potential_from_g(&short, 1.0), Err(KreinError::GridTooCoarse(2))));
    }

    #[test]
    fn kernel_from_gamma_grid_checks() {
        let t = toy_table(0.1, 4, 1.0);
        assert_eq!(kernel_from_gamma(&t, 0.6, 0.0).unwrap(), 0.0);
        assert!(matches!(kernel_from_gamma(&t, 0.6, 0.05), Err(KreinError::OffGrid { .. })));
        assert!(matches!(kernel_from_gamma(&t, 0.5, 0.1), Err(KreinError::OffGrid { .. })));
    }

    #[test]
    fn gl_kernel_symmetry_and_toy_value() {
        let toy = crate::gk::parse_gk_config(include_str!("../configs/toy_lorentzian.cfg")).unwrap();
        assert_eq!(gl_kernel_nobound(&toy, 0.7, 0.0).unwrap(), 0.0);
        let a = gl_kernel_nobound(&toy, 0.7, 0.2).unwrap();
        let b = gl_kernel_nobound(&toy, 0.2, 0.7).unwrap();
        assert!((a - b).abs() < 1e-15);
        let v = gl_kernel_nobound(&toy, 1.0, 1.0).unwrap();
        assert!((v - 1.5 * (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }
}
