//! Quadrature helpers: the composite Simpson 3/8 weights shared by the
//! Krein discretisation and the cumulative integrals of the bound-state
//! ladder, plus an adaptive Gauss-Kronrod integrator used by the oracles.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("node count {0} is not a positive multiple of three")]
    NotMultipleOfThree(usize),
    #[error("adaptive quadrature stopped at error {achieved:e} (wanted {wanted:e})")]
    ToleranceNotMet { achieved: f64, wanted: f64 },
}

/// Integer pattern g_i of the composite 3/8 rule on m = 3n intervals:
/// 1 at both ends, 2 at interior multiples of three, 3 elsewhere.
pub fn pattern(m: usize) -> Result<Vec<f64>, QuadError> {
    if m == 0 || m % 3 != 0 {
        return Err(QuadError::NotMultipleOfThree(m));
    }
    Ok((0..=m)
        .map(|i| {
            if i == 0 || i == m {
                1.0
            } else if i % 3 == 0 {
                2.0
            } else {
                3.0
            }
        })
        .collect())
}

/// Composite 3/8 weights Δ·g_i with Δ = 3h/8.
pub fn weights(m: usize, h: f64) -> Result<Vec<f64>, QuadError> {
    let delta = 3.0 * h / 8.0;
    Ok(pattern(m)?.into_iter().map(|g| g * delta).collect())
}

/// Running integral F_i = ∫_0^{ih} f on a uniform grid.
///
/// Nodes at multiples of three come from the 3/8 rule; the two nodes in
/// between use the cubic through the surrounding four samples, so every
/// entry is fourth-order accurate. Grids shorter than four samples fall back
/// to the trapezoid rule.
pub fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 4 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        }
        return out;
    }
    let mut i = 0;
    while i + 3 < n {
        let (f0, f1, f2, f3) = (f[i], f[i + 1], f[i + 2], f[i + 3]);
        let base = out[i];
        // cubic-interpolant integrals over [0,h], [0,2h], [0,3h]
        out[i + 1] = base + h / 24.0 * (9.0 * f0 + 19.0 * f1 - 5.0 * f2 + f3);
        out[i + 2] = base + h / 3.0 * (f0 + 4.0 * f1 + f2);
        out[i + 3] = base + 3.0 * h / 8.0 * (f0 + 3.0 * f1 + 3.0 * f2 + f3);
        i += 3;
    }
    // leftover one or two nodes: integrate backwards over the last four samples
    while i + 1 < n {
        let j = i + 1;
        let (f0, f1, f2, f3) = (f[j - 3], f[j - 2], f[j - 1], f[j]);
        out[j] = out[j - 1] + h / 24.0 * (f0 - 5.0 * f1 + 19.0 * f2 + 9.0 * f3);
        i += 1;
    }
    out
}

/// Tail integrals T_i = ∫_{ih}^{end} f, built like [`cumulative`] from the far end.
pub fn cumulative_tail(f: &[f64], h: f64) -> Vec<f64> {
    let rev: Vec<f64> = f.iter().rev().copied().collect();
    let mut t = cumulative(&rev, h);
    t.reverse();
    t
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel; returns (estimate, |K15 - G7|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * hw, ((k - g) * hw).abs())
}

/// Adaptive G7K15 integration to |error| <= max(abs_tol, rel_tol·|I|).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<f64, QuadError> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let wanted = abs_tol.max(rel_tol * total.abs());
        if err <= wanted {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(QuadError::ToleranceNotMet {
                achieved: err,
                wanted,
            });
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty panel list");
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(f, pa, mid);
        let (v2, e2) = gk15(f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}
