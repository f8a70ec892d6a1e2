//! The scaled Dawson-type integral `φ(τ) = e^{-τ²/2} ∫₀^τ e^{s²/2} ds` and
//! the associated change of coordinate `T(τ) = ∫₀^τ e^{s²/2} ds`.
//!
//! `φ` solves `φ' + τφ = 1`, `φ(0) = 0`, and satisfies `φ(τ) ≤ τ`. It rises
//! to its maximum at `τ* ≈ 1.307` (where `τφ = 1`), then decays like
//! `1/τ + 1/τ³ + …`, so `τφ(τ) < 1` before the peak and tends to 1 from
//! above past it. For `τ ≤ 2` the alternating series
//! `Σ (-1)^n τ^{2n+1}/(2n+1)!!` is used; for moderate τ, adaptive
//! quadrature of `∫₀^τ e^{(s²-τ²)/2} ds` (integrand in (0,1], no overflow);
//! far out, the asymptotic series.

/// Relative accuracy target for `phi`.
pub const PHI_EPS: f64 = 1e-14;

/// `φ(τ)` for `τ ≥ 0`, relative error well below 1e-12.
///
/// Three regimes: Maclaurin series up to 2; adaptive quadrature of the
/// rescaled integrand on (2, 8]; beyond 8 the divergent asymptotic series
/// `Σ (2n-1)!!/τ^{2n+1}` truncated at its smallest term (≈ 2e-14 relative
/// at τ = 8, smaller further out — quadrature there would need the peak of
/// width 1/τ resolved against curvature τ⁴ and is infeasible).
pub fn phi(tau: f64) -> f64 {
    assert!(tau >= 0.0 && tau.is_finite(), "phi needs finite τ ≥ 0");
    if tau <= 2.0 {
        phi_series(tau)
    } else if tau <= 8.0 {
        phi_quadrature(tau)
    } else {
        phi_asymptotic(tau)
    }
}

/// `(1/τ)·Σ (2n-1)!!/τ^{2n}`, truncated at the smallest term.
fn phi_asymptotic(tau: f64) -> f64 {
    let t2 = tau * tau;
    let mut term = 1.0 / tau;
    let mut sum = term;
    let mut n = 0u32;
    loop {
        let next = term * (2.0 * n as f64 + 1.0) / t2;
        if next >= term || next <= f64::EPSILON * sum {
            if next < term {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        n += 1;
    }
    sum
}

/// Maclaurin series `τ − τ³/3 + τ⁵/15 − …` (ratio −τ²/(2n+3)).
fn phi_series(tau: f64) -> f64 {
    let t2 = tau * tau;
    let mut term = tau;
    let mut sum = tau;
    let mut n = 0u32;
    loop {
        term *= -t2 / (2.0 * n as f64 + 3.0);
        sum += term;
        n += 1;
        if term.abs() <= PHI_EPS * sum.abs() * 0.01 || n > 200 {
            break;
        }
    }
    sum
}

/// Adaptive Simpson on `∫₀^τ e^{(s²-τ²)/2} ds`.
fn phi_quadrature(tau: f64) -> f64 {
    let f = |s: f64| ((s * s - tau * tau) / 2.0).exp();
    adaptive_simpson(&f, 0.0, tau, 1e-15, 40)
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// `φ'(τ) = 1 − τφ(τ)` (the defining ODE).
pub fn phi_prime(tau: f64) -> f64 {
    1.0 - tau * phi(tau)
}

/// `φ''(τ) = −φ(τ) − τφ'(τ)` (differentiate the ODE).
pub fn phi_second(tau: f64) -> f64 {
    let p = phi(tau);
    let p1 = 1.0 - tau * p;
    -p - tau * p1
}

/// `T(τ) = ∫₀^τ e^{s²/2} ds`, by its own (positive-term) power series
/// `Σ τ^{2n+1} / ((2n+1)·2ⁿ·n!)` — an evaluation route independent of `φ`.
pub fn t_coord(tau: f64) -> f64 {
    assert!(tau >= 0.0 && tau.is_finite());
    let t2h = tau * tau / 2.0;
    let mut term = tau; // τ^{2n+1}/(2ⁿ n!) at n = 0
    let mut sum = tau;
    let mut n = 1u32;
    loop {
        term *= t2h / n as f64;
        let add = term / (2.0 * n as f64 + 1.0);
        sum += add;
        if add <= f64::EPSILON * sum || n > 700 {
            break;
        }
        n += 1;
    }
    sum
}

/// Inverse of [`t_coord`] by safeguarded Newton iteration (`T' = e^{τ²/2}`).
pub fn tau_from_t(t: f64) -> f64 {
    assert!(t >= 0.0 && t.is_finite());
    if t == 0.0 {
        return 0.0;
    }
    // initial guess: τ ≈ T for small, √(2 ln T) scale for large
    let mut tau = if t < 1.0 { t } else { (2.0 * (t.ln() + 1.0).max(1.0)).sqrt() };
    let (mut lo, mut hi) = (0.0f64, f64::MAX);
    for _ in 0..100 {
        let ft = t_coord(tau) - t;
        if ft > 0.0 {
            hi = hi.min(tau);
        } else {
            lo = lo.max(tau);
        }
        let step = ft * (-tau * tau / 2.0).exp();
        let mut next = tau - step;
        if !(next > lo && next < hi) {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { tau * 2.0 };
        }
        if (next - tau).abs() <= 1e-16 * tau.max(1.0) {
            return next;
        }
        tau = next;
    }
    tau
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_at_zero_and_one() {
        assert_eq!(phi(0.0), 0.0);
        // quadrature oracle for the spec value φ(1) ≈ 0.7248
        let oracle = adaptive_simpson(&|s: f64| (s * s / 2.0).exp(), 0.0, 1.0, 1e-15, 40)
            * (-0.5f64).exp();
        assert!((phi(1.0) - oracle).abs() < 1e-13);
        assert!((phi(1.0) - 0.7248).abs() < 1e-3);
    }

    #[test]
    fn series_and_quadrature_agree_at_crossover() {
        for tau in [1.5, 1.9, 2.0, 2.1, 2.5] {
            let s = phi_series(tau);
            let q = phi_quadrature(tau);
            assert!((s - q).abs() <= 1e-13 * s.abs(), "τ={tau}: {s} vs {q}");
        }
    }

    #[test]
    fn ode_residual_by_central_differences() {
        // |φ' + τφ − 1| ≤ 1e-10 with φ' from a 5-point stencil
        let h = 2e-3;
        let mut worst = 0.0f64;
        let mut tau = 0.05f64;
        while tau <= 10.0 {
            let d = (-phi(tau + 2.0 * h) + 8.0 * phi(tau + h) - 8.0 * phi(tau - h)
                + phi(tau - 2.0 * h))
                / (12.0 * h);
            let res = (d + tau * phi(tau) - 1.0).abs();
            worst = worst.max(res);
            tau += 0.173;
        }
        assert!(worst <= 1e-10, "worst ODE residual {worst:e}");
    }

    #[test]
    fn phi_bounds() {
        // φ ≤ τ everywhere (φ' = 1 − τφ ≤ 1); φ increases up to its peak
        // at τ* ≈ 1.307 where τφ crosses 1; past the peak τφ(τ) → 1 from
        // above with a bump of at most ~0.3, and ~1 + 1/τ² in the tail.
        let mut tau = 0.01f64;
        let mut prev = 0.0f64;
        while tau < 60.0 {
            let p = phi(tau);
            assert!(p > 0.0 && p <= tau, "0 < φ ≤ τ fails at {tau}");
            if tau <= 1.3 {
                assert!(tau * p < 1.0, "τφ < 1 fails at {tau}");
                assert!(p > prev, "φ not increasing at {tau}");
            }
            assert!(tau * p < 1.35, "τφ < 1.35 fails at {tau}");
            if tau >= 5.0 {
                assert!(
                    (tau * p - 1.0).abs() <= 1.5 / (tau * tau),
                    "τφ → 1 tail bound fails at {tau}: {}",
                    tau * p
                );
            }
            prev = p;
            tau *= 1.19;
        }
    }

    #[test]
    fn quadrature_and_asymptotic_agree_at_crossover() {
        // the asymptotic min-term is ~2e-14 relative at τ = 8 and shrinks
        // fast beyond
        for tau in [7.9, 8.0, 8.1, 9.0, 12.0] {
            let q = phi_quadrature(tau);
            let a = phi_asymptotic(tau);
            assert!((q - a).abs() <= 1e-12 * q, "τ={tau}: {q} vs {a}");
        }
    }

    #[test]
    fn t_coord_round_trip() {
        for tau in [1e-6, 0.01, 0.5, 1.0, 2.0, 3.5, 6.0, 9.0] {
            let t = t_coord(tau);
            let back = tau_from_t(t);
            assert!(
                (back - tau).abs() <= 1e-12 * tau.max(1.0),
                "round trip at {tau}: {back}"
            );
        }
        assert_eq!(tau_from_t(0.0), 0.0);
    }

    #[test]
    fn t_coord_consistent_with_phi() {
        // T(τ) = φ(τ)·e^{τ²/2}: two independent evaluation routes
        for tau in [0.3, 1.0, 2.0, 4.0, 7.0] {
            let lhs = t_coord(tau);
            let rhs = phi(tau) * (tau * tau / 2.0).exp();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs, "τ={tau}: {lhs} vs {rhs}");
        }
    }
}
