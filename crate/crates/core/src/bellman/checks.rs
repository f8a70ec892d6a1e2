//! Grid and sample certification of the Bellman candidate's properties.
//!
//! Every check is deterministic given its seed; violation reports carry the
//! worst sample point for replay. Sample evaluation is pure and runs in
//! parallel with order-preserving collection, so reports are reproducible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::phi::{phi, phi_prime, phi_second, t_coord, tau_from_t};
use super::{theta, BellmanParams};

/// `min(γ, Kφ(τ))` without the domain guard, for finite-difference stencils
/// that step slightly past the hyperbolas (the formula extends smoothly).
fn theta_unchecked(gamma: f64, tau_coord: f64, params: &BellmanParams) -> f64 {
    gamma.min(params.k_theta * phi(tau_coord))
}

fn on_flat_branch(gamma: f64, tau_coord: f64, params: &BellmanParams) -> bool {
    gamma <= params.k_theta * phi(tau_coord)
}

/// Largest eigenvalue of a symmetric 2×2 matrix `[[a, b], [b, c]]`.
fn max_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

/// Five-point central first derivative.
fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Five-point central second derivative.
fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

/// Cross partial by the four-point rule with one Richardson step.
fn d_cross(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    let g = |hx: f64, hy: f64| {
        (f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy))
            / (4.0 * hx * hy)
    };
    let coarse = g(hx, hy);
    let fine = g(0.5 * hx, 0.5 * hy);
    (4.0 * fine - coarse) / 3.0
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

// ---------------------------------------------------------------------------
// drift-concavity matrix
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct HessianReport {
    pub grid: usize,
    pub smooth_points: usize,
    pub corner_points: usize,
    pub corner_margin_rel: f64,
    /// Max eigenvalue of the branch-formula matrix (0 on both branches up
    /// to rounding in the ODE identities).
    pub max_eig_analytic: f64,
    /// Max eigenvalue of the finite-difference matrix.
    pub max_eig_fd: f64,
    /// Largest one-sided (raw) second difference across the corner; must
    /// stay ≤ tolerance (the min of two branches kinks downward).
    pub corner_max_second_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluate the matrix `[[Θ_γγ, Θ_γτ], [Θ_γτ, Θ_ττ + Θ + τΘ_τ − γΘ_γ]]`
/// over an `n×n` grid of `H` (τ log-spaced, `s = γτ` linear), excluding a
/// relative margin around the branch-change curve `γ = Kφ(τ)`, which is
/// covered by one-sided second differences instead.
pub fn check_hessian_drift(
    params: &BellmanParams,
    n: usize,
    tau_range: (f64, f64),
) -> HessianReport {
    let margin_rel = 1e-3;
    let tol = 1e-8;
    let (tau_lo, tau_hi) = tau_range;
    let taus: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (tau_lo.ln() + t * (tau_hi.ln() - tau_lo.ln())).exp()
        })
        .collect();
    let ss: Vec<f64> = (0..n)
        .map(|i| 1.0 + (params.q - 1.0) * i as f64 / (n - 1) as f64)
        .collect();

    let points: Vec<(f64, f64)> = taus
        .iter()
        .flat_map(|&t| ss.iter().map(move |&s| (s / t, t)))
        .collect();

    let results: Vec<(Option<(f64, f64)>, Option<f64>)> = points
        .par_iter()
        .map(|&(gamma, tau)| {
            let kphi = params.k_theta * phi(tau);
            let scale = gamma.max(kphi);
            if (gamma - kphi).abs() < margin_rel * scale {
                // corner neighborhood: one-sided second differences of the
                // min along both coordinate lines
                let h = margin_rel * scale * 4.0;
                let g_line = |x: f64| theta_unchecked(x, tau, params);
                let t_line = |x: f64| theta_unchecked(gamma, x, params);
                let sd_g = g_line(gamma + h) - 2.0 * g_line(gamma) + g_line(gamma - h);
                let ht = (margin_rel * 4.0 * tau).min(0.45 * tau);
                let sd_t = t_line(tau + ht) - 2.0 * t_line(tau) + t_line(tau - ht);
                (None, Some(sd_g.max(sd_t)))
            } else {
                // analytic branch matrix
                let analytic = if on_flat_branch(gamma, tau, params) {
                    // Θ = γ: all second derivatives vanish; drift term
                    // Θ + τ·Θ_τ − γ·Θ_γ = γ + 0 − γ
                    let drift = gamma + tau * 0.0 - gamma * 1.0;
                    max_eigenvalue(0.0, 0.0, drift)
                } else {
                    // Θ = Kφ: γ-derivatives vanish; Θ_ττ + Θ + τΘ_τ is
                    // K(φ'' + φ + τφ'), zero by the ODE
                    let drift = params.k_theta
                        * (phi_second(tau) + phi(tau) + tau * phi_prime(tau));
                    max_eigenvalue(0.0, 0.0, drift)
                };
                // finite-difference matrix (guard: stencil must stay on one
                // branch, otherwise defer to the corner treatment). The τ
                // step is floored so the ε|Θ|/h² stencil roundoff stays
                // below the 1e-8 gate even where τ is small; Richardson
                // keeps the h⁴ truncation of both stencils out of the way.
                let hg = 3e-3 * gamma.max(0.3);
                let ht = (0.4 * tau).min(6e-3 * (tau / 5.0).max(1.0));
                let same_branch = [
                    (gamma - 2.0 * hg, tau),
                    (gamma + 2.0 * hg, tau),
                    (gamma, tau - 2.0 * ht),
                    (gamma, tau + 2.0 * ht),
                    (gamma - hg, tau - ht),
                    (gamma + hg, tau + ht),
                ]
                .iter()
                .all(|&(g, t)| {
                    on_flat_branch(g, t, params) == on_flat_branch(gamma, tau, params)
                });
                if !same_branch {
                    let h = margin_rel * scale * 4.0;
                    let g_line = |x: f64| theta_unchecked(x, tau, params);
                    let sd = g_line(gamma + h) - 2.0 * g_line(gamma) + g_line(gamma - h);
                    return (Some((analytic, f64::NEG_INFINITY)), Some(sd));
                }
                let f_g = |x: f64| theta_unchecked(x, tau, params);
                let f_t = |x: f64| theta_unchecked(gamma, x, params);
                let f2 = |g: f64, t: f64| theta_unchecked(g, t, params);
                let richardson2 = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
                    (16.0 * d2(f, x, 0.5 * h) - d2(f, x, h)) / 15.0
                };
                let richardson1 = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
                    (16.0 * d1(f, x, 0.5 * h) - d1(f, x, h)) / 15.0
                };
                let t_gg = richardson2(&f_g, gamma, hg);
                let t_tt = richardson2(&f_t, tau, ht);
                let t_gt = d_cross(&f2, gamma, tau, hg, ht);
                let t_t = richardson1(&f_t, tau, ht);
                let t_g = richardson1(&f_g, gamma, hg);
                let drift = t_tt + theta_unchecked(gamma, tau, params) + tau * t_t - gamma * t_g;
                let fd = max_eigenvalue(t_gg, t_gt, drift);
                (Some((analytic, fd)), None)
            }
        })
        .collect();

    let mut max_analytic = f64::NEG_INFINITY;
    let mut max_fd = f64::NEG_INFINITY;
    let mut corner_max = f64::NEG_INFINITY;
    let mut smooth = 0usize;
    let mut corner = 0usize;
    for (eig, sd) in results {
        if let Some((a, f)) = eig {
            smooth += 1;
            max_analytic = max_analytic.max(a);
            max_fd = max_fd.max(f);
        }
        if let Some(s) = sd {
            corner += 1;
            corner_max = corner_max.max(s);
        }
    }
    let pass = max_analytic <= tol && max_fd <= tol && corner_max <= tol;
    HessianReport {
        grid: points.len(),
        smooth_points: smooth,
        corner_points: corner,
        corner_margin_rel: margin_rel,
        max_eig_analytic: max_analytic,
        max_eig_fd: max_fd,
        corner_max_second_diff: corner_max,
        tolerance: tol,
        pass,
    }
}

// ---------------------------------------------------------------------------
// midpoint main inequality
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MainInequalityReport {
    pub samples_theta: usize,
    pub violations_theta: usize,
    pub worst_margin_theta: f64,
    pub worst_point_theta: [f64; 4],
    pub samples_b: usize,
    pub violations_b: usize,
    pub worst_margin_b: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check, on random and structured samples, that
/// `Θ(s·γ̄, τ̄/s)/s ≥ (Θ(γ₁,τ₁)+Θ(γ₂,τ₂))/2` with `s = √(1 + c·Δτ²)`,
/// and the equivalent three-variable form
/// `B(ū, v̄, λ + c·Δv²) ≥ (B(u₁,v₁,λ)+B(u₂,v₂,λ))/2`.
pub fn check_main_inequality(
    params: &BellmanParams,
    samples: usize,
    seed: u64,
) -> MainInequalityReport {
    let tol = -1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tau_lo, tau_hi) = (0.05f64, 10.0f64);

    // Θ-form samples: pairs in H with H-midpoint
    let mut theta_samples: Vec<[f64; 4]> = Vec::with_capacity(samples);
    // structured: equal τ, nearby τ, corner-straddling γ
    for i in 0..(samples / 20).max(100) {
        let t = tau_lo + (tau_hi - tau_lo) * (i as f64 / 100.0).fract();
        let s1 = 1.0 + (params.q - 1.0) * ((i as f64 * 0.37).fract());
        let s2 = 1.0 + (params.q - 1.0) * ((i as f64 * 0.61).fract());
        theta_samples.push([s1 / t, t, s2 / t, t]);
        let t2 = (t * 1.01).min(tau_hi);
        if ((s1 / t + s2 / t2) / 2.0) * ((t + t2) / 2.0) <= params.q {
            theta_samples.push([s1 / t, t, s2 / t2, t2]);
        }
        let kphi = params.k_theta * phi(t);
        if t * kphi >= 1.0 && t * kphi <= params.q {
            // straddle the branch curve
            theta_samples.push([kphi * 0.99, t, kphi * 1.01, t]);
        }
    }
    while theta_samples.len() < samples {
        let t1 = log_uniform(&mut rng, tau_lo, tau_hi);
        let t2 = log_uniform(&mut rng, tau_lo, tau_hi);
        let g1 = rng.gen_range(1.0..params.q) / t1;
        let g2 = rng.gen_range(1.0..params.q) / t2;
        let prod = 0.25 * (g1 + g2) * (t1 + t2);
        if (1.0..=params.q).contains(&prod) {
            theta_samples.push([g1, t1, g2, t2]);
        }
    }

    let margins: Vec<f64> = theta_samples
        .par_iter()
        .map(|&[g1, t1, g2, t2]| {
            let dt = t2 - t1;
            let s = (1.0 + params.c_drift * dt * dt).sqrt();
            let gm = 0.5 * (g1 + g2);
            let tm = 0.5 * (t1 + t2);
            let lhs = theta_unchecked(s * gm, tm / s, params) / s;
            let rhs = 0.5 * (theta_unchecked(g1, t1, params) + theta_unchecked(g2, t2, params));
            lhs - rhs
        })
        .collect();
    let (mut worst_t, mut worst_pt, mut viol_t) = (f64::INFINITY, [0.0; 4], 0usize);
    for (m, pt) in margins.iter().zip(&theta_samples) {
        if *m < worst_t {
            worst_t = *m;
            worst_pt = *pt;
        }
        if *m < tol {
            viol_t += 1;
        }
    }

    // B-form samples
    let mut b_samples: Vec<[f64; 5]> = Vec::with_capacity(samples);
    while b_samples.len() < samples {
        let lambda = log_uniform(&mut rng, 1e-2, 1e2);
        let sl = lambda.sqrt();
        let t1 = log_uniform(&mut rng, tau_lo, tau_hi);
        let t2 = log_uniform(&mut rng, tau_lo, tau_hi);
        let (v1, v2) = (t1 * sl, t2 * sl);
        let u1 = rng.gen_range(1.0..params.q) / v1;
        let u2 = rng.gen_range(1.0..params.q) / v2;
        let prod = 0.25 * (u1 + u2) * (v1 + v2);
        if (1.0..=params.q).contains(&prod) {
            b_samples.push([u1, v1, u2, v2, lambda]);
        }
    }
    let b_margins: Vec<f64> = b_samples
        .par_iter()
        .map(|&[u1, v1, u2, v2, lambda]| {
            let dv = v2 - v1;
            let um = 0.5 * (u1 + u2);
            let vm = 0.5 * (v1 + v2);
            let lhs_l = lambda + params.c_drift * dv * dv;
            let b = |u: f64, v: f64, l: f64| {
                let s = l.sqrt();
                theta_unchecked(u * s, v / s, params) / s
            };
            b(um, vm, lhs_l) - 0.5 * (b(u1, v1, lambda) + b(u2, v2, lambda))
        })
        .collect();
    let mut worst_b = f64::INFINITY;
    let mut viol_b = 0usize;
    for m in &b_margins {
        worst_b = worst_b.min(*m);
        if *m < tol {
            viol_b += 1;
        }
    }

    MainInequalityReport {
        samples_theta: theta_samples.len(),
        violations_theta: viol_t,
        worst_margin_theta: worst_t,
        worst_point_theta: worst_pt,
        samples_b: b_samples.len(),
        violations_b: viol_b,
        worst_margin_b: worst_b,
        tolerance: tol,
        pass: viol_t == 0 && viol_b == 0,
    }
}

// ---------------------------------------------------------------------------
// obstacle condition
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ObstacleReport {
    pub grid: usize,
    /// Points of `{τ ≥ a₀} ∩ H` where `Θ ≠ γ`.
    pub strip_failures: usize,
    /// Worst relative excess `γ/(Kφ(τ)) − 1` over the strip (≤ 0 when the
    /// obstacle holds).
    pub worst_excess: f64,
    /// Smallest `K` sufficient for the strip: `Q/(a₀ φ(a₀))`.
    pub min_k_sufficient: f64,
    /// Failures of `λ ≤ δv² ⇒ B = u` on the λ-form grid.
    pub lambda_form_failures: usize,
    pub pass: bool,
}

pub fn check_obstacle(params: &BellmanParams, n: usize, tau_max: f64) -> ObstacleReport {
    let mut strip_failures = 0usize;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut grid = 0usize;
    for i in 0..n {
        let tau = params.a0 + (tau_max - params.a0) * i as f64 / (n - 1) as f64;
        let kphi = params.k_theta * phi(tau);
        for j in 0..n {
            let s = 1.0 + (params.q - 1.0) * j as f64 / (n - 1) as f64;
            let gamma = s / tau;
            grid += 1;
            let excess = gamma / kphi - 1.0;
            worst_excess = worst_excess.max(excess);
            if excess > 1e-12 {
                strip_failures += 1;
            } else {
                debug_assert_eq!(theta(gamma, tau, params).unwrap(), gamma);
            }
        }
    }
    // λ-form: λ ≤ δ v² must pin B to u
    let mut lambda_failures = 0usize;
    for i in 0..n {
        let v = 0.1 + 10.0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let s = 1.0 + (params.q - 1.0) * j as f64 / (n - 1) as f64;
            let u = s / v;
            for frac in [0.0, 0.3, 0.7, 1.0] {
                grid += 1;
                let lambda = frac * params.delta * v * v;
                let b = if lambda == 0.0 {
                    u
                } else {
                    let sq = lambda.sqrt();
                    theta_unchecked(u * sq, v / sq, params) / sq
                };
                if (b - u).abs() > 1e-12 * u {
                    lambda_failures += 1;
                }
            }
        }
    }
    ObstacleReport {
        grid,
        strip_failures,
        worst_excess,
        min_k_sufficient: params.q / (params.a0 * phi(params.a0)),
        lambda_form_failures: lambda_failures,
        pass: strip_failures == 0 && lambda_failures == 0,
    }
}

// ---------------------------------------------------------------------------
// change of variables
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ChangeVarReport {
    pub round_trip_max: f64,
    /// Max |second difference in T| of `e^{τ²/2}φ(τ)` along `γ = φ(τ)`;
    /// the straightened curve is affine, so this is pure noise.
    pub straightened_second_diff_max: f64,
    pub pass: bool,
}

pub fn check_change_of_variables(n: usize) -> ChangeVarReport {
    let mut round_trip = 0.0f64;
    for i in 0..n {
        let tau = 0.01 + 3.0 * i as f64 / (n - 1) as f64;
        let back = tau_from_t(t_coord(tau));
        round_trip = round_trip.max((back - tau).abs() / tau.max(1.0));
    }
    // τ-grid, F = e^{τ²/2}φ(τ) vs T by its independent series
    let taus: Vec<f64> = (0..n).map(|i| 0.05 + 2.5 * i as f64 / (n - 1) as f64).collect();
    let ts: Vec<f64> = taus.iter().map(|&t| t_coord(t)).collect();
    let fs: Vec<f64> = taus.iter().map(|&t| (t * t / 2.0).exp() * phi(t)).collect();
    let mut sd_max = 0.0f64;
    for i in 1..n - 1 {
        let left = (fs[i] - fs[i - 1]) / (ts[i] - ts[i - 1]);
        let right = (fs[i + 1] - fs[i]) / (ts[i + 1] - ts[i]);
        let sd = (right - left) * 2.0 / (ts[i + 1] - ts[i - 1]);
        sd_max = sd_max.max(sd.abs());
    }
    ChangeVarReport {
        round_trip_max: round_trip,
        straightened_second_diff_max: sd_max,
        pass: round_trip <= 1e-12 && sd_max <= 1e-8,
    }
}

// ---------------------------------------------------------------------------
// concavity along straightened lines
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LineConcavityReport {
    pub lines: usize,
    /// Max raw second difference of `T ↦ min(CT+D, KT)` (≤ 0 up to noise).
    pub max_second_diff: f64,
    /// Max |pullback mismatch|: `e^{τ²/2}·Θ(γ_line(τ), τ)` against
    /// `min(CT+D, KT)` evaluated at the same points.
    pub pullback_max_err: f64,
    /// Max |e^{τ²/2}(G)_TT − drift value| on smooth stencils; both sides
    /// are 0 for the candidate, matching the matrix check.
    pub consistency_max: f64,
    pub pass: bool,
}

pub fn check_line_concavity(params: &BellmanParams, lines: usize, seed: u64) -> LineConcavityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = params.k_theta;
    let t_lo = t_coord(0.05);
    let t_hi = t_coord(2.5);
    let n = 200;
    let mut max_sd = f64::NEG_INFINITY;
    let mut pullback_err = 0.0f64;
    let mut consistency = 0.0f64;
    for line in 0..lines {
        // slope C = K occurs explicitly (affine case); others random
        let c = if line == 0 { k } else { rng.gen_range(-1.5 * k..1.5 * k) };
        let d = rng.gen_range(0.0..2.0 * k * t_hi.max(1.0));
        let g = |t: f64| (c * t + d).min(k * t);
        let h = (t_hi - t_lo) / n as f64;
        for i in 1..n {
            let t = t_lo + i as f64 * h;
            let sd = g(t - h) - 2.0 * g(t) + g(t + h);
            max_sd = max_sd.max(sd);
        }
        // pull the line back to the (γ, τ) plane and compare with Θ
        for i in 0..=20 {
            let tau = 0.1 + 2.0 * i as f64 / 20.0;
            let t = t_coord(tau);
            let gamma_line = (-tau * tau / 2.0).exp() * (c * t + d);
            if gamma_line <= 0.0 {
                continue;
            }
            let lhs = (tau * tau / 2.0).exp() * theta_unchecked(gamma_line, tau, params);
            let rhs = g(t);
            pullback_err = pullback_err.max((lhs - rhs).abs() / rhs.abs().max(1.0));
            // consistency with the drift matrix: both the straightened
            // second derivative and the branch drift value vanish
            let flat = on_flat_branch(gamma_line, tau, params);
            let stencil_same = [-2.0, -1.0, 1.0, 2.0].iter().all(|&j| {
                let tj = tau_from_t(t + j * 0.02 * t.max(1.0));
                let gj = (-tj * tj / 2.0).exp() * (c * t_coord(tj) + d);
                gj > 0.0 && on_flat_branch(gj, tj, params) == flat
            });
            if stencil_same {
                let ht = 0.02 * t.max(1.0);
                let gt = |tt: f64| {
                    let tauv = tau_from_t(tt);
                    let gv = (-tauv * tauv / 2.0).exp() * (c * t_coord(tauv) + d);
                    (tauv * tauv / 2.0).exp() * theta_unchecked(gv, tauv, params)
                };
                let g_tt = d2(&gt, t, ht);
                let straightened = (tau * tau / 2.0).exp() * g_tt;
                let drift_value = if flat {
                    0.0
                } else {
                    k * (phi_second(tau) + phi(tau) + tau * phi_prime(tau))
                };
                consistency = consistency.max((straightened - drift_value).abs());
            }
        }
    }
    LineConcavityReport {
        lines,
        max_second_diff: max_sd,
        pullback_max_err: pullback_err,
        consistency_max: consistency,
        pass: max_sd <= 1e-10 && pullback_err <= 1e-12 && consistency <= 1e-8,
    }
}

// ---------------------------------------------------------------------------
// scalar midpoint inequality for φ
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct PhiInequalityReport {
    pub pairs: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub tau0: f64,
    /// Largest τ₀ (from a doubling scan) for which the grid check holds.
    pub largest_tau0_grid: f64,
    /// Max of φ'' on (0, τ₀]; strict concavity wants it negative.
    pub phi_second_max: f64,
    pub pass: bool,
}

/// `(1+Δτ²/100)^{-1/2}·φ(τ̄/√(1+Δτ²/100)) ≥ (φ(τ₁)+φ(τ₂))/2` on
/// `0 < τ₁ ≤ τ₂ ≤ τ₀`, on a dense grid plus random pairs.
pub fn check_phi_inequality(tau0: f64, grid_n: usize, samples: usize, seed: u64) -> PhiInequalityReport {
    let tol = -1e-12;
    let margin_for = |t1: f64, t2: f64| {
        let dt = t2 - t1;
        let s = (1.0 + dt * dt / 100.0).sqrt();
        phi(0.5 * (t1 + t2) / s) / s - 0.5 * (phi(t1) + phi(t2))
    };
    let grid_holds = |t0: f64, n: usize| {
        for i in 1..=n {
            for j in i..=n {
                let t1 = t0 * i as f64 / n as f64;
                let t2 = t0 * j as f64 / n as f64;
                if margin_for(t1, t2) < tol {
                    return false;
                }
            }
        }
        true
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(samples + grid_n * (grid_n + 1) / 2);
    for i in 1..=grid_n {
        for j in i..=grid_n {
            pairs.push((tau0 * i as f64 / grid_n as f64, tau0 * j as f64 / grid_n as f64));
        }
    }
    for _ in 0..samples {
        let a = rng.gen_range(0.0..tau0).max(1e-12);
        let b = rng.gen_range(0.0..tau0).max(1e-12);
        pairs.push((a.min(b), a.max(b)));
    }
    let margins: Vec<f64> = pairs.par_iter().map(|&(a, b)| margin_for(a, b)).collect();
    let worst = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let violations = margins.iter().filter(|m| **m < tol).count();

    let mut largest = 0.0f64;
    let mut t0 = tau0;
    for _ in 0..16 {
        if grid_holds(t0, 40) {
            largest = t0;
            t0 *= 2.0;
        } else {
            break;
        }
    }

    let mut phi2_max = f64::NEG_INFINITY;
    for i in 1..=64 {
        phi2_max = phi2_max.max(phi_second(tau0 * i as f64 / 64.0));
    }

    PhiInequalityReport {
        pairs: pairs.len(),
        violations,
        worst_margin: worst,
        tau0,
        largest_tau0_grid: largest,
        phi_second_max: phi2_max,
        pass: violations == 0 && phi2_max < 0.0,
    }
}

// ---------------------------------------------------------------------------
// scalar two-point inequality for U(p, q) = φ(p/q)/q
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct UInequalityReport {
    pub samples: usize,
    pub violations: usize,
    pub worst_margin: f64,
    /// Min raw second difference of `t ↦ U(p, √t)` on `[q²/4, q²]`.
    pub convexity_min_second_diff: f64,
    /// Max relative error between the closed-form `d²/dt² U(p,√t)` and
    /// central finite differences.
    pub closed_form_max_rel_err: f64,
    pub ratio09_min: f64,
    pub ratio09_max: f64,
    /// Whether `√(q²−a²/50)/√(q²−a²/100) ≤ 0.9` ever holds on the sampled
    /// domain (it does not: the ratio is ~1 − a²/(200q²)).
    pub ratio09_bound_ever_holds: bool,
    pub pass: bool,
}

fn u_val(p: f64, q: f64) -> f64 {
    phi(p / q) / q
}

/// Closed-form `d²/dt² [t^{-1/2} φ(p t^{-1/2})]` with `x = p/√t`:
/// `t^{-5/2}·(¾φ(x) + (5/4)xφ'(x) + ¼x²φ''(x))`.
pub fn u_second_derivative_in_t(p: f64, t: f64) -> f64 {
    let x = p / t.sqrt();
    let (f0, f1, f2) = (phi(x), phi_prime(x), phi_second(x));
    t.powf(-2.5) * (0.75 * f0 + 1.25 * x * f1 + 0.25 * x * x * f2)
}

/// `U(p,q) ≥ ½U(p+a, √(q²−a²/100)) + ½U(p−a, √(q²−a²/100))` under
/// `0 ≤ a ≤ p ≤ q/1000`, plus the t-convexity that powers it.
pub fn check_u_inequality(samples: usize, seed: u64) -> UInequalityReport {
    let tol = -1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::with_capacity(samples);
    // structured corners: a = 0, a = p, p at the cap
    for i in 0..(samples / 10).max(50) {
        let q = 0.5 + 99.5 * (i as f64 * 0.17).fract();
        let p = q / 1000.0;
        triples.push((0.0, p, q));
        triples.push((p, p, q));
        triples.push((0.5 * p, p, q));
    }
    for _ in 0..samples {
        let q = log_uniform(&mut rng, 0.5, 100.0);
        let p = rng.gen_range(0.0..q / 1000.0);
        let a = rng.gen_range(0.0..=p);
        triples.push((a, p, q));
    }
    let margins: Vec<f64> = triples
        .par_iter()
        .map(|&(a, p, q)| {
            let s = (q * q - a * a / 100.0).sqrt();
            u_val(p, q) - 0.5 * (u_val(p + a, s) + u_val(p - a, s))
        })
        .collect();
    let worst = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let violations = margins.iter().filter(|m| **m < tol).count();

    // t-convexity + closed form
    let mut conv_min = f64::INFINITY;
    let mut cf_err = 0.0f64;
    for i in 0..40 {
        let q = 0.5 + 99.5 * i as f64 / 39.0;
        let p = q / 1000.0 * (0.2 + 0.8 * (i as f64 * 0.29).fract());
        let (t_lo, t_hi) = (q * q / 4.0, q * q);
        let n = 64;
        let h = (t_hi - t_lo) / n as f64;
        let g = |t: f64| u_val(p, t.sqrt());
        for j in 1..n {
            let t = t_lo + j as f64 * h;
            conv_min = conv_min.min(g(t - h) - 2.0 * g(t) + g(t + h));
        }
        for j in 0..=8 {
            let t = t_lo + (t_hi - t_lo) * j as f64 / 8.0;
            let ht = 1e-3 * t;
            let fd = (4.0 * d2(&g, t, 0.5 * ht) - d2(&g, t, ht)) / 3.0;
            let cf = u_second_derivative_in_t(p, t);
            cf_err = cf_err.max((fd - cf).abs() / cf.abs().max(1e-300));
        }
    }

    // the √(q²−a²/50)/√(q²−a²/100) ratio under the same constraints
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    for &(a, _p, q) in &triples {
        let r = (q * q - a * a / 50.0).sqrt() / (q * q - a * a / 100.0).sqrt();
        r_min = r_min.min(r);
        r_max = r_max.max(r);
    }

    UInequalityReport {
        samples: triples.len(),
        violations,
        worst_margin: worst,
        convexity_min_second_diff: conv_min,
        closed_form_max_rel_err: cf_err,
        ratio09_min: r_min,
        ratio09_max: r_max,
        ratio09_bound_ever_holds: r_min <= 0.9,
        pass: violations == 0 && conv_min >= -1e-12 && cf_err <= 1e-6,
    }
}

// ---------------------------------------------------------------------------
// growth, homogeneity, monotonicity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    /// Max of `B·λ/(K·v)` over the grid; growth wants ≤ 1.
    pub growth_max_ratio: f64,
    pub homogeneity_max_err: f64,
    pub lambda_monotone_violations: usize,
    pub gamma_monotone_violations: usize,
    pub pass: bool,
}

pub fn check_growth(params: &BellmanParams, n: usize, seed: u64) -> GrowthReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = |u: f64, v: f64, l: f64| {
        if l == 0.0 {
            u
        } else {
            let s = l.sqrt();
            theta_unchecked(u * s, v / s, params) / s
        }
    };
    let mut growth = f64::NEG_INFINITY;
    let mut lambda_viol = 0usize;
    let mut gamma_viol = 0usize;
    for i in 0..n {
        let v = 0.05 + 20.0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let s = 1.0 + (params.q - 1.0) * j as f64 / (n - 1) as f64;
            let u = s / v;
            let mut prev = f64::INFINITY;
            for e in 0..12 {
                let lambda = 1e-3 * 4.0f64.powi(e);
                let val = b(u, v, lambda);
                growth = growth.max(val * lambda / (params.k_theta * v));
                if val > prev * (1.0 + 1e-12) {
                    lambda_viol += 1;
                }
                prev = val;
            }
        }
        // Θ nondecreasing in γ at fixed τ
        let tau = 0.05 + 10.0 * i as f64 / (n - 1) as f64;
        let mut prevt = f64::NEG_INFINITY;
        for j in 0..n {
            let gamma = (1.0 + (params.q - 1.0) * j as f64 / (n - 1) as f64) / tau;
            let t = theta_unchecked(gamma, tau, params);
            if t < prevt - 1e-12 {
                gamma_viol += 1;
            }
            prevt = t;
        }
    }
    let mut homog = 0.0f64;
    for _ in 0..2000 {
        let v = log_uniform(&mut rng, 0.1, 10.0);
        let u = rng.gen_range(1.0..params.q) / v;
        let l = log_uniform(&mut rng, 1e-3, 1e3);
        let t = log_uniform(&mut rng, 0.1, 10.0);
        let lhs = b(u * t, v / t, l / (t * t));
        let rhs = t * b(u, v, l);
        homog = homog.max((lhs - rhs).abs() / rhs.abs().max(1.0));
    }
    GrowthReport {
        growth_max_ratio: growth,
        homogeneity_max_err: homog,
        lambda_monotone_violations: lambda_viol,
        gamma_monotone_violations: gamma_viol,
        pass: growth <= 1.0 + 1e-12
            && homog <= 1e-12
            && lambda_viol == 0
            && gamma_viol == 0,
    }
}
