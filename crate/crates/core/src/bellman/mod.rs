//! Numerical certification of the weak-type Bellman candidate.
//!
//! The candidate on the hyperbolic domain `H = {(γ,τ) > 0 : 1 ≤ γτ ≤ Q}` is
//!
//! ```text
//!     Θ(γ, τ)    = min(γ, K·φ(τ)),        φ(τ) = e^{-τ²/2}∫₀^τ e^{s²/2} ds,
//!     B(u, v, λ) = Θ(u√λ, v/√λ)/√λ        on  Ω = {1 ≤ uv ≤ Q, λ ≥ 0},
//! ```
//!
//! with `K ≍ Q` chosen so that `Θ = γ` on the strip `τ ≥ a₀` (the obstacle
//! region). The submodules verify, numerically and with exact branch
//! identities, the drift-concavity matrix condition, the midpoint main
//! inequality, the obstacle and growth conditions, the straightening change
//! of variables, and the two scalar inequalities behind the midpoint proof;
//! `certificate` runs the tree induction against a built weight.

pub mod certificate;
pub mod checks;
pub mod phi;

pub use certificate::{induction_certificate, Certificate};
pub use phi::{phi, phi_prime, phi_second, t_coord, tau_from_t};

use crate::error::CoreError;

/// Constants of one certification run.
#[derive(Clone, Debug)]
pub struct BellmanParams {
    /// Ceiling for the product `uv` (at least the weight's characteristic).
    pub q: f64,
    /// Constant in the `K·φ(τ)` branch.
    pub k_theta: f64,
    /// Drift constant in the main inequality.
    pub c_drift: f64,
    /// Obstacle margin: the flat region is `{λ ≤ δ v²}`.
    pub delta: f64,
    /// Obstacle threshold: `Θ = γ` once `τ ≥ a₀`.
    pub a0: f64,
    /// Smallness threshold for the scalar midpoint inequality.
    pub tau0: f64,
}

impl BellmanParams {
    /// Defaults: `a₀ = 1`, `K = Q/(a₀ φ(a₀))` (the smallest constant making
    /// the obstacle hold on the whole strip, since `τφ(τ)` increases),
    /// `δ = 1/a₀²`, `c = 1/8`, `τ₀ = 0.001`.
    pub fn new(q: f64) -> Self {
        assert!(q >= 1.0, "Q must be at least 1");
        let a0 = 1.0;
        BellmanParams {
            q,
            k_theta: q / (a0 * phi(a0)),
            c_drift: 0.125,
            delta: 1.0 / (a0 * a0),
            a0,
            tau0: 1e-3,
        }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        assert!(k > 0.0);
        self.k_theta = k;
        self
    }

    pub fn with_c_drift(mut self, c: f64) -> Self {
        assert!(c > 0.0 && c <= 1.0);
        self.c_drift = c;
        self
    }

    pub fn with_a0(mut self, a0: f64) -> Self {
        assert!(a0 > 0.0);
        self.a0 = a0;
        self.delta = 1.0 / (a0 * a0);
        self
    }

    pub fn with_tau0(mut self, tau0: f64) -> Self {
        assert!(tau0 > 0.0);
        self.tau0 = tau0;
        self
    }

    pub fn domain(&self) -> HyperbolicDomain {
        HyperbolicDomain { q: self.q }
    }
}

/// The region between the hyperbolas `γτ = 1` and `γτ = Q`.
///
/// Membership allows a hair of relative slack at both hyperbolas: data on
/// the lower boundary (a weight constant on an interval has
/// `⟨w⟩⟨w⁻¹⟩ = 1` exactly) re-derived through `√λ` can land an ulp outside.
#[derive(Clone, Copy, Debug)]
pub struct HyperbolicDomain {
    pub q: f64,
}

const BOUNDARY_SLACK: f64 = 1e-9;

impl HyperbolicDomain {
    pub fn contains(&self, gamma: f64, tau_coord: f64) -> bool {
        let s = gamma * tau_coord;
        gamma > 0.0
            && tau_coord > 0.0
            && s >= 1.0 - BOUNDARY_SLACK
            && s <= self.q * (1.0 + BOUNDARY_SLACK)
    }

    /// Membership in the `(u, v, λ)` form of the domain.
    pub fn contains_uvl(&self, u: f64, v: f64, lambda: f64) -> bool {
        let s = u * v;
        u > 0.0
            && v > 0.0
            && lambda >= 0.0
            && s >= 1.0 - BOUNDARY_SLACK
            && s <= self.q * (1.0 + BOUNDARY_SLACK)
    }
}

/// `Θ(γ, τ) = min(γ, K·φ(τ))` on `H`.
pub fn theta(gamma: f64, tau_coord: f64, params: &BellmanParams) -> Result<f64, CoreError> {
    if !params.domain().contains(gamma, tau_coord) {
        return Err(CoreError::OutsideDomain(gamma, tau_coord));
    }
    Ok(gamma.min(params.k_theta * phi(tau_coord)))
}

/// `B(u, v, λ) = Θ(u√λ, v/√λ)/√λ`; at `λ = 0` the obstacle limit `u`.
pub fn bfun(u: f64, v: f64, lambda: f64, params: &BellmanParams) -> Result<f64, CoreError> {
    if !params.domain().contains_uvl(u, v, lambda) {
        return Err(CoreError::OutsideDomain(u * v, lambda));
    }
    if lambda == 0.0 {
        return Ok(u);
    }
    let s = lambda.sqrt();
    Ok(theta(u * s, v / s, params)? / s)
}

/// The straightening map `(γ, τ) → (Γ, T) = (γ e^{τ²/2}, ∫₀^τ e^{s²/2} ds)`.
pub fn change_of_variables(gamma: f64, tau_coord: f64) -> (f64, f64) {
    (gamma * (tau_coord * tau_coord / 2.0).exp(), t_coord(tau_coord))
}

/// Inverse of [`change_of_variables`].
pub fn change_of_variables_inverse(big_gamma: f64, t: f64) -> (f64, f64) {
    let tau = tau_from_t(t);
    (big_gamma * (-tau * tau / 2.0).exp(), tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        let params = BellmanParams::new(10.0).with_k(100.0);
        // γ ≤ Kφ(τ) ⇒ Θ = γ (Kφ(2.5) ≈ 49 ≫ 0.5)
        assert_eq!(theta(0.5, 2.5, &params).unwrap(), 0.5);
        // small γ against K = 100: the γ branch wins wherever H permits;
        // γτ ≥ 1 forces τ ≥ 2 here
        assert_eq!(theta(0.5, 2.0, &params).unwrap(), 0.5);
        // outside H (γτ < 1)
        assert!(matches!(
            theta(0.5, 0.5, &params),
            Err(CoreError::OutsideDomain(..))
        ));
        assert!(matches!(
            theta(0.5, 1.0, &params),
            Err(CoreError::OutsideDomain(..))
        ));
        // Θ ≤ K·τ always (φ ≤ τ)
        for (g, t) in [(2.0, 0.6), (5.0, 0.9), (11.0, 0.4)] {
            let v = theta(g, t, &params).unwrap();
            assert!(v <= 100.0 * t + 1e-12);
        }
    }

    #[test]
    fn bfun_examples() {
        let params = BellmanParams::new(10.0).with_k(2.0 * 10.0);
        // λ = 0 → obstacle limit u
        assert_eq!(bfun(3.0, 1.0, 0.0, &params).unwrap(), 3.0);
        // uv = 1 boundary, λ = 1, K ≥ 2: B = min(1, Kφ(1)) = 1 (no zero
        // boundary condition for the candidate)
        let b = bfun(1.0, 1.0, 1.0, &params).unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn bfun_homogeneity() {
        let params = BellmanParams::new(25.0);
        let pts = [(2.0, 1.0, 0.7), (5.0, 3.0, 2.0), (1.5, 0.8, 0.1)];
        for (u, v, l) in pts {
            if !params.domain().contains_uvl(u, v, l) {
                continue;
            }
            for t in [0.5, 2.0, 7.0] {
                let lhs = bfun(u * t, v / t, l / (t * t), &params).unwrap();
                let rhs = t * bfun(u, v, l, &params).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                    "homogeneity at ({u},{v},{l}) t={t}"
                );
            }
        }
    }

    #[test]
    fn default_k_scales_like_q() {
        let p = BellmanParams::new(50.0);
        assert!((p.k_theta - 50.0 / phi(1.0)).abs() < 1e-12);
        assert!(p.k_theta > p.q);
    }

    #[test]
    fn change_of_variables_round_trip() {
        for (g, t) in [(1.0, 0.0), (2.5, 0.4), (0.3, 3.0)] {
            let (big_g, big_t) = change_of_variables(g, t);
            let (g2, t2) = change_of_variables_inverse(big_g, big_t);
            assert!((g2 - g).abs() <= 1e-12 * g.max(1.0));
            assert!((t2 - t).abs() <= 1e-12 * t.max(1.0));
        }
        // (γ, 0) → (γ, 0)
        assert_eq!(change_of_variables(4.0, 0.0), (4.0, 0.0));
    }
}
