//! Tree-induction certificate for the weak-type distribution bound.
//!
//! Starting at the root with budget λ, descend the dyadic tree of a built
//! weight; at each node the budget shrinks by `c·(Δ v)²` where
//! `Δ v = ⟨w⁻¹⟩_{I₊} − ⟨w⁻¹⟩_{I₋}`. A branch stops when the budget would go
//! negative; there the obstacle pins the candidate to `⟨w⟩_I`, and the
//! midpoint main inequality telescopes the harvested mass up to
//! `|J|·B(⟨w⟩_J, ⟨w⁻¹⟩_J, λ)`. The stopped region is exactly
//! `{x : c·Σ_{I∋x} (Δ_I w⁻¹)² > λ}`, so the certified bound must dominate
//! the directly computed distribution at threshold `λ/c`.

use serde::Serialize;

use crate::error::CoreError;
use crate::interval::DyadicInterval;
use crate::operators::{local_square_sum, weak_distribution, DeltaConvention};
use crate::scalar::Scalar;
use crate::step::{Integrator, StepFunction};

use super::{bfun, BellmanParams};

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub lambda: f64,
    pub q_used: f64,
    /// `|J|·B(⟨w⟩_J, ⟨w⁻¹⟩_J, λ)` — the certified upper bound.
    pub bound: f64,
    /// Mass harvested at stopped nodes during the walk.
    pub stopped_mass: f64,
    /// `w{x : Σ (Δ_I w⁻¹)² χ_I > λ/c}` computed directly.
    pub actual_distribution: f64,
    pub nodes_checked: usize,
    pub stops: usize,
    /// Min over internal nodes of `B(parent) − mean B(children)`.
    pub worst_node_margin: f64,
    /// `K·⟨w⁻¹⟩_J/λ`, the growth ceiling the bound must respect.
    pub growth_bound: f64,
    pub dominates: bool,
}

struct Walker<'a> {
    params: &'a BellmanParams,
    iw: Integrator<'a>,
    ii: Integrator<'a>,
    w: &'a StepFunction,
    nodes: usize,
    stops: usize,
    worst_margin: f64,
    stopped_mass: f64,
}

impl Walker<'_> {
    fn walk(&mut self, node: DyadicInterval, lambda: f64) -> Result<(), CoreError> {
        // constant below: no further increments, no stops in this subtree
        if self.w.value_on(&node).is_some() {
            return Ok(());
        }
        let at = |e: CoreError| CoreError::MainInequality {
            node: format!("[{}] ({e})", node.path_bits()),
            margin: f64::NAN,
        };
        let u = self.iw.average(&node).to_f64();
        let v = self.ii.average(&node).to_f64();
        let (l, r) = (node.left_child(), node.right_child());
        let dv = self.ii.average(&r).to_f64() - self.ii.average(&l).to_f64();
        let decrement = self.params.c_drift * dv * dv;
        if lambda < decrement {
            // stopping rule: the obstacle must apply here
            self.stops += 1;
            let delta_ok = lambda <= self.params.delta * v * v;
            let b = bfun(u, v, lambda, self.params).map_err(at)?;
            if !delta_ok || (b - u).abs() > 1e-9 * u.abs().max(1.0) {
                return Err(CoreError::MainInequality {
                    node: format!("[{}] (obstacle: B={b}, u={u})", node.path_bits()),
                    margin: b - u,
                });
            }
            self.stopped_mass += self.iw.integral_over(&node).to_f64();
            return Ok(());
        }
        let lambda_child = lambda - decrement;
        let b_parent = bfun(u, v, lambda, self.params).map_err(at)?;
        let ul = self.iw.average(&l).to_f64();
        let ur = self.iw.average(&r).to_f64();
        let vl = self.ii.average(&l).to_f64();
        let vr = self.ii.average(&r).to_f64();
        let mean_children = 0.5
            * (bfun(ul, vl, lambda_child, self.params).map_err(at)?
                + bfun(ur, vr, lambda_child, self.params).map_err(at)?);
        let margin = b_parent - mean_children;
        self.nodes += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -1e-10 * b_parent.abs().max(1.0) {
            return Err(CoreError::MainInequality {
                node: node.path_bits(),
                margin,
            });
        }
        self.walk(l, lambda_child)?;
        self.walk(r, lambda_child)
    }
}

/// Run the induction below the root for a positive weight (values are
/// taken to doubles first).
///
/// `params.q` must dominate the weight's A₂ characteristic and the obstacle
/// margin must satisfy `δ ≥ 4c` (so that a stopped budget is automatically
/// inside the flat region).
pub fn induction_certificate(
    weight: &StepFunction,
    lambda: f64,
    params: &BellmanParams,
) -> Result<Certificate, CoreError> {
    assert!(lambda > 0.0, "threshold must be positive");
    assert!(
        params.delta >= 4.0 * params.c_drift,
        "need δ ≥ 4c so stopped nodes sit in the obstacle region"
    );
    let w = to_float(weight);
    let winv = w.invert()?;
    let a2 = crate::operators::a2_characteristic(&w)?.to_f64();
    assert!(
        params.q >= a2 * (1.0 - 1e-12),
        "params.q = {} below the weight's A₂ characteristic {}",
        params.q,
        a2
    );
    let root = DyadicInterval::root();
    let mut walker = Walker {
        params,
        iw: Integrator::new(&w),
        ii: Integrator::new(&winv),
        w: &w,
        nodes: 0,
        stops: 0,
        worst_margin: f64::INFINITY,
        stopped_mass: 0.0,
    };
    walker.walk(root, lambda)?;

    let u0 = walker.iw.average(&root).to_f64();
    let v0 = walker.ii.average(&root).to_f64();
    let bound = bfun(u0, v0, lambda, params)?;
    let g = local_square_sum(&winv, &root, DeltaConvention::FullDifference);
    let actual = weak_distribution(&g, &w, &Scalar::Float(lambda / params.c_drift)).to_f64();
    let growth_bound = params.k_theta * v0 / lambda;
    let tol = 1e-9 * bound.abs().max(1.0);
    let dominates = bound + tol >= walker.stopped_mass && bound + tol >= actual;
    Ok(Certificate {
        lambda,
        q_used: params.q,
        bound,
        stopped_mass: walker.stopped_mass,
        actual_distribution: actual,
        nodes_checked: walker.nodes,
        stops: walker.stops,
        worst_node_margin: walker.worst_margin,
        growth_bound,
        dominates,
    })
}

fn to_float(f: &StepFunction) -> StepFunction {
    f.map(|v| Scalar::Float(v.to_f64()))
}
