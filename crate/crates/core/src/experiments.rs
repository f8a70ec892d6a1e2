//! Desk-scale reproduction of the quantitative inequality chains: row
//! contributions, cross-row interference, the martingale and square-function
//! lower bounds with independent per-level ledgers, the maximal-function
//! testing ratios, and the weak-type distribution bounds.
//!
//! Every lower-bound integral is computed twice: by the generic operator
//! pipeline on the tree (brute force) and by a closed-form ledger built
//! from the exact chain-average recurrence
//!
//! ```text
//!     α_{k-1} = (1+τ)/(2p),      α_j = 1/(2p) + 3/4 + α_{j+1}/4,
//! ```
//!
//! where `α_j = ⟨w⟩_{I_j}/ω_ℓ` is level-independent. The two routes must
//! agree exactly in exact mode (to 1e-9 relative in float mode).

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::CoreError;
use crate::interval::DyadicInterval;
use crate::operators::{
    a2_characteristic, dyadic_nodes, local_square_sum, martingale_transform, maximal_function,
    row_sign_pattern, rubio_de_francia, square_function, weak_distribution, DeltaConvention,
};
use crate::scalar::{Accumulator, Mode, Scalar};
use crate::step::{add, integrate_product, merged_cells, product, Integrator, StepFunction};
use crate::weight::{
    build_majorant, build_weight, pow3, solve_parameters, AnnotatedWeight, WeightParams,
};

/// Calibration constants frozen from the smallest exact instance (k = 2,
/// exact mode); larger runs must meet them. Where a constant is an exact
/// rational it is kept as one.
pub mod calibration {
    /// Per-term floor for `row_contribution(J)/(k·3^{ℓ+1}ω)`: the k = 2
    /// value is the exact rational 13/57 at every level.
    pub const ROW_RATIO_MIN: (i64, i64) = (13, 57);

    /// Floor for the per-level martingale prefactor
    /// `∫_{A_ℓ}(Tw)²w⁻¹ / (ω k² p (1-4^{1-k})^ℓ)`, frozen from the k = 2,
    /// L = 8 exact run (0.104581…; observed 0.159873 at k = 3 and
    /// 0.178476 at k = 4, non-decreasing in k).
    pub const MART_LEVEL_PREFACTOR_MIN: f64 = 0.1045;

    /// Floor for the per-level square-function prefactor
    /// `∫_{A_ℓ}(S²w)w⁻¹ / (ω k p (1-4^{1-k})^ℓ)`, frozen from the k = 2,
    /// L = 8 exact run (0.332872…; 0.375571 at k = 3, 0.390560 at k = 4).
    pub const SQ_LEVEL_PREFACTOR_MIN: f64 = 0.3328;

    /// Floor for the pointwise bound `S²w ≥ c·k·3^{2ℓ}ω²` on specials,
    /// frozen from the k = 2, L = 8 exact run (1.141274…; 1.567602 at
    /// k = 3, 1.723853 at k = 4).
    pub const S2_POINTWISE_MIN: f64 = 1.1412;

    /// Exact value of `∫₀¹(Tw)² w⁻¹` at k = 2, L = 8 (golden regression
    /// fixture; recomputed and compared verbatim).
    pub const MART_GOLDEN_K2_L8: &str = "187083/38912";

    /// Exact value of `∫₀¹(S²w) w⁻¹` at k = 3, L = 4 (golden fixture).
    pub const SQ_GOLDEN_K3_L4: &str = "541065305/5723136";

    /// Maximal-testing ceiling recorded at k = 2 (float run) and the
    /// stability factor allowed for k = 3, 4.
    pub const TEST_MAX_K2: f64 = 2.446;
    pub const TEST_STABILITY_FACTOR: f64 = 3.0;

    /// Recorded ceiling for the weak-type ratio over the λ-grid
    /// (observed 1.478 at k = 2, 0.971 at k = 3, 1.089 at k = 4).
    pub const WEAK_RATIO_MAX: f64 = 1.5;

    /// Recorded ceiling for the majorant second-moment ratios.
    pub const LEMMA_RATIO_MAX: f64 = 3.0;

    /// Pointwise majorant factor for `M^d w ≤ C·w̃`.
    pub const MAJ_FACTOR_MAX: f64 = 6.0;
}

fn br(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Chain averages `α_1 … α_{k-1}` (units of the local ω).
pub fn alpha_chain(k: u32, p: &BigRational, tau_w: &BigRational) -> Vec<BigRational> {
    let mut alphas = vec![BigRational::zero(); k as usize];
    alphas[k as usize - 1] = (BigRational::one() + tau_w) / (br(2, 1) * p);
    for j in (1..k as usize - 1).rev() {
        alphas[j] = BigRational::one() / (br(2, 1) * p)
            + br(3, 4)
            + &alphas[j + 1] * br(1, 4);
    }
    alphas.remove(0);
    alphas // index m ↦ α_{m+1}
}

/// Row terms `t_m = (3 − α_{m+1})/2`, m = 0..k-2 (units of the local ω).
fn row_terms(alphas: &[BigRational]) -> Vec<BigRational> {
    alphas
        .iter()
        .map(|a| (br(3, 1) - a) * br(1, 2))
        .collect()
}

/// The subcell index of the level-(ℓ'+1) cell inside its level-ℓ' parent.
fn subcell_index(parent: &DyadicInterval, sub: &DyadicInterval) -> u32 {
    debug_assert!(parent.contains(sub));
    (sub.depth() - parent.depth() - 2) / 2
}

/// Constant value of `Σ_{R∈row(J)} (−1)(w,h_R)h_R` on a special `J`:
/// each of the k−1 terms is `(⟨w⟩_{K_m^{+-}} − ⟨w⟩_{K_m^{++}})/2 > 0`.
pub fn row_contribution(aw: &AnnotatedWeight, j: &DyadicInterval) -> Result<Scalar, CoreError> {
    let row = aw
        .rows
        .get(j)
        .ok_or_else(|| CoreError::NotSpecial(j.path_bits()))?;
    let integ = Integrator::new(&aw.weight);
    let mut acc = Accumulator::new(aw.mode());
    for r in &row.members {
        // J lies in the right child of every row member; the −1 sign flips
        // the Haar increment to (left − right)/2
        let delta = integ.haar_delta(r);
        acc.add(&(-delta).scale_rational(&br(1, 2)));
    }
    Ok(acc.finish())
}

/// `|Tw(x) − T_J w(x)|` for x ∈ J: the transform minus its own-row part,
/// constant on the special.
pub fn cross_row_interference(
    aw: &AnnotatedWeight,
    j: &DyadicInterval,
) -> Result<Scalar, CoreError> {
    let own = row_contribution(aw, j)?;
    let signs = row_sign_pattern(aw);
    let transform = martingale_transform(&aw.weight, &signs);
    let full = transform
        .value_on(j)
        .expect("transform is constant on specials")
        .clone();
    let level = aw.rows[j].level;
    if level % 2 != 0 {
        // own row carries no signs at odd levels
        return Ok(full.abs());
    }
    Ok((&full - &own).abs())
}

/// Exact ledger value of the transform on a special at level ℓ: own row
/// plus the cross-row sums of the even coarser levels of its tower.
fn ledger_transform_on_special(
    aw: &AnnotatedWeight,
    j: &DyadicInterval,
    level: u32,
    terms: &[BigRational],
) -> BigRational {
    let omega = &aw.params.omega;
    // own row: Σ t_m in units of ω_ℓ = 3^ℓ ω
    let mut total = terms.iter().sum::<BigRational>() * pow3(level) * omega;
    for lp in (0..level).step_by(2) {
        let parent = aw
            .forming_cell_containing(lp, j)
            .expect("tower cell exists");
        let sub = aw
            .forming_cell_containing(lp + 1, j)
            .expect("tower subcell exists");
        let m = subcell_index(parent, sub) as usize;
        let cross: BigRational =
            terms[..m].iter().sum::<BigRational>() - &terms[m];
        total += cross * pow3(lp) * omega;
    }
    total
}

/// Inverse-weight value on a level-ℓ special: `(σ/3^ℓ)·(1+5ε)/(9ε)`.
fn inverse_on_special(aw: &AnnotatedWeight, level: u32) -> BigRational {
    let e = &aw.params.solved.epsilon;
    aw.params.sigma() / pow3(level) * ((BigRational::one() + br(5, 1) * e) / (br(9, 1) * e))
}

/// One lower-bound experiment: per-level integrals over the special sets,
/// computed by pipeline and by ledger, with the normalized ratios.
#[derive(Clone, Debug, Serialize)]
pub struct LowerBoundReport {
    /// Levels included (even only for the martingale form).
    pub levels: Vec<u32>,
    pub per_level_brute: Vec<f64>,
    /// Exact rationals (the ledger never leaves rational arithmetic, in
    /// either mode).
    pub per_level_ledger: Vec<String>,
    pub specials_integral: f64,
    pub integral_full: f64,
    /// Exact form of the full integral in exact mode.
    pub integral_full_exact: Option<String>,
    /// Full integral over the normalizer `p²(ln p)^e·w(I₀)`.
    pub ratio_full: f64,
    /// Specials-only (ledger) integral over the same normalizer.
    pub ratio_ledger: f64,
    /// Geometric tail estimate for the levels beyond the truncation.
    pub tail_estimate: f64,
    /// Min over levels of `v_ℓ/(ω k^e' p ρ^ℓ)`, ρ = 1 − 4^{1-k}.
    pub prefactor_min: f64,
    pub max_rel_divergence: f64,
}

fn integral_over_specials(
    integrand: &StepFunction,
    specials: &[DyadicInterval],
) -> Scalar {
    let integ = Integrator::new(integrand);
    let mut acc = Accumulator::new(integrand.mode());
    for j in specials {
        acc.add(&integ.integral_over(j));
    }
    acc.finish()
}

fn check_route_agreement(
    brute: &Scalar,
    ledger: &BigRational,
    what: &str,
) -> Result<f64, CoreError> {
    match brute {
        Scalar::Exact(x) => {
            let lr = crate::scalar::Exact::from_rational(ledger.clone());
            if !x.sub(&lr).is_zero() {
                return Err(CoreError::LedgerDivergence(format!(
                    "{what}: exact values differ: {:?} vs {}",
                    x, ledger
                )));
            }
            Ok(0.0)
        }
        Scalar::Float(v) => {
            let l = ledger.to_f64().unwrap();
            let rel = (v - l).abs() / l.abs().max(f64::MIN_POSITIVE);
            if rel > 1e-9 {
                return Err(CoreError::LedgerDivergence(format!(
                    "{what}: {v} vs {l} (rel {rel:e})"
                )));
            }
            Ok(rel)
        }
    }
}

/// `∫(Tw)²w⁻¹` with the row sign pattern: brute force against the exact
/// per-level ledger; ratio against `p²(ln p)²·w(I₀)`.
pub fn martingale_lower_bound(aw: &AnnotatedWeight) -> Result<LowerBoundReport, CoreError> {
    let w = &aw.weight;
    let winv = w.invert()?;
    let signs = row_sign_pattern(aw);
    let t = martingale_transform(w, &signs);
    let integrand = product(&t.square(), &winv);

    let s = &aw.params.solved;
    let alphas = alpha_chain(s.k, &s.p, &s.tau_w);
    let terms = row_terms(&alphas);

    let mut levels = Vec::new();
    let mut brute = Vec::new();
    let mut ledger = Vec::new();
    let mut max_div = 0.0f64;
    for (l, specials) in aw.specials.iter().enumerate() {
        let l = l as u32;
        if l % 2 != 0 {
            continue;
        }
        let b = integral_over_specials(&integrand, specials);
        let mut v = BigRational::zero();
        for j in specials {
            let tv = ledger_transform_on_special(aw, j, l, &terms);
            // positivity of the transform on even specials
            if !tv.is_positive() {
                return Err(CoreError::LedgerDivergence(format!(
                    "transform not positive on special {}",
                    j.path_bits()
                )));
            }
            v += &tv * &tv * inverse_on_special(aw, l) * j.len_rational();
        }
        max_div = max_div.max(check_route_agreement(&b, &v, &format!("level {l}"))?);
        levels.push(l);
        brute.push(b.to_f64());
        ledger.push(v);
    }

    let full = integrand.integral();
    finish_lower_bound(aw, levels, brute, ledger, full, max_div, 2, 2)
}

/// Square-function increments of the chain intervals inside one cell, in
/// units of the local ω²: `(δ_{I_j}/2)² + (δ_{I_j^+}/2)²` for j = 0..k-2,
/// plus the end increment `(δ_{I_{k-1}}/2)²`.
fn square_blocks(
    p: &BigRational,
    tau_w: &BigRational,
    alphas: &[BigRational],
) -> (Vec<BigRational>, BigRational) {
    let mut blocks = Vec::with_capacity(alphas.len());
    for a in alphas {
        let d_cell = (br(3, 1) + a) * br(1, 2) - BigRational::one() / p;
        let d_row = br(3, 1) - a;
        blocks.push((&d_cell * &d_cell + &d_row * &d_row) * br(1, 4));
    }
    let d_end = (BigRational::one() - tau_w) / p;
    (blocks, &d_end * &d_end * br(1, 4))
}

/// Exact `S²w` on a special at level ℓ via the tower decomposition.
fn ledger_square_on_special(
    aw: &AnnotatedWeight,
    j: &DyadicInterval,
    level: u32,
    blocks: &[BigRational],
    end_block: &BigRational,
) -> BigRational {
    let omega = &aw.params.omega;
    let omega2 = omega * omega;
    let mut total = BigRational::zero();
    for lp in 0..level {
        let parent = aw.forming_cell_containing(lp, j).expect("tower cell");
        let sub = aw.forming_cell_containing(lp + 1, j).expect("tower subcell");
        let m = subcell_index(parent, sub) as usize;
        let scale = pow3(2 * lp) * &omega2;
        total += blocks[..=m].iter().sum::<BigRational>() * scale;
    }
    let own_scale = pow3(2 * level) * &omega2;
    total += (blocks.iter().sum::<BigRational>() + end_block) * own_scale;
    total
}

/// `∫(S²w)w⁻¹`: brute force against the exact per-level ledger over all
/// special levels; ratio against `p²(ln p)·w(I₀)`. Also returns the
/// pointwise minimum of `S²w/(k·3^{2ℓ}ω²)` over specials.
pub fn square_lower_bound(
    aw: &AnnotatedWeight,
) -> Result<(LowerBoundReport, f64), CoreError> {
    let w = &aw.weight;
    let winv = w.invert()?;
    let s2 = square_function(w);
    let integrand = product(&s2, &winv);

    let s = &aw.params.solved;
    let alphas = alpha_chain(s.k, &s.p, &s.tau_w);
    let (blocks, end_block) = square_blocks(&s.p, &s.tau_w, &alphas);
    let omega = &aw.params.omega;

    let mut levels = Vec::new();
    let mut brute = Vec::new();
    let mut ledger = Vec::new();
    let mut max_div = 0.0f64;
    let mut pointwise_min = f64::INFINITY;
    for (l, specials) in aw.specials.iter().enumerate() {
        let l = l as u32;
        let b = integral_over_specials(&integrand, specials);
        let mut v = BigRational::zero();
        for j in specials {
            let s2v = ledger_square_on_special(aw, j, l, &blocks, &end_block);
            let denom = br(s.k as i64, 1) * pow3(2 * l) * omega * omega;
            pointwise_min = pointwise_min.min((&s2v / &denom).to_f64().unwrap());
            v += s2v * inverse_on_special(aw, l) * j.len_rational();
        }
        max_div = max_div.max(check_route_agreement(&b, &v, &format!("level {l}"))?);
        levels.push(l);
        brute.push(b.to_f64());
        ledger.push(v);
    }

    let full = integrand.integral();
    let report = finish_lower_bound(aw, levels, brute, ledger, full, max_div, 1, 1)?;
    Ok((report, pointwise_min))
}

#[allow(clippy::too_many_arguments)]
fn finish_lower_bound(
    aw: &AnnotatedWeight,
    levels: Vec<u32>,
    brute: Vec<f64>,
    ledger: Vec<BigRational>,
    full: Scalar,
    max_div: f64,
    log_exponent: i32,
    k_exponent: u32,
) -> Result<LowerBoundReport, CoreError> {
    let s = &aw.params.solved;
    let p = s.p.to_f64().unwrap();
    let omega = aw.params.omega.to_f64().unwrap();
    let normalizer = p * p * p.ln().powi(log_exponent) * omega;
    let specials_sum: BigRational = ledger.iter().sum();
    let specials_f = specials_sum.to_f64().unwrap();
    let full_f = full.to_f64();

    // geometric tail estimate beyond the truncation level
    let rho = 1.0 - 0.25f64.powi(s.k as i32 - 1);
    let tail = match ledger.len() {
        0 => 0.0,
        1 => {
            let step = rho.powi(levels.last().map(|l| (l + 1) as i32).unwrap_or(1));
            ledger[0].to_f64().unwrap() * step / (1.0 - step)
        }
        n => {
            let r = ledger[n - 1].to_f64().unwrap() / ledger[n - 2].to_f64().unwrap();
            let r = r.min(0.999_999);
            ledger[n - 1].to_f64().unwrap() * r / (1.0 - r)
        }
    };

    // per-level prefactor against ω k^e p ρ^ℓ
    let mut prefactor_min = f64::INFINITY;
    for (l, v) in levels.iter().zip(&ledger) {
        let denom = omega * (s.k as f64).powi(k_exponent as i32) * p * rho.powi(*l as i32);
        prefactor_min = prefactor_min.min(v.to_f64().unwrap() / denom);
    }

    Ok(LowerBoundReport {
        levels,
        per_level_brute: brute,
        per_level_ledger: ledger.iter().map(|v| v.to_string()).collect(),
        specials_integral: specials_f,
        integral_full: full_f,
        integral_full_exact: match &full {
            Scalar::Exact(x) => Some(format!("{x:?}")),
            Scalar::Float(_) => None,
        },
        ratio_full: full_f / normalizer,
        ratio_ledger: specials_f / normalizer,
        tail_estimate: tail,
        prefactor_min,
        max_rel_divergence: max_div,
    })
}

/// Maximal-function testing over every dyadic window, plus the majorant
/// checks.
#[derive(Clone, Debug, Serialize)]
pub struct MaximalTestingReport {
    /// Max over dyadic J of `∫_J M^d(wχ_J)² w⁻¹ / (p² w(J))`.
    pub test_max: f64,
    pub test_argmax: String,
    /// Max over cells of `M^d w / w̃`.
    pub majorant_ratio_max: f64,
    /// `∫ w̃² w⁻¹ / (p² w(·))` over the root.
    pub lemma_i0: f64,
    /// Max over the chain intervals `I_m`, m = 1..k-2 (0 when k = 2).
    pub lemma_im_max: f64,
    /// `∫ (M^d(χ w))² w⁻¹ / (p² w(·))` on `I_{k-1}` and on its father.
    pub lemma_ik1: f64,
    pub lemma_ik1hat: f64,
    pub windows: usize,
}

/// Σ over leaves below `node` of `(chain-max of ⟨w⟩)²·w⁻¹·|leaf|`, the
/// chain being clipped at the window where the walk started.
fn window_integral(
    w: &StepFunction,
    integ: &Integrator,
    node: DyadicInterval,
    running: Option<Scalar>,
    acc: &mut Accumulator,
) {
    let avg = integ.average(&node);
    let running = Some(match running {
        None => avg,
        Some(r) => {
            if avg > r {
                avg
            } else {
                r
            }
        }
    });
    if let Some(v) = w.value_on(&node) {
        let m = running.unwrap();
        let contrib = (&(&m * &m) / v).scale_rational(&node.len_rational());
        acc.add(&contrib);
        return;
    }
    window_integral(w, integ, node.left_child(), running.clone(), acc);
    window_integral(w, integ, node.right_child(), running, acc);
}

pub fn maximal_testing(aw: &AnnotatedWeight) -> Result<MaximalTestingReport, CoreError> {
    let w = &aw.weight;
    let mode = w.mode();
    let winv = w.invert()?;
    let integ = Integrator::new(w);
    let p = aw.params.solved.p.to_f64().unwrap();
    let p2 = p * p;

    let mut test_max = f64::NEG_INFINITY;
    let mut argmax = String::new();
    let nodes = dyadic_nodes(w);
    for j in &nodes {
        let mut acc = Accumulator::new(mode);
        window_integral(w, &integ, *j, None, &mut acc);
        let lhs = acc.finish().to_f64();
        let wj = integ.integral_over(j).to_f64();
        let ratio = lhs / (p2 * wj);
        if ratio > test_max {
            test_max = ratio;
            argmax = j.path_bits();
        }
    }

    // majorant: M^d w ≤ C·w̃ pointwise
    let maj = build_majorant(aw);
    let mdw = maximal_function(w, &DyadicInterval::root())?;
    let mut maj_ratio = f64::NEG_INFINITY;
    for (_, m, t) in merged_cells(&mdw, &maj) {
        maj_ratio = maj_ratio.max(m.to_f64() / t.to_f64());
    }

    // majorant second-moment ratios over the root and the chain intervals
    let maj_sq_winv = product(&maj.square(), &winv);
    let ii = Integrator::new(&maj_sq_winv);
    let lemma_ratio = |iv: &DyadicInterval| {
        ii.integral_over(iv).to_f64() / (p2 * integ.integral_over(iv).to_f64())
    };
    let root = DyadicInterval::root();
    let lemma_i0 = lemma_ratio(&root);
    let k = aw.k();
    let mut lemma_im_max: f64 = 0.0;
    for m in 1..=k.saturating_sub(2) {
        lemma_im_max = lemma_im_max.max(lemma_ratio(&root.chain(m)));
    }

    // windowed maximal-function ratios on I_{k-1} and its father
    let windowed_ratio = |j: &DyadicInterval| -> Result<f64, CoreError> {
        let mj = maximal_function(w, j)?;
        let integrand = product(&mj.square(), &winv);
        let num = Integrator::new(&integrand).integral_over(j).to_f64();
        Ok(num / (p2 * integ.integral_over(j).to_f64()))
    };
    let ik1 = root.chain(k - 1);
    let lemma_ik1 = windowed_ratio(&ik1)?;
    let lemma_ik1hat = windowed_ratio(&ik1.parent().unwrap())?;

    Ok(MaximalTestingReport {
        test_max,
        test_argmax: argmax,
        majorant_ratio_max: maj_ratio,
        lemma_i0,
        lemma_im_max,
        lemma_ik1,
        lemma_ik1hat,
        windows: nodes.len(),
    })
}

/// Weak-type distribution ratios over a λ-grid.
#[derive(Clone, Debug, Serialize)]
pub struct WeakTypeReport {
    /// Max over windows J and grid λ of
    /// `λ·w{x∈J : Σ_{I⊆J}|Δ_I w⁻¹|²χ_I > λ} / (|J|·Q·⟨w⁻¹⟩_J)`.
    pub max_ratio: f64,
    pub argmax: String,
    pub windows: usize,
    pub lambda_grid: usize,
    pub q_used: f64,
    pub monotone_ok: bool,
}

pub fn weak_type_check(
    aw: &AnnotatedWeight,
    lambda_grid: usize,
    convention: DeltaConvention,
) -> Result<WeakTypeReport, CoreError> {
    let w = &aw.weight;
    let winv = w.invert()?;
    let q = a2_characteristic(w)?.to_f64();
    let ii = Integrator::new(&winv);

    let mut windows: Vec<DyadicInterval> = vec![DyadicInterval::root()];
    for cells in aw.forming.iter().skip(1) {
        windows.extend(cells.iter().copied());
    }

    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax = String::new();
    let mut monotone_ok = true;
    for j in &windows {
        let g = local_square_sum(&winv, j, convention);
        let positives: Vec<f64> = g
            .leaves()
            .iter()
            .filter(|(iv, v)| j.contains(iv) && v.sign() > 0)
            .map(|(_, v)| v.to_f64())
            .collect();
        if positives.is_empty() {
            continue;
        }
        let lo = positives.iter().cloned().fold(f64::INFINITY, f64::min) * 0.5;
        let hi = positives.iter().cloned().fold(0.0, f64::max) * 2.0;
        let vj = ii.integral_over(j).to_f64() / j.len_f64(); // ⟨w⁻¹⟩_J
        let mut prev = f64::INFINITY;
        for i in 0..lambda_grid {
            let t = i as f64 / (lambda_grid - 1) as f64;
            let lambda = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
            let mass = weak_distribution(&g, w, &Scalar::Float(lambda)).to_f64();
            if mass > prev * (1.0 + 1e-12) {
                monotone_ok = false;
            }
            prev = mass;
            let ratio = lambda * mass / (j.len_f64() * q * vj);
            if ratio > max_ratio {
                max_ratio = ratio;
                argmax = format!("J={} λ={lambda:.6e}", j.path_bits());
            }
        }
        // beyond the maximum the distribution must vanish
        let beyond = weak_distribution(&g, w, &Scalar::Float(hi * 2.0)).to_f64();
        if beyond != 0.0 {
            monotone_ok = false;
        }
    }

    Ok(WeakTypeReport {
        max_ratio,
        argmax,
        windows: windows.len(),
        lambda_grid,
        q_used: q,
        monotone_ok,
    })
}

/// Randomized Rubio de Francia property check.
#[derive(Clone, Debug, Serialize)]
pub struct RdfReport {
    pub functions: usize,
    pub m_norm: f64,
    /// Max of `‖ℛg‖/‖g‖` (must be ≤ 2).
    pub worst_norm_ratio: f64,
    /// Min pointwise slack of `ℛg − g` (must be ≥ 0).
    pub worst_pointwise: f64,
    /// Max pointwise excess of `M(ℛg) − (2·m_norm·ℛg + tail)` (≤ 0).
    pub worst_a1_excess: f64,
    pub tail_sup: f64,
    pub pass: bool,
}

pub fn rdf_property_check(
    aw: &AnnotatedWeight,
    count: usize,
    terms: usize,
    seed: u64,
) -> Result<RdfReport, CoreError> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = aw.weight.map(|v| Scalar::Float(v.to_f64()));
    let winv = w.invert()?;
    let root = DyadicInterval::root();

    let norm = |f: &StepFunction| integrate_product(&product(f, f), &winv).to_f64().sqrt();

    // norm estimate from the iterate growth of the probe family itself
    let mut m_norm = 1.0f64;
    let mut gs = Vec::with_capacity(count);
    for _ in 0..count {
        let leaves = w
            .leaves()
            .iter()
            .map(|(iv, _)| (*iv, Scalar::Float(rng.gen_range(0.0..10.0))))
            .collect();
        gs.push(StepFunction::new(leaves)?);
    }
    for g in &gs {
        let mut it = g.clone();
        let mut prev = norm(&it).max(f64::MIN_POSITIVE);
        for _ in 0..terms {
            it = maximal_function(&it, &root)?;
            let n = norm(&it);
            m_norm = m_norm.max(n / prev);
            prev = n.max(f64::MIN_POSITIVE);
        }
    }

    let m = Scalar::Float(m_norm);
    let mut worst_norm = f64::NEG_INFINITY;
    let mut worst_pointwise = f64::INFINITY;
    let mut worst_a1 = f64::NEG_INFINITY;
    let mut tail_sup = 0.0f64;
    for g in &gs {
        let r = rubio_de_francia(g, &m, terms)?;
        worst_norm = worst_norm.max(norm(&r.function) / norm(g).max(f64::MIN_POSITIVE));
        for (_, gv, rv) in merged_cells(g, &r.function) {
            worst_pointwise = worst_pointwise.min(rv.to_f64() - gv.to_f64());
        }
        let mr = maximal_function(&r.function, &root)?;
        let bound = add(&r.function.scale(&Scalar::Float(2.0 * m_norm)), &r.tail);
        for (_, lhs, rhs) in merged_cells(&mr, &bound) {
            worst_a1 = worst_a1.max(lhs.to_f64() - rhs.to_f64());
        }
        tail_sup = tail_sup.max(
            r.tail
                .leaves()
                .iter()
                .map(|(_, v)| v.to_f64())
                .fold(0.0, f64::max),
        );
    }

    Ok(RdfReport {
        functions: gs.len(),
        m_norm,
        worst_norm_ratio: worst_norm,
        worst_pointwise,
        worst_a1_excess: worst_a1,
        tail_sup,
        pass: worst_norm <= 2.0 + 1e-9 && worst_pointwise >= -1e-12 && worst_a1 <= 1e-9,
    })
}

/// Which experiments a sweep runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Suite {
    Mart,
    Square,
    Maximal,
    Weak,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        Some(match s {
            "mart" => Suite::Mart,
            "square" => Suite::Square,
            "maximal" => Suite::Maximal,
            "weak" => Suite::Weak,
            "all" => Suite::All,
            _ => return None,
        })
    }

    fn runs(&self, which: Suite) -> bool {
        *self == Suite::All || *self == which
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub suite: Suite,
    pub k_min: u32,
    pub k_max: u32,
    /// None = auto policy: `min(4^k, depth-cap-feasible, forming-budget)`.
    pub levels: Option<u32>,
    pub mode: Mode,
    pub seed: u64,
    pub max_forming: usize,
    pub depth_cap: u32,
    pub budget_seconds: f64,
    pub lambda_grid: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            suite: Suite::All,
            k_min: 2,
            k_max: 2,
            levels: None,
            mode: Mode::Exact,
            seed: 7,
            max_forming: 2048,
            depth_cap: crate::interval::MAX_DEPTH,
            budget_seconds: 600.0,
            lambda_grid: 16,
        }
    }
}

/// The automatic truncation policy for one k.
pub fn auto_levels(k: u32, depth_cap: u32, max_forming: usize) -> u32 {
    let full = if k <= 5 { 1u32 << (2 * k) } else { u32::MAX };
    let by_depth = (depth_cap - 1) / (2 * k - 1);
    let mut by_budget = 0u32;
    let mut cells = 1u128;
    let mut total = 0u128;
    loop {
        cells *= (k - 1) as u128;
        total += cells;
        if total > max_forming as u128 {
            break;
        }
        by_budget += 1;
        if by_budget >= 64 {
            break;
        }
    }
    full.min(by_depth).min(by_budget.max(1))
}

/// A fully attributed experiment outcome for one `(k, L)`.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub k: u32,
    pub levels: u32,
    pub mode: Mode,
    pub eps: String,
    pub tau_w: String,
    pub p: String,
    pub a2: Option<f64>,
    pub ratio_mart_brute: Option<f64>,
    pub ratio_mart_ledger: Option<f64>,
    pub ratio_sq: Option<f64>,
    pub test_max: Option<f64>,
    pub weak_max: Option<f64>,
    pub martingale: Option<LowerBoundReport>,
    pub square: Option<LowerBoundReport>,
    pub s2_pointwise_min: Option<f64>,
    pub maximal: Option<MaximalTestingReport>,
    pub weak: Option<WeakTypeReport>,
    pub rdf: Option<RdfReport>,
    pub checks: Vec<CheckOutcome>,
    #[serde(skip)]
    pub seconds: f64,
    pub incomplete: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        !self.incomplete && self.checks.iter().all(|c| c.passed)
    }
}

fn check(checks: &mut Vec<CheckOutcome>, name: &str, passed: bool, detail: String) {
    checks.push(CheckOutcome { name: name.to_string(), passed, detail });
}

/// Run one experiment.
pub fn run_experiment(cfg: &SweepConfig, k: u32) -> Result<ExperimentReport, CoreError> {
    let start = Instant::now();
    let levels = cfg
        .levels
        .unwrap_or_else(|| auto_levels(k, cfg.depth_cap, cfg.max_forming));
    let params = WeightParams::new(k, levels, cfg.mode)
        .with_depth_cap(cfg.depth_cap)
        .with_max_forming(cfg.max_forming);
    let solved = params.solved.clone();
    let aw = build_weight(params, DyadicInterval::root())?;
    let mut checks = Vec::new();

    let (r1, r2) = solved.residuals();
    check(
        &mut checks,
        "parameter_residuals_zero",
        r1.is_zero() && r2.is_zero(),
        format!("r1={r1}, r2={r2}"),
    );

    let a2 = a2_characteristic(&aw.weight)?.to_f64();
    let p = solved.p.to_f64().unwrap();
    check(
        &mut checks,
        "a2_within_p2_bracket",
        a2 / (p * p) >= 1.0 / 50.0 && a2 / (p * p) <= 50.0,
        format!("a2/p² = {}", a2 / (p * p)),
    );

    let mut report = ExperimentReport {
        k,
        levels,
        mode: cfg.mode,
        eps: solved.epsilon.to_string(),
        tau_w: solved.tau_w.to_string(),
        p: solved.p.to_string(),
        a2: Some(a2),
        ratio_mart_brute: None,
        ratio_mart_ledger: None,
        ratio_sq: None,
        test_max: None,
        weak_max: None,
        martingale: None,
        square: None,
        s2_pointwise_min: None,
        maximal: None,
        weak: None,
        rdf: None,
        checks,
        seconds: 0.0,
        incomplete: false,
    };

    if cfg.suite.runs(Suite::Mart) {
        let mart = martingale_lower_bound(&aw)?;
        // row bounds on every even special
        let row_floor = br(calibration::ROW_RATIO_MIN.0, calibration::ROW_RATIO_MIN.1);
        let mut row_ok = true;
        let mut cross_ok = true;
        let mut detail = String::new();
        for (l, j) in aw.all_specials() {
            if l % 2 != 0 {
                continue;
            }
            let rc = row_contribution(&aw, j)?;
            let denom = br(k as i64, 1) * pow3(l + 1) * &aw.params.omega;
            let floor = Scalar::from_rational(&(&row_floor * &denom), aw.mode());
            if rc < floor {
                row_ok = false;
                detail = format!("row at {} = {:e}", j.path_bits(), rc.to_f64());
            }
            let cross = cross_row_interference(&aw, j)?;
            let bound = (br(k as i64, 1) * pow3(l) * &aw.params.omega * br(1, 2))
                .to_f64()
                .unwrap()
                * (1.0 + 1e-9);
            if cross.to_f64() > bound {
                cross_ok = false;
                detail = format!("cross at {} = {:e}", j.path_bits(), cross.to_f64());
            }
        }
        check(&mut report.checks, "row_contribution_floor", row_ok, detail.clone());
        check(&mut report.checks, "cross_row_bound", cross_ok, detail);
        check(
            &mut report.checks,
            "mart_prefactor_floor",
            mart.prefactor_min >= calibration::MART_LEVEL_PREFACTOR_MIN,
            format!("min prefactor {}", mart.prefactor_min),
        );
        report.ratio_mart_brute = Some(mart.ratio_full);
        report.ratio_mart_ledger = Some(mart.ratio_ledger);
        report.martingale = Some(mart);
    }

    if cfg.suite.runs(Suite::Square) {
        let (sq, pointwise) = square_lower_bound(&aw)?;
        check(
            &mut report.checks,
            "sq_prefactor_floor",
            sq.prefactor_min >= calibration::SQ_LEVEL_PREFACTOR_MIN,
            format!("min prefactor {}", sq.prefactor_min),
        );
        check(
            &mut report.checks,
            "s2_pointwise_floor",
            pointwise >= calibration::S2_POINTWISE_MIN,
            format!("min S²/(k·3^{{2l}}ω²) = {pointwise}"),
        );
        report.ratio_sq = Some(sq.ratio_full);
        report.s2_pointwise_min = Some(pointwise);
        report.square = Some(sq);
    }

    if cfg.suite.runs(Suite::Maximal) {
        let mt = maximal_testing(&aw)?;
        check(
            &mut report.checks,
            "majorant_factor",
            mt.majorant_ratio_max <= calibration::MAJ_FACTOR_MAX,
            format!("max M^dw/w̃ = {}", mt.majorant_ratio_max),
        );
        report.test_max = Some(mt.test_max);
        report.maximal = Some(mt);
    }

    if cfg.suite.runs(Suite::Weak) {
        let wt = weak_type_check(&aw, cfg.lambda_grid, DeltaConvention::FullDifference)?;
        check(
            &mut report.checks,
            "weak_ratio_recorded_ceiling",
            wt.max_ratio <= calibration::WEAK_RATIO_MAX,
            format!("max ratio {}", wt.max_ratio),
        );
        check(
            &mut report.checks,
            "weak_distribution_monotone",
            wt.monotone_ok,
            String::new(),
        );
        report.weak_max = Some(wt.max_ratio);
        report.weak = Some(wt);
    }

    if cfg.suite == Suite::All {
        let rdf = rdf_property_check(&aw, 5, 8, cfg.seed)?;
        check(
            &mut report.checks,
            "rdf_properties",
            rdf.pass,
            format!(
                "norm {} pointwise {} a1 {}",
                rdf.worst_norm_ratio, rdf.worst_pointwise, rdf.worst_a1_excess
            ),
        );
        report.rdf = Some(rdf);
    }

    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Run the sweep; the second component is false when the time budget cut
/// it short (the skipped tail carries `incomplete`).
pub fn scaling_sweep(cfg: &SweepConfig) -> Result<(Vec<ExperimentReport>, bool), CoreError> {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut complete = true;
    for k in cfg.k_min..=cfg.k_max {
        if start.elapsed().as_secs_f64() > cfg.budget_seconds {
            complete = false;
            let solved = solve_parameters(k);
            out.push(ExperimentReport {
                k,
                levels: 0,
                mode: cfg.mode,
                eps: solved.epsilon.to_string(),
                tau_w: solved.tau_w.to_string(),
                p: solved.p.to_string(),
                a2: None,
                ratio_mart_brute: None,
                ratio_mart_ledger: None,
                ratio_sq: None,
                test_max: None,
                weak_max: None,
                martingale: None,
                square: None,
                s2_pointwise_min: None,
                maximal: None,
                weak: None,
                rdf: None,
                checks: vec![CheckOutcome {
                    name: "budget".into(),
                    passed: false,
                    detail: "time budget exhausted before this k".into(),
                }],
                seconds: 0.0,
                incomplete: true,
            });
            continue;
        }
        out.push(run_experiment(cfg, k)?);
    }
    Ok((out, complete))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(k: u32, levels: u32, mode: Mode) -> AnnotatedWeight {
        build_weight(WeightParams::new(k, levels, mode), DyadicInterval::root()).unwrap()
    }

    #[test]
    fn alpha_chain_k2() {
        let s = solve_parameters(2);
        let alphas = alpha_chain(2, &s.p, &s.tau_w);
        assert_eq!(alphas.len(), 1);
        // α₁ = (1+3/7)/(2·19/7) = 5/19
        assert_eq!(alphas[0], br(5, 19));
    }

    #[test]
    fn row_contribution_k2_exact() {
        let aw = build(2, 2, Mode::Exact);
        let j = aw.specials[0][0];
        let rc = row_contribution(&aw, &j).unwrap();
        // single term ½(3ω − ⟨w⟩_{I^{++}}) = ½(3 − 5/19) = 26/19
        assert_eq!(rc, Scalar::from_rational(&br(26, 19), Mode::Exact));
        // ratio against k·3^{ℓ+1}ω = 6: exactly 13/57
        let ratio = &rc * &Scalar::from_rational(&br(1, 6), Mode::Exact);
        assert_eq!(ratio, Scalar::from_rational(&br(13, 57), Mode::Exact));
        // not special → error
        assert!(matches!(
            row_contribution(&aw, &DyadicInterval::root()),
            Err(CoreError::NotSpecial(_))
        ));
    }

    #[test]
    fn row_terms_all_positive() {
        for k in [2u32, 3, 4] {
            let aw = build(k, 2, Mode::Exact);
            for (_, j) in aw.all_specials() {
                let rc = row_contribution(&aw, j).unwrap();
                assert!(rc.sign() > 0, "row contribution must be positive");
            }
        }
    }

    #[test]
    fn cross_row_zero_at_level_zero() {
        let aw = build(3, 2, Mode::Exact);
        let j = aw.specials[0][0];
        let cross = cross_row_interference(&aw, &j).unwrap();
        assert!(cross.is_zero());
    }

    #[test]
    fn cross_row_ledger_matches_transform_k3() {
        // level-2 specials: the ledger value (tower sums of exact chain
        // constants) must equal the pipeline transform exactly
        let aw = build(3, 3, Mode::Exact);
        let s = &aw.params.solved;
        let alphas = alpha_chain(3, &s.p, &s.tau_w);
        let terms = row_terms(&alphas);
        let signs = row_sign_pattern(&aw);
        let t = martingale_transform(&aw.weight, &signs);
        for j in &aw.specials[2] {
            let full = t.value_on(j).unwrap().clone();
            let ledger = ledger_transform_on_special(&aw, j, 2, &terms);
            assert_eq!(full, Scalar::from_rational(&ledger, Mode::Exact));
            // and the interference bound ½k·3^ℓ·ω
            let cross = cross_row_interference(&aw, j).unwrap();
            let bound = Scalar::from_rational(&(br(3, 2) * pow3(2)), Mode::Exact);
            assert!(cross < bound);
        }
    }

    #[test]
    fn martingale_routes_agree_exact() {
        for (k, l) in [(2u32, 5u32), (3, 3)] {
            let aw = build(k, l, Mode::Exact);
            let rep = martingale_lower_bound(&aw).unwrap();
            assert_eq!(rep.max_rel_divergence, 0.0);
            assert!(rep.ratio_full >= rep.ratio_ledger);
            assert!(rep.per_level_brute.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn martingale_routes_agree_float() {
        let aw = build(3, 4, Mode::Float);
        let rep = martingale_lower_bound(&aw).unwrap();
        assert!(rep.max_rel_divergence <= 1e-9);
    }

    #[test]
    fn martingale_ledger_monotone_in_levels() {
        // the specials-only integral is non-decreasing in the truncation
        let r3 = martingale_lower_bound(&build(2, 3, Mode::Exact)).unwrap();
        let r5 = martingale_lower_bound(&build(2, 5, Mode::Exact)).unwrap();
        let r7 = martingale_lower_bound(&build(2, 7, Mode::Exact)).unwrap();
        assert!(r5.specials_integral >= r3.specials_integral);
        assert!(r7.specials_integral >= r5.specials_integral);
    }

    #[test]
    fn square_routes_agree_and_pointwise_bound() {
        let aw = build(3, 3, Mode::Exact);
        let (rep, pointwise) = square_lower_bound(&aw).unwrap();
        assert_eq!(rep.max_rel_divergence, 0.0);
        assert!(pointwise > 0.9, "pointwise constant {pointwise}");
        // constant functions have zero square function
        let c = StepFunction::constant(Scalar::one(Mode::Exact));
        let s2 = square_function(&c);
        assert!(s2.integral().is_zero());
    }

    #[test]
    fn maximal_testing_small() {
        let aw = build(2, 2, Mode::Float);
        let rep = maximal_testing(&aw).unwrap();
        assert!(rep.test_max > 0.0);
        assert!(rep.majorant_ratio_max <= 6.0);
        assert!(rep.lemma_i0 > 0.0 && rep.lemma_ik1 > 0.0 && rep.lemma_ik1hat > 0.0);
    }

    #[test]
    fn weak_type_small_run() {
        let aw = build(2, 3, Mode::Float);
        let rep = weak_type_check(&aw, 12, DeltaConvention::FullDifference).unwrap();
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
        assert!(rep.monotone_ok);
    }

    #[test]
    fn rdf_check_passes() {
        let aw = build(2, 3, Mode::Float);
        let rep = rdf_property_check(&aw, 4, 8, 13).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn auto_levels_policy() {
        // k=2: full depth 16 fits both caps
        assert_eq!(auto_levels(2, 64, 1_000_000), 16);
        // k=3: depth cap 64 allows (64-1)/5 = 12
        assert_eq!(auto_levels(3, 64, 1_000_000), 12);
        // small forming budget binds first: 2 + 4 cells fit, 14 do not
        assert_eq!(auto_levels(3, 64, 10), 2);
    }

    #[test]
    fn sweep_emits_one_report_per_k() {
        let cfg = SweepConfig {
            suite: Suite::Mart,
            k_min: 2,
            k_max: 3,
            levels: Some(2),
            mode: Mode::Exact,
            ..SweepConfig::default()
        };
        let (reports, complete) = scaling_sweep(&cfg).unwrap();
        assert!(complete);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].p, "19/7");
        assert_eq!(reports[1].p, "243/23");
    }
}
