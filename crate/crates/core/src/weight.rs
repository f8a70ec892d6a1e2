//! Construction of the recursive extremal weights and their annotations.
//!
//! For a width parameter `k ≥ 2` set `ε = 4^{-k}`, `τ_w = 9ε/(1+5ε)` and
//! `p = (⅔(1-ε) + 2ετ_w)/(4ε)`. A cell at recursion level ℓ carries local
//! mass parameters `(ω_ℓ, σ_ℓ) = (3^ℓ ω, σ/3^ℓ)` and splits along the chain
//! `I_0 = I`, `I_{m+1} = I_m^{++}`:
//!
//! * each `I_m^-` (m = 0..k-2) and `I_{k-1}^-` is a constant leaf `ω_ℓ/p`;
//! * each `I_m^{+-}` (m = 0..k-2) is a *forming* subcell, expanded
//!   recursively with `(3ω_ℓ, σ_ℓ/3)`;
//! * `I_{k-1}^+` is the *special* leaf with value `ω_ℓ τ_w/p`.
//!
//! After `levels` rounds the remaining cells receive the two-leaf base
//! weight `w₀(ω_L, σ_L)` with values `ω_L(1 ∓ √((p-1)/p))`, so every cell
//! average is exactly `ω_ℓ` and every inverse average exactly `σ_ℓ` at any
//! truncation depth.
//!
//! The *row* of a special `J = K_{k-1}^+` is `{K_m^+ : m = 0..k-2}`; rows,
//! specials and forming cells are recorded at construction time.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::CoreError;
use crate::interval::DyadicInterval;
use crate::scalar::{Exact, Mode, Scalar};
use crate::step::StepFunction;

fn br(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn pow3(l: u32) -> BigRational {
    BigRational::from(BigInt::from(3).pow(l))
}

/// Exact rational solution of the two mass-balance equations.
#[derive(Clone, Debug)]
pub struct SolvedParams {
    pub k: u32,
    pub epsilon: BigRational,
    pub tau_w: BigRational,
    pub p: BigRational,
}

/// Solve for `(ε, τ_w, p)` given the width `k ≥ 2`.
pub fn solve_parameters(k: u32) -> SolvedParams {
    assert!(k >= 2, "width parameter must be at least 2");
    let epsilon = BigRational::new(BigInt::one(), BigInt::one() << (2 * k));
    let tau_w = br(9, 1) * &epsilon / (BigRational::one() + br(5, 1) * &epsilon);
    let p = (br(2, 3) * (BigRational::one() - &epsilon) + br(2, 1) * &epsilon * &tau_w)
        / (br(4, 1) * &epsilon);
    SolvedParams { k, epsilon, tau_w, p }
}

impl SolvedParams {
    /// Residuals of the two defining equations; both must vanish.
    ///
    /// r₁ = (⅔(1-ε) + 2ετ)/p − 4ε
    /// r₂ = ⅓(⅓ − 4ε/3) + ⅔(1-ε) + 2ε/τ − 1   (σ-normalized form)
    pub fn residuals(&self) -> (BigRational, BigRational) {
        let e = &self.epsilon;
        let r1 = (br(2, 3) * (BigRational::one() - e) + br(2, 1) * e * &self.tau_w) / &self.p
            - br(4, 1) * e;
        let r2 = br(1, 3) * (br(1, 3) - br(4, 3) * e)
            + br(2, 3) * (BigRational::one() - e)
            + br(2, 1) * e / &self.tau_w
            - BigRational::one();
        (r1, r2)
    }

    /// Radicand of the quadratic field: `p(p-1)`.
    pub fn radicand(&self) -> BigRational {
        &self.p * (&self.p - BigRational::one())
    }

    /// The recursion depth `n = 4^k` of the untruncated construction
    /// (usually not materialized).
    pub fn full_depth(&self) -> u64 {
        1u64 << (2 * self.k)
    }
}

/// Full configuration of one weight build.
#[derive(Clone, Debug)]
pub struct WeightParams {
    pub solved: SolvedParams,
    pub omega: BigRational,
    pub levels: u32,
    pub mode: Mode,
    pub depth_cap: u32,
    pub max_forming: usize,
}

impl WeightParams {
    pub fn new(k: u32, levels: u32, mode: Mode) -> Self {
        WeightParams {
            solved: solve_parameters(k),
            omega: BigRational::one(),
            levels,
            mode,
            depth_cap: crate::interval::MAX_DEPTH,
            max_forming: 1_000_000,
        }
    }

    pub fn with_omega(mut self, omega: BigRational) -> Self {
        assert!(omega.is_positive());
        self.omega = omega;
        self
    }

    pub fn with_depth_cap(mut self, cap: u32) -> Self {
        self.depth_cap = cap.min(crate::interval::MAX_DEPTH);
        self
    }

    pub fn with_max_forming(mut self, max: usize) -> Self {
        self.max_forming = max;
        self
    }

    pub fn k(&self) -> u32 {
        self.solved.k
    }

    pub fn sigma(&self) -> BigRational {
        &self.solved.p / &self.omega
    }

    /// Deepest leaf the build will create below `root`.
    pub fn required_depth(&self, root: &DyadicInterval) -> u32 {
        root.depth() + (2 * self.k() - 1) * self.levels + 1
    }

    /// Number of forming cells over all levels `1..=levels`.
    pub fn forming_count(&self) -> u128 {
        let b = (self.k() - 1) as u128;
        let mut total = 0u128;
        let mut cells = 1u128;
        for _ in 0..self.levels {
            cells = cells.saturating_mul(b);
            total = total.saturating_add(cells);
        }
        total
    }
}

/// How a leaf arose during construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionTag {
    /// Constant leaf `ω_ℓ/p` created when a level-ℓ cell was expanded.
    Body { level: u32 },
    /// The special leaf `ω_ℓ τ_w/p` of a level-ℓ cell.
    Special { level: u32 },
    /// Half of a base `w₀` block placed at the truncation level.
    Base { level: u32 },
}

impl RegionTag {
    pub fn level(&self) -> u32 {
        match self {
            RegionTag::Body { level } | RegionTag::Special { level } | RegionTag::Base { level } => {
                *level
            }
        }
    }
}

/// The row of a special interval: the `k-1` right children whose Haar terms
/// all act on it.
#[derive(Clone, Debug)]
pub struct Row {
    pub level: u32,
    pub members: Vec<DyadicInterval>,
}

/// A built weight plus its construction metadata.
pub struct AnnotatedWeight {
    pub weight: StepFunction,
    pub params: WeightParams,
    pub root: DyadicInterval,
    /// `forming[ℓ]` = cells at level ℓ (level 0 is the root itself);
    /// `forming[levels]` are the cells that received base blocks.
    pub forming: Vec<Vec<DyadicInterval>>,
    /// `specials[ℓ]` = the family 𝒜_ℓ, for ℓ < levels.
    pub specials: Vec<Vec<DyadicInterval>>,
    pub rows: BTreeMap<DyadicInterval, Row>,
    /// Aligned with `weight.leaves()`.
    pub tags: Vec<RegionTag>,
}

/// Two-leaf base weight `w₀(ω, σ, I)` with values `ω(1 ∓ √((p-1)/p))`.
pub fn build_w0(
    omega: &BigRational,
    sigma: &BigRational,
    iv: DyadicInterval,
    p: &BigRational,
    mode: Mode,
) -> Result<StepFunction, CoreError> {
    if p <= &BigRational::one() {
        return Err(CoreError::DegenerateBaseWeight);
    }
    assert!((omega * sigma - p).is_zero(), "base weight requires ω·σ = p");
    let (lo, hi) = w0_values(omega, p, mode);
    StepFunction::new(vec![(iv.left_child(), lo), (iv.right_child(), hi)])
}

fn w0_values(omega: &BigRational, p: &BigRational, mode: Mode) -> (Scalar, Scalar) {
    match mode {
        Mode::Exact => {
            // ω ∓ (ω/p)·√(p(p-1))
            let rad = p * (p - BigRational::one());
            let coef = omega / p;
            let lo = Exact {
                a: omega.clone(),
                b: BigRational::zero(),
                c: -coef.clone(),
                e: BigRational::zero(),
                rad: rad.clone(),
            };
            let hi = Exact {
                a: omega.clone(),
                b: BigRational::zero(),
                c: coef,
                e: BigRational::zero(),
                rad,
            };
            (Scalar::Exact(lo), Scalar::Exact(hi))
        }
        Mode::Float => {
            let w = omega.to_f64().unwrap();
            let pf = p.to_f64().unwrap();
            let r = ((pf - 1.0) / pf).sqrt();
            (Scalar::Float(w * (1.0 - r)), Scalar::Float(w * (1.0 + r)))
        }
    }
}

/// Build the annotated weight over `[0, 1)`.
pub fn build_weight(
    params: WeightParams,
    root: DyadicInterval,
) -> Result<AnnotatedWeight, CoreError> {
    if root != DyadicInterval::root() {
        return Err(CoreError::InvalidStepFunction(
            "weights are built over [0,1)".into(),
        ));
    }
    let need = params.required_depth(&root);
    if need > params.depth_cap {
        return Err(CoreError::DepthCap { depth: need, cap: params.depth_cap });
    }
    let forming_count = params.forming_count();
    if forming_count > params.max_forming as u128 {
        return Err(CoreError::Budget(format!(
            "{forming_count} forming intervals exceed cap {}",
            params.max_forming
        )));
    }

    let mut builder = Builder {
        params: &params,
        leaves: Vec::new(),
        forming: vec![Vec::new(); params.levels as usize + 1],
        specials: vec![Vec::new(); params.levels as usize],
        rows: BTreeMap::new(),
    };
    builder.forming[0].push(root);
    builder.expand(root, 0, params.omega.clone())?;

    let Builder { leaves: mut entries, forming, specials, rows, .. } = builder;
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let tags = entries.iter().map(|(_, _, t)| *t).collect();
    let leaves = entries.into_iter().map(|(iv, v, _)| (iv, v)).collect();
    let weight = StepFunction::new(leaves)?;
    Ok(AnnotatedWeight { weight, params, root, forming, specials, rows, tags })
}

struct Builder<'a> {
    params: &'a WeightParams,
    leaves: Vec<(DyadicInterval, Scalar, RegionTag)>,
    forming: Vec<Vec<DyadicInterval>>,
    specials: Vec<Vec<DyadicInterval>>,
    rows: BTreeMap<DyadicInterval, Row>,
}

impl Builder<'_> {
    fn expand(
        &mut self,
        cell: DyadicInterval,
        level: u32,
        omega_l: BigRational,
    ) -> Result<(), CoreError> {
        let p = &self.params.solved.p;
        let mode = self.params.mode;
        if level == self.params.levels {
            let (lo, hi) = w0_values(&omega_l, p, mode);
            self.leaves
                .push((cell.left_child(), lo, RegionTag::Base { level }));
            self.leaves
                .push((cell.right_child(), hi, RegionTag::Base { level }));
            return Ok(());
        }
        let k = self.params.k();
        let body_val = Scalar::from_rational(&(&omega_l / p), mode);
        let special_val =
            Scalar::from_rational(&(&omega_l * &self.params.solved.tau_w / p), mode);
        let mut row_members = Vec::with_capacity(k as usize - 1);
        for m in 0..k - 1 {
            let im = cell.chain(m);
            self.leaves
                .push((im.left_child(), body_val.clone(), RegionTag::Body { level }));
            row_members.push(im.right_child());
            let sub = im.right_child().left_child();
            self.forming[level as usize + 1].push(sub);
            self.expand(sub, level + 1, br(3, 1) * &omega_l)?;
        }
        let last = cell.chain(k - 1);
        self.leaves
            .push((last.left_child(), body_val, RegionTag::Body { level }));
        let special = last.right_child();
        self.leaves
            .push((special, special_val, RegionTag::Special { level }));
        self.specials[level as usize].push(special);
        self.rows
            .insert(special, Row { level, members: row_members });
        Ok(())
    }
}

impl AnnotatedWeight {
    pub fn k(&self) -> u32 {
        self.params.k()
    }

    pub fn levels(&self) -> u32 {
        self.params.levels
    }

    pub fn mode(&self) -> Mode {
        self.params.mode
    }

    /// All specials with their levels, level-major order.
    pub fn all_specials(&self) -> impl Iterator<Item = (u32, &DyadicInterval)> {
        self.specials
            .iter()
            .enumerate()
            .flat_map(|(l, v)| v.iter().map(move |j| (l as u32, j)))
    }

    /// The forming cell of the given level containing `iv`, if any.
    pub fn forming_cell_containing(
        &self,
        level: u32,
        iv: &DyadicInterval,
    ) -> Option<&DyadicInterval> {
        self.forming
            .get(level as usize)?
            .iter()
            .find(|c| c.contains(iv))
    }

    /// Enumerated total length of the specials at one level, exact.
    pub fn special_measure(&self, level: u32) -> Result<BigRational, CoreError> {
        if level >= self.levels() {
            return Err(CoreError::LevelNotConstructed {
                level,
                built: self.levels(),
            });
        }
        Ok(self.specials[level as usize]
            .iter()
            .map(|j| j.len_rational())
            .sum())
    }
}

/// Closed form for the total special length at level ℓ:
/// `(⅓(1 − 4^{1-k}))^ℓ · 2·4^{-k}`.
///
/// The geometric factor is the total relative measure of the k−1 forming
/// subcells of one cell, `Σ_{m=1}^{k-1} 4^{-m}`; the leading factor is the
/// relative length `2·4^{-k}` of one special. Enumeration reproduces this
/// exactly at every constructed level.
pub fn special_measure_closed_form(k: u32, level: u32) -> BigRational {
    let factor = br(1, 3)
        * (BigRational::one() - BigRational::new(BigInt::one(), BigInt::one() << (2 * (k - 1))));
    let base = BigRational::new(BigInt::from(2), BigInt::one() << (2 * k));
    let mut acc = base;
    for _ in 0..level {
        acc *= &factor;
    }
    acc
}

/// The variant with geometric factor `⅓(1 − 4^{-(k-2)})`, which counts one
/// forming subcell fewer per cell. Kept for side-by-side reporting; it
/// degenerates at k = 2 and undercounts for k ≥ 3.
pub fn special_measure_dropped_cell_form(k: u32, level: u32) -> BigRational {
    let factor = if k == 2 {
        BigRational::zero()
    } else {
        br(1, 3)
            * (BigRational::one()
                - BigRational::new(BigInt::one(), BigInt::one() << (2 * (k - 2))))
    };
    let base = BigRational::new(BigInt::from(2), BigInt::one() << (2 * k));
    let mut acc = base;
    for _ in 0..level {
        acc *= &factor;
    }
    acc
}

/// Level-graded majorant: `3^ℓ ω` on the constant region created at level ℓ
/// and `3^L ω` on the base blocks; same partition as the weight.
pub fn build_majorant(aw: &AnnotatedWeight) -> StepFunction {
    let mode = aw.mode();
    let omega = &aw.params.omega;
    let leaves = aw
        .weight
        .leaves()
        .iter()
        .zip(&aw.tags)
        .map(|((iv, _), tag)| {
            let value = pow3(tag.level()) * omega;
            (*iv, Scalar::from_rational(&value, mode))
        })
        .collect();
    StepFunction::new(leaves).expect("majorant shares the weight's partition")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::{average, integrate_product, Integrator};

    #[test]
    fn parameters_k2_k3() {
        let s2 = solve_parameters(2);
        assert_eq!(s2.epsilon, br(1, 16));
        assert_eq!(s2.tau_w, br(3, 7));
        assert_eq!(s2.p, br(19, 7));
        // cross-check 2p = 5 + τ_w
        assert_eq!(br(2, 1) * &s2.p, br(5, 1) + &s2.tau_w);
        let s3 = solve_parameters(3);
        assert_eq!(s3.tau_w, br(3, 23));
        assert_eq!(s3.p, br(243, 23));
        for k in 2..=8 {
            let s = solve_parameters(k);
            let (r1, r2) = s.residuals();
            assert!(r1.is_zero() && r2.is_zero(), "nonzero residual at k={k}");
        }
    }

    #[test]
    fn six_eps_p_close_to_one() {
        for k in 3..=8 {
            let s = solve_parameters(k);
            let v = (br(6, 1) * &s.epsilon * &s.p - BigRational::one())
                .to_f64()
                .unwrap()
                .abs();
            assert!(v <= 0.15, "|6εp-1| = {v} at k={k}");
        }
    }

    #[test]
    fn w0_average_is_omega_and_inverse_sigma() {
        let s = solve_parameters(2);
        let omega = BigRational::one();
        let sigma = &s.p / &omega;
        let w0 = build_w0(&omega, &sigma, DyadicInterval::root(), &s.p, Mode::Exact).unwrap();
        let avg = average(&w0, &DyadicInterval::root());
        assert_eq!(avg, Scalar::from_rational(&omega, Mode::Exact));
        let inv = w0.invert().unwrap();
        let avg_inv = average(&inv, &DyadicInterval::root());
        assert_eq!(avg_inv, Scalar::from_rational(&sigma, Mode::Exact));
        // pointwise product is 1
        let one = integrate_product(&w0, &inv);
        assert_eq!(one, Scalar::one(Mode::Exact));
        // numeric values 1 ∓ √(12/19)
        let expect = (12.0f64 / 19.0).sqrt();
        let vals: Vec<f64> = w0.leaves().iter().map(|(_, v)| v.to_f64()).collect();
        assert!((vals[0] - (1.0 - expect)).abs() < 1e-12);
        assert!((vals[1] - (1.0 + expect)).abs() < 1e-12);
        assert!((vals[0] - 0.20528).abs() < 1e-4 && (vals[1] - 1.79472).abs() < 1e-4);
    }

    #[test]
    fn degenerate_base_weight_rejected() {
        let omega = BigRational::one();
        let p = br(1, 2);
        let sigma = &p / &omega;
        assert!(matches!(
            build_w0(&omega, &sigma, DyadicInterval::root(), &p, Mode::Exact),
            Err(CoreError::DegenerateBaseWeight)
        ));
    }

    #[test]
    fn k2_l1_leaf_values() {
        let aw = build_weight(WeightParams::new(2, 1, Mode::Exact), DyadicInterval::root())
            .unwrap();
        let p = &aw.params.solved.p;
        let tau = &aw.params.solved.tau_w;
        // leaves: [0,1/2): 1/p; [1/2,3/4): w0(3, σ/3) pair; [3/4,7/8): 1/p; [7/8,1): τ/p
        let leaves = aw.weight.leaves();
        assert_eq!(leaves.len(), 5);
        assert_eq!(
            leaves[0].1,
            Scalar::from_rational(&(BigRational::one() / p), Mode::Exact)
        );
        assert_eq!(
            average(&aw.weight, &DyadicInterval::from_path_bits("10").unwrap()),
            Scalar::from_rational(&br(3, 1), Mode::Exact)
        );
        assert_eq!(
            leaves[3].1,
            Scalar::from_rational(&(BigRational::one() / p), Mode::Exact)
        );
        assert_eq!(leaves[4].1, Scalar::from_rational(&(tau / p), Mode::Exact));
    }

    #[test]
    fn averages_exact_at_all_forming_cells() {
        for (k, levels) in [(2u32, 4u32), (3, 3), (4, 2)] {
            let aw =
                build_weight(WeightParams::new(k, levels, Mode::Exact), DyadicInterval::root())
                    .unwrap();
            let winv = aw.weight.invert().unwrap();
            let iw = Integrator::new(&aw.weight);
            let ii = Integrator::new(&winv);
            let sigma = aw.params.sigma();
            for (l, cells) in aw.forming.iter().enumerate() {
                let want_w =
                    Scalar::from_rational(&(pow3(l as u32) * &aw.params.omega), Mode::Exact);
                let want_i = Scalar::from_rational(&(&sigma / pow3(l as u32)), Mode::Exact);
                for cell in cells {
                    assert_eq!(iw.average(cell), want_w, "⟨w⟩ at k={k} level {l}");
                    assert_eq!(ii.average(cell), want_i, "⟨w⁻¹⟩ at k={k} level {l}");
                }
            }
        }
    }

    #[test]
    fn float_averages_within_1e12() {
        let aw = build_weight(WeightParams::new(3, 3, Mode::Float), DyadicInterval::root())
            .unwrap();
        let avg = average(&aw.weight, &DyadicInterval::root()).to_f64();
        assert!((avg - 1.0).abs() < 1e-12);
        let winv = aw.weight.invert().unwrap();
        let sigma = aw.params.sigma().to_f64().unwrap();
        let avg_inv = average(&winv, &DyadicInterval::root()).to_f64();
        assert!((avg_inv - sigma).abs() / sigma < 1e-12);
    }

    #[test]
    fn special_measure_matches_closed_form() {
        for (k, levels) in [(2u32, 5u32), (3, 4), (4, 3)] {
            let aw =
                build_weight(WeightParams::new(k, levels, Mode::Exact), DyadicInterval::root())
                    .unwrap();
            for l in 0..levels {
                let measured = aw.special_measure(l).unwrap();
                assert_eq!(measured, special_measure_closed_form(k, l), "k={k} level {l}");
            }
            assert!(matches!(
                aw.special_measure(levels),
                Err(CoreError::LevelNotConstructed { .. })
            ));
        }
        // level 0 agrees with 2·4^{-k} for every k
        assert_eq!(special_measure_closed_form(2, 0), br(1, 8));
        assert_eq!(special_measure_closed_form(3, 0), br(1, 32));
        // k=3, ℓ=1: both forming subcells contribute: (5/16)·(1/32) = 5/512
        assert_eq!(special_measure_closed_form(3, 1), br(5, 512));
        // dropped-cell variant keeps only the largest subcell: 1/128; and
        // vanishes identically at k=2 beyond level 0
        assert_eq!(special_measure_dropped_cell_form(3, 1), br(1, 128));
        assert!(special_measure_dropped_cell_form(2, 1).is_zero());
        assert_eq!(special_measure_dropped_cell_form(2, 0), br(1, 8));
    }

    #[test]
    fn k2_specials_exist_at_every_level() {
        let aw = build_weight(WeightParams::new(2, 5, Mode::Exact), DyadicInterval::root())
            .unwrap();
        for l in 0..5 {
            assert_eq!(aw.specials[l].len(), 1, "single-chain structure at level {l}");
        }
    }

    #[test]
    fn rows_have_k_minus_one_members() {
        let aw = build_weight(WeightParams::new(4, 2, Mode::Exact), DyadicInterval::root())
            .unwrap();
        for (level, j) in aw.all_specials() {
            let row = &aw.rows[j];
            assert_eq!(row.level, level);
            assert_eq!(row.members.len(), 3);
            for r in &row.members {
                assert!(r.contains(j), "row member must contain its special");
            }
            // the special is K_{k-1}^+ of exactly one forming cell
            let cell = aw.forming_cell_containing(level, j).unwrap();
            assert_eq!(cell.chain(3).right_child(), *j);
        }
    }

    #[test]
    fn mass_split_per_cell() {
        let aw = build_weight(WeightParams::new(3, 2, Mode::Exact), DyadicInterval::root())
            .unwrap();
        let e = &aw.params.solved.epsilon;
        for (l, cells) in aw.forming.iter().enumerate().take(aw.levels() as usize) {
            for cell in cells {
                let mut body = BigRational::zero();
                let mut special = BigRational::zero();
                for ((iv, _), tag) in aw.weight.leaves().iter().zip(&aw.tags) {
                    if tag.level() == l as u32 && cell.contains(iv) {
                        match tag {
                            RegionTag::Body { .. } => body += iv.len_rational(),
                            RegionTag::Special { .. } => special += iv.len_rational(),
                            RegionTag::Base { .. } => {}
                        }
                    }
                }
                let rel = cell.len_rational();
                assert_eq!(body, br(2, 3) * (BigRational::one() - e) * &rel);
                assert_eq!(special, br(2, 1) * e * &rel);
            }
        }
    }

    #[test]
    fn inverse_value_on_specials() {
        let aw = build_weight(WeightParams::new(3, 3, Mode::Exact), DyadicInterval::root())
            .unwrap();
        let winv = aw.weight.invert().unwrap();
        let e = &aw.params.solved.epsilon;
        let sigma = aw.params.sigma();
        let factor = (BigRational::one() + br(5, 1) * e) / (br(9, 1) * e);
        for (l, j) in aw.all_specials() {
            let want = Scalar::from_rational(&(&sigma / pow3(l) * &factor), Mode::Exact);
            assert_eq!(*winv.value_on(j).unwrap(), want);
        }
    }

    #[test]
    fn majorant_dominates_weight_within_factor_two() {
        let aw = build_weight(WeightParams::new(2, 3, Mode::Exact), DyadicInterval::root())
            .unwrap();
        let maj = build_majorant(&aw);
        // level-0 region: w̃ = ω on [0,1/2)
        assert_eq!(
            *maj.value_on(&DyadicInterval::from_path_bits("0").unwrap()).unwrap(),
            Scalar::one(Mode::Exact)
        );
        // level-1 constant region: w̃ = 3ω
        let lvl1_body = aw
            .weight
            .leaves()
            .iter()
            .zip(&aw.tags)
            .find(|(_, t)| matches!(t, RegionTag::Body { level: 1 }))
            .unwrap()
            .0
             .0;
        assert_eq!(
            *maj.value_on(&lvl1_body).unwrap(),
            Scalar::from_rational(&br(3, 1), Mode::Exact)
        );
        // w ≤ 2·w̃ pointwise, with max ratio 1+√((p-1)/p) < 2 on base tops
        let two = Scalar::from_int(2, Mode::Exact);
        let mut max_ratio = 0.0f64;
        for ((_, wv), (_, mv)) in aw.weight.leaves().iter().zip(maj.leaves()) {
            assert!(wv <= &(&two * mv), "w exceeds 2·majorant");
            max_ratio = max_ratio.max(wv.to_f64() / mv.to_f64());
        }
        let p = aw.params.solved.p.to_f64().unwrap();
        let expect = 1.0 + ((p - 1.0) / p).sqrt();
        assert!((max_ratio - expect).abs() < 1e-12);
        assert!(max_ratio > 1.0, "weight exceeds the plain majorant on base tops");
    }

    #[test]
    fn depth_cap_enforced() {
        let params = WeightParams::new(2, 8, Mode::Exact).with_depth_cap(10);
        assert!(matches!(
            build_weight(params, DyadicInterval::root()),
            Err(CoreError::DepthCap { .. })
        ));
    }

    #[test]
    fn forming_budget_enforced() {
        let params = WeightParams::new(4, 6, Mode::Exact).with_max_forming(100);
        assert!(matches!(
            build_weight(params, DyadicInterval::root()),
            Err(CoreError::Budget(_))
        ));
    }

    #[test]
    fn every_leaf_covered_by_exactly_one_region() {
        let aw = build_weight(WeightParams::new(3, 2, Mode::Exact), DyadicInterval::root())
            .unwrap();
        assert_eq!(aw.weight.leaves().len(), aw.tags.len());
        let total: BigRational = aw
            .weight
            .leaves()
            .iter()
            .map(|(iv, _)| iv.len_rational())
            .sum();
        assert_eq!(total, BigRational::one());
    }
}
