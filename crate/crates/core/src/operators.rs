//! Dyadic operators: martingale transform, square function, maximal
//! function, A₂/A₁ characteristics, weak-type distribution, and the
//! Rubio de Francia iteration.
//!
//! Conventions: `h_I = |I|^{-1/2}(χ_{I₊} − χ_{I₋})`, so the Haar term
//! `(f, h_I)h_I` takes the values `±δ_I/2` with `δ_I = ⟨f⟩_{I₊} − ⟨f⟩_{I₋}`,
//! and `S²f = Σ_I (f,h_I)² χ_I/|I| = Σ_I (δ_I/2)² χ_I`. Exact mode never
//! leaves the scalar field.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::CoreError;
use crate::interval::DyadicInterval;
use crate::scalar::{Accumulator, Scalar};
use crate::step::{merged_cells, Integrator, StepFunction};

/// Finitely supported choice of signs ε_I ∈ {−1, +1} (0 where absent).
#[derive(Clone, Debug, Default)]
pub struct SignPattern {
    signs: BTreeMap<DyadicInterval, i8>,
}

impl SignPattern {
    pub fn empty() -> Self {
        SignPattern::default()
    }

    pub fn set(&mut self, iv: DyadicInterval, sign: i8) {
        assert!(sign == 1 || sign == -1, "signs are ±1; omit zeros");
        let prev = self.signs.insert(iv, sign);
        assert!(prev.is_none() || prev == Some(sign), "conflicting sign at {iv}");
    }

    pub fn get(&self, iv: &DyadicInterval) -> i8 {
        self.signs.get(iv).copied().unwrap_or(0)
    }

    pub fn support(&self) -> impl Iterator<Item = (&DyadicInterval, i8)> {
        self.signs.iter().map(|(iv, s)| (iv, *s))
    }

    pub fn support_len(&self) -> usize {
        self.signs.len()
    }

    /// One `path-bits<TAB>sign` line per supported interval.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (iv, sg) in &self.signs {
            s.push_str(&iv.path_bits());
            s.push('\t');
            s.push_str(if *sg > 0 { "1" } else { "-1" });
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CoreError> {
        let mut out = SignPattern::empty();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (bits, sg) = line
                .split_once('\t')
                .ok_or_else(|| CoreError::Parse(format!("line {}: missing tab", n + 1)))?;
            let iv = DyadicInterval::from_path_bits(bits.trim()).map_err(CoreError::Parse)?;
            let sign: i8 = sg
                .trim()
                .parse()
                .map_err(|e| CoreError::Parse(format!("line {}: {e}", n + 1)))?;
            if sign == 0 {
                continue;
            }
            out.set(iv, sign);
        }
        Ok(out)
    }
}

/// The lower-bound sign choice: −1 on every row member of every special at
/// an even level, 0 elsewhere.
pub fn row_sign_pattern(aw: &crate::weight::AnnotatedWeight) -> SignPattern {
    let mut s = SignPattern::empty();
    for (level, j) in aw.all_specials() {
        if level % 2 == 0 {
            for r in &aw.rows[j].members {
                s.set(*r, -1);
            }
        }
    }
    s
}

/// Martingale transform `Σ_R ε_R (f, h_R) h_R` on the refinement of `f`'s
/// partition by the support of the sign pattern.
pub fn martingale_transform(f: &StepFunction, signs: &SignPattern) -> StepFunction {
    let mode = f.mode();
    let support: Vec<DyadicInterval> = signs.support().map(|(iv, _)| *iv).collect();
    // the transform jumps at each support interval's midpoint
    let children: Vec<DyadicInterval> = support
        .iter()
        .flat_map(|iv| [iv.left_child(), iv.right_child()])
        .collect();
    let base = f.refined_for(&children);
    let integ = Integrator::new(f);
    let mut deltas: HashMap<DyadicInterval, Scalar> = HashMap::new();
    for iv in &support {
        deltas.insert(*iv, integ.haar_delta(iv));
    }
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let leaves = base
        .leaves()
        .iter()
        .map(|(leaf, _)| {
            let mut acc = Accumulator::new(mode);
            let mut anc = *leaf;
            while let Some(p) = anc.parent() {
                let sg = signs.get(&p);
                if sg != 0 {
                    let term = deltas[&p].scale_rational(&half);
                    let term = if anc.is_right_child() { term } else { -term };
                    let term = if sg > 0 { term } else { -term };
                    acc.add(&term);
                }
                anc = p;
            }
            (*leaf, acc.finish())
        })
        .collect();
    StepFunction::new(leaves).expect("transform keeps a valid partition")
}

/// Square function `S²f(x) = Σ_I (δ_I/2)² χ_I(x)` over all I down to the
/// leaf depth (coefficients at or below leaves vanish).
pub fn square_function(f: &StepFunction) -> StepFunction {
    let mode = f.mode();
    let integ = Integrator::new(f);
    let mut deltas: HashMap<DyadicInterval, Scalar> = HashMap::new();
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let leaves = f
        .leaves()
        .iter()
        .map(|(leaf, _)| {
            let mut acc = Accumulator::new(mode);
            let mut anc = *leaf;
            while let Some(p) = anc.parent() {
                let d = deltas
                    .entry(p)
                    .or_insert_with(|| integ.haar_delta(&p))
                    .scale_rational(&half);
                acc.add(&(&d * &d));
                anc = p;
            }
            (*leaf, acc.finish())
        })
        .collect();
    StepFunction::new(leaves).expect("square function keeps the partition")
}

/// Which child-average difference enters `Σ_I |Δ_I f|² χ_I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaConvention {
    /// `Δ_I f = ⟨f⟩_{I₊} − ⟨f⟩_{I₋}` (the sum is `4·S²f` on `J`).
    FullDifference,
    /// `Δ_I f = (⟨f⟩_{I₊} − ⟨f⟩_{I₋})/2` (the sum is `S²f` on `J`).
    HalfDifference,
}

/// `Σ_{I ⊆ J} |Δ_I f|² χ_I` on `J`, zero outside.
pub fn local_square_sum(
    f: &StepFunction,
    j: &DyadicInterval,
    convention: DeltaConvention,
) -> StepFunction {
    let mode = f.mode();
    let base = f.refined_for(&[*j]);
    let integ = Integrator::new(f);
    let mut deltas: HashMap<DyadicInterval, Scalar> = HashMap::new();
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let leaves = base
        .leaves()
        .iter()
        .map(|(leaf, _)| {
            if !j.contains(leaf) {
                return (*leaf, Scalar::zero(mode));
            }
            let mut acc = Accumulator::new(mode);
            let mut anc = *leaf;
            while anc.depth() > j.depth() {
                let p = anc.parent().unwrap();
                let d = deltas
                    .entry(p)
                    .or_insert_with(|| integ.haar_delta(&p))
                    .clone();
                let d = match convention {
                    DeltaConvention::FullDifference => d,
                    DeltaConvention::HalfDifference => d.scale_rational(&half),
                };
                acc.add(&(&d * &d));
                anc = p;
            }
            (*leaf, acc.finish())
        })
        .collect();
    StepFunction::new(leaves).expect("local square sum keeps the partition")
}

/// Dyadic maximal function of `f·χ_J`, evaluated on the whole of `[0,1)`:
/// on a cell inside `J` it is the maximum of `⟨f⟩` over the chain up to `J`
/// (any coarser interval averages the same mass over more length); outside
/// `J` the only competitors contain both the point and `J`.
pub fn maximal_function(
    f: &StepFunction,
    j: &DyadicInterval,
) -> Result<StepFunction, CoreError> {
    if f.leaves().iter().any(|(_, v)| v.sign() < 0) {
        return Err(CoreError::NegativeInput);
    }
    let base = f.refined_for(&[*j]);
    let integ = Integrator::new(f);
    let mass_j = integ.integral_over(j);
    let mut cache: HashMap<DyadicInterval, Scalar> = HashMap::new();
    let leaves = base
        .leaves()
        .iter()
        .map(|(leaf, _)| {
            let value = if j.contains(leaf) {
                let mut best: Option<Scalar> = None;
                let mut anc = *leaf;
                loop {
                    let avg = cache
                        .entry(anc)
                        .or_insert_with(|| integ.average(&anc))
                        .clone();
                    best = Some(match best {
                        None => avg,
                        Some(b) => {
                            if avg > b {
                                avg
                            } else {
                                b
                            }
                        }
                    });
                    if anc.depth() == j.depth() {
                        break;
                    }
                    anc = anc.parent().unwrap();
                }
                best.unwrap()
            } else {
                // smallest dyadic interval containing both the leaf and J
                let mut d = leaf.depth().min(j.depth());
                while leaf.ancestor_at(d) != j.ancestor_at(d) {
                    d -= 1;
                }
                mass_j.scale_rational(&BigRational::new(BigInt::from(1) << d, BigInt::from(1)))
            };
            (*leaf, value)
        })
        .collect();
    StepFunction::new(leaves)
}

/// All dyadic intervals from the root down to the leaves of `f`.
pub fn dyadic_nodes(f: &StepFunction) -> Vec<DyadicInterval> {
    let mut seen: HashSet<DyadicInterval> = HashSet::new();
    for (leaf, _) in f.leaves() {
        let mut iv = *leaf;
        loop {
            if !seen.insert(iv) {
                break;
            }
            match iv.parent() {
                Some(p) => iv = p,
                None => break,
            }
        }
    }
    let mut v: Vec<_> = seen.into_iter().collect();
    v.sort();
    v
}

/// `[w]_{A₂}` over the finite tree: max of `⟨w⟩_I ⟨w⁻¹⟩_I`.
pub fn a2_characteristic(w: &StepFunction) -> Result<Scalar, CoreError> {
    let winv = w.invert()?;
    let iw = Integrator::new(w);
    let ii = Integrator::new(&winv);
    let mut best: Option<Scalar> = None;
    for iv in dyadic_nodes(w) {
        let prod = &iw.average(&iv) * &ii.average(&iv);
        best = Some(match best {
            None => prod,
            Some(b) => {
                if prod > b {
                    prod
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("at least the root"))
}

/// `[w]_{A₁}` over the finite tree: max of `⟨w⟩_I / min_I w`.
pub fn a1_characteristic(w: &StepFunction) -> Result<Scalar, CoreError> {
    if w.leaves().iter().any(|(_, v)| v.sign() <= 0) {
        return Err(CoreError::NonInvertible);
    }
    let iw = Integrator::new(w);
    // bottom-up minima over the node set
    let mut mins: HashMap<DyadicInterval, Scalar> = HashMap::new();
    let mut stack: Vec<DyadicInterval> = Vec::new();
    for (leaf, v) in w.leaves() {
        mins.insert(*leaf, v.clone());
        stack.push(*leaf);
    }
    while let Some(iv) = stack.pop() {
        if let Some(p) = iv.parent() {
            let m = mins[&iv].clone();
            match mins.get_mut(&p) {
                Some(slot) => {
                    if m < *slot {
                        *slot = m;
                    }
                }
                None => {
                    mins.insert(p, m);
                }
            }
            stack.push(p);
        }
    }
    let mut best: Option<Scalar> = None;
    for (iv, min) in &mins {
        let ratio = &iw.average(iv) / min;
        best = Some(match best.take() {
            None => ratio,
            Some(b) => {
                if ratio > b {
                    ratio
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("at least the root"))
}

/// `w`-measure of `{x : f(x) > λ}` (strict).
pub fn weak_distribution(f: &StepFunction, w: &StepFunction, lambda: &Scalar) -> Scalar {
    let mut acc = Accumulator::new(w.mode());
    for (cell, fv, wv) in merged_cells(f, w) {
        if fv > lambda {
            acc.add(&wv.scale_rational(&cell.len_rational()));
        }
    }
    acc.finish()
}

/// Truncated Rubio de Francia sum and its pointwise tail majorant.
pub struct RubioDeFrancia {
    /// `Σ_{j=0}^{terms} (M^d)^j g / (2·m_norm)^j`
    pub function: StepFunction,
    /// `(M^d)^{terms+1} g / (2·m_norm)^{terms}`; then
    /// `M^d(ℛg) ≤ 2·m_norm·ℛg + tail` pointwise.
    pub tail: StepFunction,
}

/// Build the truncated series. The summable normalization is `(2·m_norm)^j`
/// with `m_norm` an upper estimate of the maximal-operator norm; every
/// stated property holds whenever `m_norm` dominates the growth of the
/// iterates actually encountered.
pub fn rubio_de_francia(
    g: &StepFunction,
    m_norm: &Scalar,
    terms: usize,
) -> Result<RubioDeFrancia, CoreError> {
    assert!(terms >= 1, "need at least one iteration");
    assert!(m_norm.sign() > 0, "norm estimate must be positive");
    let root = DyadicInterval::root();
    let two = Scalar::from_int(2, g.mode());
    let denom_step = (&two * m_norm).inverse()?; // 1/(2m)
    let mut sum = g.clone();
    let mut iterate = g.clone();
    let mut coef = Scalar::one(g.mode());
    for _ in 0..terms {
        iterate = maximal_function(&iterate, &root)?;
        coef = &coef * &denom_step;
        sum = crate::step::add(&sum, &iterate.scale(&coef));
    }
    // one more application for the tail: M^{terms+1} g · (2m)^{-terms}
    let beyond = maximal_function(&iterate, &root)?;
    let tail = beyond.scale(&(&coef * &(&two * m_norm)));
    Ok(RubioDeFrancia { function: sum, tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Mode;
    use crate::step::{average, integrate_product, product};
    use crate::weight::{build_weight, WeightParams};
    use num_traits::One;
    use proptest::prelude::*;

    fn br(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn sc(n: i64, d: i64) -> Scalar {
        Scalar::from_rational(&br(n, d), Mode::Exact)
    }

    #[test]
    fn transform_of_constant_vanishes() {
        let f = StepFunction::constant(sc(5, 1));
        let mut s = SignPattern::empty();
        s.set(DyadicInterval::root(), -1);
        s.set(DyadicInterval::from_path_bits("1").unwrap(), 1);
        let t = martingale_transform(&f, &s);
        assert!(t.leaves().iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn zero_pattern_gives_zero() {
        let f =
            StepFunction::indicator(DyadicInterval::from_path_bits("01").unwrap(), Mode::Exact);
        let t = martingale_transform(&f, &SignPattern::empty());
        assert!(t.leaves().iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn single_sign_transform() {
        // s = −1 on [0,1), f = χ_{[1/2,1)} → +1/2 on [0,1/2), −1/2 on [1/2,1)
        let f = StepFunction::indicator(DyadicInterval::root().right_child(), Mode::Exact);
        let mut s = SignPattern::empty();
        s.set(DyadicInterval::root(), -1);
        let t = martingale_transform(&f, &s);
        assert_eq!(*t.value_on(&DyadicInterval::root().left_child()).unwrap(), sc(1, 2));
        assert_eq!(*t.value_on(&DyadicInterval::root().right_child()).unwrap(), sc(-1, 2));
    }

    #[test]
    fn square_function_examples() {
        let c = StepFunction::constant(sc(3, 1));
        assert!(square_function(&c).leaves().iter().all(|(_, v)| v.is_zero()));
        let f = StepFunction::indicator(DyadicInterval::root().right_child(), Mode::Exact);
        let s2 = square_function(&f);
        for (_, v) in s2.leaves() {
            assert_eq!(*v, sc(1, 4));
        }
    }

    #[test]
    fn square_function_integral_is_variance() {
        // ∫ S²f = ‖f − ⟨f⟩‖² (Parseval)
        let aw =
            build_weight(WeightParams::new(2, 2, Mode::Exact), DyadicInterval::root()).unwrap();
        let f = &aw.weight;
        let s2 = square_function(f);
        let total = s2.integral();
        let mean = average(f, &DyadicInterval::root());
        let centered = f.map(|v| v - &mean);
        let var = integrate_product(&centered, &centered);
        assert_eq!(total, var);
    }

    #[test]
    fn maximal_function_examples() {
        let root = DyadicInterval::root();
        let c = StepFunction::constant(sc(2, 1));
        let m = maximal_function(&c, &root).unwrap();
        assert!(m.leaves().iter().all(|(_, v)| *v == sc(2, 1)));

        let f = StepFunction::indicator(root.left_child(), Mode::Exact);
        let m = maximal_function(&f, &root).unwrap();
        assert_eq!(*m.value_on(&root.left_child()).unwrap(), sc(1, 1));
        assert_eq!(*m.value_on(&root.right_child()).unwrap(), sc(1, 2));

        let neg = StepFunction::constant(sc(-1, 1));
        assert!(matches!(maximal_function(&neg, &root), Err(CoreError::NegativeInput)));
    }

    #[test]
    fn maximal_outside_window_uses_common_ancestor() {
        // f ≡ 1, J = [0,1/4): away from J the best interval is the full
        // common ancestor
        let j = DyadicInterval::from_path_bits("00").unwrap();
        let f = StepFunction::constant(sc(1, 1));
        let m = maximal_function(&f, &j).unwrap();
        assert_eq!(*m.value_on(&j).unwrap(), sc(1, 1));
        assert_eq!(
            *m.value_on(&DyadicInterval::from_path_bits("01").unwrap()).unwrap(),
            sc(1, 2)
        );
        assert_eq!(
            *m.value_on(&DyadicInterval::from_path_bits("1").unwrap()).unwrap(),
            sc(1, 4)
        );
    }

    #[test]
    fn a2_examples() {
        let c = StepFunction::constant(sc(7, 2));
        assert_eq!(a2_characteristic(&c).unwrap(), sc(1, 1));

        // w₀(1, p): the root gives ωσ = p, children are constants
        let s = crate::weight::solve_parameters(2);
        let w0 = crate::weight::build_w0(
            &BigRational::one(),
            &s.p,
            DyadicInterval::root(),
            &s.p,
            Mode::Exact,
        )
        .unwrap();
        assert_eq!(a2_characteristic(&w0).unwrap(), Scalar::from_rational(&s.p, Mode::Exact));
    }

    #[test]
    fn a2_lower_bound_at_chain_interval() {
        // built weight has ⟨w⟩⟨w⁻¹⟩ > (p/τ)(4/32) at I_{k-2} for k = 3
        let aw =
            build_weight(WeightParams::new(3, 1, Mode::Exact), DyadicInterval::root()).unwrap();
        let a2 = a2_characteristic(&aw.weight).unwrap();
        let p = &aw.params.solved.p;
        let tau = &aw.params.solved.tau_w;
        let bound = Scalar::from_rational(&(p / tau * br(4, 32)), Mode::Exact);
        assert!(a2 > bound);
    }

    #[test]
    fn a1_examples() {
        let c = StepFunction::constant(sc(4, 1));
        assert_eq!(a1_characteristic(&c).unwrap(), sc(1, 1));
        let root = DyadicInterval::root();
        let two_one = StepFunction::new(vec![
            (root.left_child(), sc(2, 1)),
            (root.right_child(), sc(1, 1)),
        ])
        .unwrap();
        assert_eq!(a1_characteristic(&two_one).unwrap(), sc(3, 2));
    }

    #[test]
    fn a2_invariances() {
        let aw =
            build_weight(WeightParams::new(2, 2, Mode::Exact), DyadicInterval::root()).unwrap();
        let w = &aw.weight;
        let a2 = a2_characteristic(w).unwrap();
        let winv = w.invert().unwrap();
        assert_eq!(a2, a2_characteristic(&winv).unwrap());
        let scaled = w.scale(&sc(7, 3));
        assert_eq!(a2, a2_characteristic(&scaled).unwrap());
    }

    #[test]
    fn weak_distribution_examples() {
        let w = StepFunction::constant(sc(1, 1));
        let z = StepFunction::constant(sc(0, 1));
        assert!(weak_distribution(&z, &w, &sc(1, 2)).is_zero());
        let f = StepFunction::constant(sc(2, 1));
        assert_eq!(weak_distribution(&f, &w, &sc(1, 1)), sc(1, 1));
        // strict inequality: f ≡ 2 at λ = 2 gives measure 0
        assert!(weak_distribution(&f, &w, &sc(2, 1)).is_zero());
    }

    #[test]
    fn local_square_sum_is_four_s2_at_root() {
        let aw =
            build_weight(WeightParams::new(2, 2, Mode::Exact), DyadicInterval::root()).unwrap();
        let winv = aw.weight.invert().unwrap();
        let root = DyadicInterval::root();
        let g_full = local_square_sum(&winv, &root, DeltaConvention::FullDifference);
        let g_half = local_square_sum(&winv, &root, DeltaConvention::HalfDifference);
        let s2 = square_function(&winv);
        let four = sc(4, 1);
        for (cell, a, b) in merged_cells(&g_full, &s2) {
            assert_eq!(*a, &four * b, "4·S² mismatch on {cell}");
        }
        for (cell, a, b) in merged_cells(&g_half, &s2) {
            assert_eq!(a, b, "S² mismatch on {cell}");
        }
    }

    #[test]
    fn row_sign_pattern_support() {
        // k=3, L=1: one special at level 0, row of size 2
        let aw =
            build_weight(WeightParams::new(3, 1, Mode::Exact), DyadicInterval::root()).unwrap();
        let s = row_sign_pattern(&aw);
        assert_eq!(s.support_len(), 2);
        assert!(s.support().all(|(_, sg)| sg == -1));

        // k=2, L=3: even levels {0, 2}, one row member each
        let aw =
            build_weight(WeightParams::new(2, 3, Mode::Exact), DyadicInterval::root()).unwrap();
        let s = row_sign_pattern(&aw);
        assert_eq!(s.support_len(), 2);
    }

    #[test]
    fn parseval_for_row_pattern() {
        let aw =
            build_weight(WeightParams::new(2, 3, Mode::Exact), DyadicInterval::root()).unwrap();
        let signs = row_sign_pattern(&aw);
        let t = martingale_transform(&aw.weight, &signs);
        let lhs = integrate_product(&t, &t);
        let mut rhs = Scalar::zero(Mode::Exact);
        for (iv, _) in signs.support() {
            let c = crate::step::haar_coefficient(&aw.weight, iv);
            rhs = &rhs + &(&c * &c);
        }
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn sign_pattern_text_round_trip() {
        let mut s = SignPattern::empty();
        s.set(DyadicInterval::root(), -1);
        s.set(DyadicInterval::from_path_bits("101").unwrap(), 1);
        let t = SignPattern::from_text(&s.to_text()).unwrap();
        assert_eq!(t.support_len(), 2);
        assert_eq!(t.get(&DyadicInterval::root()), -1);
        assert_eq!(t.get(&DyadicInterval::from_path_bits("101").unwrap()), 1);
    }

    #[test]
    fn rubio_de_francia_constant() {
        // g ≡ 1: M g = g, so ℛg = Σ (2m)^{-j}
        let g = StepFunction::constant(Scalar::Float(1.0));
        let m = Scalar::Float(2.0);
        let r = rubio_de_francia(&g, &m, 10).unwrap();
        let expect: f64 = (0..=10).map(|j| 0.25f64.powi(j)).sum();
        for (_, v) in r.function.leaves() {
            assert!((v.to_f64() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn rubio_de_francia_properties_on_weight() {
        let aw =
            build_weight(WeightParams::new(2, 3, Mode::Float), DyadicInterval::root()).unwrap();
        let winv = aw.weight.invert().unwrap();
        // a structured nonnegative g
        let g = crate::step::add(
            &StepFunction::indicator(DyadicInterval::from_path_bits("10").unwrap(), Mode::Float),
            &StepFunction::constant(Scalar::Float(0.5)),
        );
        let norm_g = integrate_product(&product(&g, &g), &winv).to_f64().sqrt();
        // measure iterate growth to pick a safe norm estimate
        let root = DyadicInterval::root();
        let mut iter = g.clone();
        let mut ratio_max = 1.0f64;
        let mut prev = norm_g;
        for _ in 0..6 {
            iter = maximal_function(&iter, &root).unwrap();
            let n = integrate_product(&product(&iter, &iter), &winv).to_f64().sqrt();
            ratio_max = ratio_max.max(n / prev);
            prev = n;
        }
        let m = Scalar::Float(ratio_max);
        let r = rubio_de_francia(&g, &m, 12).unwrap();
        // g ≤ ℛg pointwise
        for (cell, gv, rv) in merged_cells(&g, &r.function) {
            assert!(gv.to_f64() <= rv.to_f64() + 1e-12, "g > ℛg on {cell}");
        }
        // ‖ℛg‖_{w⁻¹} ≤ 2‖g‖_{w⁻¹}
        let norm_r = integrate_product(&product(&r.function, &r.function), &winv)
            .to_f64()
            .sqrt();
        assert!(norm_r <= 2.0 * norm_g + 1e-9);
        // M(ℛg) ≤ 2m·ℛg + tail pointwise
        let mr = maximal_function(&r.function, &root).unwrap();
        let bound = crate::step::add(&r.function.scale(&(&m + &m)), &r.tail);
        for (cell, lhs, rhs) in merged_cells(&mr, &bound) {
            assert!(lhs.to_f64() <= rhs.to_f64() + 1e-9, "A₁ bound fails on {cell}");
        }
    }

    // property tests

    fn arb_step(depth: u32) -> impl Strategy<Value = StepFunction> {
        let leaf = (1u64..200, 1u64..200);
        proptest::collection::vec(leaf, 1usize << depth).prop_map(move |vals| {
            let leaves = vals
                .into_iter()
                .enumerate()
                .map(|(i, (n, d))| {
                    (
                        DyadicInterval::new(depth, i as u64),
                        Scalar::from_rational(&br(n as i64, d as i64), Mode::Exact),
                    )
                })
                .collect();
            StepFunction::new(leaves).unwrap()
        })
    }

    fn arb_signs(depth: u32) -> impl Strategy<Value = SignPattern> {
        let count: usize = (0..depth).map(|d| 1usize << d).sum();
        proptest::collection::vec(prop_oneof![Just(-1i8), Just(0), Just(1)], count).prop_map(
            move |v| {
                let mut s = SignPattern::empty();
                let mut idx = 0usize;
                for d in 0..depth {
                    for i in 0..(1u64 << d) {
                        if v[idx] != 0 {
                            s.set(DyadicInterval::new(d, i), v[idx]);
                        }
                        idx += 1;
                    }
                }
                s
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn transform_is_self_adjoint(f in arb_step(3), g in arb_step(3), s in arb_signs(3)) {
            let tf = martingale_transform(&f, &s);
            let tg = martingale_transform(&g, &s);
            let lhs = integrate_product(&tf, &g);
            let rhs = integrate_product(&f, &tg);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn parseval_random(f in arb_step(3), s in arb_signs(3)) {
            let tf = martingale_transform(&f, &s);
            let lhs = integrate_product(&tf, &tf);
            let mut rhs = Scalar::zero(Mode::Exact);
            for (iv, _) in s.support() {
                let c = crate::step::haar_coefficient(&f, iv);
                rhs = &rhs + &(&c * &c);
            }
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn maximal_dominates_and_monotone(f in arb_step(3), g in arb_step(3)) {
            let root = DyadicInterval::root();
            let mf = maximal_function(&f, &root).unwrap();
            // M f ≥ f
            for (cell, fv, mv) in merged_cells(&f, &mf) {
                prop_assert!(mv >= fv, "M f < f on {}", cell);
            }
            // monotone: M(max(f,g)) ≥ M f
            let h = crate::step::pointwise_max(&f, &g);
            let mh = maximal_function(&h, &root).unwrap();
            for (cell, a, b) in merged_cells(&mf, &mh) {
                prop_assert!(b >= a, "monotonicity fails on {}", cell);
            }
            // idempotent-dominant: M(M f) ≥ M f
            let mmf = maximal_function(&mf, &root).unwrap();
            for (cell, a, b) in merged_cells(&mf, &mmf) {
                prop_assert!(b >= a, "M(Mf) < Mf on {}", cell);
            }
        }

        #[test]
        fn a1_at_least_one(f in arb_step(2)) {
            let a1 = a1_characteristic(&f).unwrap();
            prop_assert!(a1 >= Scalar::one(Mode::Exact));
        }

        #[test]
        fn haar_reconstruction(f in arb_step(3)) {
            let rec = crate::step::haar_reconstruct(&f);
            for ((i1, v1), (i2, v2)) in f.leaves().iter().zip(rec.leaves()) {
                prop_assert_eq!(i1, i2);
                prop_assert!((v1 - v2).is_zero());
            }
        }

        #[test]
        fn integrate_product_bilinear(f in arb_step(2), g in arb_step(2), h in arb_step(2)) {
            // symmetry and additivity in the first slot
            prop_assert_eq!(integrate_product(&f, &g), integrate_product(&g, &f));
            let fh = crate::step::add(&f, &h);
            let lhs = integrate_product(&fh, &g);
            let rhs = &integrate_product(&f, &g) + &integrate_product(&h, &g);
            prop_assert!((&lhs - &rhs).is_zero());
        }

        #[test]
        fn average_refinement_consistency(f in arb_step(3)) {
            let integ = Integrator::new(&f);
            for d in 0..3u32 {
                for i in 0..(1u64 << d) {
                    let iv = DyadicInterval::new(d, i);
                    let lhs = integ.average(&iv);
                    let rhs = (&integ.average(&iv.left_child()) + &integ.average(&iv.right_child()))
                        .scale_rational(&br(1, 2));
                    prop_assert!((&lhs - &rhs).is_zero());
                }
            }
        }
    }
}
