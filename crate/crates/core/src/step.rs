//! Piecewise-constant functions on finite dyadic partitions of `[0, 1)`.
//!
//! A [`StepFunction`] is an immutable, address-sorted list of
//! `(interval, value)` leaves whose intervals tile `[0, 1)`. All values share
//! one arithmetic mode. Operations return new functions; reductions run in
//! address order so float results are reproducible.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
#[cfg(test)]
use num_traits::Zero;

use crate::error::CoreError;
use crate::interval::{abuts, reaches_one, DyadicInterval};
use crate::scalar::{format_scalar, parse_scalar, Accumulator, Exact, Mode, Scalar};

#[derive(Clone)]
pub struct StepFunction {
    leaves: Vec<(DyadicInterval, Scalar)>,
}

impl StepFunction {
    /// Build from leaves, validating the tiling and uniform mode.
    pub fn new(mut leaves: Vec<(DyadicInterval, Scalar)>) -> Result<Self, CoreError> {
        if leaves.is_empty() {
            return Err(CoreError::InvalidStepFunction("no leaves".into()));
        }
        leaves.sort_by(|a, b| a.0.cmp(&b.0));
        let mode = leaves[0].1.mode();
        if leaves[0].0.start_scaled() != 0 {
            return Err(CoreError::InvalidStepFunction(
                "partition does not start at 0".into(),
            ));
        }
        for w in leaves.windows(2) {
            if !abuts(&w[0].0, &w[1].0) {
                return Err(CoreError::InvalidStepFunction(format!(
                    "gap or overlap between {} and {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if !reaches_one(&leaves.last().unwrap().0) {
            return Err(CoreError::InvalidStepFunction(
                "partition does not end at 1".into(),
            ));
        }
        if leaves.iter().any(|(_, v)| v.mode() != mode) {
            return Err(CoreError::InvalidStepFunction("mixed scalar modes".into()));
        }
        Ok(StepFunction { leaves })
    }

    pub fn constant(value: Scalar) -> Self {
        StepFunction { leaves: vec![(DyadicInterval::root(), value)] }
    }

    /// Characteristic function of a dyadic interval.
    pub fn indicator(iv: DyadicInterval, mode: Mode) -> Self {
        let mut leaves = Vec::with_capacity(iv.depth() as usize + 1);
        let mut cur = DyadicInterval::root();
        for bit in iv.path_bits().chars() {
            let (l, r) = (cur.left_child(), cur.right_child());
            if bit == '1' {
                leaves.push((l, Scalar::zero(mode)));
                cur = r;
            } else {
                leaves.push((r, Scalar::zero(mode)));
                cur = l;
            }
        }
        leaves.push((iv, Scalar::one(mode)));
        leaves.sort_by(|a, b| a.0.cmp(&b.0));
        StepFunction { leaves }
    }

    pub fn leaves(&self) -> &[(DyadicInterval, Scalar)] {
        &self.leaves
    }

    pub fn mode(&self) -> Mode {
        self.leaves[0].1.mode()
    }

    pub fn max_depth(&self) -> u32 {
        self.leaves.iter().map(|(iv, _)| iv.depth()).max().unwrap()
    }

    /// Value on an interval contained in a single leaf.
    pub fn value_on(&self, iv: &DyadicInterval) -> Option<&Scalar> {
        let idx = self
            .leaves
            .partition_point(|(l, _)| l.start_scaled() <= iv.start_scaled());
        let (leaf, v) = &self.leaves[idx - 1];
        if leaf.contains(iv) {
            Some(v)
        } else {
            None
        }
    }

    /// Apply a value map, keeping the partition.
    pub fn map(&self, f: impl Fn(&Scalar) -> Scalar) -> StepFunction {
        StepFunction {
            leaves: self.leaves.iter().map(|(iv, v)| (*iv, f(v))).collect(),
        }
    }

    /// Pointwise reciprocal; errors on any zero value.
    pub fn invert(&self) -> Result<StepFunction, CoreError> {
        let mut leaves = Vec::with_capacity(self.leaves.len());
        for (iv, v) in &self.leaves {
            leaves.push((*iv, v.inverse()?));
        }
        Ok(StepFunction { leaves })
    }

    pub fn square(&self) -> StepFunction {
        self.map(|v| v * v)
    }

    pub fn abs(&self) -> StepFunction {
        self.map(|v| v.abs())
    }

    pub fn scale(&self, by: &Scalar) -> StepFunction {
        self.map(|v| v * by)
    }

    /// Split leaves so every target interval is a union of cells.
    pub fn refined_for(&self, targets: &[DyadicInterval]) -> StepFunction {
        let mut out = Vec::with_capacity(self.leaves.len());
        for (leaf, v) in &self.leaves {
            let inside: Vec<DyadicInterval> = targets
                .iter()
                .filter(|t| leaf.contains(t))
                .copied()
                .collect();
            expand_cell(*leaf, &inside, v, &mut out);
        }
        StepFunction { leaves: out }
    }

    /// ∫₀¹ f dx.
    pub fn integral(&self) -> Scalar {
        let mut acc = Accumulator::new(self.mode());
        for (iv, v) in &self.leaves {
            acc.add(&cell_mass(iv, v));
        }
        acc.finish()
    }

    /// Text serialization: one `path-bits<TAB>value` line per leaf.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (iv, v) in &self.leaves {
            s.push_str(&iv.path_bits());
            s.push('\t');
            s.push_str(&format_scalar(v));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, mode: Mode) -> Result<Self, CoreError> {
        let mut leaves = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (bits, val) = line
                .split_once('\t')
                .ok_or_else(|| CoreError::Parse(format!("line {}: missing tab", n + 1)))?;
            let iv = DyadicInterval::from_path_bits(bits.trim())
                .map_err(CoreError::Parse)?;
            let v = parse_scalar(val, mode).map_err(CoreError::Parse)?;
            leaves.push((iv, v));
        }
        StepFunction::new(leaves)
    }
}

fn expand_cell(
    cell: DyadicInterval,
    targets: &[DyadicInterval],
    v: &Scalar,
    out: &mut Vec<(DyadicInterval, Scalar)>,
) {
    if targets.iter().all(|t| *t == cell) {
        out.push((cell, v.clone()));
        return;
    }
    let l = cell.left_child();
    let r = cell.right_child();
    let tl: Vec<DyadicInterval> = targets.iter().filter(|t| l.contains(t)).copied().collect();
    let tr: Vec<DyadicInterval> = targets.iter().filter(|t| r.contains(t)).copied().collect();
    expand_cell(l, &tl, v, out);
    expand_cell(r, &tr, v, out);
}

/// |leaf| · value, exact in exact mode.
fn cell_mass(iv: &DyadicInterval, v: &Scalar) -> Scalar {
    match v {
        Scalar::Exact(_) => v.scale_rational(&iv.len_rational()),
        Scalar::Float(x) => Scalar::Float(x * iv.len_f64()),
    }
}

/// Prefix-sum view of a step function for O(log n) interval integrals.
pub struct Integrator<'a> {
    f: &'a StepFunction,
    starts: Vec<u128>,
    /// prefix[i] = ∫ over leaves 0..i
    prefix: Vec<Scalar>,
}

impl<'a> Integrator<'a> {
    pub fn new(f: &'a StepFunction) -> Self {
        let mode = f.mode();
        let mut starts = Vec::with_capacity(f.leaves.len());
        let mut prefix = Vec::with_capacity(f.leaves.len() + 1);
        prefix.push(Scalar::zero(mode));
        let mut acc = Accumulator::new(mode);
        for (iv, v) in &f.leaves {
            starts.push(iv.start_scaled());
            acc.add(&cell_mass(iv, v));
            prefix.push(match &acc {
                Accumulator::Exact(x) => Scalar::Exact(x.clone()),
                Accumulator::Float(k) => Scalar::Float(k.value()),
            });
        }
        Integrator { f, starts, prefix }
    }

    /// ∫_I f dx. `I` may be coarser or finer than the partition.
    pub fn integral_over(&self, iv: &DyadicInterval) -> Scalar {
        let lo = self.starts.partition_point(|s| *s <= iv.start_scaled()) - 1;
        let (leaf, v) = &self.f.leaves[lo];
        if leaf.contains(iv) {
            // inside one leaf: value · |I|
            return cell_mass(iv, v);
        }
        let hi = self.starts.partition_point(|s| *s < iv.end_scaled());
        &self.prefix[hi] - &self.prefix[lo]
    }

    /// ⟨f⟩_I. If `I` sits inside a leaf, this is that leaf's value.
    pub fn average(&self, iv: &DyadicInterval) -> Scalar {
        let lo = self.starts.partition_point(|s| *s <= iv.start_scaled()) - 1;
        let (leaf, v) = &self.f.leaves[lo];
        if leaf.contains(iv) {
            return v.clone();
        }
        let integral = self.integral_over(iv);
        match integral {
            Scalar::Exact(x) => {
                Scalar::Exact(x.mul_rational(&BigRational::new(
                    BigInt::one() << iv.depth(),
                    BigInt::one(),
                )))
            }
            Scalar::Float(x) => Scalar::Float(x * (iv.depth() as f64).exp2()),
        }
    }

    /// ⟨f⟩_{I₊} − ⟨f⟩_{I₋}, the un-normalized Haar increment.
    pub fn haar_delta(&self, iv: &DyadicInterval) -> Scalar {
        &self.average(&iv.right_child()) - &self.average(&iv.left_child())
    }
}

/// Average of `f` over `I`.
pub fn average(f: &StepFunction, iv: &DyadicInterval) -> Scalar {
    Integrator::new(f).average(iv)
}

/// Haar coefficient `(f, h_I)` with `h_I = |I|^{-1/2}(χ_{I₊} − χ_{I₋})`,
/// i.e. `(√|I|/2)·(⟨f⟩_{I₊} − ⟨f⟩_{I₋})`. Odd depths introduce a factor √2,
/// which the exact scalar representation carries natively.
pub fn haar_coefficient(f: &StepFunction, iv: &DyadicInterval) -> Scalar {
    let delta = Integrator::new(f).haar_delta(iv);
    let d = iv.depth();
    match delta {
        Scalar::Float(x) => Scalar::Float(x * 0.5 * (-(d as f64) / 2.0).exp2()),
        Scalar::Exact(x) => {
            if d % 2 == 0 {
                // factor 2^{-d/2 - 1}
                Scalar::Exact(x.mul_rational(&BigRational::new(
                    BigInt::one(),
                    BigInt::one() << (d / 2 + 1),
                )))
            } else {
                // √|I|/2 = 2^{-(d+3)/2}·√2  (since √2^{-d} = 2^{-(d+1)/2}√2)
                let factor = Exact::sqrt_term(
                    BigRational::new(BigInt::one(), BigInt::one() << ((d + 3) / 2)),
                    BigRational::from(BigInt::from(2)),
                );
                Scalar::Exact(x.mul(&factor))
            }
        }
    }
}

/// Merged walk over two partitions: the common refinement with both values.
pub fn merged_cells<'a>(
    f: &'a StepFunction,
    g: &'a StepFunction,
) -> Vec<(DyadicInterval, &'a Scalar, &'a Scalar)> {
    let mut out = Vec::with_capacity(f.leaves.len().max(g.leaves.len()));
    let (mut i, mut j) = (0usize, 0usize);
    while i < f.leaves.len() && j < g.leaves.len() {
        let (a, va) = &f.leaves[i];
        let (b, vb) = &g.leaves[j];
        let cell = if a.depth() >= b.depth() { *a } else { *b };
        out.push((cell, va, vb));
        let end = cell.end_scaled();
        if a.end_scaled() == end {
            i += 1;
        }
        if b.end_scaled() == end {
            j += 1;
        }
    }
    out
}

/// The coarsest dyadic partition refining both leaf sets.
pub fn common_refinement(f: &StepFunction, g: &StepFunction) -> Vec<DyadicInterval> {
    merged_cells(f, g).into_iter().map(|(c, _, _)| c).collect()
}

/// Pointwise product on the common refinement.
pub fn product(f: &StepFunction, g: &StepFunction) -> StepFunction {
    let leaves = merged_cells(f, g)
        .into_iter()
        .map(|(c, a, b)| (c, a * b))
        .collect();
    StepFunction { leaves }
}

/// ∫₀¹ f·g dx over the common refinement.
pub fn integrate_product(f: &StepFunction, g: &StepFunction) -> Scalar {
    let mode = f.mode();
    let mut acc = Accumulator::new(mode);
    for (cell, a, b) in merged_cells(f, g) {
        acc.add(&cell_mass(&cell, &(a * b)));
    }
    acc.finish()
}

/// Pointwise sum on the common refinement.
pub fn add(f: &StepFunction, g: &StepFunction) -> StepFunction {
    let leaves = merged_cells(f, g)
        .into_iter()
        .map(|(c, a, b)| (c, a + b))
        .collect();
    StepFunction { leaves }
}

/// Pointwise max on the common refinement (exact comparisons in exact mode).
pub fn pointwise_max(f: &StepFunction, g: &StepFunction) -> StepFunction {
    let leaves = merged_cells(f, g)
        .into_iter()
        .map(|(c, a, b)| (c, if a >= b { a.clone() } else { b.clone() }))
        .collect();
    StepFunction { leaves }
}

/// Haar reconstruction oracle: mean + Σ (f, h_I)·h_I evaluated on the leaf
/// partition, built directly from averages. Test support for the Parseval
/// and reconstruction invariants.
pub fn haar_reconstruct(f: &StepFunction) -> StepFunction {
    let integ = Integrator::new(f);
    let mean = integ.average(&DyadicInterval::root());
    let mut cache: HashMap<DyadicInterval, Scalar> = HashMap::new();
    let leaves = f
        .leaves
        .iter()
        .map(|(leaf, _)| {
            let mut acc = mean.clone();
            let mut anc = *leaf;
            while let Some(p) = anc.parent() {
                let delta = cache
                    .entry(p)
                    .or_insert_with(|| integ.haar_delta(&p))
                    .clone();
                let half = delta.scale_rational(&BigRational::new(
                    BigInt::one(),
                    BigInt::from(2),
                ));
                acc = if anc.is_right_child() { &acc + &half } else { &acc - &half };
                anc = p;
            }
            (*leaf, acc)
        })
        .collect();
    StepFunction { leaves }
}

impl std::fmt::Debug for StepFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "StepFunction[{} leaves]", self.leaves.len())?;
        for (iv, v) in &self.leaves {
            writeln!(f, "  {:>8}  {:?}", iv.path_bits(), v)?;
        }
        Ok(())
    }
}
