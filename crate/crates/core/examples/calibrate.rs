//! Recompute the frozen calibration constants from the smallest exact
//! instances. Run with `cargo run --example calibrate --release`; the
//! printed values are the ones pinned in `experiments::calibration`.

use del_core::experiments::{
    martingale_lower_bound, maximal_testing, row_contribution, square_lower_bound,
    weak_type_check,
};
use del_core::interval::DyadicInterval;
use del_core::operators::DeltaConvention;
use del_core::scalar::Mode;
use del_core::weight::{build_weight, WeightParams};

fn main() {
    // k = 2, L = 8, exact: the calibration instance
    let aw = build_weight(WeightParams::new(2, 8, Mode::Exact), DyadicInterval::root()).unwrap();

    let j0 = aw.specials[0][0];
    let rc = row_contribution(&aw, &j0).unwrap();
    println!("row_contribution(k=2, l=0)        = {rc:?}");

    let mart = martingale_lower_bound(&aw).unwrap();
    println!("mart prefactor min (k=2, L=8)      = {:.6}", mart.prefactor_min);
    println!("mart specials ledger (exact via f64) = {:.12e}", mart.specials_integral);
    println!("mart full integral exact           = {}", mart.integral_full_exact.clone().unwrap());
    println!("mart ratio_full                    = {:.6}", mart.ratio_full);
    println!("mart per-level ledger              = {:?}", mart.per_level_ledger);

    let (sq, pointwise) = square_lower_bound(&aw).unwrap();
    println!("sq prefactor min (k=2, L=8)        = {:.6}", sq.prefactor_min);
    println!("sq pointwise min (k=2, L=8)        = {:.6}", pointwise);
    println!("sq full integral exact             = {}", sq.integral_full_exact.clone().unwrap());

    // golden fixture for the square integral at k = 3, L = 4
    let aw34 = build_weight(WeightParams::new(3, 4, Mode::Exact), DyadicInterval::root()).unwrap();
    let (sq34, pw34) = square_lower_bound(&aw34).unwrap();
    println!("sq full integral exact (k=3, L=4)  = {}", sq34.integral_full_exact.clone().unwrap());
    println!("sq pointwise min (k=3, L=4)        = {:.6}", pw34);

    // per-k trend of the prefactors (monotonicity evidence)
    for (k, l) in [(3u32, 5u32), (4, 4)] {
        let aw = build_weight(WeightParams::new(k, l, Mode::Exact), DyadicInterval::root()).unwrap();
        let mart = martingale_lower_bound(&aw).unwrap();
        let (sq, pw) = square_lower_bound(&aw).unwrap();
        println!(
            "k={k} L={l}: mart prefactor {:.6}, sq prefactor {:.6}, s2 pointwise {:.6}",
            mart.prefactor_min, sq.prefactor_min, pw
        );
    }

    // recorded ceilings (float mode)
    for (k, l) in [(2u32, 8u32), (3, 5), (4, 4)] {
        let aw = build_weight(WeightParams::new(k, l, Mode::Float), DyadicInterval::root()).unwrap();
        let mt = maximal_testing(&aw).unwrap();
        let wt = weak_type_check(&aw, 16, DeltaConvention::FullDifference).unwrap();
        println!(
            "k={k} L={l}: test_max {:.6} (argmax {}), majorant max {:.4}, lemmas i0={:.4} im={:.4} ik1={:.6} ik1hat={:.4}, weak max {:.6}",
            mt.test_max, mt.test_argmax, mt.majorant_ratio_max, mt.lemma_i0, mt.lemma_im_max,
            mt.lemma_ik1, mt.lemma_ik1hat, wt.max_ratio
        );
    }
}
