//! Dyadic extremal-weight laboratory.
//!
//! Builds the recursive extremal A₂ weights on the dyadic tree over `[0,1)`,
//! applies the dyadic operators (martingale transform, square function,
//! maximal function), reproduces the lower-bound ledgers, and certifies the
//! Bellman-function candidate for the weak-type square function bound.
//!
//! Arithmetic is either exact — values in the real quadratic tower
//! ℚ(√2, √(p(p−1))) with big-rational coordinates — or IEEE double with
//! compensated, deterministically ordered reductions.

pub mod bellman;
pub mod error;
pub mod experiments;
pub mod interval;
pub mod operators;
pub mod report;
pub mod scalar;
pub mod step;
pub mod weight;

pub use error::CoreError;
pub use interval::DyadicInterval;
pub use scalar::{Mode, Scalar};
pub use step::StepFunction;

/// Initialize the global worker pool, honoring the `DEL_THREADS` cap.
/// Safe to call more than once; later calls are ignored.
pub fn init_threads() {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(n) = std::env::var("DEL_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            if n >= 1 {
                builder = builder.num_threads(n);
            }
        }
    }
    let _ = builder.build_global();
}
