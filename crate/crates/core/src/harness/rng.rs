//! Counter-based substreams: one independent stream per trial index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator for trial `index` under `master`. Independent of how trials
/// are scheduled across threads.
pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Every trial consumes exactly these three uniforms, in this order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialDraws {
    pub u_x: f64,
    pub u_y: f64,
    pub u_cell: f64,
}

impl TrialDraws {
    pub fn draw<R: Rng>(rng: &mut R) -> Self {
        TrialDraws { u_x: rng.random(), u_y: rng.random(), u_cell: rng.random() }
    }

    pub fn for_trial(master: u64, index: u64) -> Self {
        Self::draw(&mut trial_rng(master, index))
    }
}

/// Inverse CDF over `weights` in their given order for `u ∈ [0, 1)`.
/// Rounding slack at the top end goes to the last cell with positive weight.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc && *w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        assert_eq!(TrialDraws::for_trial(7, 3), TrialDraws::for_trial(7, 3));
        assert_ne!(TrialDraws::for_trial(7, 3), TrialDraws::for_trial(7, 4));
        assert_ne!(TrialDraws::for_trial(7, 3), TrialDraws::for_trial(8, 3));
    }

    #[test]
    fn inverse_cdf() {
        let w = [0.25, 0.0, 0.5, 0.25];
        assert_eq!(sample_index(&w, 0.0), 0);
        assert_eq!(sample_index(&w, 0.2499), 0);
        assert_eq!(sample_index(&w, 0.25), 2);
        assert_eq!(sample_index(&w, 0.75), 3);
        assert_eq!(sample_index(&w, 0.999_999_999_999), 3);
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.5 - 1e-17, 0.0], 1.0 - 1e-17), 1);
    }
}
