//! Inverted dropout with seeded, replayable masks, plus seed mixing.
//!
//! Masks are a pure function of `(seed, site)`, so a backward pass (or a
//! finite-difference probe) can regenerate exactly the masks its forward
//! pass used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine two seeds into a decorrelated one.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Combine three seeds.
pub fn mix_seed3(a: u64, b: u64, c: u64) -> u64 {
    mix_seed(mix_seed(a, b), c)
}

/// Forward mode: evaluation (no dropout) or training with a dropout rate
/// and the seed that makes its masks replayable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Eval,
    Train { dropout: f64, seed: u64 },
}

impl Mode {
    /// The inverted-dropout mask for a named site, or `None` when dropout
    /// is inactive. Kept entries carry `1/(1-rate)` so expectations match
    /// evaluation mode.
    pub fn mask(&self, site: u64, len: usize) -> Option<Vec<f64>> {
        match *self {
            Mode::Eval => None,
            Mode::Train { dropout, seed } => {
                if dropout <= 0.0 {
                    return None;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, site));
                let keep = 1.0 / (1.0 - dropout);
                Some(
                    (0..len)
                        .map(|_| {
                            if rng.random::<f64>() < dropout {
                                0.0
                            } else {
                                keep
                            }
                        })
                        .collect(),
                )
            }
        }
    }
}

/// Apply a mask in place when present.
pub fn apply_mask(x: &mut [f64], mask: Option<&Vec<f64>>) {
    if let Some(m) = mask {
        for (v, &k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_replay_exactly() {
        let mode = Mode::Train {
            dropout: 0.5,
            seed: 42,
        };
        let a = mode.mask(7, 100).unwrap();
        let b = mode.mask(7, 100).unwrap();
        assert_eq!(a, b);
        let c = mode.mask(8, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn eval_and_zero_rate_have_no_mask() {
        assert!(Mode::Eval.mask(0, 4).is_none());
        let mode = Mode::Train {
            dropout: 0.0,
            seed: 1,
        };
        assert!(mode.mask(0, 4).is_none());
    }

    #[test]
    fn kept_entries_are_scaled() {
        let mode = Mode::Train {
            dropout: 0.25,
            seed: 3,
        };
        let m = mode.mask(0, 1000).unwrap();
        for v in &m {
            assert!(*v == 0.0 || (*v - 4.0 / 3.0).abs() < 1e-15);
        }
        let kept = m.iter().filter(|v| **v > 0.0).count();
        // Loose band around 75%.
        assert!(kept > 650 && kept < 850, "kept {kept}");
    }

    #[test]
    fn seed_mixing_separates_streams() {
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(mix_seed(0, 0), 0);
        assert_ne!(mix_seed3(1, 2, 3), mix_seed3(1, 3, 2));
    }
}
