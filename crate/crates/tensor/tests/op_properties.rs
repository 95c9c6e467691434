//! Structural properties of pooling, upsampling and the KL loss, plus the
//! exhaustive window-scan oracle for max-pooling.

use foa_tensor::{kl_loss, maxpool3d, ClipTensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn maxpool_matches_exhaustive_window_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let shape = (4, 8, 8, 3);
        let n = shape.0 * shape.1 * shape.2 * shape.3;
        let input =
            ClipTensor::new(shape, (0..n).map(|_| rng.gen_range(-5.0f64..5.0)).collect()).unwrap();
        let window = (2, 2, 2);
        let out = maxpool3d(&input, window).unwrap();
        for to in 0..2 {
            for xo in 0..4 {
                for yo in 0..4 {
                    for ch in 0..3 {
                        let mut best = f64::NEG_INFINITY;
                        for dt in 0..2 {
                            for dh in 0..2 {
                                for dw in 0..2 {
                                    best = best.max(input.at(
                                        2 * to + dt,
                                        2 * xo + dh,
                                        2 * yo + dw,
                                        ch,
                                    ));
                                }
                            }
                        }
                        assert_eq!(out.at(to, xo, yo, ch), best);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Shuffling values inside each pooling window never changes the output.
    #[test]
    fn maxpool_permutation_invariant_within_windows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = (2, 4, 4, 1);
        let n = 32;
        let input = ClipTensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0f64..1.0)).collect()).unwrap();
        let window = (2, 2, 2);
        let base = maxpool3d(&input, window).unwrap();

        // Permute each window's 8 elements by a per-window rotation.
        let mut shuffled = input.clone();
        for to in 0..1 {
            for xo in 0..2 {
                for yo in 0..2 {
                    let mut idxs = Vec::new();
                    for dt in 0..2 {
                        for dh in 0..2 {
                            for dw in 0..2 {
                                idxs.push(input.index(2*to+dt, 2*xo+dh, 2*yo+dw, 0));
                            }
                        }
                    }
                    let rot = rng.gen_range(0..idxs.len());
                    let vals: Vec<f64> = idxs.iter().map(|&i| input.data()[i]).collect();
                    for (k, &i) in idxs.iter().enumerate() {
                        shuffled.data_mut()[i] = vals[(k + rot) % vals.len()];
                    }
                }
            }
        }
        let permuted = maxpool3d(&shuffled, window).unwrap();
        prop_assert_eq!(base.data(), permuted.data());
    }

    /// Window (1,1,1) pooling is idempotent.
    #[test]
    fn maxpool_unit_window_idempotent(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = (2, 3, 3, 2);
        let input = ClipTensor::new(shape, (0..36).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap();
        let once = maxpool3d(&input, (1, 1, 1)).unwrap();
        let twice = maxpool3d(&once, (1, 1, 1)).unwrap();
        prop_assert_eq!(&once, &input);
        prop_assert_eq!(&twice, &input);
    }

    /// KL with eps = 0 is non-negative and zero exactly at equality.
    #[test]
    fn kl_nonnegative_without_eps(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 25;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let (loss, _) = kl_loss(&a, &b, 0.0).unwrap();
        prop_assert!(loss >= -1e-12, "loss = {}", loss);
        let (self_loss, _) = kl_loss(&a, &a, 0.0).unwrap();
        prop_assert!(self_loss.abs() <= 1e-12);
    }
}

#[test]
fn kl_matches_naive_summation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let n = 64;
        let raw_t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let raw_p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let eps = 1e-8;
        let (loss, _) = kl_loss(&raw_t, &raw_p, eps).unwrap();

        let st: f64 = raw_t.iter().sum();
        let sp: f64 = raw_p.iter().sum();
        let mut expect = 0.0;
        for i in 0..n {
            let y = raw_t[i] / st;
            let yh = raw_p[i] / sp;
            expect += y * (eps + y / (eps + yh)).ln();
        }
        assert!(
            (loss - expect).abs() <= 1e-12 * expect.abs().max(1.0),
            "{loss} vs {expect}"
        );
    }
}
