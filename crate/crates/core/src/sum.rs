//! Order-independent pairwise reductions.
//!
//! Grid averages are accumulated by recursive halving so the result does not
//! depend on how a map over the grid is scheduled.

use std::ops::Add;

const LEAF: usize = 8;

/// Pairwise sum of `f(0) + ... + f(n-1)`. Returns `zero` when `n == 0`.
pub fn pairwise<S, F>(n: usize, zero: &S, f: &F) -> S
where
    S: Clone + Add<Output = S>,
    F: Fn(usize) -> S,
{
    fn rec<S, F>(lo: usize, hi: usize, zero: &S, f: &F) -> S
    where
        S: Clone + Add<Output = S>,
        F: Fn(usize) -> S,
    {
        if hi - lo <= LEAF {
            let mut acc = zero.clone();
            for i in lo..hi {
                acc = acc + f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, zero, f) + rec(mid, hi, zero, f)
        }
    }
    rec(0, n, zero, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_on_integers() {
        let s = pairwise(1000, &0u64, &|i| i as u64);
        assert_eq!(s, 999 * 1000 / 2);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(pairwise(0, &0.0f64, &|_| 1.0), 0.0);
    }

    #[test]
    fn pairwise_beats_naive_on_small_increments() {
        let n = 1 << 20;
        let s = pairwise(n, &0.0f32, &|_| 0.1f32);
        assert!((s - 0.1 * n as f32).abs() / (0.1 * n as f32) < 1e-5);
    }
}
