//! Power-of-two projection of coefficient matrices.
//!
//! Rounding happens in log2 space: a nonzero `x` maps to `sign(x) * 2^q`
//! where `q` is the admissible exponent closest to `log2|x|`, ties going to
//! the smaller exponent.

use crate::matcore::Matrix;

/// Nearest integer exponent to `log2|x|`, ties to the smaller one.
pub fn nearest_integer_exponent(x: f64) -> i32 {
    debug_assert!(x != 0.0);
    (x.abs().log2() - 0.5).ceil() as i32
}

/// Nearest exponent from a sorted, nonempty set, ties to the smaller one.
pub fn nearest_exponent_in(x: f64, p_set: &[i32]) -> i32 {
    debug_assert!(!p_set.is_empty());
    let l = x.abs().log2();
    let mut best = p_set[0];
    let mut best_dist = (l - best as f64).abs();
    for &p in &p_set[1..] {
        let d = (l - p as f64).abs();
        if d < best_dist {
            best = p;
            best_dist = d;
        }
    }
    best
}

pub fn pow2(p: i32) -> f64 {
    2f64.powi(p)
}

/// Rounds to the nearest signed power of two with an unrestricted exponent.
pub fn round_pow2(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x.signum() * pow2(nearest_integer_exponent(x))
}

/// Rounds to `{0, ±2^p | p ∈ p_set}`.
pub fn round_pow2_in(x: f64, p_set: &[i32]) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    x.signum() * pow2(nearest_exponent_in(x, p_set))
}

/// Scales every nonzero column to unit L2 norm; all-zero columns are left alone.
pub fn normalize_columns(ce: &Matrix) -> Matrix {
    let mut out = ce.clone();
    for j in 0..ce.cols() {
        let n = ce.col_norm(j);
        if n > 0.0 {
            for i in 0..ce.rows() {
                out[(i, j)] /= n;
            }
        }
    }
    out
}

pub(crate) fn round_all(ce: &Matrix, p_set: &[i32]) -> Matrix {
    let mut out = ce.clone();
    for i in 0..ce.rows() {
        for v in out.row_mut(i) {
            *v = round_pow2_in(*v, p_set);
        }
    }
    out
}

/// Column-normalizes `ce` and projects it onto the power-of-two domain.
///
/// Returns the projected matrix and the quantization difference (see
/// [`quantization_gap`]) used as the convergence signal.
pub fn quantize_pow2(ce: &Matrix, p_set: &[i32]) -> (Matrix, f64) {
    assert!(!p_set.is_empty(), "exponent set must be nonempty");
    let normalized = normalize_columns(ce);
    let q = round_all(&normalized, p_set);
    let delta = quantization_gap(&normalized, &q);
    (q, delta)
}

/// Frobenius distance from `normalized` to `q` with each column of `q`
/// rescaled by its least-squares factor. Zero exactly when every column of
/// `normalized` is a scaled copy of the quantized column, so a matrix whose
/// columns are power-of-two vectors times arbitrary norms counts as converged.
pub fn quantization_gap(normalized: &Matrix, q: &Matrix) -> f64 {
    let mut total = 0.0;
    for j in 0..q.cols() {
        let (mut qq, mut qn) = (0.0, 0.0);
        for i in 0..q.rows() {
            qq += q[(i, j)] * q[(i, j)];
            qn += q[(i, j)] * normalized[(i, j)];
        }
        let alpha = if qq > 0.0 { qn / qq } else { 0.0 };
        for i in 0..q.rows() {
            let d = normalized[(i, j)] - alpha * q[(i, j)];
            total += d * d;
        }
    }
    total.sqrt()
}

/// Picks at most `n_p` exponents minimizing the squared rounding error of the
/// nonzero entries of `ce`.
///
/// Candidates are the nearest-integer exponents that actually occur. When
/// more than `n_p` occur, an interval dynamic program finds the best subset:
/// nearest-in-log2 assignment means each chosen exponent absorbs a contiguous
/// run of sorted values. An all-zero matrix yields the sentinel set `{0}`.
pub fn select_exponents(ce: &Matrix, n_p: usize) -> Vec<i32> {
    assert!(n_p >= 1, "n_p must be at least 1");
    let mut values: Vec<(f64, f64)> = ce
        .as_slice()
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| (v.abs().log2(), v.abs()))
        .collect();
    if values.is_empty() {
        return vec![0];
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut candidates: Vec<i32> = values
        .iter()
        .map(|&(_, a)| nearest_integer_exponent(a))
        .collect();
    candidates.dedup();
    if candidates.len() <= n_p {
        return candidates;
    }

    let k = candidates.len();
    let err = |mag: f64, p: i32| {
        let d = mag - pow2(p);
        d * d
    };
    // Index ranges of values by log2 position relative to candidates.
    let upto = |bound: f64| values.partition_point(|v| v.0 <= bound);

    // below[i]: all values with log2 <= e_i assigned to e_i.
    let below: Vec<f64> = (0..k)
        .map(|i| {
            values[..upto(candidates[i] as f64)]
                .iter()
                .map(|v| err(v.1, candidates[i]))
                .sum()
        })
        .collect();
    // above[i]: all values with log2 > e_i assigned to e_i.
    let above: Vec<f64> = (0..k)
        .map(|i| {
            values[upto(candidates[i] as f64)..]
                .iter()
                .map(|v| err(v.1, candidates[i]))
                .sum()
        })
        .collect();
    // between[a][b]: values in (e_a, e_b] split at the log2 midpoint.
    let mut between = vec![vec![0.0; k]; k];
    for a in 0..k {
        let lo = upto(candidates[a] as f64);
        for b in a + 1..k {
            let mid = (candidates[a] as f64 + candidates[b] as f64) / 2.0;
            let split = upto(mid);
            let hi = upto(candidates[b] as f64);
            let left: f64 = values[lo..split]
                .iter()
                .map(|v| err(v.1, candidates[a]))
                .sum();
            let right: f64 = values[split..hi]
                .iter()
                .map(|v| err(v.1, candidates[b]))
                .sum();
            between[a][b] = left + right;
        }
    }

    // best[j][i]: min cost with j+1 chosen exponents, the largest being e_i,
    // counting values with log2 <= e_i.
    let mut best = vec![vec![f64::INFINITY; k]; n_p];
    let mut prev = vec![vec![usize::MAX; k]; n_p];
    best[0][..k].copy_from_slice(&below[..k]);
    for j in 1..n_p {
        for i in j..k {
            for a in (j - 1)..i {
                let c = best[j - 1][a] + between[a][i];
                if c < best[j][i] {
                    best[j][i] = c;
                    prev[j][i] = a;
                }
            }
        }
    }
    let last = n_p - 1;
    let mut end = last;
    let mut end_cost = f64::INFINITY;
    for i in last..k {
        let c = best[last][i] + above[i];
        if c < end_cost {
            end_cost = c;
            end = i;
        }
    }
    let mut chosen = Vec::with_capacity(n_p);
    let mut i = end;
    for j in (0..n_p).rev() {
        chosen.push(candidates[i]);
        if j > 0 {
            i = prev[j][i];
        }
    }
    chosen.reverse();
    chosen
}

/// Splits an exact signed power of two into `(negative, exponent)`.
///
/// Returns `None` for zero, non-finite values and anything with mantissa bits.
pub fn pow2_parts(x: f64) -> Option<(bool, i32)> {
    if x == 0.0 || !x.is_finite() {
        return None;
    }
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        // subnormal: exactly one mantissa bit set
        if mantissa.count_ones() != 1 {
            return None;
        }
        let p = mantissa.trailing_zeros() as i32 - 1074;
        return Some((negative, p));
    }
    if mantissa != 0 {
        return None;
    }
    Some((negative, biased - 1023))
}

/// `x * 2^p` by exponent arithmetic.
pub fn shift(x: f64, p: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let bits = x.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let target = biased + p;
    if biased != 0 && (1..2047).contains(&target) {
        let cleared = bits & !(0x7ffu64 << 52);
        f64::from_bits(cleared | ((target as u64) << 52))
    } else {
        // subnormal input or result; the multiply is exact barring underflow
        x * pow2(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_exponent_rule() {
        assert_eq!(round_pow2(0.3), 0.25);
        assert_eq!(round_pow2(-0.7), -0.5);
        assert_eq!(round_pow2(1.0), 1.0);
        assert_eq!(round_pow2(0.0), 0.0);
        // log2(2^1.5) sits exactly between 1 and 2
        assert_eq!(nearest_integer_exponent(2f64.powf(1.5)), 1);
        assert_eq!(nearest_exponent_in(2f64.powf(-1.5), &[-2, -1]), -2);
        assert_eq!(round_pow2_in(0.3, &[-1, 3]), 0.5);
    }

    #[test]
    fn quantize_normalizes_columns_first() {
        let ce = Matrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 0.0]]).unwrap();
        let (q, delta) = quantize_pow2(&ce, &[-1, 0]);
        // normalized column is [0.6, 0.8]
        assert_eq!(q[(0, 0)], 0.5);
        assert_eq!(q[(1, 0)], 1.0);
        assert_eq!(q[(0, 1)], 0.0);
        // best rescale of [0.5, 1.0] onto [0.6, 0.8] is 0.88
        let expected = (0.16f64.powi(2) + 0.08f64.powi(2)).sqrt();
        assert!((delta - expected).abs() < 1e-15);
    }

    #[test]
    fn scaled_power_of_two_columns_have_no_gap() {
        let ce = Matrix::from_rows(&[vec![0.5, 3.0], vec![-0.25, 0.0], vec![1.0, 1.5]]).unwrap();
        let (_, delta) = quantize_pow2(&ce, &[-3, -2, -1, 0]);
        assert!(delta < 1e-15, "{delta}");
        let (_, delta) = quantize_pow2(&Matrix::zeros(2, 2), &[0]);
        assert_eq!(delta, 0.0);
    }

    #[test]
    fn select_small_cases() {
        let ce = Matrix::from_rows(&[vec![0.5, 0.5, 0.25]]).unwrap();
        assert_eq!(select_exponents(&ce, 1), vec![-1]);
        let single = Matrix::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(select_exponents(&single, 4), vec![0]);
        assert_eq!(select_exponents(&Matrix::zeros(2, 2), 3), vec![0]);
    }

    fn quant_error(values: &[f64], p_set: &[i32]) -> f64 {
        values
            .iter()
            .map(|&v| {
                let q = round_pow2_in(v, p_set);
                (v - q) * (v - q)
            })
            .sum()
    }

    fn combinations(items: &[i32], k: usize) -> Vec<Vec<i32>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            for mut rest in combinations(&items[i + 1..], k - 1) {
                rest.insert(0, items[i]);
                out.push(rest);
            }
        }
        out
    }

    #[test]
    fn select_matches_exhaustive_subset_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..30 {
            // magnitudes spread over eight octaves
            let values: Vec<f64> = (0..100)
                .map(|_| {
                    let s = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
                    s * 2f64.powf(rng.random_range(-8.4..-0.6))
                })
                .collect();
            let ce = Matrix::new(20, 5, values.clone()).unwrap();
            let mut observed: Vec<i32> = values.iter().map(|&v| nearest_integer_exponent(v)).collect();
            observed.sort();
            observed.dedup();
            assert_eq!(observed.len(), 8, "trial {trial}");

            let mut best = (f64::INFINITY, Vec::new());
            for subset in combinations(&observed, 4) {
                let e = quant_error(&values, &subset);
                if e < best.0 {
                    best = (e, subset);
                }
            }
            let picked = select_exponents(&ce, 4);
            assert_eq!(picked, best.1, "trial {trial}");
        }
    }

    #[test]
    fn pow2_decoding_and_shift() {
        assert_eq!(pow2_parts(0.25), Some((false, -2)));
        assert_eq!(pow2_parts(-8.0), Some((true, 3)));
        assert_eq!(pow2_parts(3.0), None);
        assert_eq!(pow2_parts(0.0), None);
        assert_eq!(pow2_parts(f64::MIN_POSITIVE / 4.0), Some((false, -1024)));
        assert_eq!(shift(1.5, -3), 1.5 / 8.0);
        assert_eq!(shift(-3.0, 4), -48.0);
        assert_eq!(shift(f64::MIN_POSITIVE, -2), f64::MIN_POSITIVE / 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let p = rng.random_range(-20..20);
            assert_eq!(shift(x, p), x * pow2(p));
        }
    }
}
