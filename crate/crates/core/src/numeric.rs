//! Small summation helpers shared by the statistics code.

/// Neumaier-compensated sum, accumulated in slice order.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (hi, lo) = sum_pair(values);
    hi + lo
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Sum as an unevaluated pair `hi + lo`.
fn sum_pair(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut hi, mut lo) = (0.0, 0.0);
    for v in values {
        let (s, e) = two_sum(hi, v);
        hi = s;
        lo += e;
    }
    two_sum(hi, lo)
}

/// Arithmetic mean, rounded as if computed exactly in all but pathological
/// cases; a run of identical values returns that value. `None` when empty.
///
/// Threshold comparisons against a mean are sensitive to the last bit, e.g.
/// the naive mean of {0.9, 0.1, 0.5} is 0.5 but `0.9 + (−0.8 − 0.4)/3` is not.
pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    if values.iter().all(|&v| v == first) {
        return Some(first);
    }
    let (hi, lo) = sum_pair(values.iter().copied());
    let n = values.len() as f64;
    let q = hi / n;
    let residual = (-q).mul_add(n, hi) + lo;
    Some(q + residual / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_is_exact_on_constant_runs() {
        for v in [0.1, 0.3, 1.0 / 3.0, -0.7, 1e-300] {
            assert_eq!(mean(&[v; 7]), Some(v));
        }
        assert_eq!(mean(&[]), None);
    }

    #[test]
    fn mean_rounds_correctly() {
        // exact sums of the binary values, rounded once
        assert_eq!(mean(&[0.9, 0.1]), Some(0.5));
        assert_eq!(mean(&[0.9, 0.1, 0.5]), Some(0.5));
        assert_eq!(mean(&[1e16, 1.0, -1e16]), Some(1.0 / 3.0));
        assert_eq!(mean(&[0.1, 0.2, 0.3]), Some(0.2));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(v), 1.0);
    }
}
