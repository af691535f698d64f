//! Correlation and information-theoretic statistics of a feature against
//! the label.
//!
//! Correlations return `Ok(None)` when either input has zero variance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::Dataset;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(())
}

/// Pearson product-moment correlation.
///
/// Single pass with Welford-style co-moment updates.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    let (mut mx, mut my) = (0.0f64, 0.0f64);
    let (mut sxx, mut syy, mut sxy) = (0.0f64, 0.0f64, 0.0f64);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let n = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / n;
        my += dy / n;
        let dx2 = a - mx;
        let dy2 = b - my;
        sxx += dx * dx2;
        syy += dy * dy2;
        sxy += dx * dy2;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Number of unordered pairs within runs of equal adjacent values.
fn tied_pairs<T: PartialEq>(sorted: impl IntoIterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Bottom-up merge sort of `v`, returning the number of strict inversions.
fn merge_sort_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    let mut buf = v.to_vec();
    let mut swaps = 0u64;
    let mut width = 1;
    let mut src_is_v = true;
    while width < n {
        {
            let (src, dst): (&[f64], &mut [f64]) = if src_is_v { (&*v, &mut buf) } else { (&buf, &mut *v) };
            let mut lo = 0;
            while lo < n {
                let mid = (lo + width).min(n);
                let hi = (lo + 2 * width).min(n);
                let (mut i, mut j, mut k) = (lo, mid, lo);
                while i < mid && j < hi {
                    if src[j] < src[i] {
                        dst[k] = src[j];
                        swaps += (mid - i) as u64;
                        j += 1;
                    } else {
                        dst[k] = src[i];
                        i += 1;
                    }
                    k += 1;
                }
                dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
                k += mid - i;
                dst[k..k + (hi - j)].copy_from_slice(&src[j..hi]);
                lo = hi;
            }
        }
        src_is_v = !src_is_v;
        width *= 2;
    }
    if !src_is_v {
        v.copy_from_slice(&buf);
    }
    swaps
}

/// Kendall's τ-b in O(n log n) (Knight's algorithm).
///
/// Rows are sorted by (x, y); the number of discordant pairs is the number
/// of strict inversions left in y, counted by merge sort.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_pair(x, y)?;
    // -0.0 and 0.0 must tie
    let x: Vec<f64> = x.iter().map(|v| v + 0.0).collect();
    let y: Vec<f64> = y.iter().map(|v| v + 0.0).collect();
    let n = x.len() as u64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then_with(|| y[a].total_cmp(&y[b])));

    let tied_x = tied_pairs(order.iter().map(|&i| x[i].to_bits()));
    let tied_xy = tied_pairs(order.iter().map(|&i| (x[i].to_bits(), y[i].to_bits())));
    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let discordant = merge_sort_count(&mut ys);
    let tied_y = tied_pairs(ys.iter().map(|v| v.to_bits()));

    let n0 = n * (n - 1) / 2;
    let not_tied_x = n0 - tied_x;
    let not_tied_y = n0 - tied_y;
    if not_tied_x == 0 || not_tied_y == 0 {
        return Ok(None);
    }
    // C − D = n0 − tx − ty + txy − 2·D
    let concordant_minus_discordant =
        n0 as f64 - tied_x as f64 - tied_y as f64 + tied_xy as f64 - 2.0 * discordant as f64;
    let tau = concordant_minus_discordant / ((not_tied_x as f64).sqrt() * (not_tied_y as f64).sqrt());
    Ok(Some(tau.clamp(-1.0, 1.0)))
}

/// Shannon entropy in bits of a binary label vector.
pub fn entropy(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("entropy of an empty label vector".into()));
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    Ok(binary_entropy(labels.len() - ones, ones))
}

fn binary_entropy(zeros: usize, ones: usize) -> f64 {
    let n = (zeros + ones) as f64;
    [zeros, ones]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Cut points for equal-frequency binning: the distinct order statistics
/// at positions ⌊b·n/bins⌋ for b = 1..bins, excluding the minimum.
/// A value's bin is the number of cuts ≤ it. Depends only on ranks, so
/// binning is unchanged by strictly increasing transforms.
pub fn quantile_cuts(x: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(bins);
    if n == 0 {
        return cuts;
    }
    for b in 1..bins {
        let v = sorted[b * n / bins];
        if v > sorted[0] && cuts.last() != Some(&v) {
            cuts.push(v);
        }
    }
    cuts
}

/// Information gain H(y) − H(y | bin(x)) with equal-frequency bins.
pub fn information_gain(x: &[f64], y: &[u8], bins: usize) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if bins < 2 {
        return Err(Error::Invalid(format!("bins must be at least 2, got {bins}")));
    }
    if x.is_empty() {
        return Err(Error::Empty("information gain of an empty vector".into()));
    }
    let cuts = quantile_cuts(x, bins);
    let mut counts = vec![[0usize; 2]; cuts.len() + 1];
    for (&v, &l) in x.iter().zip(y) {
        let b = cuts.partition_point(|&c| c <= v);
        counts[b][l as usize] += 1;
    }
    let n = x.len() as f64;
    let h = entropy(y)?;
    let conditional: f64 = counts
        .iter()
        .filter(|c| c[0] + c[1] > 0)
        .map(|c| (c[0] + c[1]) as f64 / n * binary_entropy(c[0], c[1]))
        .sum();
    Ok((h - conditional).clamp(0.0, h))
}

/// Statistics of one feature against the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub feature: String,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub info_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub bins: usize,
    pub label_entropy: f64,
    pub features: Vec<FeatureStats>,
}

impl CorrelationTable {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&FeatureStats> {
        self.features.iter().find(|f| f.feature == name)
    }

    /// `feature,pearson,spearman,kendall,info_gain`; undefined values are empty.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        wtr.write_record(["feature", "pearson", "spearman", "kendall", "info_gain"])
            .expect("in-memory write");
        for f in &self.features {
            wtr.write_record([
                f.feature.clone(),
                fmt(f.pearson),
                fmt(f.spearman),
                fmt(f.kendall),
                f.info_gain.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

/// All four statistics of every feature, computed in parallel and returned
/// in feature order.
pub fn correlation_table(d: &Dataset, bins: usize) -> Result<CorrelationTable> {
    d.require_both_classes()?;
    if d.n_rows() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: d.n_rows(),
        });
    }
    if bins < 2 {
        return Err(Error::Invalid(format!("bins must be at least 2, got {bins}")));
    }
    let yf: Vec<f64> = d.y().iter().map(|&l| f64::from(l)).collect();
    let y_ranks = average_ranks(&yf);
    let features = (0..d.n_features())
        .into_par_iter()
        .map(|j| -> Result<FeatureStats> {
            let col = d.column(j);
            Ok(FeatureStats {
                feature: d.feature_names()[j].clone(),
                pearson: pearson(&col, &yf)?,
                spearman: pearson(&average_ranks(&col), &y_ranks)?,
                kendall: kendall_tau_b(&col, &yf)?,
                info_gain: information_gain(&col, d.y(), bins)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationTable {
        bins,
        label_entropy: entropy(d.y())?,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Option<f64>, b: f64) -> bool {
        a.is_some_and(|v| (v - b).abs() < 1e-12)
    }

    #[test]
    fn pearson_examples() {
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0));
        assert!(close(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0));
        assert_eq!(pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), None);
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::TooShort { .. })));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 3.0]), vec![3.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn spearman_examples() {
        assert!(close(spearman(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap(), 1.0));
        let v = [1.0, 2.0, 2.0, 3.0];
        assert!(close(spearman(&v, &v).unwrap(), 1.0));
    }

    #[test]
    fn kendall_examples() {
        assert!(close(kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0));
        assert!(close(kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0));
        assert_eq!(kendall_tau_b(&[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]).unwrap(), None);
        // x=[1,2,2,3], y=[1,3,2,3]: C=4, D=0, one pair tied in x only, one in y only
        // τ_b = 4 / sqrt(5 * 5) = 0.8
        assert!(close(
            kendall_tau_b(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 3.0]).unwrap(),
            0.8
        ));
    }

    #[test]
    fn merge_sort_counts_inversions() {
        let mut v = vec![3.0, 1.0, 2.0, 2.0, 0.0];
        // (3,1) (3,2) (3,2) (3,0) (1,0) (2,0) (2,0)
        assert_eq!(merge_sort_count(&mut v), 7);
        assert_eq!(v, vec![0.0, 1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(entropy(&[1, 1, 1]).unwrap(), 0.0);
        assert!((entropy(&[0, 0, 0, 1]).unwrap() - 0.8112781244591328).abs() < 1e-12);
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn information_gain_examples() {
        assert_eq!(information_gain(&[1.0, 1.0, 2.0, 2.0], &[0, 0, 1, 1], 2).unwrap(), 1.0);
        assert_eq!(information_gain(&[4.0; 6], &[0, 1, 0, 1, 1, 0], 10).unwrap(), 0.0);
        assert!(information_gain(&[1.0], &[0, 1], 2).is_err());
        assert!(information_gain(&[1.0, 2.0], &[0, 1], 1).is_err());
    }

    #[test]
    fn quantile_cuts_merge_duplicates() {
        assert_eq!(quantile_cuts(&[1.0, 1.0, 2.0, 2.0], 2), vec![2.0]);
        assert_eq!(quantile_cuts(&[5.0; 10], 4), Vec::<f64>::new());
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(quantile_cuts(&x, 5), vec![2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn table_on_label_copies() {
        let y = vec![0u8, 1, 1, 0, 1, 0, 0, 1];
        let f1: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let f2: Vec<f64> = y.iter().map(|&l| 1.0 - f64::from(l)).collect();
        let d = Dataset::from_columns(vec!["f1".into(), "f2".into()], &[f1, f2], y).unwrap();
        let t = correlation_table(&d, 10).unwrap();
        let a = &t.features[0];
        assert!(close(a.pearson, 1.0));
        assert!((a.info_gain - t.label_entropy).abs() < 1e-12);
        assert!(close(t.features[1].pearson, -1.0));
        let csv = t.to_csv();
        assert!(csv.starts_with("feature,pearson,spearman,kendall,info_gain\n"));
    }

    #[test]
    fn table_requires_both_classes() {
        let d = Dataset::new(vec!["f".into()], vec![1.0, 2.0], vec![1, 1]).unwrap();
        assert!(matches!(correlation_table(&d, 10), Err(Error::SingleClass(_))));
    }
}
