//! Straight-line reference implementations used as test oracles. They favour
//! obviousness over speed and share no code with the library.

#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use flowsieve::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Average rank by counting: 1 + #smaller + (#equal − 1)/2.
pub fn ranks_by_counting(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_by_ranks(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_two_pass(&ranks_by_counting(x), &ranks_by_counting(y))
}

/// τ-b by enumerating every pair.
pub fn kendall_pairs(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = x[i].partial_cmp(&x[j]).unwrap() as i64;
            let sy = y[i].partial_cmp(&y[j]).unwrap() as i64;
            if sx == 0 {
                tx += 1;
            }
            if sy == 0 {
                ty += 1;
            }
            match sx * sy {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if n0 == tx || n0 == ty {
        return None;
    }
    Some((c - d) as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt())
}

fn h2(zeros: usize, ones: usize) -> f64 {
    let n = (zeros + ones) as f64;
    let mut h = 0.0;
    for c in [zeros, ones] {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

/// Equal-frequency information gain: cut values are the distinct order
/// statistics at ⌊b·n/bins⌋ above the minimum; bin = number of cuts ≤ x.
pub fn info_gain_reference(x: &[f64], y: &[u8], bins: usize) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let mut cuts: Vec<f64> = Vec::new();
    for b in 1..bins {
        let v = s[b * n / bins];
        if v > s[0] && !cuts.contains(&v) {
            cuts.push(v);
        }
    }
    let mut counts = vec![(0usize, 0usize); cuts.len() + 1];
    for (&v, &l) in x.iter().zip(y) {
        let bin = cuts.iter().filter(|&&c| c <= v).count();
        if l == 1 {
            counts[bin].1 += 1;
        } else {
            counts[bin].0 += 1;
        }
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    let h = h2(n - ones, ones);
    let cond: f64 = counts
        .iter()
        .filter(|c| c.0 + c.1 > 0)
        .map(|c| (c.0 + c.1) as f64 / n as f64 * h2(c.0, c.1))
        .sum();
    (h - cond).max(0.0).min(h)
}

fn plain_mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

fn passes(v: Option<f64>, pos: Option<f64>, neg: Option<f64>) -> bool {
    match v {
        Some(v) if v > 0.0 => pos.is_some_and(|m| v >= m),
        Some(v) if v < 0.0 => neg.is_some_and(|m| v <= m),
        _ => false,
    }
}

/// The three selection steps written out literally. Returns a1..a6.
pub fn naive_select(d: &Dataset, bins: usize) -> [Vec<String>; 6] {
    let names = d.feature_names();
    let y: Vec<f64> = d.y().iter().map(|&v| f64::from(v)).collect();
    let cols: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.column(j)).collect();
    let pearson: Vec<Option<f64>> = cols.iter().map(|c| pearson_two_pass(c, &y)).collect();
    let spearman: Vec<Option<f64>> = cols.iter().map(|c| spearman_by_ranks(c, &y)).collect();
    let kendall: Vec<Option<f64>> = cols.iter().map(|c| kendall_pairs(c, &y)).collect();
    let ig: Vec<f64> = cols.iter().map(|c| info_gain_reference(c, d.y(), bins)).collect();

    // Step 1
    let p_pos: Vec<f64> = pearson.iter().flatten().copied().filter(|&v| v > 0.0).collect();
    let p_neg: Vec<f64> = pearson.iter().flatten().copied().filter(|&v| v < 0.0).collect();
    let (mu_pos, mu_neg) = (plain_mean(&p_pos), plain_mean(&p_neg));
    let mut a1 = vec![];
    let mut a2 = vec![];
    for j in 0..names.len() {
        if passes(pearson[j], mu_pos, mu_neg) {
            a1.push(j);
        } else {
            a2.push(j);
        }
    }

    // Step 2, means over the features rejected by step 1
    let of = |v: &[Option<f64>], pos: bool| -> Vec<f64> {
        a2.iter()
            .filter_map(|&j| v[j])
            .filter(|&x| if pos { x > 0.0 } else { x < 0.0 })
            .collect()
    };
    let avg = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    let mu_sk_pos = avg(plain_mean(&of(&kendall, true)), plain_mean(&of(&spearman, true)));
    let mu_sk_neg = avg(plain_mean(&of(&kendall, false)), plain_mean(&of(&spearman, false)));
    let a3: Vec<usize> = a2
        .iter()
        .copied()
        .filter(|&j| passes(avg(spearman[j], kendall[j]), mu_sk_pos, mu_sk_neg))
        .collect();
    let a4: Vec<usize> = (0..names.len()).filter(|j| a1.contains(j) || a3.contains(j)).collect();

    // Step 3
    let mu_ig = plain_mean(&ig).unwrap();
    let a5: Vec<usize> = (0..names.len()).filter(|&j| ig[j] > mu_ig).collect();
    let a6: Vec<usize> = a4.iter().copied().filter(|j| a5.contains(j)).collect();

    let to_names = |v: &[usize]| v.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();
    [
        to_names(&a1),
        to_names(&a2),
        to_names(&a3),
        to_names(&a4),
        to_names(&a5),
        to_names(&a6),
    ]
}

/// Best Gini split of the rows `rows` by exhaustive search.
/// Returns `(feature, lower value, upper value)` of the chosen gap:
/// the split sends `x ≤ lower` left. Candidates are compared by exact
/// weighted impurity; ties keep the lowest feature, then the lowest gap.
pub fn brute_force_split(d: &Dataset, rows: &[usize], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let y = d.y();
    let n = rows.len() as i128;
    let mut best: Option<((i128, i128), (usize, f64, f64))> = None;
    for j in 0..d.n_features() {
        let mut values: Vec<f64> = rows.iter().map(|&r| d.value(r, j)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (mut l0, mut l1, mut r0, mut r1) = (0i128, 0i128, 0i128, 0i128);
            for &r in rows {
                match (d.value(r, j) <= lo, y[r]) {
                    (true, 0) => l0 += 1,
                    (true, _) => l1 += 1,
                    (false, 0) => r0 += 1,
                    (false, _) => r1 += 1,
                }
            }
            let (nl, nr) = (l0 + l1, r0 + r1);
            if nl < min_leaf as i128 || nr < min_leaf as i128 {
                continue;
            }
            // n × weighted Gini = n − (l0²+l1²)/nl − (r0²+r1²)/nr, as num/den
            let den = nl * nr;
            let num = n * den - (l0 * l0 + l1 * l1) * nr - (r0 * r0 + r1 * r1) * nl;
            let better = match &best {
                None => true,
                Some(((bn, bd), _)) => num * bd < bn * den,
            };
            if better {
                best = Some(((num, den), (j, lo, hi)));
            }
        }
    }
    best.map(|(_, s)| s)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled dataset mixing informative, noise, discrete and
/// constant columns; both classes have at least two rows.
pub fn random_dataset(rng: &mut ChaCha8Rng, max_rows: usize, max_features: usize) -> Dataset {
    let n = rng.random_range(10..=max_rows);
    let p = rng.random_range(1..=max_features);
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    y[0] = 0;
    y[1] = 0;
    y[2] = 1;
    y[3] = 1;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut cols = Vec::with_capacity(p);
    for _ in 0..p {
        let kind = rng.random_range(0..6);
        let strength = rng.random_range(-2.0..2.0);
        let col: Vec<f64> = y
            .iter()
            .map(|&l| {
                let z = normal.sample(rng);
                match kind {
                    0 | 1 => z + strength * f64::from(l),
                    2 => z,
                    3 => f64::from(rng.random_range(0..4u8)),
                    4 => f64::from(rng.random_range(0..3u8)) + f64::from(l) * strength.round(),
                    _ => 7.0,
                }
            })
            .collect();
        cols.push(col);
    }
    let names = (0..p).map(|j| format!("c{j}")).collect();
    Dataset::from_columns(names, &cols, y).unwrap()
}
