//! Exact one-dimensional clustering.
//!
//! [`two_means_1d`] scans every split point of the sorted values.
//! [`kmeans_1d`] solves the general k case by dynamic programming over the
//! distinct values (weighted by multiplicity) with the divide-and-conquer
//! speedup that the monotone optimal split points of 1-D k-means allow.
//! Both are deterministic; ties go to the lowest split index.

use crate::error::{Error, Result};

/// Result of the exact 2-means split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoMeans {
    /// Midpoint of the two cluster means.
    pub threshold: f64,
    pub low_mean: f64,
    pub high_mean: f64,
    /// Number of values in the low cluster.
    pub low_count: usize,
}

/// Optimal 2-way split of `values` minimizing the within-cluster sum of
/// squared deviations.
pub fn two_means_1d(values: &[f64]) -> Result<TwoMeans> {
    let mut sorted = values.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("values must be finite".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return Err(Error::DegenerateInput(
            "two-means needs at least 2 distinct values".into(),
        ));
    }
    // shift by the minimum so the prefix sums stay small
    let base = sorted[0];
    let mut sum = vec![0.0; n + 1];
    let mut sq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        let d = v - base;
        sum[i + 1] = sum[i] + d;
        sq[i + 1] = sq[i] + d * d;
    }
    let sse = |a: usize, b: usize| {
        let m = (b - a) as f64;
        let s = sum[b] - sum[a];
        (sq[b] - sq[a] - s * s / m).max(0.0)
    };
    let mut best: Option<(f64, usize)> = None;
    for k in 1..n {
        if sorted[k - 1] == sorted[k] {
            continue;
        }
        let cost = sse(0, k) + sse(k, n);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, k));
        }
    }
    let (_, k) = best.expect("at least one distinct split exists");
    let low_mean = base + sum[k] / k as f64;
    let high_mean = base + (sum[n] - sum[k]) / (n - k) as f64;
    Ok(TwoMeans {
        threshold: 0.5 * (low_mean + high_mean),
        low_mean,
        high_mean,
        low_count: k,
    })
}

/// One cluster of an exact 1-D k-means partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    /// Smallest member value.
    pub min: f64,
    /// Largest member value.
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

/// Optimal partition of `values` into `k` contiguous (in sorted order)
/// clusters, returned in ascending order of value.
pub fn kmeans_1d(values: &[f64], k: usize) -> Result<Vec<Cluster>> {
    if k == 0 {
        return Err(Error::Parameter("k must be >= 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // distinct values with multiplicities
    let mut uniq: Vec<(f64, usize)> = Vec::new();
    for &v in &sorted {
        match uniq.last_mut() {
            Some((u, c)) if *u == v => *c += 1,
            _ => uniq.push((v, 1)),
        }
    }
    let m = uniq.len();
    if m < k {
        return Err(Error::DegenerateInput(format!(
            "{m} distinct values cannot form {k} clusters"
        )));
    }
    let base = uniq[0].0;
    let mut cnt = vec![0.0; m + 1];
    let mut sum = vec![0.0; m + 1];
    let mut sq = vec![0.0; m + 1];
    for (i, &(v, c)) in uniq.iter().enumerate() {
        let d = v - base;
        let c = c as f64;
        cnt[i + 1] = cnt[i] + c;
        sum[i + 1] = sum[i] + c * d;
        sq[i + 1] = sq[i] + c * d * d;
    }
    // cost of uniq[a..b] as one cluster
    let cost = |a: usize, b: usize| {
        let n = cnt[b] - cnt[a];
        let s = sum[b] - sum[a];
        (sq[b] - sq[a] - s * s / n).max(0.0)
    };

    // prev[j]: best cost of uniq[..j] with the clusters so far
    let mut prev: Vec<f64> = (0..=m).map(|j| if j == 0 { 0.0 } else { cost(0, j) }).collect();
    let mut splits: Vec<Vec<usize>> = Vec::with_capacity(k);
    splits.push(vec![0; m + 1]);

    struct Layer<'a, F: Fn(usize, usize) -> f64> {
        prev: &'a [f64],
        cost: &'a F,
        cur: Vec<f64>,
        arg: Vec<usize>,
        layer: usize,
    }

    impl<F: Fn(usize, usize) -> f64> Layer<'_, F> {
        // fills cur[j] for j in lo..=hi knowing the optimal split lies in opt_lo..=opt_hi
        fn solve(&mut self, lo: usize, hi: usize, opt_lo: usize, opt_hi: usize) {
            if lo > hi {
                return;
            }
            let mid = (lo + hi) / 2;
            let mut best = f64::INFINITY;
            let mut best_s = opt_lo.max(self.layer);
            // last cluster is uniq[s..mid], needs s >= layer and s < mid
            let start = opt_lo.max(self.layer);
            let end = opt_hi.min(mid - 1);
            for s in start..=end {
                let c = self.prev[s] + (self.cost)(s, mid);
                if c < best {
                    best = c;
                    best_s = s;
                }
            }
            self.cur[mid] = best;
            self.arg[mid] = best_s;
            if mid > lo {
                self.solve(lo, mid - 1, opt_lo, best_s);
            }
            self.solve(mid + 1, hi, best_s, opt_hi);
        }
    }

    for layer in 1..k {
        let mut l = Layer {
            prev: &prev,
            cost: &cost,
            cur: vec![f64::INFINITY; m + 1],
            arg: vec![0; m + 1],
            layer,
        };
        // j values with at least layer+1 distinct values available
        l.solve(layer + 1, m, layer, m - 1);
        splits.push(l.arg);
        prev = l.cur;
    }

    // backtrack cluster boundaries
    let mut bounds = vec![m];
    let mut j = m;
    for layer in (1..k).rev() {
        j = splits[layer][j];
        bounds.push(j);
    }
    bounds.push(0);
    bounds.reverse();

    Ok(bounds
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let n = cnt[b] - cnt[a];
            Cluster {
                min: uniq[a].0,
                max: uniq[b - 1].0,
                mean: base + (sum[b] - sum[a]) / n,
                count: n as usize,
            }
        })
        .collect())
}
