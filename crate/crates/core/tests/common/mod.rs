//! Independent reference implementations used by the integration and acceptance
//! tests. They favour obviousness over speed.

#![allow(dead_code)]

use std::collections::HashMap;

/// Cosine distance written out directly; zero vectors are at distance 1.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    1.0 - (dot / (na * nb)).max(-1.0).min(1.0)
}

pub struct Item {
    pub id: String,
    pub label: String,
    pub speaker: String,
}

/// Threshold-sweep AP: every included pair defines a threshold position in the
/// `(distance, smaller id, larger id)` order; precision at a positive pair counts
/// the pairs at or before it.
pub fn brute_force_ap(items: &[Item], cross_speaker: bool, dist: &dyn Fn(usize, usize) -> f64) -> Option<f64> {
    struct P {
        d: f64,
        key: (String, String),
        pos: bool,
    }
    let mut pairs = Vec::new();
    for i in 0..items.len() {
        for j in 0..items.len() {
            if i >= j {
                continue;
            }
            let same_word = items[i].label == items[j].label;
            let same_spk = items[i].speaker == items[j].speaker;
            if cross_speaker && same_word && same_spk {
                continue;
            }
            let (a, b) = (items[i].id.clone(), items[j].id.clone());
            let key = if a < b { (a, b) } else { (b, a) };
            pairs.push(P { d: dist(i, j), key, pos: same_word });
        }
    }
    let before = |p: &P, q: &P| q.d < p.d || (q.d == p.d && q.key <= p.key);
    let mut precisions: Vec<(&P, f64)> = Vec::new();
    for p in pairs.iter().filter(|p| p.pos) {
        let at_or_before = pairs.iter().filter(|q| before(p, q)).count();
        let hits = pairs.iter().filter(|q| q.pos && before(p, q)).count();
        precisions.push((p, hits as f64 / at_or_before as f64));
    }
    if precisions.is_empty() {
        return None;
    }
    precisions.sort_by(|(a, _), (b, _)| a.d.total_cmp(&b.d).then_with(|| a.key.cmp(&b.key)));
    let total: f64 = precisions.iter().map(|(_, v)| v).sum();
    Some(total / precisions.len() as f64)
}

fn unit(row: &[f64]) -> Vec<f64> {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        row.to_vec()
    } else {
        row.iter().map(|x| x / n).collect()
    }
}

/// Exhaustive memoized recursion over alignment paths, minimizing accumulated
/// cost and then path length; returns cost divided by length.
pub fn dtw_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let xs: Vec<Vec<f64>> = x.iter().map(|r| unit(r)).collect();
    let ys: Vec<Vec<f64>> = y.iter().map(|r| unit(r)).collect();
    let cell = |i: usize, j: usize| {
        let dot: f64 = xs[i].iter().zip(&ys[j]).map(|(a, b)| a * b).sum();
        1.0 - dot.clamp(-1.0, 1.0)
    };
    fn best(
        i: usize,
        j: usize,
        cell: &dyn Fn(usize, usize) -> f64,
        memo: &mut HashMap<(usize, usize), (f64, usize)>,
    ) -> (f64, usize) {
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let here = cell(i, j);
        let result = if i == 0 && j == 0 {
            (here, 1)
        } else {
            let mut options = Vec::new();
            if i > 0 {
                options.push(best(i - 1, j, cell, memo));
            }
            if j > 0 {
                options.push(best(i, j - 1, cell, memo));
            }
            if i > 0 && j > 0 {
                options.push(best(i - 1, j - 1, cell, memo));
            }
            let (c, l) = options
                .into_iter()
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap();
            (c + here, l + 1)
        };
        memo.insert((i, j), result);
        result
    }
    let mut memo = HashMap::new();
    let (c, l) = best(xs.len() - 1, ys.len() - 1, &cell, &mut memo);
    c / l as f64
}

/// Multinomial logistic regression fitted by Newton's method with a small ridge
/// on every parameter. Returns test accuracy.
pub fn newton_logistic_accuracy(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    train: &[usize],
    test: &[usize],
    ridge: f64,
) -> f64 {
    let d = x[0].len() + 1;
    let feats = |i: usize| {
        let mut f = x[i].clone();
        f.push(1.0);
        f
    };
    let n_par = n_classes * d;
    let mut w = vec![0.0; n_par];
    let probs = |w: &[f64], f: &[f64]| {
        let z: Vec<f64> = (0..n_classes)
            .map(|k| (0..d).map(|c| w[k * d + c] * f[c]).sum())
            .collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect::<Vec<_>>()
    };
    for _ in 0..50 {
        let mut g = vec![0.0; n_par];
        let mut h = vec![vec![0.0; n_par]; n_par];
        for &i in train {
            let f = feats(i);
            let p = probs(&w, &f);
            for k in 0..n_classes {
                let r = p[k] - if y[i] == k { 1.0 } else { 0.0 };
                for c in 0..d {
                    g[k * d + c] += r * f[c];
                }
                for l in 0..n_classes {
                    let pk = p[k] * ((k == l) as u8 as f64 - p[l]);
                    for c in 0..d {
                        for e in 0..d {
                            h[k * d + c][l * d + e] += pk * f[c] * f[e];
                        }
                    }
                }
            }
        }
        for a in 0..n_par {
            g[a] += ridge * w[a];
            h[a][a] += ridge;
        }
        let step = solve(h, g);
        for (wa, s) in w.iter_mut().zip(&step) {
            *wa -= s;
        }
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            let p = probs(&w, &feats(i));
            let mut best = 0;
            for k in 1..n_classes {
                if p[k] > p[best] {
                    best = k;
                }
            }
            best == y[i]
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}
