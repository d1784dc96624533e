use crate::data::Frames;

use super::EvalError;

/// Length-normalized DTW cost between two frame sequences.
///
/// Cell cost is the cosine distance between frames (a zero frame has distance 1
/// to everything). Paths run from the first to the last frame pair using
/// vertical, horizontal and diagonal steps. Among paths of minimal accumulated
/// cost the shortest is kept, and the cost is divided by its number of cells.
pub fn dtw_distance(x: &Frames, y: &Frames) -> Result<f64, EvalError> {
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::EmptySequence);
    }
    if x.dim() != y.dim() {
        return Err(EvalError::DimensionMismatch(x.dim(), y.dim()));
    }
    Ok(dtw_unchecked(x, y))
}

fn normalized_rows(f: &Frames) -> Vec<Vec<f64>> {
    f.iter_rows()
        .map(|r| {
            let v: Vec<f64> = r.iter().map(|&a| a as f64).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n == 0.0 {
                v
            } else {
                v.iter().map(|a| a / n).collect()
            }
        })
        .collect()
}

fn frame_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    1.0 - dot.clamp(-1.0, 1.0)
}

/// [`dtw_distance`] for inputs already known to be non-empty and equally wide.
pub(crate) fn dtw_unchecked(x: &Frames, y: &Frames) -> f64 {
    let xs = normalized_rows(x);
    let ys = normalized_rows(y);
    let (n, m) = (xs.len(), ys.len());
    // (accumulated cost, path cells) per column of the previous and current row
    let mut prev = vec![(f64::INFINITY, 0u32); m];
    let mut cur = vec![(f64::INFINITY, 0u32); m];
    for i in 0..n {
        for j in 0..m {
            let c = frame_distance(&xs[i], &ys[j]);
            let best = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, u32::MAX);
                let candidates = [
                    (i > 0).then(|| prev[j]),
                    (j > 0).then(|| cur[j - 1]),
                    (i > 0 && j > 0).then(|| prev[j - 1]),
                ];
                for cand in candidates.into_iter().flatten() {
                    if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                        best = cand;
                    }
                }
                best
            };
            cur[j] = (best.0 + c, best.1 + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, cells) = prev[m - 1];
    cost / cells as f64
}
