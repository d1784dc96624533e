//! Central finite-difference verification of analytic gradients.

use super::params::Parameters;
use super::tape::Gradients;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|a − n| / max(|a|, |n|)` over non-exempt elements.
    pub max_rel_error: f64,
    /// (tensor, element, analytic, numeric) at the largest relative error.
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
    /// Elements with `|a| + |n|` below `floor`, skipped as numerically meaningless.
    pub exempt: usize,
}

/// Compares `analytic` against `(L(θ+ε) − L(θ−ε)) / 2ε` for every element of every
/// trainable tensor. Runs in double precision.
pub fn finite_difference_check<L>(
    params: &Parameters<f64>,
    analytic: &Gradients<f64>,
    eps: f64,
    floor: f64,
    loss: L,
) -> GradCheckReport
where
    L: Fn(&Parameters<f64>) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        exempt: 0,
    };
    let mut probe = params.clone();
    let names: Vec<(String, usize)> = params
        .tensors()
        .into_iter()
        .filter(|(n, _)| params.is_trainable(n))
        .map(|(n, t)| (n, t.len()))
        .collect();
    for (name, len) in names {
        let grad = analytic.get(&name).expect("trainable tensor has a gradient");
        for k in 0..len {
            let orig = element(&mut probe, &name, k, None);
            element(&mut probe, &name, k, Some(orig + eps));
            let up = loss(&probe);
            element(&mut probe, &name, k, Some(orig - eps));
            let down = loss(&probe);
            element(&mut probe, &name, k, Some(orig));

            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[k];
            if a.abs() + numeric.abs() < floor {
                report.exempt += 1;
                continue;
            }
            report.checked += 1;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= report.max_rel_error {
                    report.worst = Some((name.clone(), k, a, numeric));
                }
            }
        }
    }
    report
}

fn element(p: &mut Parameters<f64>, name: &str, k: usize, set: Option<f64>) -> f64 {
    for (n, t) in p.tensors_mut() {
        if n == name {
            let slot = &mut t.data_mut()[k];
            if let Some(v) = set {
                *slot = v;
            }
            return *slot;
        }
    }
    panic!("no tensor named {name}");
}
