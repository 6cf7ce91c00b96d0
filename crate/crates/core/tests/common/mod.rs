//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use feraug::nn::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Outcome of a finite-difference comparison.
#[derive(Debug)]
pub struct FdReport {
    pub checked: usize,
    pub worst: f64,
    /// First coordinate over tolerance: `(index, analytic, numeric)`.
    pub failure: Option<(usize, f64, f64)>,
}

impl FdReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.failure.is_none() && self.worst < tol
    }
}

/// Compares `analytic(i)` with central differences of `loss` on `coords`
/// random coordinates whose analytic gradient is at least `1e-7` in size.
pub fn fd_check(
    params: &Params,
    analytic: impl Fn(usize) -> f64,
    loss: impl Fn(&Params) -> f64,
    step: f64,
    tol: f64,
    coords: usize,
    seed: u64,
) -> FdReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = params.scalar_count();
    let mut report = FdReport {
        checked: 0,
        worst: 0.0,
        failure: None,
    };
    let mut attempts = 0;
    while report.checked < coords && attempts < 50 * coords {
        attempts += 1;
        let i = rng.random_range(0..total);
        let a = analytic(i);
        if a.abs() < 1e-7 {
            continue;
        }
        let mut p = params.clone();
        let x = p.flat_get(i);
        p.flat_set(i, x + step);
        let up = loss(&p);
        p.flat_set(i, x - step);
        let down = loss(&p);
        let n = (up - down) / (2.0 * step);
        let e = rel_err(a, n);
        report.worst = report.worst.max(e);
        if e >= tol && report.failure.is_none() {
            report.failure = Some((i, a, n));
        }
        report.checked += 1;
    }
    report
}

/// Brute-force per-class counts and metrics, computed by scanning the
/// sequences once per class. Undefined ratios are 0.
pub struct OracleMetrics {
    pub counts: [[u64; 6]; 6],
    pub accuracy: f64,
    pub precision: [f64; 6],
    pub recall: [f64; 6],
    pub f1: [f64; 6],
}

pub fn oracle_metrics(truth: &[usize], pred: &[usize]) -> OracleMetrics {
    let mut counts = [[0u64; 6]; 6];
    for t in 0..6 {
        for p in 0..6 {
            counts[t][p] = truth.iter().zip(pred).filter(|(&a, &b)| a == t && b == p).count() as u64;
        }
    }
    let correct = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    let mut m = OracleMetrics {
        counts,
        accuracy: correct as f64 / truth.len() as f64,
        precision: [0.0; 6],
        recall: [0.0; 6],
        f1: [0.0; 6],
    };
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    for c in 0..6 {
        let tp = truth.iter().zip(pred).filter(|(&a, &b)| a == c && b == c).count();
        let fp = truth.iter().zip(pred).filter(|(&a, &b)| a != c && b == c).count();
        let fn_ = truth.iter().zip(pred).filter(|(&a, &b)| a == c && b != c).count();
        m.precision[c] = ratio(tp, tp + fp);
        m.recall[c] = ratio(tp, tp + fn_);
        m.f1[c] = ratio(2 * tp, 2 * tp + fp + fn_);
    }
    m
}

/// Largest absolute difference between the library's metrics and the
/// oracle's.
pub fn metric_discrepancy(truth: &[usize], pred: &[usize]) -> f64 {
    let cm = feraug::eval::confusion(truth, pred).unwrap();
    let o = oracle_metrics(truth, pred);
    if cm.counts != o.counts {
        return f64::INFINITY;
    }
    let mut worst = (cm.accuracy() - o.accuracy).abs();
    for (c, m) in feraug::eval::per_class_metrics(&cm).iter().enumerate() {
        worst = worst
            .max((m.precision - o.precision[c]).abs())
            .max((m.recall - o.recall[c]).abs())
            .max((m.f1 - o.f1[c]).abs());
    }
    worst
}
