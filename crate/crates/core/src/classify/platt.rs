//! Sigmoid calibration of SVM margins: `p = 1 / (1 + exp(a·m + b))`.
//!
//! Newton's method with backtracking on the regularized targets of Platt,
//! following the numerically careful formulation of Lin, Lin and Weng.

/// Upper bound on the slope so probability stays strictly increasing in the margin.
pub const MAX_SLOPE: f64 = -1e-6;

const MAX_ITER: usize = 100;
const MIN_STEP: f64 = 1e-10;
const SIGMA: f64 = 1e-12;
const EPS: f64 = 1e-5;

/// Numerically stable `1 / (1 + exp(a·m + b))`.
pub fn sigmoid(margin: f64, a: f64, b: f64) -> f64 {
    let f = a * margin + b;
    if f >= 0.0 {
        let e = (-f).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + f.exp())
    }
}

fn targets(positive: &[bool]) -> Vec<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    positive.iter().map(|&p| if p { hi } else { lo }).collect()
}

fn objective(margins: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    margins
        .iter()
        .zip(t)
        .map(|(&m, &ti)| {
            let f = a * m + b;
            if f >= 0.0 {
                ti * f + (-f).exp().ln_1p()
            } else {
                (ti - 1.0) * f + f.exp().ln_1p()
            }
        })
        .sum()
}

/// Fits `(a, b)`. Returns `a ≤ MAX_SLOPE`; if the unconstrained optimum is
/// flatter or inverted, `a` is pinned to `MAX_SLOPE` and only `b` is refit.
pub fn fit_sigmoid(margins: &[f64], positive: &[bool]) -> (f64, f64) {
    debug_assert_eq!(margins.len(), positive.len());
    let t = targets(positive);
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let b0 = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let (a, b) = newton(margins, &t, 0.0, b0, false);
    if a <= MAX_SLOPE {
        (a, b)
    } else {
        newton(margins, &t, MAX_SLOPE, b, true)
    }
}

fn newton(margins: &[f64], t: &[f64], mut a: f64, mut b: f64, fixed_a: bool) -> (f64, f64) {
    let mut fval = objective(margins, t, a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&m, &ti) in margins.iter().zip(t) {
            let f = a * m + b;
            let (p, q) = if f >= 0.0 {
                let e = (-f).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = f.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += m * m * d2;
            h22 += d2;
            h21 += m * d2;
            let d1 = ti - p;
            g1 += m * d1;
            g2 += d1;
        }
        if fixed_a {
            g1 = 0.0;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let (da, db) = if fixed_a {
            (0.0, -g2 / h22)
        } else {
            let det = h11 * h22 - h21 * h21;
            (-(h22 * g1 - h21 * g2) / det, -(-h21 * g1 + h11 * g2) / det)
        };
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(margins, t, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}
