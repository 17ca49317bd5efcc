//! Box-constrained convex QP `min ½xᵀHx + gᵀx, lo ≤ x ≤ hi` by projected
//! Newton iterations. Requires `lo ≤ 0 ≤ hi`.

use nalgebra::{DMatrix, DVector};

fn objective(h: &DMatrix<f64>, g: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(h * x)) + g.dot(x)
}

fn project(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

pub(crate) fn solve_box_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    max_iters: usize,
) -> DVector<f64> {
    let n = g.len();
    let mut x = DVector::zeros(n);
    let mut q = 0.0;
    for _ in 0..max_iters {
        let grad = h * &x + g;
        let eps = 1e-12;
        let free: Vec<usize> = (0..n)
            .filter(|&i| !((x[i] <= lo[i] + eps && grad[i] > 0.0) || (x[i] >= hi[i] - eps && grad[i] < 0.0)))
            .collect();
        let stationary = (0..n).all(|i| ((x[i] - grad[i]).clamp(lo[i], hi[i]) - x[i]).abs() < 1e-12);
        if free.is_empty() || stationary {
            break;
        }
        let m = free.len();
        let hff = DMatrix::from_fn(m, m, |a, b| h[(free[a], free[b])]);
        let rhs = DVector::from_fn(m, |a, _| -grad[free[a]]);
        let step = match hff.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                let reg = hff + DMatrix::identity(m, m) * (1e-8 * (1.0 + h.diagonal().amax()));
                match reg.cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => rhs,
                }
            }
        };
        let mut direction = DVector::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            direction[i] = step[a];
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial = &x + &direction * alpha;
            project(&mut trial, lo, hi);
            let qt = objective(h, g, &trial);
            if qt <= q + 1e-4 * grad.dot(&(&trial - &x)) {
                accepted = Some((trial, qt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, qt)) if qt < q => {
                let done = (q - qt) <= 1e-15 * (1.0 + q.abs());
                x = trial;
                q = qt;
                if done {
                    break;
                }
            }
            _ => break,
        }
    }
    x
}
