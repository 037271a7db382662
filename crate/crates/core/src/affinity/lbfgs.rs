//! Limited-memory quasi-Newton minimizer with backtracking line search.
//!
//! Only needs a value-and-gradient oracle, which is exactly what the
//! entropic objective provides (the gradient is a cross-covariance read off
//! the IPFP solution). Secant pairs with non-positive curvature are skipped.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::DVector;

pub(crate) struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
}

pub(crate) struct LbfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;

pub(crate) fn minimize<F, E>(
    x0: DVector<f64>,
    opts: &LbfgsOptions,
    mut oracle: F,
) -> Result<LbfgsOutcome, E>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>), E>,
{
    let mut x = x0;
    let (mut value, mut grad) = oracle(&x)?;
    let mut best = (x.clone(), value, grad.norm());

    let mut pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let grad_norm = grad.norm();
        if grad_norm < best.2 || value < best.1 {
            best = (x.clone(), value, grad_norm);
        }
        if grad_norm <= opts.grad_tol {
            return Ok(LbfgsOutcome {
                x,
                value,
                grad_norm,
                iterations,
                converged: true,
            });
        }

        let mut direction = two_loop(&grad, &pairs);
        if direction.dot(&grad) >= 0.0 {
            // not a descent direction; restart from steepest descent
            pairs.clear();
            direction = -&grad;
        }

        let mut accepted = line_search(&x, value, &grad, &direction, &mut oracle)?;
        if accepted.is_none() && !pairs.is_empty() {
            // retry once along steepest descent before giving up
            pairs.clear();
            direction = -&grad;
            accepted = line_search(&x, value, &grad, &direction, &mut oracle)?;
        }
        let (new_x, new_value, new_grad) = match accepted {
            Some(t) => t,
            None => {
                // line search failed; report the best point seen
                return Ok(LbfgsOutcome {
                    x: best.0,
                    value: best.1,
                    grad_norm: best.2,
                    iterations,
                    converged: false,
                });
            }
        };

        let s = &new_x - &x;
        let y = &new_grad - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, sy));
        }

        x = new_x;
        value = new_value;
        grad = new_grad;
        iterations += 1;
    }

    let grad_norm = grad.norm();
    let converged = grad_norm <= opts.grad_tol;
    if !converged && best.1 < value {
        return Ok(LbfgsOutcome {
            x: best.0,
            value: best.1,
            grad_norm: best.2,
            iterations,
            converged: false,
        });
    }
    Ok(LbfgsOutcome {
        x,
        value,
        grad_norm,
        iterations,
        converged,
    })
}

type Accepted = Option<(DVector<f64>, f64, DVector<f64>)>;

/// Backtracking Armijo search. The oracle's values carry solver noise while
/// its gradients are much more accurate, so for these convex objectives the
/// sufficient decrease is also accepted when certified through the gradient:
/// `F(y) - F(x) <= grad(y) . (y - x)`.
fn line_search<F, E>(
    x: &DVector<f64>,
    value: f64,
    grad: &DVector<f64>,
    direction: &DVector<f64>,
    oracle: &mut F,
) -> Result<Accepted, E>
where
    F: FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>), E>,
{
    let slope = direction.dot(grad);
    let mut step = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let candidate = x + direction * step;
        let (cand_value, cand_grad) = oracle(&candidate)?;
        let armijo = cand_value <= value + ARMIJO_C1 * step * slope;
        let certified = cand_grad.dot(direction) <= ARMIJO_C1 * slope;
        if armijo || certified {
            return Ok(Some((candidate, cand_value, cand_grad)));
        }
        step *= BACKTRACK;
    }
    Ok(None)
}

/// Standard two-loop recursion; the implicit initial Hessian is scaled by
/// the most recent curvature pair.
fn two_loop(
    grad: &DVector<f64>,
    pairs: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
) -> DVector<f64> {
    let mut q = grad.clone_owned();
    if pairs.is_empty() {
        return -q;
    }
    let mut alphas: Vec<f64> = Vec::with_capacity(pairs.len());
    for (s, y, sy) in pairs.iter().rev() {
        let alpha = s.dot(&q) / sy;
        q -= y * alpha;
        alphas.push(alpha);
    }
    let (_, y_last, sy_last) = pairs.back().expect("nonempty");
    let gamma = sy_last / y_last.dot(y_last);
    q *= gamma;
    for ((s, y, sy), alpha) in pairs.iter().zip(alphas.into_iter().rev()) {
        let beta = y.dot(&q) / sy;
        q += s * (alpha - beta);
    }
    -q
}
