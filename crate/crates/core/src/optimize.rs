//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Minimizes a smooth function. Every accepted step strictly decreases the
//! objective; the search stops when the relative change of the objective
//! falls below the tolerance while the gradient norm is at most its square
//! root (scaled by `1 + |f|`), when no decreasing step can be found, or after
//! the iteration budget.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Relative objective change that counts as converged.
    pub tolerance: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iterations: 200,
            tolerance: 1e-6,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Objective after the start point and after each accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn minimize<F>(mut f: F, x0: Vec<f64>, config: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective(fx));
    }
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if norm(&g) == 0.0 {
            converged = true;
            break;
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut alpha = if history.is_empty() {
            (1.0 / norm(&g)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + config.armijo * alpha * slope && ft < fx {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No decreasing step at machine precision.
            converged = true;
            break;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let rel = (fx - f_new).abs() / fx.abs().max(f_new.abs()).max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if rel < config.tolerance && norm(&g) <= config.tolerance.sqrt() * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
    }

    Ok(Minimum {
        x,
        value: fx,
        gradient: g,
        trace,
        iterations,
        converged,
    })
}

/// `-H g` from the stored curvature pairs.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let center = [3.0, -2.0, 0.5];
        let scale = [1.0, 10.0, 100.0];
        let f = |x: &[f64]| {
            let v = x.iter().zip(&center).zip(&scale).map(|((a, c), s)| s * (a - c) * (a - c)).sum();
            let g = x.iter().zip(&center).zip(&scale).map(|((a, c), s)| 2.0 * s * (a - c)).collect();
            (v, g)
        };
        let cfg = LbfgsConfig { tolerance: 1e-14, ..Default::default() };
        let m = minimize(f, vec![0.0; 3], &cfg).unwrap();
        for (a, c) in m.x.iter().zip(&center) {
            assert!((a - c).abs() < 1e-5, "{:?}", m.x);
        }
        assert!(m.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let cfg = LbfgsConfig { tolerance: 1e-15, max_iterations: 500, ..Default::default() };
        let m = minimize(f, vec![-1.2, 1.0], &cfg).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn non_finite_start() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(minimize(f, vec![0.0], &LbfgsConfig::default()), Err(Error::NonFiniteObjective(_))));
    }
}
