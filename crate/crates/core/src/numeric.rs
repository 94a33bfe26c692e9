//! Small derivative-free search and root helpers.

use nalgebra::{DMatrix, DVector};

/// Compass search maximizing `f` from `x0`. Halves the step on failure and stops below `min_step`;
/// successful moves are extended with doubling strides up to `step0`.
pub fn pattern_search_max(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step0: f64,
    min_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut step = step0;
    let mut evals = 1;
    let mut trial = x.clone();
    while step >= min_step && evals < max_evals {
        let mut improved = false;
        for k in 0..x.len() {
            for sgn in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[k] += sgn * step;
                let ft = f(&trial);
                evals += 1;
                if ft > fx {
                    fx = ft;
                    x.copy_from_slice(&trial);
                    improved = true;
                    // keep going along a successful axis with doubling strides
                    let mut stride = 2.0 * step;
                    while stride <= step0 && evals < max_evals {
                        trial[k] = x[k] + sgn * stride;
                        let ft = f(&trial);
                        evals += 1;
                        if ft <= fx {
                            break;
                        }
                        fx = ft;
                        x[k] = trial[k];
                        stride *= 2.0;
                    }
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}

/// Compass search down to `coarse`, then Newton steps on a central-difference Hessian while they
/// improve `f`; falls back to compass search down to `min_step` where the model fails (kinks, saddles).
pub fn refine_max(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    step0: f64,
    coarse: f64,
    min_step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let (mut x, mut fx) = pattern_search_max(&f, x0, step0, coarse.max(min_step), max_evals);
    if coarse <= min_step {
        return (x, fx);
    }
    let n = x.len();
    let h = (coarse * 0.1).max(1e-6);
    let mut p = x.clone();
    let at = |p: &mut Vec<f64>, x: &[f64], i: usize, si: f64, j: usize, sj: f64| {
        p.copy_from_slice(x);
        p[i] += si;
        p[j] += sj;
        f(p)
    };
    for _ in 0..8 {
        let mut g = DVector::zeros(n);
        let mut hm = DMatrix::zeros(n, n);
        for i in 0..n {
            let fp = at(&mut p, &x, i, h, i, 0.0);
            let fm = at(&mut p, &x, i, -h, i, 0.0);
            g[i] = (fp - fm) / (2.0 * h);
            hm[(i, i)] = (fp - 2.0 * fx + fm) / (h * h);
            for j in 0..i {
                let v = (at(&mut p, &x, i, h, j, h) - at(&mut p, &x, i, h, j, -h) - at(&mut p, &x, i, -h, j, h)
                    + at(&mut p, &x, i, -h, j, -h))
                    / (4.0 * h * h);
                hm[(i, j)] = v;
                hm[(j, i)] = v;
            }
        }
        let Some(chol) = (-hm).cholesky() else { break };
        let s = chol.solve(&g);
        let len = s.norm();
        if !len.is_finite() || len > 4.0 * coarse {
            break;
        }
        let trial: Vec<f64> = x.iter().zip(s.iter()).map(|(a, b)| a + b).collect();
        let ft = f(&trial);
        if ft < fx {
            break;
        }
        x = trial;
        fx = ft;
        if len < min_step {
            return (x, fx);
        }
    }
    pattern_search_max(&f, &x, coarse, min_step, max_evals)
}

/// Illinois false-position root on a bracket with f(a) ≤ 0 < f(b).
pub fn illinois(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let c = if fb != fa { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        let c = if c <= a.min(b) || c >= a.max(b) { 0.5 * (a + b) } else { c };
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc > 0.0 {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    // the inside end of the bracket, so the returned point stays in the closed set
    a
}
