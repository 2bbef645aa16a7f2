//! Internal derivative-free and quasi-newton minimizers.
//!
//! Both operate on flat parameter vectors and track an improvement history
//! of (evaluation index, best value) pairs.

use rayon::prelude::*;

use crate::rng::Stream;

#[derive(Clone, Debug)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// Improvement events: (cumulative evaluations, best value so far).
    pub history: Vec<(usize, f64)>,
}

/// Evolution strategy with diagonal covariance adaptation (sep-CMA-ES).
///
/// Candidates within a generation are evaluated concurrently; sampling and
/// state updates are sequential, so the run is deterministic for a given
/// stream.
pub fn minimize_evolutionary<F>(
    f: &F,
    x0: &[f64],
    sigma0: f64,
    population: usize,
    max_evals: usize,
    tol: f64,
    stream: &mut Stream,
) -> OptimOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let lambda = population.max(4);
    let mu = lambda / 2;

    // log-linear recombination weights
    let raw: Vec<f64> = (0..mu).map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let nf = n as f64;
    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    // separable variant: the rank-one/rank-mu rates are scaled up by (n+2)/3
    let sep_boost = (nf + 2.0) / 3.0;
    let c_1 = (2.0 / ((nf + 1.3) * (nf + 1.3) + mu_eff) * sep_boost).min(1.0);
    let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0) * (nf + 2.0) + mu_eff) * sep_boost)
        .min(1.0 - c_1);
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = x0.to_vec();
    let mut sigma = sigma0;
    let mut variances = vec![1.0f64; n];
    let mut p_sigma = vec![0.0f64; n];
    let mut p_c = vec![0.0f64; n];

    let mut best_x = x0.to_vec();
    let mut best_value = f(x0);
    let mut evals = 1usize;
    let mut history = vec![(1usize, best_value)];

    let window = 10 + 30 * n / lambda;
    let mut recent: Vec<f64> = Vec::with_capacity(window);

    let mut generation = 0usize;
    while evals + lambda <= max_evals {
        // sample sequentially for determinism, evaluate in parallel
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(lambda);
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z: Vec<f64> = (0..n).map(|_| stream.normal()).collect();
            let x: Vec<f64> = (0..n)
                .map(|j| mean[j] + sigma * variances[j].sqrt() * z[j])
                .collect();
            zs.push(z);
            xs.push(x);
        }
        let values: Vec<f64> = xs.par_iter().map(|x| f(x)).collect();
        evals += lambda;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

        if values[order[0]].is_finite() && values[order[0]] < best_value {
            best_value = values[order[0]];
            best_x = xs[order[0]].clone();
            history.push((evals, best_value));
        }

        let old_mean = mean.clone();
        for j in 0..n {
            mean[j] = (0..mu).map(|i| weights[i] * xs[order[i]][j]).sum();
        }

        let mut p_sigma_norm2 = 0.0;
        for j in 0..n {
            let y = (mean[j] - old_mean[j]) / sigma;
            let z_mean = y / variances[j].sqrt();
            p_sigma[j] =
                (1.0 - c_sigma) * p_sigma[j] + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * z_mean;
            p_sigma_norm2 += p_sigma[j] * p_sigma[j];
        }
        let p_sigma_norm = p_sigma_norm2.sqrt();

        let decay = 1.0 - (1.0 - c_sigma).powi(2 * (generation as i32 + 1));
        let h_sigma = p_sigma_norm / decay.max(1e-12).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let h = if h_sigma { 1.0 } else { 0.0 };

        for j in 0..n {
            let y = (mean[j] - old_mean[j]) / sigma;
            p_c[j] = (1.0 - c_c) * p_c[j] + h * (c_c * (2.0 - c_c) * mu_eff).sqrt() * y;
            let rank_mu: f64 = (0..mu)
                .map(|i| {
                    let d = (xs[order[i]][j] - old_mean[j]) / sigma;
                    weights[i] * d * d
                })
                .sum();
            variances[j] = (1.0 - c_1 - c_mu) * variances[j]
                + c_1 * (p_c[j] * p_c[j] + (1.0 - h) * c_c * (2.0 - c_c) * variances[j])
                + c_mu * rank_mu;
            variances[j] = variances[j].clamp(1e-16, 1e8);
        }

        sigma *= ((c_sigma / d_sigma) * (p_sigma_norm / chi_n - 1.0)).exp();
        if !sigma.is_finite() || sigma > 1e6 || sigma < 1e-12 {
            break;
        }

        // flat-fitness stall detection over a sliding window
        recent.push(values[order[0]]);
        if recent.len() > window {
            recent.remove(0);
            let lo = recent.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if (hi - lo).abs() < tol {
                break;
            }
        }
        generation += 1;
    }

    OptimOutcome { x: best_x, value: best_value, evals, history }
}

/// Bound-constrained limited-memory quasi-newton minimization (projected
/// L-BFGS with Armijo backtracking).
///
/// `grad` returns the gradient and the number of function evaluations it
/// spent (finite differencing reports 2n).
pub fn minimize_quasi_newton<F, G>(
    f: &F,
    grad: &G,
    x0: &[f64],
    bounds: (f64, f64),
    max_evals: usize,
    tol: f64,
) -> OptimOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> (Vec<f64>, usize),
{
    const MEMORY: usize = 8;
    const ARMIJO: f64 = 1e-4;
    let (lo, hi) = bounds;
    let n = x0.len();

    let clamp = |x: &mut Vec<f64>| {
        for v in x.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    };

    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut fx = f(&x);
    let mut evals = 1usize;
    let mut history = vec![(1usize, fx)];
    let (mut g, spent) = grad(&x);
    evals += spent;

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut stall = 0usize;

    while evals < max_evals {
        // projected gradient convergence check
        let pg_max = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| {
                if (xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0) {
                    0.0
                } else {
                    gi.abs()
                }
            })
            .fold(0.0f64, f64::max);
        if pg_max < 1e-8 {
            break;
        }

        // two-loop recursion on the stored curvature pairs
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alphas = vec![0.0f64; m];
        for i in (0..m).rev() {
            let rho = 1.0
                / s_hist[i]
                    .iter()
                    .zip(&y_hist[i])
                    .map(|(s, y)| s * y)
                    .sum::<f64>();
            let a = rho * s_hist[i].iter().zip(&q).map(|(s, qi)| s * qi).sum::<f64>();
            alphas[i] = a;
            for j in 0..n {
                q[j] -= a * y_hist[i][j];
            }
        }
        if m > 0 {
            let sy: f64 = s_hist[m - 1].iter().zip(&y_hist[m - 1]).map(|(s, y)| s * y).sum();
            let yy: f64 = y_hist[m - 1].iter().map(|y| y * y).sum();
            let scale = sy / yy.max(1e-300);
            for v in q.iter_mut() {
                *v *= scale;
            }
        }
        for i in 0..m {
            let rho = 1.0
                / s_hist[i]
                    .iter()
                    .zip(&y_hist[i])
                    .map(|(s, y)| s * y)
                    .sum::<f64>();
            let b = rho * y_hist[i].iter().zip(&q).map(|(y, qi)| y * qi).sum::<f64>();
            for j in 0..n {
                q[j] += s_hist[i][j] * (alphas[i] - b);
            }
        }
        // q approximates H·g; the step direction is -q

        let mut alpha = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..25 {
            x_new = x.iter().zip(&q).map(|(xi, qi)| xi - alpha * qi).collect();
            clamp(&mut x_new);
            f_new = f(&x_new);
            evals += 1;
            let directional: f64 = g.iter().zip(x_new.iter().zip(&x)).map(|(gi, (xn, xo))| gi * (xn - xo)).sum();
            if f_new <= fx + ARMIJO * directional && f_new.is_finite() {
                accepted = true;
                break;
            }
            alpha *= 0.5;
            if evals >= max_evals {
                break;
            }
        }
        if !accepted {
            break;
        }

        let (g_new, spent) = grad(&x_new);
        evals += spent;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }

        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push((evals, fx));
        if improvement < tol {
            stall += 1;
            if stall >= 3 {
                break;
            }
        } else {
            stall = 0;
        }
    }

    // history is an improvement log: keep it non-increasing
    let mut best = f64::INFINITY;
    history.retain(|&(_, v)| {
        if v < best {
            best = v;
            true
        } else {
            false
        }
    });
    OptimOutcome { x, value: fx, evals, history }
}
