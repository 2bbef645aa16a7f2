//! Two-step training: minimize χ² against the exact simulator, then
//! fine-tune the parameters against a (possibly noisy) executor with
//! sequential two-dimensional scans.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{label_states, AnsatzKind, LabelStateSet, ParameterSet};
use crate::classifier::{chi2_loss_serial_exact, guess_class, Prediction};
use crate::datasets::{sample_dataset, Dataset, Problem};
use crate::error::{Error, Result};
use crate::exec::{ExactExecutor, Executor};
use crate::optim::{minimize_evolutionary, minimize_quasi_newton, OptimOutcome};
use crate::rng::{key, Stream};

const TRAIN_TAG: u64 = 0x7472_6169; // "trai"
const EVAL_TAG: u64 = 0x6576_616c; // "eval"
const SCAN_TAG: u64 = 0x7363_616e; // "scan"

/// XORed into a dataset seed to derive the held-out test set seed.
pub const TEST_SET_SALT: u64 = 0x7E57_DA7A;

/// Size of the held-out test set a [`TrainReport`] scores against.
pub const REPORT_TEST_POINTS: usize = 1000;

/// Population size of the evolutionary optimizer.
pub const POPULATION: usize = 12;

/// Search-box half-size for the bounded quasi-newton method, in radians.
pub const QUASI_NEWTON_BOUND: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimMethod {
    DerivativeFreeEvolutionary,
    QuasiNewtonBounded,
}

/// Configuration of the simulated training step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: OptimMethod,
    /// Evaluation budget per restart.
    pub max_evaluations: usize,
    pub restarts: usize,
    /// Initial sampling spread (evolutionary) in radians.
    pub initial_spread: f64,
    /// Stop when the loss stops improving by more than this.
    pub convergence_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: OptimMethod::DerivativeFreeEvolutionary,
            max_evaluations: 10_000,
            restarts: 5,
            initial_spread: 1.0,
            convergence_tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(Error::invalid("max_evaluations must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be positive"));
        }
        if self.initial_spread <= 0.0 {
            return Err(Error::invalid("initial_spread must be positive"));
        }
        Ok(())
    }
}

/// Configuration of the sequential pairwise fine-tuning scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Scan box half-size around the current value, radians.
    pub half_width: f64,
    /// Grid points per axis; odd so the current point is on the grid.
    pub grid: usize,
    pub passes: usize,
    pub shots_per_point: u32,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { half_width: 0.3, grid: 7, passes: 3, shots_per_point: 100 }
    }
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        if self.grid < 3 || self.grid % 2 == 0 {
            return Err(Error::invalid("scan grid must be odd and at least 3"));
        }
        if self.half_width <= 0.0 {
            return Err(Error::invalid("scan half_width must be positive"));
        }
        if self.passes == 0 {
            return Err(Error::invalid("scan passes must be positive"));
        }
        Ok(())
    }
}

/// Outcome of the simulated training step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub theta_sim: ParameterSet,
    /// Improvement events as (evaluation index, χ²); best-so-far is
    /// non-increasing.
    pub loss_history: Vec<(usize, f64)>,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub wall_time: f64,
    pub seed: u64,
}

/// One accepted scan step of [`fine_tune`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanStep {
    pub pass: usize,
    pub pair: (usize, usize),
    /// Measured accuracy at the box center (the incoming parameters).
    pub center_accuracy: f64,
    /// Best measured accuracy on the scan grid.
    pub best_accuracy: f64,
    pub moved: bool,
}

/// Minimize χ² on the training set with the exact simulator.
///
/// Runs `cfg.restarts` independent starts (uniform in [-π, π) per
/// parameter, derived from `seed`) and keeps the best. The report's test
/// accuracy is measured on a fresh 1000-point dataset drawn with the
/// salted training seed.
pub fn train_simulated(
    problem: Problem,
    layers: usize,
    ansatz: AnsatzKind,
    train: &Dataset,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<TrainReport> {
    cfg.validate()?;
    if layers == 0 {
        return Err(Error::invalid("at least one layer is required"));
    }
    if train.samples.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let dim = problem.dim();
    if ansatz == AnsatzKind::B && dim != 2 {
        return Err(Error::invalid("ansatz B requires a 2-dimensional problem"));
    }
    let started = Instant::now();
    let labels = label_states(problem.classes())?;
    let param_count = layers * ansatz.params_per_layer(dim);

    let objective = |flat: &[f64]| -> f64 {
        match ParameterSet::from_flat(ansatz, dim, layers, flat) {
            Ok(theta) => chi2_loss_serial_exact(&theta, train, &labels),
            Err(_) => f64::INFINITY,
        }
    };

    let mut best: Option<OptimOutcome> = None;
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut evals_offset = 0usize;
    for restart in 0..cfg.restarts {
        let mut stream = Stream::new(key(&[TRAIN_TAG, seed, restart as u64]));
        let x0: Vec<f64> = (0..param_count)
            .map(|_| stream.uniform_in(-std::f64::consts::PI, std::f64::consts::PI))
            .collect();
        let outcome = match cfg.method {
            OptimMethod::DerivativeFreeEvolutionary => minimize_evolutionary(
                &objective,
                &x0,
                cfg.initial_spread,
                POPULATION,
                cfg.max_evaluations,
                cfg.convergence_tol,
                &mut stream,
            ),
            OptimMethod::QuasiNewtonBounded => {
                let grad = |flat: &[f64]| {
                    let theta = ParameterSet::from_flat(ansatz, dim, layers, flat)
                        .expect("bounded iterates stay finite");
                    (fd_gradient(&theta, train, &labels, 1e-5), 2 * flat.len())
                };
                minimize_quasi_newton(
                    &objective,
                    &grad,
                    &x0,
                    (-QUASI_NEWTON_BOUND, QUASI_NEWTON_BOUND),
                    cfg.max_evaluations,
                    cfg.convergence_tol,
                )
            }
        };
        for &(e, v) in &outcome.history {
            history.push((evals_offset + e, v));
        }
        evals_offset += outcome.evals;
        let better = match &best {
            None => true,
            Some(b) => outcome.value < b.value,
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart ran");
    if !best.value.is_finite() {
        let last_theta = ParameterSet::from_flat(ansatz, dim, layers, &best.x).ok().map(Box::new);
        return Err(Error::TrainingFailure {
            message: format!("optimizer produced non-finite loss {}", best.value),
            last_theta,
        });
    }

    // global best-so-far filtering across the concatenated restart histories
    let mut best_so_far = f64::INFINITY;
    history.retain(|&(_, v)| {
        if v < best_so_far {
            best_so_far = v;
            true
        } else {
            false
        }
    });

    let theta_sim = ParameterSet::from_flat(ansatz, dim, layers, &best.x)?;
    let exact = ExactExecutor;
    let train_accuracy = crate::classifier::accuracy(&theta_sim, train, &labels, &exact)?;
    let test = sample_dataset(problem, REPORT_TEST_POINTS, train.seed ^ TEST_SET_SALT);
    let test_accuracy = crate::classifier::accuracy(&theta_sim, &test, &labels, &exact)?;

    Ok(TrainReport {
        theta_sim,
        loss_history: history,
        final_loss: best.value,
        train_accuracy,
        test_accuracy,
        wall_time: started.elapsed().as_secs_f64(),
        seed,
    })
}

/// Central finite difference of χ² per parameter, in canonical flat order.
///
/// `step` must be positive.
pub fn fd_gradient(
    theta: &ParameterSet,
    data: &Dataset,
    labels: &LabelStateSet,
    step: f64,
) -> Vec<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let flat = theta.to_flat();
    let (ansatz, dim, layers) = (theta.ansatz(), theta.dim(), theta.layer_count());
    (0..flat.len())
        .into_par_iter()
        .map(|i| {
            let mut plus = flat.clone();
            plus[i] += step;
            let mut minus = flat.clone();
            minus[i] -= step;
            let fp = chi2_loss_serial_exact(
                &ParameterSet::from_flat(ansatz, dim, layers, &plus).expect("finite perturbation"),
                data,
                labels,
            );
            let fm = chi2_loss_serial_exact(
                &ParameterSet::from_flat(ansatz, dim, layers, &minus).expect("finite perturbation"),
                data,
                labels,
            );
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Accuracy of a parameter vector under an executor, with scan-stable
/// stream keys `(step, grid index, sample index, class)`.
fn scan_accuracy<E: Executor + ?Sized>(
    flat: &[f64],
    ansatz: AnsatzKind,
    dim: usize,
    layers: usize,
    executor: &E,
    data: &Dataset,
    labels: &LabelStateSet,
    shots: u32,
    step_id: u64,
    grid_id: u64,
) -> Result<f64> {
    let theta = ParameterSet::from_flat(ansatz, dim, layers, flat)?;
    let k = labels.class_count();
    let hits: Vec<Result<bool>> = data
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut fids = Vec::with_capacity(k);
            for c in 0..k {
                fids.push(executor.fidelity(
                    &theta,
                    &sample.x,
                    c,
                    labels,
                    shots,
                    key(&[SCAN_TAG, step_id, grid_id, i as u64, c as u64]),
                )?);
            }
            Ok(guess_class(&fids)? == sample.class)
        })
        .collect();
    let mut correct = 0usize;
    for h in hits {
        if h? {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.samples.len() as f64)
}

/// Sequential pairwise scan around `theta_sim`.
///
/// Walks consecutive parameter pairs in canonical order; for each pair it
/// measures accuracy on a grid × grid box around the current values and
/// moves to the best point (ties keep the smallest move). Candidates are
/// clamped to ±`passes · half_width` around the starting parameters. Stops
/// after `passes` passes or after a pass with no movement.
///
/// Returns the visited point with the highest accuracy under a fixed
/// reference measurement (never below the starting point's), plus the
/// per-step trace.
pub fn fine_tune<E: Executor + ?Sized>(
    theta_sim: &ParameterSet,
    executor: &E,
    eval_data: &Dataset,
    labels: &LabelStateSet,
    cfg: &ScanConfig,
) -> Result<(ParameterSet, Vec<ScanStep>)> {
    cfg.validate()?;
    if eval_data.samples.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let (ansatz, dim, layers) = (theta_sim.ansatz(), theta_sim.dim(), theta_sim.layer_count());
    let origin = theta_sim.to_flat();
    let mut current = origin.clone();
    let p = current.len();
    if p < 2 {
        return Ok((theta_sim.clone(), Vec::new()));
    }
    let g = cfg.grid;
    let mid = (g - 1) / 2;
    let reach = cfg.passes as f64 * cfg.half_width;
    let measure_ref = |flat: &[f64]| {
        scan_accuracy(
            flat,
            ansatz,
            dim,
            layers,
            executor,
            eval_data,
            labels,
            cfg.shots_per_point,
            u64::MAX,
            0,
        )
    };

    let mut best_flat = current.clone();
    let mut best_ref = measure_ref(&current)?;
    let mut trace = Vec::new();
    let mut step_id = 0u64;

    'passes: for pass in 0..cfg.passes {
        let mut pass_moved = false;
        for i in 0..p - 1 {
            let j = i + 1;
            step_id += 1;
            let offsets: Vec<f64> = (0..g)
                .map(|a| -cfg.half_width + 2.0 * cfg.half_width * a as f64 / (g - 1) as f64)
                .collect();
            let candidates: Vec<(usize, f64, f64)> = (0..g * g)
                .map(|idx| {
                    let (a, b) = (idx / g, idx % g);
                    let vi = (current[i] + offsets[a]).clamp(origin[i] - reach, origin[i] + reach);
                    let vj = (current[j] + offsets[b]).clamp(origin[j] - reach, origin[j] + reach);
                    (idx, vi, vj)
                })
                .collect();
            let accs: Vec<Result<f64>> = candidates
                .par_iter()
                .map(|&(idx, vi, vj)| {
                    let mut flat = current.clone();
                    flat[i] = vi;
                    flat[j] = vj;
                    scan_accuracy(
                        &flat,
                        ansatz,
                        dim,
                        layers,
                        executor,
                        eval_data,
                        labels,
                        cfg.shots_per_point,
                        step_id,
                        idx as u64,
                    )
                })
                .collect();
            let mut acc_values = Vec::with_capacity(g * g);
            for a in accs {
                acc_values.push(a?);
            }
            let center_idx = mid * g + mid;
            let center_acc = acc_values[center_idx];

            let mut best_idx = center_idx;
            for (idx, &(_, vi, vj)) in candidates.iter().enumerate() {
                let acc = acc_values[idx];
                let move2 = (vi - current[i]).powi(2) + (vj - current[j]).powi(2);
                let best_move2 = {
                    let (_, bi, bj) = candidates[best_idx];
                    (bi - current[i]).powi(2) + (bj - current[j]).powi(2)
                };
                if acc > acc_values[best_idx] || (acc == acc_values[best_idx] && move2 < best_move2)
                {
                    best_idx = idx;
                }
            }

            let moved = best_idx != center_idx && acc_values[best_idx] > center_acc;
            if moved {
                let (_, vi, vj) = candidates[best_idx];
                current[i] = vi;
                current[j] = vj;
                pass_moved = true;
                let ref_acc = measure_ref(&current)?;
                if ref_acc > best_ref {
                    best_ref = ref_acc;
                    best_flat = current.clone();
                }
            }
            trace.push(ScanStep {
                pass,
                pair: (i, j),
                center_accuracy: center_acc,
                best_accuracy: acc_values[best_idx],
                moved,
            });
        }
        if !pass_moved {
            break 'passes;
        }
    }

    Ok((ParameterSet::from_flat(ansatz, dim, layers, &best_flat)?, trace))
}

/// Accuracy plus per-sample predictions under the given executor.
///
/// `shots` overrides the executor's default shot count and is ignored by
/// exact executors. When a noisy measurement returns an all-zero fidelity
/// vector the probabilities fall back to uniform; the guess stays the
/// argmax (lowest index on ties).
pub fn evaluate<E: Executor + ?Sized>(
    theta: &ParameterSet,
    data: &Dataset,
    labels: &LabelStateSet,
    executor: &E,
    shots: u32,
) -> Result<(f64, Vec<Prediction>)> {
    if data.samples.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if executor.default_shots() > 0 && shots == 0 {
        return Err(Error::invalid("noisy executors need at least one shot"));
    }
    let k = labels.class_count();
    let predictions: Vec<Result<Prediction>> = data
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut fids = Vec::with_capacity(k);
            for c in 0..k {
                fids.push(executor.fidelity(
                    theta,
                    &sample.x,
                    c,
                    labels,
                    shots,
                    key(&[EVAL_TAG, i as u64, c as u64]),
                )?);
            }
            let sum: f64 = fids.iter().sum();
            let probabilities = if sum > 0.0 {
                fids.iter().map(|f| f / sum).collect()
            } else {
                vec![1.0 / k as f64; k]
            };
            let guess = guess_class(&fids)?;
            Ok(Prediction { fidelities: fids, probabilities, guess })
        })
        .collect();
    let mut out = Vec::with_capacity(predictions.len());
    let mut correct = 0usize;
    for (sample, pred) in data.samples.iter().zip(predictions) {
        let pred = pred?;
        if pred.guess == sample.class {
            correct += 1;
        }
        out.push(pred);
    }
    Ok((correct as f64 / data.samples.len() as f64, out))
}
