//! Executors: anything that can run a fused pulse sequence and report the
//! probability of measuring |0>.

use crate::circuit::{FusedSequence, LabelStateSet, ParameterSet};
use crate::error::Result;
use crate::qubit::{apply, arb_rotation, QubitState};

/// A backend that measures P0 of a fused sequence.
///
/// `key` selects a deterministic random stream for stochastic backends and
/// is ignored by exact ones. `shots` likewise only matters for sampling
/// backends; the exact executor returns the analytic probability.
pub trait Executor: Sync {
    fn p0_with_shots(&self, seq: &FusedSequence, shots: u32, key: u64) -> Result<f64>;

    /// Shots used when the caller does not specify a count. Zero means the
    /// backend is exact.
    fn default_shots(&self) -> u32 {
        0
    }

    fn p0(&self, seq: &FusedSequence, key: u64) -> Result<f64> {
        self.p0_with_shots(seq, self.default_shots(), key)
    }

    /// Fidelity of `(theta, x)` against class `class`, measured through the
    /// fused sequence. Backends may shortcut the sequence construction as
    /// long as the arithmetic is identical.
    fn fidelity(
        &self,
        theta: &ParameterSet,
        x: &[f64],
        class: usize,
        labels: &LabelStateSet,
        shots: u32,
        key: u64,
    ) -> Result<f64> {
        let seq = crate::circuit::fuse(theta, x, class, labels)?;
        self.p0_with_shots(&seq, shots, key)
    }
}

/// Noise-free executor: runs the pulses as exact 2x2 unitaries.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactExecutor;

/// Simulate a pulse chain exactly from |0> and return P0.
pub fn exact_p0(seq: &FusedSequence) -> f64 {
    let mut s = QubitState::zero();
    for p in &seq.pulses {
        s = apply(&arb_rotation(*p), s);
    }
    s.p0()
}

impl Executor for ExactExecutor {
    fn p0_with_shots(&self, seq: &FusedSequence, _shots: u32, _key: u64) -> Result<f64> {
        Ok(exact_p0(seq))
    }

    fn fidelity(
        &self,
        theta: &ParameterSet,
        x: &[f64],
        class: usize,
        labels: &LabelStateSet,
        _shots: u32,
        _key: u64,
    ) -> Result<f64> {
        // allocation-free walk over the same pulse stream fuse() emits
        theta_check(theta, x, class, labels)?;
        let mut s = QubitState::zero();
        crate::circuit::for_each_pulse(theta, x, labels.gate(class), |p| {
            s = apply(&arb_rotation(p), s);
        });
        Ok(s.p0())
    }
}

fn theta_check(
    theta: &ParameterSet,
    x: &[f64],
    class: usize,
    labels: &LabelStateSet,
) -> Result<()> {
    if x.len() != theta.dim() {
        return Err(crate::error::Error::InvalidArgument(format!(
            "feature vector has dimension {}, model expects {}",
            x.len(),
            theta.dim()
        )));
    }
    if class >= labels.class_count() {
        return Err(crate::error::Error::InvalidArgument(format!(
            "class {class} out of range for {} label states",
            labels.class_count()
        )));
    }
    Ok(())
}
