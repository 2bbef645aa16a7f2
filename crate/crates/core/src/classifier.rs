//! From fidelities to class probabilities, guesses, the χ² training loss
//! and classification accuracy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{LabelStateSet, ParameterSet};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::key;

const CHI2_TAG: u64 = 0x6368_6932; // "chi2"
const ACC_TAG: u64 = 0x6163_6375; // "accu"

/// Per-sample classification output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub fidelities: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub guess: usize,
}

/// Normalize fidelities into class probabilities by dividing by their sum.
///
/// Fails on an empty vector, entries outside [0, 1], or an all-zero vector.
pub fn class_probabilities(fidelities: &[f64]) -> Result<Vec<f64>> {
    if fidelities.is_empty() {
        return Err(Error::invalid("empty fidelity vector"));
    }
    if fidelities.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::invalid("fidelities must lie in [0, 1]"));
    }
    let sum: f64 = fidelities.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateInput("all fidelities are zero".into()));
    }
    Ok(fidelities.iter().map(|f| f / sum).collect())
}

/// Index of the largest fidelity; ties go to the lowest index.
pub fn guess_class(fidelities: &[f64]) -> Result<usize> {
    if fidelities.is_empty() {
        return Err(Error::invalid("empty fidelity vector"));
    }
    let mut best = 0;
    for (i, f) in fidelities.iter().enumerate().skip(1) {
        if *f > fidelities[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Mean squared shortfall of the true-label fidelity from 1:
/// `(1/N) Σ (F_c(x) - 1)²`.
///
/// Samples are evaluated concurrently; the sum runs in ascending sample
/// order so the result is bit-reproducible.
pub fn chi2_loss<E: Executor + ?Sized>(
    theta: &ParameterSet,
    data: &Dataset,
    labels: &LabelStateSet,
    executor: &E,
) -> Result<f64> {
    if data.samples.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let shots = executor.default_shots();
    let terms: Vec<Result<f64>> = data
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let f = executor.fidelity(
                theta,
                &sample.x,
                sample.class,
                labels,
                shots,
                key(&[CHI2_TAG, i as u64]),
            )?;
            Ok((f - 1.0) * (f - 1.0))
        })
        .collect();
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total / data.samples.len() as f64)
}

pub(crate) fn chi2_loss_serial_exact(
    theta: &ParameterSet,
    data: &Dataset,
    labels: &LabelStateSet,
) -> f64 {
    let exec = crate::exec::ExactExecutor;
    let mut total = 0.0;
    for sample in &data.samples {
        let f = exec
            .fidelity(theta, &sample.x, sample.class, labels, 0, 0)
            .expect("exact executor cannot fail on validated data");
        total += (f - 1.0) * (f - 1.0);
    }
    total / data.samples.len() as f64
}

/// Fraction of samples whose argmax fidelity picks the true class.
pub fn accuracy<E: Executor + ?Sized>(
    theta: &ParameterSet,
    data: &Dataset,
    labels: &LabelStateSet,
    executor: &E,
) -> Result<f64> {
    if data.samples.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let shots = executor.default_shots();
    let k = labels.class_count();
    let hits: Vec<Result<bool>> = data
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
                    key(&[ACC_TAG, i as u64, c as u64]),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{label_states, AnsatzKind, LayerParams, ParameterSet};
    use crate::datasets::{Dataset, Problem, Sample};
    use crate::exec::ExactExecutor;
    use crate::rng::Stream;
    use proptest::prelude::*;

    fn tiny_dataset(samples: Vec<Sample>) -> Dataset {
        Dataset { problem: Problem::Circle, samples, seed: 0 }
    }

    #[test]
    fn probabilities_basics() {
        assert_eq!(class_probabilities(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let p = class_probabilities(&[0.9, 0.3]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        assert!(matches!(
            class_probabilities(&[0.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(class_probabilities(&[]).is_err());
        assert!(class_probabilities(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn guess_basics() {
        assert_eq!(guess_class(&[0.2, 0.8]).unwrap(), 1);
        assert_eq!(guess_class(&[0.5, 0.5]).unwrap(), 0);
        assert!(guess_class(&[]).is_err());
    }

    #[test]
    fn loss_for_identity_model() {
        // identity circuit has fidelity 1 to |0>: class-0 samples contribute
        // 0, class-1 samples contribute (0-1)^2 = 1
        let theta = ParameterSet::new(
            AnsatzKind::A,
            2,
            vec![LayerParams::A { omega: vec![0.0, 0.0], alpha: 0.0, phi: 0.0 }],
        )
        .unwrap();
        let labels = label_states(2).unwrap();
        let exec = ExactExecutor;

        let all_zero = tiny_dataset(vec![
            Sample { x: vec![0.1, 0.1], class: 0 },
            Sample { x: vec![-0.4, 0.2], class: 0 },
        ]);
        assert!(chi2_loss(&theta, &all_zero, &labels, &exec).unwrap() < 1e-12);

        let one_sample_half = tiny_dataset(vec![Sample { x: vec![0.0, 0.0], class: 1 }]);
        // fidelity 0 to |1>: loss (0-1)^2 = 1; check the formula shape via
        // a state at fidelity 0.5 instead
        let theta_half = ParameterSet::new(
            AnsatzKind::A,
            2,
            vec![LayerParams::A {
                omega: vec![0.0, 0.0],
                alpha: std::f64::consts::FRAC_PI_2,
                phi: 0.0,
            }],
        )
        .unwrap();
        let loss = chi2_loss(&theta_half, &one_sample_half, &labels, &exec).unwrap();
        assert!((loss - 0.25).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn loss_and_accuracy_are_permutation_invariant() {
        let mut stream = Stream::new(31);
        let theta = ParameterSet::random(AnsatzKind::A, 2, 3, &mut stream);
        let labels = label_states(2).unwrap();
        let exec = ExactExecutor;
        let samples: Vec<Sample> = (0..40)
            .map(|_| Sample {
                x: vec![stream.symmetric(), stream.symmetric()],
                class: (stream.next_u64() % 2) as usize,
            })
            .collect();
        let mut reversed = samples.clone();
        reversed.reverse();
        let d1 = tiny_dataset(samples);
        let d2 = tiny_dataset(reversed);
        let l1 = chi2_loss(&theta, &d1, &labels, &exec).unwrap();
        let l2 = chi2_loss(&theta, &d2, &labels, &exec).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        let a1 = accuracy(&theta, &d1, &labels, &exec).unwrap();
        let a2 = accuracy(&theta, &d2, &labels, &exec).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn loss_is_bounded() {
        let mut stream = Stream::new(32);
        let labels = label_states(2).unwrap();
        let exec = ExactExecutor;
        for _ in 0..20 {
            let theta = ParameterSet::random(AnsatzKind::A, 2, 2, &mut stream);
            let samples: Vec<Sample> = (0..10)
                .map(|_| Sample {
                    x: vec![stream.symmetric(), stream.symmetric()],
                    class: (stream.next_u64() % 2) as usize,
                })
                .collect();
            let loss = chi2_loss(&theta, &tiny_dataset(samples), &labels, &exec).unwrap();
            assert!((0.0..=1.0).contains(&loss));
        }
    }

    #[test]
    fn constant_model_on_balanced_data_is_half_right() {
        let theta = ParameterSet::new(
            AnsatzKind::A,
            2,
            vec![LayerParams::A { omega: vec![0.0, 0.0], alpha: 0.0, phi: 0.0 }],
        )
        .unwrap();
        let labels = label_states(2).unwrap();
        let samples: Vec<Sample> = (0..100)
            .map(|i| Sample { x: vec![0.0, 0.0], class: i % 2 })
            .collect();
        let acc = accuracy(&theta, &tiny_dataset(samples), &labels, &ExactExecutor).unwrap();
        assert!((acc - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalization_preserves_argmax(fids in proptest::collection::vec(0.001..1.0f64, 1..6)) {
            let g1 = guess_class(&fids).unwrap();
            let probs = class_probabilities(&fids).unwrap();
            let g2 = guess_class(&probs).unwrap();
            prop_assert_eq!(g1, g2);
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn guess_invariant_under_positive_scaling(
            fids in proptest::collection::vec(0.0..1.0f64, 1..6),
            scale in 0.01..0.99f64,
        ) {
            let scaled: Vec<f64> = fids.iter().map(|f| f * scale).collect();
            prop_assert_eq!(guess_class(&fids).unwrap(), guess_class(&scaled).unwrap());
        }
    }
}
