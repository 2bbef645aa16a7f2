//! Data re-uploading circuits: the two ansätze, label states, and the
//! compilation of a circuit plus inverse label gate into a fused sequence of
//! arbitrary-axis pulses.
//!
//! A circuit of L layers applied to |0> uses 2L elementary rotations (a
//! data-dependent `Ry` then an `Rz` per layer) plus two more for the inverse
//! label gate. Fusion emits L+1 arbitrary-axis pulses instead: the first `Ry`
//! stands alone, each later `Ry` absorbs the preceding `Rz` by shifting its
//! azimuth, and the final pulse realizes the inverse label gate's `Ry` with
//! the leftover diagonal phases folded into its azimuth. The |0>-measurement
//! probability of the fused sequence equals the circuit-label overlap
//! exactly.
//!
//! With `Rz(θ) = diag(e^{-iθ/2}, e^{+iθ/2})` the azimuth bookkeeping runs
//! `γ₁ = π/2`, `γ_{n+1} = γ_n - θ_n^z`: pushing a diagonal past a pulse
//! toward the measurement end lowers the azimuth by the diagonal's angle.
//! Consecutive emitted azimuths therefore differ by exactly the interleaved
//! `Rz` angle, and the residual diagonal only contributes a phase that P0
//! cannot see.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::qubit::{apply, overlap_prob, ry, rz, QubitState, RotationParams, Unitary};

/// Which layer encoding a circuit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnsatzKind {
    /// Data enters only the `Ry` rotation: `U(x, θ) = Rz(φ)·Ry(ω·x + α)`.
    /// Works for any feature dimension; d + 2 parameters per layer.
    A,
    /// Data enters both rotations: `U(x, θ) = Rz(ω·x₂ + β)·Ry(ν·x₁ + α)`.
    /// Two-dimensional data only; 4 parameters per layer.
    B,
}

impl AnsatzKind {
    pub fn params_per_layer(&self, dim: usize) -> usize {
        match self {
            AnsatzKind::A => dim + 2,
            AnsatzKind::B => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnsatzKind::A => "A",
            AnsatzKind::B => "B",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(AnsatzKind::A),
            "B" | "b" => Ok(AnsatzKind::B),
            other => Err(Error::invalid(format!("unknown ansatz {other:?}"))),
        }
    }
}

/// Trainable parameters of one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams {
    A { omega: Vec<f64>, alpha: f64, phi: f64 },
    B { nu: f64, alpha: f64, omega: f64, beta: f64 },
}

impl LayerParams {
    fn validate(&self, ansatz: AnsatzKind, dim: usize) -> Result<()> {
        match (self, ansatz) {
            (LayerParams::A { omega, alpha, phi }, AnsatzKind::A) => {
                if omega.len() != dim {
                    return Err(Error::invalid(format!(
                        "layer weight vector has length {}, expected {dim}",
                        omega.len()
                    )));
                }
                if !omega.iter().all(|w| w.is_finite()) || !alpha.is_finite() || !phi.is_finite() {
                    return Err(Error::invalid("non-finite layer parameter"));
                }
            }
            (LayerParams::B { nu, alpha, omega, beta }, AnsatzKind::B) => {
                if dim != 2 {
                    return Err(Error::invalid("ansatz B requires dimension 2"));
                }
                if ![nu, alpha, omega, beta].iter().all(|v| v.is_finite()) {
                    return Err(Error::invalid("non-finite layer parameter"));
                }
            }
            _ => return Err(Error::invalid("layer kind does not match ansatz")),
        }
        Ok(())
    }

    /// The (Ry angle, Rz angle) this layer applies for feature vector `x`.
    fn angles(&self, x: &[f64]) -> (f64, f64) {
        match self {
            LayerParams::A { omega, alpha, phi } => {
                let mut dot = 0.0;
                for (w, xi) in omega.iter().zip(x) {
                    dot += w * xi;
                }
                (dot + alpha, *phi)
            }
            LayerParams::B { nu, alpha, omega, beta } => {
                (nu * x[0] + alpha, omega * x[1] + beta)
            }
        }
    }

    fn flat(&self, out: &mut Vec<f64>) {
        match self {
            LayerParams::A { omega, alpha, phi } => {
                out.extend_from_slice(omega);
                out.push(*alpha);
                out.push(*phi);
            }
            LayerParams::B { nu, alpha, omega, beta } => {
                out.extend_from_slice(&[*nu, *alpha, *omega, *beta]);
            }
        }
    }
}

/// The full trainable parameter set Θ of a circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    ansatz: AnsatzKind,
    dim: usize,
    layers: Vec<LayerParams>,
}

impl ParameterSet {
    pub fn new(ansatz: AnsatzKind, dim: usize, layers: Vec<LayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a trainable model needs at least one layer"));
        }
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if ansatz == AnsatzKind::B && dim != 2 {
            return Err(Error::invalid("ansatz B requires dimension 2"));
        }
        for layer in &layers {
            layer.validate(ansatz, dim)?;
        }
        Ok(ParameterSet { ansatz, dim, layers })
    }

    pub fn ansatz(&self) -> AnsatzKind {
        self.ansatz
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layers.len() * self.ansatz.params_per_layer(self.dim)
    }

    /// Flatten in canonical order: layer-major, within a layer
    /// `[ω₁..ω_d, α, φ]` (ansatz A) or `[ν, α, ω, β]` (ansatz B).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            layer.flat(&mut out);
        }
        out
    }

    /// Rebuild from the canonical flat order.
    pub fn from_flat(ansatz: AnsatzKind, dim: usize, layer_count: usize, flat: &[f64]) -> Result<Self> {
        let per = ansatz.params_per_layer(dim);
        if flat.len() != per * layer_count {
            return Err(Error::invalid(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                per * layer_count
            )));
        }
        let layers = flat
            .chunks_exact(per)
            .map(|chunk| match ansatz {
                AnsatzKind::A => LayerParams::A {
                    omega: chunk[..dim].to_vec(),
                    alpha: chunk[dim],
                    phi: chunk[dim + 1],
                },
                AnsatzKind::B => LayerParams::B {
                    nu: chunk[0],
                    alpha: chunk[1],
                    omega: chunk[2],
                    beta: chunk[3],
                },
            })
            .collect();
        ParameterSet::new(ansatz, dim, layers)
    }

    /// Parameters drawn uniformly from [-π, π).
    pub fn random(ansatz: AnsatzKind, dim: usize, layer_count: usize, stream: &mut crate::rng::Stream) -> Self {
        let per = ansatz.params_per_layer(dim);
        let flat: Vec<f64> = (0..per * layer_count)
            .map(|_| stream.uniform_in(-std::f64::consts::PI, std::f64::consts::PI))
            .collect();
        ParameterSet::from_flat(ansatz, dim, layer_count, &flat).expect("consistent shape")
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "feature vector has dimension {}, model expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

impl Serialize for ParameterSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            ansatz: &'a str,
            dim: usize,
            layers: Vec<Vec<f64>>,
        }
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let mut v = Vec::new();
                l.flat(&mut v);
                v
            })
            .collect();
        Repr { ansatz: self.ansatz.name(), dim: self.dim, layers }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ParameterSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            ansatz: String,
            dim: usize,
            layers: Vec<Vec<f64>>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let ansatz = AnsatzKind::from_name(&repr.ansatz).map_err(serde::de::Error::custom)?;
        let flat: Vec<f64> = repr.layers.iter().flatten().copied().collect();
        ParameterSet::from_flat(ansatz, repr.dim, repr.layers.len(), &flat)
            .map_err(serde::de::Error::custom)
    }
}

/// The target kets, one per class, each prepared as `Rz(η)·Ry(λ)|0>`.
#[derive(Clone, Debug)]
pub struct LabelStateSet {
    k: usize,
    gates: Vec<(f64, f64)>,
    states: Vec<QubitState>,
}

impl LabelStateSet {
    pub fn class_count(&self) -> usize {
        self.k
    }

    /// The (λ, η) pair defining class `c`'s preparation gate.
    pub fn gate(&self, c: usize) -> (f64, f64) {
        self.gates[c]
    }

    pub fn state(&self, c: usize) -> &QubitState {
        &self.states[c]
    }

    pub fn states(&self) -> &[QubitState] {
        &self.states
    }
}

/// Maximally separated label states for k classes on the Bloch sphere:
/// antipodal pair, great-circle triangle, or tetrahedron.
pub fn label_states(k: usize) -> Result<LabelStateSet> {
    use std::f64::consts::PI;
    let gates: Vec<(f64, f64)> = match k {
        2 => vec![(0.0, 0.0), (PI, 0.0)],
        3 => vec![(0.0, 0.0), (2.0 * PI / 3.0, 0.0), (4.0 * PI / 3.0, 0.0)],
        4 => {
            let lam = (-1.0f64 / 3.0).acos();
            vec![(0.0, 0.0), (lam, 0.0), (lam, 2.0 * PI / 3.0), (lam, 4.0 * PI / 3.0)]
        }
        other => {
            return Err(Error::invalid(format!(
                "label states are defined for 2, 3 or 4 classes, got {other}"
            )))
        }
    };
    let states = gates
        .iter()
        .map(|&(lam, eta)| {
            let v = rz(eta)?.mul(&ry(lam)?);
            Ok(apply(&v, QubitState::zero()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelStateSet { k, gates, states })
}

/// One layer's unitary `Rz(θ_z)·Ry(θ_y)` for the given feature vector.
pub fn layer_unitary(ansatz: AnsatzKind, theta: &LayerParams, x: &[f64]) -> Result<Unitary> {
    theta.validate(ansatz, x.len())?;
    let (y_angle, z_angle) = theta.angles(x);
    Ok(rz(z_angle)?.mul(&ry(y_angle)?))
}

/// The circuit output state: layers 1..L applied in order to |0>.
pub fn circuit_state(theta: &ParameterSet, x: &[f64]) -> Result<QubitState> {
    theta.check_input(x)?;
    let mut s = QubitState::zero();
    for layer in &theta.layers {
        let (y_angle, z_angle) = layer.angles(x);
        s = apply(&ry(y_angle)?, s);
        s = apply(&rz(z_angle)?, s);
    }
    Ok(s)
}

/// Provenance of a fused sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceMeta {
    pub x: Vec<f64>,
    pub theta: ParameterSet,
    pub class: usize,
}

/// A compiled pulse program: L+1 arbitrary-axis pulses ending in the inverse
/// label gate. Measuring |0> after running it yields the fidelity between
/// the circuit output and the class label state.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedSequence {
    pub pulses: Vec<RotationParams>,
    /// Present when the sequence was compiled in-process; absent for
    /// sequences read back from their text form.
    pub meta: Option<SequenceMeta>,
}

impl FusedSequence {
    /// Line-oriented text form: one `gamma,delta` pair per pulse, 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.pulses {
            out.push_str(&format!("{:.16e},{:.16e}\n", p.gamma, p.delta));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut pulses = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (g, d) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected gamma,delta", lineno + 1)))?;
            let gamma: f64 = g
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad gamma {g:?}", lineno + 1)))?;
            let delta: f64 = d
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad delta {d:?}", lineno + 1)))?;
            pulses.push(RotationParams::new(gamma, delta)?);
        }
        if pulses.is_empty() {
            return Err(Error::Parse("empty pulse sequence".into()));
        }
        Ok(FusedSequence { pulses, meta: None })
    }
}

/// Walk the fused pulses of `(theta, x, class)` in order without
/// materializing them. Shared by [`fuse`] and the exact fast path so both
/// perform bit-identical arithmetic.
pub(crate) fn for_each_pulse(
    theta: &ParameterSet,
    x: &[f64],
    label_gate: (f64, f64),
    mut visit: impl FnMut(RotationParams),
) {
    use std::f64::consts::FRAC_PI_2;
    let (lam, eta) = label_gate;
    let mut azimuth = FRAC_PI_2;
    for (i, layer) in theta.layers.iter().enumerate() {
        let (y_angle, z_angle) = layer.angles(x);
        if i == 0 {
            visit(RotationParams { gamma: FRAC_PI_2, delta: y_angle });
        } else {
            visit(RotationParams { gamma: azimuth, delta: y_angle });
        }
        azimuth -= z_angle;
    }
    visit(RotationParams { gamma: azimuth + eta, delta: -lam });
}

/// Compile circuit, data point and inverse label gate into L+1 pulses.
pub fn fuse(
    theta: &ParameterSet,
    x: &[f64],
    class: usize,
    labels: &LabelStateSet,
) -> Result<FusedSequence> {
    theta.check_input(x)?;
    if class >= labels.class_count() {
        return Err(Error::invalid(format!(
            "class {class} out of range for {} label states",
            labels.class_count()
        )));
    }
    let mut pulses = Vec::with_capacity(theta.layer_count() + 1);
    for_each_pulse(theta, x, labels.gate(class), |p| pulses.push(p));
    Ok(FusedSequence {
        pulses,
        meta: Some(SequenceMeta { x: x.to_vec(), theta: theta.clone(), class }),
    })
}

/// P0 of the fused execution under the given executor. With the exact
/// executor this equals `overlap_prob(label, circuit_state)` to machine
/// precision.
pub fn measured_fidelity<E: Executor + ?Sized>(seq: &FusedSequence, executor: &E) -> Result<f64> {
    executor.p0(seq, 0)
}

/// Direct (unfused) fidelity: simulate the circuit and take the overlap.
pub fn direct_fidelity(
    theta: &ParameterSet,
    x: &[f64],
    class: usize,
    labels: &LabelStateSet,
) -> Result<f64> {
    if class >= labels.class_count() {
        return Err(Error::invalid(format!(
            "class {class} out of range for {} label states",
            labels.class_count()
        )));
    }
    let out = circuit_state(theta, x)?;
    Ok(overlap_prob(labels.state(class), &out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExactExecutor;
    use crate::qubit::NORM_TOL;
    use crate::rng::Stream;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_instance(
        stream: &mut Stream,
        ansatz: AnsatzKind,
        dim: usize,
        layers: usize,
        k: usize,
    ) -> (ParameterSet, Vec<f64>, usize, LabelStateSet) {
        let theta = ParameterSet::random(ansatz, dim, layers, stream);
        let x: Vec<f64> = (0..dim).map(|_| stream.symmetric()).collect();
        let labels = label_states(k).unwrap();
        let class = (stream.next_u64() % k as u64) as usize;
        (theta, x, class, labels)
    }

    #[test]
    fn identity_layer_is_identity() {
        let layer = LayerParams::A { omega: vec![0.0, 0.0], alpha: 0.0, phi: 0.0 };
        let u = layer_unitary(AnsatzKind::A, &layer, &[0.4, -0.9]).unwrap();
        assert!(u.max_entry_distance(&Unitary::identity()) < NORM_TOL);
    }

    #[test]
    fn ansatz_b_layer_matches_written_form() {
        let layer = LayerParams::B { nu: 1.0, alpha: 0.0, omega: 1.0, beta: 0.0 };
        let x = [0.37, -0.81];
        let u = layer_unitary(AnsatzKind::B, &layer, &x).unwrap();
        let expected = rz(x[1]).unwrap().mul(&ry(x[0]).unwrap());
        assert!(u.max_entry_distance(&expected) < NORM_TOL);
    }

    #[test]
    fn ansatz_a_parameter_count() {
        assert_eq!(AnsatzKind::A.params_per_layer(3), 5);
        let theta = ParameterSet::random(AnsatzKind::A, 3, 1, &mut Stream::new(1));
        assert_eq!(theta.param_count(), 5);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let layer = LayerParams::A { omega: vec![0.1, 0.2], alpha: 0.0, phi: 0.0 };
        assert!(layer_unitary(AnsatzKind::A, &layer, &[0.5]).is_err());
        let theta = ParameterSet::random(AnsatzKind::A, 2, 2, &mut Stream::new(2));
        assert!(circuit_state(&theta, &[0.1, 0.2, 0.3]).is_err());
        assert!(ParameterSet::random(AnsatzKind::B, 2, 1, &mut Stream::new(3)).param_count() == 4);
        assert!(ParameterSet::new(
            AnsatzKind::B,
            3,
            vec![LayerParams::B { nu: 0.0, alpha: 0.0, omega: 0.0, beta: 0.0 }; 1],
        )
        .is_err());
    }

    #[test]
    fn single_identity_layer_keeps_zero_state() {
        let theta = ParameterSet::new(
            AnsatzKind::A,
            2,
            vec![LayerParams::A { omega: vec![0.0, 0.0], alpha: 0.0, phi: 0.0 }],
        )
        .unwrap();
        let s = circuit_state(&theta, &[0.3, 0.3]).unwrap();
        assert!((s.p0() - 1.0).abs() < NORM_TOL);
    }

    #[test]
    fn single_layer_circuit_equals_layer_unitary() {
        let mut stream = Stream::new(4);
        let theta = ParameterSet::random(AnsatzKind::A, 2, 1, &mut stream);
        let x = [0.2, -0.6];
        let direct = apply(
            &layer_unitary(AnsatzKind::A, &theta.layers()[0], &x).unwrap(),
            QubitState::zero(),
        );
        let circ = circuit_state(&theta, &x).unwrap();
        assert!((direct.amp0 - circ.amp0).norm() < NORM_TOL);
        assert!((direct.amp1 - circ.amp1).norm() < NORM_TOL);
    }

    #[test]
    fn circuit_state_stays_normalized() {
        let mut stream = Stream::new(5);
        for _ in 0..200 {
            let layers = 1 + (stream.next_u64() % 10) as usize;
            let theta = ParameterSet::random(AnsatzKind::A, 3, layers, &mut stream);
            let x: Vec<f64> = (0..3).map(|_| stream.symmetric()).collect();
            let s = circuit_state(&theta, &x).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < NORM_TOL);
        }
    }

    #[test]
    fn label_state_geometry() {
        let two = label_states(2).unwrap();
        assert_eq!(two.gate(0), (0.0, 0.0));
        assert_eq!(two.gate(1), (PI, 0.0));
        assert!(overlap_prob(two.state(0), two.state(1)) < NORM_TOL);

        // great-circle triangle: overlap = cos^2(pi/3) = 1/4
        let three = label_states(3).unwrap();
        for a in 0..3 {
            for b in (a + 1)..3 {
                let ov = overlap_prob(three.state(a), three.state(b));
                assert!((ov - 0.25).abs() < NORM_TOL, "pair ({a},{b}): {ov}");
            }
        }

        // tetrahedron: overlap = (1 + cos θ)/2 with cos θ = -1/3
        let four = label_states(4).unwrap();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let ov = overlap_prob(four.state(a), four.state(b));
                assert!((ov - 1.0 / 3.0).abs() < NORM_TOL, "pair ({a},{b}): {ov}");
            }
        }

        assert!(label_states(5).is_err());
        assert!(label_states(1).is_err());
    }

    #[test]
    fn label_states_match_their_gates() {
        for k in 2..=4 {
            let set = label_states(k).unwrap();
            for c in 0..k {
                let (lam, eta) = set.gate(c);
                let v = rz(eta).unwrap().mul(&ry(lam).unwrap());
                let s = apply(&v, QubitState::zero());
                assert!((s.amp0 - set.state(c).amp0).norm() < NORM_TOL);
                assert!((s.amp1 - set.state(c).amp1).norm() < NORM_TOL);
            }
        }
    }

    #[test]
    fn fuse_emits_l_plus_one_pulses() {
        let mut stream = Stream::new(6);
        let labels = label_states(2).unwrap();
        for layers in 1..=6 {
            let theta = ParameterSet::random(AnsatzKind::A, 2, layers, &mut stream);
            let seq = fuse(&theta, &[0.1, 0.2], 0, &labels).unwrap();
            assert_eq!(seq.pulses.len(), layers + 1);
        }
    }

    #[test]
    fn first_fused_azimuth_with_zero_z_angle() {
        // single layer with phi = 0: the closing pulse sits at azimuth pi/2
        let theta = ParameterSet::new(
            AnsatzKind::A,
            2,
            vec![LayerParams::A { omega: vec![0.4, -0.2], alpha: 0.3, phi: 0.0 }],
        )
        .unwrap();
        let labels = label_states(2).unwrap();
        let seq = fuse(&theta, &[0.5, 0.5], 0, &labels).unwrap();
        assert_eq!(seq.pulses.len(), 2);
        assert!((seq.pulses[0].gamma - FRAC_PI_2).abs() < NORM_TOL);
        assert!((seq.pulses[1].gamma - FRAC_PI_2).abs() < NORM_TOL);
    }

    #[test]
    fn azimuth_recurrence_holds_bitwise() {
        let mut stream = Stream::new(7);
        for _ in 0..100 {
            let layers = 1 + (stream.next_u64() % 6) as usize;
            let (theta, x, class, labels) = random_instance(&mut stream, AnsatzKind::A, 2, layers, 2);
            let seq = fuse(&theta, &x, class, &labels).unwrap();
            // replay the construction: start at pi/2, subtract each layer's
            // Rz angle, add the label gate's eta at the end
            let mut azimuth = FRAC_PI_2;
            for (i, layer) in theta.layers().iter().enumerate() {
                let (y_angle, z_angle) = layer.angles(&x);
                assert_eq!(seq.pulses[i].gamma, azimuth);
                assert_eq!(seq.pulses[i].delta, y_angle);
                azimuth -= z_angle;
            }
            let (lam, eta) = labels.gate(class);
            assert_eq!(seq.pulses[layers].gamma, azimuth + eta);
            assert_eq!(seq.pulses[layers].delta, -lam);
        }
    }

    #[test]
    fn fused_p0_matches_unfused_circuit_with_inverse_label_gate() {
        let exec = ExactExecutor;
        let mut stream = Stream::new(8);
        for trial in 0..300 {
            let (ansatz, dim) = if trial % 2 == 0 { (AnsatzKind::A, 3) } else { (AnsatzKind::B, 2) };
            let layers = 1 + (stream.next_u64() % 6) as usize;
            let k = 2 + (stream.next_u64() % 3) as usize;
            let (theta, x, class, labels) = random_instance(&mut stream, ansatz, dim, layers, k);

            let seq = fuse(&theta, &x, class, &labels).unwrap();
            let fused = measured_fidelity(&seq, &exec).unwrap();

            // oracle: unfused simulation followed by the explicit inverse
            // label gate V† = Ry(-λ)·Rz(-η)
            let (lam, eta) = labels.gate(class);
            let out = circuit_state(&theta, &x).unwrap();
            let vdag = ry(-lam).unwrap().mul(&rz(-eta).unwrap());
            let unfused = apply(&vdag, out).p0();

            assert!(
                (fused - unfused).abs() < 1e-10,
                "trial {trial}: fused {fused} vs unfused {unfused}"
            );
        }
    }

    #[test]
    fn measured_fidelity_equals_direct_overlap_exactly() {
        let exec = ExactExecutor;
        let mut stream = Stream::new(9);
        for _ in 0..300 {
            let layers = 1 + (stream.next_u64() % 5) as usize;
            let k = 2 + (stream.next_u64() % 3) as usize;
            let (theta, x, class, labels) = random_instance(&mut stream, AnsatzKind::A, 2, layers, k);
            let seq = fuse(&theta, &x, class, &labels).unwrap();
            let p0 = measured_fidelity(&seq, &exec).unwrap();
            let direct = direct_fidelity(&theta, &x, class, &labels).unwrap();
            assert!((p0 - direct).abs() < 1e-12, "{p0} vs {direct}");
        }
    }

    #[test]
    fn trivial_fidelities() {
        // identity circuit: fidelity 1 to |0>, 0 to |1>
        let theta = ParameterSet::new(
            AnsatzKind::A,
            2,
            vec![LayerParams::A { omega: vec![0.0, 0.0], alpha: 0.0, phi: 0.0 }],
        )
        .unwrap();
        let labels = label_states(2).unwrap();
        let exec = ExactExecutor;
        let f0 = measured_fidelity(&fuse(&theta, &[0.0, 0.0], 0, &labels).unwrap(), &exec).unwrap();
        let f1 = measured_fidelity(&fuse(&theta, &[0.0, 0.0], 1, &labels).unwrap(), &exec).unwrap();
        assert!((f0 - 1.0).abs() < NORM_TOL);
        assert!(f1 < NORM_TOL);
    }

    #[test]
    fn fuse_rejects_bad_class_and_dims() {
        let mut stream = Stream::new(10);
        let theta = ParameterSet::random(AnsatzKind::A, 2, 2, &mut stream);
        let labels = label_states(2).unwrap();
        assert!(fuse(&theta, &[0.0, 0.0], 2, &labels).is_err());
        assert!(fuse(&theta, &[0.0], 0, &labels).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut stream = Stream::new(11);
        let (theta, x, class, labels) = random_instance(&mut stream, AnsatzKind::A, 2, 4, 2);
        let seq = fuse(&theta, &x, class, &labels).unwrap();
        let text = seq.to_text();
        let back = FusedSequence::from_text(&text).unwrap();
        assert_eq!(back.pulses, seq.pulses);
        assert!(back.meta.is_none());
        assert!(FusedSequence::from_text("not,a,number\n").is_err());
        assert!(FusedSequence::from_text("").is_err());
    }

    #[test]
    fn parameter_set_flat_round_trip() {
        let mut stream = Stream::new(12);
        for &(ansatz, dim) in &[(AnsatzKind::A, 4), (AnsatzKind::B, 2)] {
            let theta = ParameterSet::random(ansatz, dim, 3, &mut stream);
            let flat = theta.to_flat();
            let back = ParameterSet::from_flat(ansatz, dim, 3, &flat).unwrap();
            assert_eq!(theta, back);
        }
    }

    #[test]
    fn parameter_set_json_round_trip() {
        let mut stream = Stream::new(13);
        let theta = ParameterSet::random(AnsatzKind::B, 2, 2, &mut stream);
        let json = serde_json::to_string(&theta).unwrap();
        let back: ParameterSet = serde_json::from_str(&json).unwrap();
        assert_eq!(theta, back);
        assert!(json.contains("\"ansatz\":\"B\""));
        assert!(json.contains("\"dim\":2"));
    }
}
