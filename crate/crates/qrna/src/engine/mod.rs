//! Exact density-matrix backend.
//!
//! Small dense simulator for mixed states: registers, the fixed gate set,
//! Pauli noise channels, projective measurement, partial trace, fidelity and
//! von Neumann entropy. Operations are pure transformations on values; the
//! same code serves the protocol simulator and the flat replay oracle that
//! checks it.
//!
//! Qubit `k` of `qubit_order` occupies basis-index bit `n-1-k`, so the first
//! qubit is the most significant bit and `qubit_order` reads like a ket.

pub mod eig;
pub mod gate;
pub mod vector;

use num_complex::Complex64;
use thiserror::Error;

pub use gate::{GateKind, GateOp};
pub use vector::StateVector;

/// Default cap on qubits per register. Large enough for every bundled
/// scenario while keeping dense matrices (and their eigendecompositions)
/// desk-scale.
pub const DEFAULT_QUBIT_CAP: usize = 12;

/// Dimension threshold below which [`DensityMatrix::validate`] certifies
/// positivity with a full spectrum; larger states use a shifted Cholesky
/// factorization instead.
const PSD_EIG_MAX_DIM: usize = 64;

/// Identifier of one logical qubit inside a [`DensityMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitLabel(pub u64);

impl std::fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// A physical qubit slot: an opaque register (one per node in the simulator)
/// and an index within it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QubitSlot {
    pub register: String,
    pub index: u32,
}

impl std::fmt::Display for QubitSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}[{}]", self.register, self.index)
    }
}

/// Noise channels applied by the link layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseChannel {
    /// Single-qubit depolarizing: rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z).
    Depolarizing { p: f64 },
    /// Discard two qubits and re-prepare them as a Werner pair of the given
    /// fidelity; models an imperfect entangled-pair source.
    WernerSource { f_link: f64 },
}

impl NoiseChannel {
    pub fn arity(&self) -> usize {
        match self {
            NoiseChannel::Depolarizing { .. } => 1,
            NoiseChannel::WernerSource { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        match *self {
            NoiseChannel::Depolarizing { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(EngineError::Parameter(format!(
                        "depolarizing probability {p} outside [0,1]"
                    )));
                }
            }
            NoiseChannel::WernerSource { f_link } => {
                if !(0.25..=1.0).contains(&f_link) {
                    return Err(EngineError::Parameter(format!(
                        "werner fidelity {f_link} outside [1/4,1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How a measurement outcome is chosen.
#[derive(Debug, Clone, Copy)]
pub enum OutcomeSelect {
    /// Take the stated branch; error if its probability is below 1e-15.
    Forced(bool),
    /// Sample using a pre-drawn uniform in [0,1): outcome 0 iff u < P(0).
    Sampled(f64),
    /// Force outcome 0 unless that branch is impossible, then 1.
    Deterministic,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("register of {requested} qubits exceeds cap of {cap}")]
    ResourceLimit { requested: usize, cap: usize },
    #[error("address error: {0}")]
    Address(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("forced measurement branch has probability {0:.3e}")]
    ImpossibleBranch(f64),
    #[error("state vector norm {0} is not 1")]
    NotNormalized(f64),
    #[error("gate {gate} expects {expected} targets, got {got}")]
    Arity {
        gate: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("gate {0} targets must be distinct")]
    DuplicateTargets(&'static str),
    #[error("channel parameter out of range: {0}")]
    Parameter(String),
    #[error("state invariant violated: {0}")]
    Invariant(String),
}

/// Exact mixed-state representation of a set of labeled qubits.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    qubit_order: Vec<QubitLabel>,
    /// Row-major, dim x dim with dim = 2^n.
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// |0...0><0...0| on `n` qubits labeled `q0..qn-1`, subject to the
    /// default cap.
    pub fn new_register(n: usize) -> Result<DensityMatrix, EngineError> {
        Self::new_register_with_cap(n, DEFAULT_QUBIT_CAP)
    }

    pub fn new_register_with_cap(n: usize, cap: usize) -> Result<DensityMatrix, EngineError> {
        let labels: Vec<QubitLabel> = (0..n as u64).map(QubitLabel).collect();
        Self::zero_state_with_cap(&labels, cap)
    }

    /// |0...0><0...0| over the given labels.
    pub fn zero_state(labels: &[QubitLabel]) -> Result<DensityMatrix, EngineError> {
        Self::zero_state_with_cap(labels, DEFAULT_QUBIT_CAP)
    }

    pub fn zero_state_with_cap(
        labels: &[QubitLabel],
        cap: usize,
    ) -> Result<DensityMatrix, EngineError> {
        if labels.is_empty() {
            return Err(EngineError::Shape(
                "register needs at least one qubit".into(),
            ));
        }
        if labels.len() > cap {
            return Err(EngineError::ResourceLimit {
                requested: labels.len(),
                cap,
            });
        }
        Self::check_distinct(labels)?;
        let dim = 1usize << labels.len();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix {
            qubit_order: labels.to_vec(),
            data,
        })
    }

    /// The trivial zero-qubit state (a 1x1 unit matrix); placeholder carried
    /// by responses that deliver no qubits.
    pub fn scalar() -> DensityMatrix {
        DensityMatrix {
            qubit_order: Vec::new(),
            data: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// |psi><psi| for a pure state over the given labels.
    pub fn from_pure(
        labels: &[QubitLabel],
        psi: &StateVector,
    ) -> Result<DensityMatrix, EngineError> {
        if labels.len() != psi.n_qubits() {
            return Err(EngineError::Shape(format!(
                "{} labels for a {}-qubit state",
                labels.len(),
                psi.n_qubits()
            )));
        }
        Self::check_distinct(labels)?;
        let amps = psi.amplitudes();
        let dim = amps.len();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = amps[r] * amps[c].conj();
            }
        }
        Ok(DensityMatrix {
            qubit_order: labels.to_vec(),
            data,
        })
    }

    /// Werner pair F |Phi+><Phi+| + (1-F)/3 (|Phi-><Phi-| + |Psi+><Psi+| + |Psi-><Psi-|).
    pub fn werner_pair(labels: [QubitLabel; 2], f: f64) -> Result<DensityMatrix, EngineError> {
        NoiseChannel::WernerSource { f_link: f }.validate()?;
        Self::check_distinct(&labels)?;
        let w = (1.0 - f) / 3.0;
        let corner = Complex64::new((f - w) / 2.0, 0.0);
        let edge = Complex64::new((f + w) / 2.0, 0.0);
        let mid = Complex64::new(w, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let data = vec![
            edge, z, z, corner, //
            z, mid, z, z, //
            z, z, mid, z, //
            corner, z, z, edge,
        ];
        Ok(DensityMatrix {
            qubit_order: labels.to_vec(),
            data,
        })
    }

    fn check_distinct(labels: &[QubitLabel]) -> Result<(), EngineError> {
        for (i, a) in labels.iter().enumerate() {
            if labels[i + 1..].contains(a) {
                return Err(EngineError::Address(format!("duplicate qubit label {a}")));
            }
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.qubit_order.len()
    }

    pub fn dim(&self) -> usize {
        1usize << self.qubit_order.len()
    }

    pub fn qubit_order(&self) -> &[QubitLabel] {
        &self.qubit_order
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    fn position(&self, q: QubitLabel) -> Result<usize, EngineError> {
        self.qubit_order
            .iter()
            .position(|&l| l == q)
            .ok_or_else(|| EngineError::Address(format!("unknown qubit label {q}")))
    }

    fn mask(&self, pos: usize) -> usize {
        1usize << (self.n_qubits() - 1 - pos)
    }

    /// rho' = U rho U-dagger.
    pub fn apply_gate(&self, g: &GateOp<QubitLabel>) -> Result<DensityMatrix, EngineError> {
        let mut out = self.clone();
        match g.kind.arity() {
            1 => {
                let p = self.position(g.targets[0])?;
                out.apply1_inplace(g.kind, p);
            }
            2 => {
                let p1 = self.position(g.targets[0])?;
                let p2 = self.position(g.targets[1])?;
                out.apply2_inplace(g.kind, p1, p2);
            }
            _ => unreachable!(),
        }
        Ok(out.renormalized())
    }

    fn apply1_inplace(&mut self, kind: GateKind, pos: usize) {
        let u = kind.matrix1();
        let dim = self.dim();
        let m = self.mask(pos);
        // left multiply by U (rows)
        for i in 0..dim {
            if i & m == 0 {
                let j = i | m;
                for c in 0..dim {
                    let a = self.data[i * dim + c];
                    let b = self.data[j * dim + c];
                    self.data[i * dim + c] = u[0][0] * a + u[0][1] * b;
                    self.data[j * dim + c] = u[1][0] * a + u[1][1] * b;
                }
            }
        }
        // right multiply by U-dagger (columns)
        for i in 0..dim {
            if i & m == 0 {
                let j = i | m;
                for r in 0..dim {
                    let a = self.data[r * dim + i];
                    let b = self.data[r * dim + j];
                    self.data[r * dim + i] = a * u[0][0].conj() + b * u[0][1].conj();
                    self.data[r * dim + j] = a * u[1][0].conj() + b * u[1][1].conj();
                }
            }
        }
    }

    fn apply2_inplace(&mut self, kind: GateKind, p1: usize, p2: usize) {
        let u = kind.matrix2();
        let dim = self.dim();
        let m1 = self.mask(p1);
        let m2 = self.mask(p2);
        let idx4 = |base: usize| [base, base | m2, base | m1, base | m1 | m2];
        for i in 0..dim {
            if i & m1 == 0 && i & m2 == 0 {
                let rows = idx4(i);
                for c in 0..dim {
                    let old = [
                        self.data[rows[0] * dim + c],
                        self.data[rows[1] * dim + c],
                        self.data[rows[2] * dim + c],
                        self.data[rows[3] * dim + c],
                    ];
                    for r in 0..4 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..4 {
                            acc += u[r][k] * old[k];
                        }
                        self.data[rows[r] * dim + c] = acc;
                    }
                }
            }
        }
        for i in 0..dim {
            if i & m1 == 0 && i & m2 == 0 {
                let cols = idx4(i);
                for r in 0..dim {
                    let old = [
                        self.data[r * dim + cols[0]],
                        self.data[r * dim + cols[1]],
                        self.data[r * dim + cols[2]],
                        self.data[r * dim + cols[3]],
                    ];
                    for c in 0..4 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for k in 0..4 {
                            acc += old[k] * u[c][k].conj();
                        }
                        self.data[r * dim + cols[c]] = acc;
                    }
                }
            }
        }
    }

    /// Apply a completely positive trace-preserving noise map.
    pub fn apply_channel(
        &self,
        channel: NoiseChannel,
        targets: &[QubitLabel],
    ) -> Result<DensityMatrix, EngineError> {
        channel.validate()?;
        if targets.len() != channel.arity() {
            return Err(EngineError::Arity {
                gate: match channel {
                    NoiseChannel::Depolarizing { .. } => "DEPOLARIZING",
                    NoiseChannel::WernerSource { .. } => "WERNER_SOURCE",
                },
                expected: channel.arity(),
                got: targets.len(),
            });
        }
        match channel {
            NoiseChannel::Depolarizing { p } => {
                let q = targets[0];
                let mut out = self.scale(1.0 - p);
                for kind in [GateKind::X, GateKind::Y, GateKind::Z] {
                    let flipped = self.apply_gate(&GateOp::new(kind, vec![q])?)?;
                    out.add_scaled(&flipped, p / 3.0);
                }
                Ok(out.renormalized())
            }
            NoiseChannel::WernerSource { f_link } => {
                let pair = [targets[0], targets[1]];
                Self::check_distinct(&pair)?;
                self.position(pair[0])?;
                self.position(pair[1])?;
                let werner = DensityMatrix::werner_pair(pair, f_link)?;
                let rest: Vec<QubitLabel> = self
                    .qubit_order
                    .iter()
                    .copied()
                    .filter(|l| !pair.contains(l))
                    .collect();
                if rest.is_empty() {
                    return werner.permuted(&self.qubit_order);
                }
                let reduced = self.partial_trace(&rest)?;
                let joined = reduced.tensor(&werner)?;
                joined.permuted(&self.qubit_order)
            }
        }
    }

    fn scale(&self, s: f64) -> DensityMatrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// Strip accumulated floating-point drift off the global scale. Every
    /// operation here is trace-preserving (or renormalizing) in exact
    /// arithmetic, so a trace within 1e-9 of 1 is rounding noise; anything
    /// further off is a real bug and is left for `validate` to reject.
    fn renormalized(mut self) -> DensityMatrix {
        let dim = self.dim();
        let mut tr = 0.0;
        for i in 0..dim {
            tr += self.data[i * dim + i].re;
        }
        if tr > 0.0 && (tr - 1.0).abs() <= 1e-9 && tr != 1.0 {
            let inv = 1.0 / tr;
            for v in &mut self.data {
                *v *= inv;
            }
        }
        self
    }

    fn add_scaled(&mut self, other: &DensityMatrix, s: f64) {
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * s;
        }
    }

    /// Z-basis measurement of one qubit. Returns the outcome, its Born
    /// probability and the renormalized post-measurement state (the measured
    /// qubit stays in the register, collapsed).
    pub fn measure_z(
        &self,
        q: QubitLabel,
        select: OutcomeSelect,
    ) -> Result<(bool, f64, DensityMatrix), EngineError> {
        let pos = self.position(q)?;
        let m = self.mask(pos);
        let dim = self.dim();
        let mut p1 = 0.0;
        for i in 0..dim {
            if i & m != 0 {
                p1 += self.data[i * dim + i].re;
            }
        }
        let p0 = 1.0 - p1;
        let outcome = match select {
            OutcomeSelect::Forced(b) => b,
            OutcomeSelect::Sampled(u) => u >= p0,
            OutcomeSelect::Deterministic => p0 < 1e-15,
        };
        let prob = if outcome { p1 } else { p0 };
        if prob < 1e-15 {
            return Err(EngineError::ImpossibleBranch(prob));
        }
        let mut out = self.clone();
        for r in 0..dim {
            for c in 0..dim {
                let keep = ((r & m != 0) == outcome) && ((c & m != 0) == outcome);
                if keep {
                    out.data[r * dim + c] /= prob;
                } else {
                    out.data[r * dim + c] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Ok((outcome, prob, out.renormalized()))
    }

    /// Reduced state over `keep`, which must be a non-empty subset of the
    /// register. The surviving qubit order preserves this register's order.
    pub fn partial_trace(&self, keep: &[QubitLabel]) -> Result<DensityMatrix, EngineError> {
        if keep.is_empty() {
            return Err(EngineError::Shape(
                "partial trace must keep at least one qubit".into(),
            ));
        }
        Self::check_distinct(keep)?;
        for &q in keep {
            self.position(q)?;
        }
        let kept_positions: Vec<usize> = (0..self.n_qubits())
            .filter(|&p| keep.contains(&self.qubit_order[p]))
            .collect();
        let traced_positions: Vec<usize> = (0..self.n_qubits())
            .filter(|&p| !kept_positions.contains(&p))
            .collect();
        let k = kept_positions.len();
        let t = traced_positions.len();
        let dim = self.dim();
        let out_dim = 1usize << k;
        let mut data = vec![Complex64::new(0.0, 0.0); out_dim * out_dim];

        // expand a k-bit (or t-bit) index into the original n-bit index
        let expand = |bits: usize, positions: &[usize]| -> usize {
            let mut idx = 0usize;
            for (j, &p) in positions.iter().enumerate() {
                if bits & (1 << (positions.len() - 1 - j)) != 0 {
                    idx |= self.mask(p);
                }
            }
            let _ = dim;
            idx
        };

        for r in 0..out_dim {
            let rk = expand(r, &kept_positions);
            for c in 0..out_dim {
                let ck = expand(c, &kept_positions);
                let mut acc = Complex64::new(0.0, 0.0);
                for e in 0..(1usize << t) {
                    let et = expand(e, &traced_positions);
                    acc += self.data[(rk | et) * dim + (ck | et)];
                }
                data[r * out_dim + c] = acc;
            }
        }
        let qubit_order: Vec<QubitLabel> = kept_positions
            .iter()
            .map(|&p| self.qubit_order[p])
            .collect();
        Ok(DensityMatrix { qubit_order, data }.renormalized())
    }

    /// Trace out a single qubit (partial-trace complement).
    pub fn discard(&self, q: QubitLabel) -> Result<DensityMatrix, EngineError> {
        self.position(q)?;
        let keep: Vec<QubitLabel> = self
            .qubit_order
            .iter()
            .copied()
            .filter(|&l| l != q)
            .collect();
        if keep.is_empty() {
            return Err(EngineError::Shape("cannot discard the last qubit".into()));
        }
        self.partial_trace(&keep)
    }

    /// <psi| rho |psi> for a normalized pure target. Target qubit `k`
    /// corresponds to position `k` of this register's qubit order.
    pub fn fidelity(&self, target: &StateVector) -> Result<f64, EngineError> {
        if target.dim() != self.dim() {
            return Err(EngineError::Shape(format!(
                "target dimension {} does not match state dimension {}",
                target.dim(),
                self.dim()
            )));
        }
        let norm: f64 = target.amplitudes().iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(EngineError::NotNormalized(norm));
        }
        let dim = self.dim();
        let amps = target.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                acc += amps[r].conj() * self.data[r * dim + c] * amps[c];
            }
        }
        if acc.im.abs() > 1e-12 {
            return Err(EngineError::Invariant(format!(
                "fidelity has imaginary part {:.3e}",
                acc.im
            )));
        }
        Ok(acc.re)
    }

    /// Von Neumann entropy in bits: -sum lambda log2 lambda, with
    /// eigenvalues clamped into [0,1] against rounding drift (negatives in
    /// [-1e-10, 0) count as 0).
    pub fn entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .map(|l| {
                let l = l.min(1.0);
                if l <= 0.0 {
                    0.0
                } else {
                    -l * l.log2()
                }
            })
            .sum()
    }

    /// Real eigenvalue spectrum (the matrix is Hermitian by invariant).
    pub fn eigenvalues(&self) -> Vec<f64> {
        eig::hermitian_eigenvalues(&self.data, self.dim())
    }

    /// Kronecker composition; qubit orders concatenate.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix, EngineError> {
        let mut qubit_order = self.qubit_order.clone();
        qubit_order.extend_from_slice(&other.qubit_order);
        Self::check_distinct(&qubit_order)?;
        let d1 = self.dim();
        let d2 = other.dim();
        let dim = d1 * d2;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r1 in 0..d1 {
            for c1 in 0..d1 {
                let a = self.data[r1 * d1 + c1];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for r2 in 0..d2 {
                    for c2 in 0..d2 {
                        data[(r1 * d2 + r2) * dim + (c1 * d2 + c2)] = a * other.data[r2 * d2 + c2];
                    }
                }
            }
        }
        Ok(DensityMatrix { qubit_order, data }.renormalized())
    }

    /// Reorder the tensor factors to `new_order` (a permutation of the
    /// current qubit order).
    pub fn permuted(&self, new_order: &[QubitLabel]) -> Result<DensityMatrix, EngineError> {
        if new_order.len() != self.n_qubits() {
            return Err(EngineError::Shape("permutation length mismatch".into()));
        }
        Self::check_distinct(new_order)?;
        let old_pos: Vec<usize> = new_order
            .iter()
            .map(|&q| self.position(q))
            .collect::<Result<_, _>>()?;
        let n = self.n_qubits();
        let dim = self.dim();
        let remap = |idx: usize| -> usize {
            let mut out = 0usize;
            for (newp, &oldp) in old_pos.iter().enumerate() {
                if idx & (1 << (n - 1 - newp)) != 0 {
                    out |= self.mask(oldp);
                }
            }
            out
        };
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            let ro = remap(r);
            for c in 0..dim {
                data[r * dim + c] = self.data[ro * dim + remap(c)];
            }
        }
        Ok(DensityMatrix {
            qubit_order: new_order.to_vec(),
            data,
        })
    }

    /// Same state under new qubit labels (positional).
    pub fn relabeled(&self, labels: &[QubitLabel]) -> DensityMatrix {
        assert_eq!(labels.len(), self.n_qubits(), "label count mismatch");
        DensityMatrix {
            qubit_order: labels.to_vec(),
            data: self.data.clone(),
        }
    }

    /// Check trace, Hermiticity and (for small dimensions) positivity.
    pub fn validate(&self) -> Result<(), EngineError> {
        let dim = self.dim();
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            tr += self.data[i * dim + i];
        }
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(EngineError::Invariant(format!("trace {tr} differs from 1")));
        }
        for r in 0..dim {
            for c in r..dim {
                let d = self.data[r * dim + c] - self.data[c * dim + r].conj();
                if d.norm() > 1e-12 {
                    return Err(EngineError::Invariant(format!(
                        "not Hermitian at ({r},{c}): deviation {:.3e}",
                        d.norm()
                    )));
                }
            }
        }
        if dim <= PSD_EIG_MAX_DIM {
            let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
            if min < -1e-10 {
                return Err(EngineError::Invariant(format!(
                    "minimum eigenvalue {min:.3e} below -1e-10"
                )));
            }
        } else if !eig::psd_by_cholesky(&self.data, dim, 1e-10) {
            return Err(EngineError::Invariant(
                "state is not positive semidefinite within 1e-10".into(),
            ));
        }
        Ok(())
    }

    /// Entrywise maximum absolute difference; both states must share the
    /// same qubit order.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64, EngineError> {
        if self.qubit_order != other.qubit_order {
            return Err(EngineError::Shape("qubit orders differ".into()));
        }
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// Trace distance (1/2)||a - b||_1 between equally sized states, compared by
/// tensor position.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, EngineError> {
    if a.dim() != b.dim() {
        return Err(EngineError::Shape(format!(
            "dimension mismatch {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let dim = a.dim();
    let diff: Vec<Complex64> = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| x - y)
        .collect();
    let eigs = eig::hermitian_eigenvalues(&diff, dim);
    Ok(0.5 * eigs.iter().map(|l| l.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests;
