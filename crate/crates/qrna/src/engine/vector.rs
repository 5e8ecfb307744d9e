//! Pure-state vectors, used for request target states and fidelity checks.

use num_complex::Complex64;

use super::gate::{GateKind, GateOp};
use super::EngineError;

/// A normalized pure state on `n` qubits. Qubit `k` occupies basis-index
/// bit `n-1-k` (the first qubit is the most significant bit).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0...0> on `n` qubits.
    pub fn zero(n: usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits: n, amps }
    }

    /// Build from raw amplitudes; must have power-of-two length and unit norm
    /// within 1e-12.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<StateVector, EngineError> {
        let dim = amps.len();
        if dim == 0 || dim & (dim - 1) != 0 {
            return Err(EngineError::Shape(format!(
                "amplitude vector length {dim} is not a power of two"
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(EngineError::NotNormalized(norm));
        }
        Ok(StateVector {
            n_qubits: dim.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// alpha|0...0> + beta|1...1> on `n` qubits.
    pub fn fanout(alpha: Complex64, beta: Complex64, n: usize) -> Result<StateVector, EngineError> {
        if n == 0 {
            return Err(EngineError::Shape("fanout on zero qubits".into()));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = alpha;
        amps[(1 << n) - 1] = beta;
        StateVector::from_amplitudes(amps)
    }

    /// Apply a gate in place; `positions` index qubits by tensor position.
    pub fn apply_gate(&mut self, g: &GateOp<usize>) -> Result<(), EngineError> {
        for &q in &g.targets {
            if q >= self.n_qubits {
                return Err(EngineError::Address(format!(
                    "qubit position {q} out of range for {}-qubit state",
                    self.n_qubits
                )));
            }
        }
        match g.kind.arity() {
            1 => self.apply1(g.kind, g.targets[0]),
            2 => self.apply2(g.kind, g.targets[0], g.targets[1]),
            _ => unreachable!(),
        }
        Ok(())
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    fn apply1(&mut self, kind: GateKind, q: usize) {
        let u = kind.matrix1();
        let m = self.mask(q);
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let j = i | m;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = u[0][0] * a + u[0][1] * b;
                self.amps[j] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    fn apply2(&mut self, kind: GateKind, q1: usize, q2: usize) {
        let u = kind.matrix2();
        let m1 = self.mask(q1);
        let m2 = self.mask(q2);
        for i in 0..self.amps.len() {
            if i & m1 == 0 && i & m2 == 0 {
                let idx = [i, i | m2, i | m1, i | m1 | m2];
                let old = [
                    self.amps[idx[0]],
                    self.amps[idx[1]],
                    self.amps[idx[2]],
                    self.amps[idx[3]],
                ];
                for r in 0..4 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for c in 0..4 {
                        acc += u[r][c] * old[c];
                    }
                    self.amps[idx[r]] = acc;
                }
            }
        }
    }
}
