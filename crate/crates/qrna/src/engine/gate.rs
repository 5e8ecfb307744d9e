//! Gate set shared by the density-matrix backend and the circuit forms of
//! the request model.

use num_complex::Complex64;

use super::EngineError;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The fixed gate set. Sufficient for Bell/GHZ/cluster construction,
/// purification circuits and teleportation corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Cnot,
    Cz,
}

impl GateKind {
    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Cz => 2,
            _ => 1,
        }
    }

    /// Canonical token used by the wire grammar.
    pub fn token(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::S => "S",
            GateKind::T => "T",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
        }
    }

    /// Parse a wire token back into a gate kind.
    pub fn from_token(tok: &str) -> Option<GateKind> {
        Some(match tok {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "S" => GateKind::S,
            "T" => GateKind::T,
            "CNOT" => GateKind::Cnot,
            "CZ" => GateKind::Cz,
            _ => return None,
        })
    }

    /// 2x2 unitary for single-qubit kinds.
    pub fn matrix1(self) -> [[Complex64; 2]; 2] {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            GateKind::H => [[h, h], [h, -h]],
            GateKind::X => [[z, one], [one, z]],
            GateKind::Y => [[z, -i], [i, z]],
            GateKind::Z => [[one, z], [z, -one]],
            GateKind::S => [[one, z], [z, i]],
            GateKind::T => [
                [one, z],
                [z, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
            ],
            _ => panic!("matrix1 on two-qubit gate {self:?}"),
        }
    }

    /// 4x4 unitary for two-qubit kinds, basis order |q1 q2> = |00>,|01>,|10>,|11>
    /// with the first target as the high bit (control for CNOT).
    pub fn matrix2(self) -> [[Complex64; 4]; 4] {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match self {
            GateKind::Cnot => [
                [one, z, z, z],
                [z, one, z, z],
                [z, z, z, one],
                [z, z, one, z],
            ],
            GateKind::Cz => [
                [one, z, z, z],
                [z, one, z, z],
                [z, z, one, z],
                [z, z, z, -one],
            ],
            _ => panic!("matrix2 on single-qubit gate {self:?}"),
        }
    }
}

/// A gate application, parameterized over the qubit identifier type: the
/// engine applies gates over [`super::QubitLabel`]s while request circuits
/// reference virtual addresses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GateOp<I> {
    pub kind: GateKind,
    pub targets: Vec<I>,
}

impl<I: Eq + Clone> GateOp<I> {
    pub fn new(kind: GateKind, targets: Vec<I>) -> Result<Self, EngineError> {
        if targets.len() != kind.arity() {
            return Err(EngineError::Arity {
                gate: kind.token(),
                expected: kind.arity(),
                got: targets.len(),
            });
        }
        if kind.arity() == 2 && targets[0] == targets[1] {
            return Err(EngineError::DuplicateTargets(kind.token()));
        }
        Ok(GateOp { kind, targets })
    }

    pub fn map<J, F: FnMut(&I) -> J>(&self, mut f: F) -> GateOp<J> {
        GateOp {
            kind: self.kind,
            targets: self.targets.iter().map(&mut f).collect(),
        }
    }
}

/// Convenience constructors used all over the tests and examples.
pub fn h<I: Eq + Clone>(q: I) -> GateOp<I> {
    GateOp::new(GateKind::H, vec![q]).unwrap()
}
pub fn x<I: Eq + Clone>(q: I) -> GateOp<I> {
    GateOp::new(GateKind::X, vec![q]).unwrap()
}
pub fn y<I: Eq + Clone>(q: I) -> GateOp<I> {
    GateOp::new(GateKind::Y, vec![q]).unwrap()
}
pub fn z<I: Eq + Clone>(q: I) -> GateOp<I> {
    GateOp::new(GateKind::Z, vec![q]).unwrap()
}
pub fn cnot<I: Eq + Clone>(c: I, t: I) -> GateOp<I> {
    GateOp::new(GateKind::Cnot, vec![c, t]).unwrap()
}
pub fn cz<I: Eq + Clone>(a: I, b: I) -> GateOp<I> {
    GateOp::new(GateKind::Cz, vec![a, b]).unwrap()
}
