//! Hermitian eigenvalues by cyclic Jacobi rotations, plus a Cholesky-based
//! positivity test for large matrices.
//!
//! Jacobi is unconditionally convergent and keeps full accuracy on the
//! highly degenerate spectra this simulator produces (rank-one projectors,
//! repeated Werner weights), where shift-based tridiagonal solvers can fall
//! over.

use num_complex::Complex64;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of a Hermitian matrix given in row-major order. The
/// imaginary parts of the diagonal are assumed to be rounding noise.
pub fn hermitian_eigenvalues(data: &[Complex64], dim: usize) -> Vec<f64> {
    assert_eq!(data.len(), dim * dim, "matrix shape");
    if dim == 1 {
        return vec![data[0].re];
    }
    let mut a = data.to_vec();
    let scale: f64 = a
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let tol = scale * 1e-30;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..dim {
            for q in p + 1..dim {
                off += a[p * dim + q].norm_sqr();
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                rotate(&mut a, dim, p, q);
            }
        }
    }
    (0..dim).map(|i| a[i * dim + i].re).collect()
}

/// Zero out the (p,q) element with a unitary plane rotation A <- J' A J.
fn rotate(a: &mut [Complex64], dim: usize, p: usize, q: usize) {
    let apq = a[p * dim + q];
    let m = apq.norm();
    if m < 1e-300 {
        return;
    }
    let phase = apq / m; // e^{i phi}
    let alpha = a[p * dim + p].re;
    let gamma = a[q * dim + q].re;
    let tau = (gamma - alpha) / (2.0 * m);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J differs from the identity in the (p,q) plane:
    //   [ c            s          ]
    //   [ -s e^{-iphi} c e^{-iphi}]
    let e_neg = phase.conj();
    let e_pos = phase;

    // columns: A <- A J
    for r in 0..dim {
        let arp = a[r * dim + p];
        let arq = a[r * dim + q];
        a[r * dim + p] = arp * c - arq * (e_neg * s);
        a[r * dim + q] = arp * s + arq * (e_neg * c);
    }
    // rows: A <- J' A
    for r in 0..dim {
        let apr = a[p * dim + r];
        let aqr = a[q * dim + r];
        a[p * dim + r] = apr * c - aqr * (e_pos * s);
        a[q * dim + r] = apr * s + aqr * (e_pos * c);
    }
    // clean the rotated pair against rounding
    a[p * dim + q] = Complex64::new(0.0, 0.0);
    a[q * dim + p] = Complex64::new(0.0, 0.0);
    a[p * dim + p] = Complex64::new(a[p * dim + p].re, 0.0);
    a[q * dim + q] = Complex64::new(a[q * dim + q].re, 0.0);
}

/// True if the Hermitian matrix plus `shift` on the diagonal admits a
/// Cholesky factorization, i.e. its minimum eigenvalue exceeds roughly
/// `-shift`. Cheap enough for large registers where a full spectrum is not.
pub fn psd_by_cholesky(data: &[Complex64], dim: usize, shift: f64) -> bool {
    assert_eq!(data.len(), dim * dim, "matrix shape");
    let mut l = vec![Complex64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        let mut d = data[j * dim + j].re + shift;
        for k in 0..j {
            d -= l[j * dim + k].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let root = d.sqrt();
        l[j * dim + j] = Complex64::new(root, 0.0);
        for i in j + 1..dim {
            let mut v = data[i * dim + j];
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k].conj();
            }
            l[i * dim + j] = v / root;
        }
    }
    true
}
