//! Block encodings of the spectral amplitudes and the singular-value
//! transformation circuit that applies a phase-factor polynomial to
//! them.
//!
//! Both encodings place the system on qubits [0, n) and ancillas above,
//! so the encoded block is the top-left corner of the full unitary.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::{apply_circuit, Circuit, Gate, StateVector};
use crate::spectral::MaxVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingStyle {
    /// One ancilla; the corner equals diag(c_x) exactly. Costs one
    /// conditioned reflection per basis state, so it is the simple
    /// reference, not the scalable construction.
    Dilation,
    /// Prepare-and-compare construction from the spectrum's preparation
    /// unitary: n+2 ancillas, corner diag(c_x / 2).
    Prepared,
}

#[derive(Debug, Clone)]
pub struct BlockEncoding {
    pub circuit: Circuit,
    pub n_sys: usize,
    /// Ancilla qubits that must start and be post-selected at |0>.
    pub ancillas: Vec<usize>,
    /// Corner = diag(scale * c_x).
    pub scale: f64,
}

impl BlockEncoding {
    pub fn total_qubits(&self) -> usize {
        self.circuit.qubits
    }
}

/// Reference encoding: for every basis state x, a reflection
/// [[c, s], [s, -c]] on the ancilla conditioned on the system being x.
pub fn dilation_encoding(v: &MaxVector) -> BlockEncoding {
    let n = v.n_qubits();
    let anc = n;
    let mut circuit = Circuit::new(n + 1);
    for (x, &c) in v.amplitudes().iter().enumerate() {
        let s = (1.0 - c * c).max(0.0).sqrt();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-c, 0.0),
            ],
        );
        let conditions = (0..n).map(|i| (i, x >> i & 1 == 1)).collect();
        circuit.push(Gate::Unitary {
            targets: vec![anc],
            conditions,
            matrix: std::sync::Arc::new(m),
        });
    }
    BlockEncoding { circuit, n_sys: n, ancillas: vec![anc], scale: 1.0 }
}

/// Prepare-and-compare encoding. Registers: system s on [0, n), a
/// preparation register p on [n, 2n), a mid ancilla m at 2n, a flag f
/// at 2n+1. The flag splits into a branch that leaves the comparison
/// intact and one that erases it, and the interference of the two puts
/// <x| v > / 2 = c_x / 2 on the all-zero ancilla corner.
pub fn prepared_encoding(v: &MaxVector) -> Result<BlockEncoding> {
    let n = v.n_qubits();
    let prep = crate::spectral::complete_unitary(v)?;
    let u_dag = prep.to_complex().adjoint();

    let p0 = n;
    let m = 2 * n;
    let f = 2 * n + 1;
    let mut circuit = Circuit::new(2 * n + 2);

    circuit.push(Gate::H(f));
    circuit.push(Gate::ControlledX { target: m, conditions: vec![(f, true)] });
    for i in 0..n {
        circuit.push(Gate::ControlledX { target: p0 + i, conditions: vec![(i, true)] });
    }
    // Comparator core: on the m=1 branch the copy is undone, on the
    // m=0 branch the inverse preparation maps |x> to c_x |0> + rest.
    circuit.push(Gate::H(m));
    for i in 0..n {
        circuit.push(Gate::ControlledX {
            target: p0 + i,
            conditions: vec![(m, true), (i, true)],
        });
    }
    circuit.push(Gate::Unitary {
        targets: (p0..p0 + n).collect(),
        conditions: vec![(m, false)],
        matrix: std::sync::Arc::new(u_dag),
    });
    circuit.push(Gate::H(m));
    circuit.push(Gate::H(f));

    let ancillas = (n..2 * n + 2).collect();
    Ok(BlockEncoding { circuit, n_sys: n, ancillas, scale: 0.5 })
}

pub fn spectral_block_encoding(v: &MaxVector, style: EncodingStyle) -> Result<BlockEncoding> {
    match style {
        EncodingStyle::Dilation => Ok(dilation_encoding(v)),
        EncodingStyle::Prepared => prepared_encoding(v),
    }
}

/// Reads the encoded corner by driving each system basis state through
/// the circuit with ancillas at |0> and collecting the ancilla-zero
/// amplitudes. Column x of the result is the image of |x>.
pub fn extract_block(circuit: &Circuit, n_sys: usize) -> Result<DMatrix<Complex64>> {
    let dim = 1usize << n_sys;
    let mut block = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let mut state = StateVector::zero(circuit.qubits)?;
        if x != 0 {
            let mut amps = vec![Complex64::ZERO; 1 << circuit.qubits];
            amps[x] = Complex64::ONE;
            state = StateVector::from_amplitudes(circuit.qubits, amps)?;
        }
        apply_circuit(&mut state, circuit)?;
        for y in 0..dim {
            block[(y, x)] = state.amplitudes()[y];
        }
    }
    Ok(block)
}

/// Projector-controlled phase: e^{i psi} on the ancillas-all-zero
/// subspace, e^{-i psi} elsewhere, built structurally as flip the
/// signal qubit on all-zero, rotate it, unflip.
fn push_pcp(circuit: &mut Circuit, ancillas: &[usize], signal: usize, psi: f64) {
    let conditions: Vec<(usize, bool)> = ancillas.iter().map(|&q| (q, false)).collect();
    circuit.push(Gate::ControlledX { target: signal, conditions: conditions.clone() });
    circuit.push(Gate::Rz { target: signal, angle: 2.0 * psi });
    circuit.push(Gate::ControlledX { target: signal, conditions });
    // Rz carries e^{-i psi} on |0>; shift it onto the non-zero subspace.
    // Net: zero subspace e^{+i psi}, rest e^{-i psi}.
}

/// The assembled transformation circuit plus the register that must be
/// post-selected at zero for the polynomial block to be the output.
#[derive(Debug, Clone)]
pub struct QsvtCircuit {
    pub circuit: Circuit,
    pub n_sys: usize,
    /// Block-encoding ancillas plus the signal qubit.
    pub projection: Vec<usize>,
}

/// Builds the singular-value transformation of the encoded block for
/// phase factors in the signal-processing convention (`qsp_value`). The
/// corner of the result is P(scale * c_x) on the system.
pub fn assemble_qsvt(be: &BlockEncoding, phases: &[f64]) -> Result<QsvtCircuit> {
    if phases.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two phase factors (degree >= 1)".into(),
        ));
    }
    let d = phases.len() - 1;
    let signal = be.total_qubits();
    let mut circuit = Circuit::new(signal + 1);

    // Convention conversion: the signal-processing phases assume the
    // W(x) signal operator; reflection-form QSVT absorbs pi/4 at the
    // ends, pi/2 inside, and a global i^d.
    let psi = |k: usize| -> f64 {
        let base = phases[k];
        if k == 0 || k == d {
            base - std::f64::consts::FRAC_PI_4
        } else {
            base - std::f64::consts::FRAC_PI_2
        }
    };

    let inverse = be.circuit.inverse();
    for k in (1..=d).rev() {
        push_pcp(&mut circuit, &be.ancillas, signal, psi(k));
        if (d - k) % 2 == 0 {
            circuit.extend(&be.circuit);
        } else {
            circuit.extend(&inverse);
        }
    }
    push_pcp(&mut circuit, &be.ancillas, signal, psi(0));
    circuit.push(Gate::GlobalPhase(d as f64 * std::f64::consts::FRAC_PI_2));

    let mut projection = be.ancillas.clone();
    projection.push(signal);
    Ok(QsvtCircuit { circuit, n_sys: be.n_sys, projection })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsp::{chebyshev_t, find_sign_angles, qsp_value, AngleSearchConfig};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn random_vector(n_entries: usize, seed: u64) -> MaxVector {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n_entries).map(|_| rng.random::<f64>() - 0.5).collect();
        MaxVector::from_amplitudes(&raw).unwrap()
    }

    fn assert_matrix_close(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let mut worst = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        assert!(worst <= tol, "matrices differ by {worst:.3e} > {tol:.1e}");
    }

    #[test]
    fn dilation_corner_is_exactly_the_spectrum() {
        for (entries, seed) in [(4usize, 1u64), (6, 2), (8, 3)] {
            let v = random_vector(entries, seed);
            let be = dilation_encoding(&v);
            let block = extract_block(&be.circuit, be.n_sys).unwrap();
            for x in 0..v.amplitudes().len() {
                for y in 0..v.amplitudes().len() {
                    let want = if x == y { v.amplitudes()[x] } else { 0.0 };
                    assert!((block[(y, x)] - Complex64::new(want, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn prepared_corner_is_half_the_spectrum() {
        for (entries, seed) in [(4usize, 4u64), (6, 5), (8, 6)] {
            let v = random_vector(entries, seed);
            let be = prepared_encoding(&v).unwrap();
            assert_eq!(be.ancillas.len(), v.n_qubits() + 2);
            assert_abs_diff_eq!(be.scale, 0.5);
            let block = extract_block(&be.circuit, be.n_sys).unwrap();
            let dim = 1 << v.n_qubits();
            for x in 0..dim {
                for y in 0..dim {
                    let want = if x == y { v.amplitudes()[x] / 2.0 } else { 0.0 };
                    assert!(
                        (block[(y, x)] - Complex64::new(want, 0.0)).norm() < 1e-8,
                        "entry ({y},{x}) = {} want {want}",
                        block[(y, x)]
                    );
                }
            }
        }
    }

    #[test]
    fn prepared_encoding_calls_the_preparation_once() {
        let v = random_vector(6, 7);
        let be = prepared_encoding(&v).unwrap();
        let unitary_gates = be
            .circuit
            .gates
            .iter()
            .filter(|g| matches!(g, Gate::Unitary { .. }))
            .count();
        assert_eq!(unitary_gates, 1);
    }

    #[test]
    fn zero_phase_qsvt_is_chebyshev_of_the_block() {
        let v = random_vector(4, 8);
        let be = dilation_encoding(&v);
        for d in [1usize, 2, 3, 6, 7] {
            let phases = vec![0.0; d + 1];
            let qsvt = assemble_qsvt(&be, &phases).unwrap();
            let block = extract_block(&qsvt.circuit, qsvt.n_sys).unwrap();
            for x in 0..4 {
                for y in 0..4 {
                    let want = if x == y { chebyshev_t(d, v.amplitudes()[x]) } else { 0.0 };
                    assert!(
                        (block[(y, x)] - Complex64::new(want, 0.0)).norm() < 1e-10,
                        "d={d} entry ({y},{x}) = {} want {want}",
                        block[(y, x)]
                    );
                }
            }
        }
    }

    #[test]
    fn sign_phase_qsvt_matches_scalar_polynomial_on_both_encodings() {
        let v = random_vector(7, 9);
        let set = find_sign_angles(&AngleSearchConfig::new(0.25, 1e-2, 3)).unwrap();
        for style in [EncodingStyle::Dilation, EncodingStyle::Prepared] {
            let be = spectral_block_encoding(&v, style).unwrap();
            let qsvt = assemble_qsvt(&be, &set.phases).unwrap();
            let block = extract_block(&qsvt.circuit, qsvt.n_sys).unwrap();
            let dim = 1 << v.n_qubits();
            for x in 0..dim {
                for y in 0..dim {
                    let want = if x == y {
                        qsp_value(&set.phases, be.scale * v.amplitudes()[x])
                    } else {
                        Complex64::ZERO
                    };
                    assert!(
                        (block[(y, x)] - want).norm() < 1e-8,
                        "style {style:?} entry ({y},{x})"
                    );
                }
            }
        }
    }

    #[test]
    fn qsvt_on_a_generic_encoding_matches_the_singular_value_oracle() {
        // A random unitary is a block encoding of its own (generic,
        // non-normal) corner; the circuit must implement the
        // singular-value transform U P(Sigma) V^dagger.
        let n_total = 3usize;
        let n_sys = 2usize;
        let dim_total = 1usize << n_total;
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let gaussian = DMatrix::from_fn(dim_total, dim_total, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let w = nalgebra::linalg::QR::new(gaussian).q();

        let mut circuit = Circuit::new(n_total);
        circuit.push(Gate::unitary((0..n_total).collect(), w.clone()));
        let be = BlockEncoding {
            circuit,
            n_sys,
            ancillas: vec![2],
            scale: 1.0,
        };

        let dim = 1usize << n_sys;
        let corner = w.view((0, 0), (dim, dim)).into_owned();
        let svd = corner.clone().svd(true, true);
        let u = svd.u.as_ref().unwrap();
        let v_t = svd.v_t.as_ref().unwrap();

        for d in [3usize, 5] {
            let phases = vec![0.0; d + 1];
            let qsvt = assemble_qsvt(&be, &phases).unwrap();
            let block = extract_block(&qsvt.circuit, qsvt.n_sys).unwrap();
            let mut sigma_p = DMatrix::<Complex64>::zeros(dim, dim);
            for i in 0..dim {
                sigma_p[(i, i)] = Complex64::new(chebyshev_t(d, svd.singular_values[i]), 0.0);
            }
            let oracle = u * sigma_p * v_t;
            assert_matrix_close(&block, &oracle, 1e-8);
        }
    }

    #[test]
    fn signal_qubit_returns_to_zero() {
        let v = random_vector(4, 13);
        let be = dilation_encoding(&v);
        let set = find_sign_angles(&AngleSearchConfig::new(0.3, 1e-2, 3)).unwrap();
        let qsvt = assemble_qsvt(&be, &set.phases).unwrap();
        let signal = *qsvt.projection.last().unwrap();

        let mut state = StateVector::zero(qsvt.circuit.qubits).unwrap();
        for q in 0..qsvt.n_sys {
            apply_circuit(&mut state, &{
                let mut c = Circuit::new(qsvt.circuit.qubits);
                c.push(Gate::H(q));
                c
            })
            .unwrap();
        }
        apply_circuit(&mut state, &qsvt.circuit).unwrap();
        let mass_on_one: f64 = state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| i >> signal & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert!(mass_on_one < 1e-20, "signal qubit leaked {mass_on_one}");
    }

    #[test]
    fn degenerate_phase_lists_are_rejected() {
        let v = random_vector(4, 14);
        let be = dilation_encoding(&v);
        assert!(assemble_qsvt(&be, &[0.1]).is_err());
    }
}
