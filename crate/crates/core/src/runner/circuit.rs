//! Three-qubit circuits of CZ and single-qubit gates.
//!
//! Gates follow the swapped-basis conventions of the native CᵏZ gates:
//! CZ = 2|00⟩⟨00| − I, H = (−|0⟩⟨0| + |0⟩⟨1| + |1⟩⟨0| + |1⟩⟨1|)/√2 and
//! T = exp(iπσ_z/8). The CCZ circuit is the six-CNOT Toffoli-phase network
//! with every CNOT written as H_t·CZ·H_t; the leftover scalar is kept in
//! [`Circuit::global_phase`] so the assembled matrix matches exactly.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    T(usize),
    Tdg(usize),
    Cz(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    /// Applied in order, first gate first.
    pub gates: Vec<Gate>,
    pub global_phase: C64,
}

fn single(g: Gate) -> [[C64; 2]; 2] {
    let z = C64::new(0.0, 0.0);
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    match g {
        Gate::H(_) => [[-h, h], [h, h]],
        Gate::T(_) => [[C64::from_polar(1.0, PI / 8.0), z], [z, C64::from_polar(1.0, -PI / 8.0)]],
        Gate::Tdg(_) => [[C64::from_polar(1.0, -PI / 8.0), z], [z, C64::from_polar(1.0, PI / 8.0)]],
        Gate::Cz(..) => unreachable!("two-qubit gate"),
    }
}

#[inline]
fn bit(x: usize, q: usize, n: usize) -> usize {
    (x >> (n - 1 - q)) & 1
}

/// Embeds a single-qubit gate acting on qubit `q` of an n-qubit register.
fn embed_single(m: [[C64; 2]; 2], q: usize, n: usize) -> Array2<C64> {
    let dim = 1 << n;
    let mask = 1 << (n - 1 - q);
    let mut out = Array2::zeros((dim, dim));
    for x in 0..dim {
        for y in [x & !mask, x | mask] {
            out[[x, y]] = m[bit(x, q, n)][bit(y, q, n)];
        }
    }
    out
}

/// Embeds a 4×4 two-qubit operator on qubits (a, b), a as the high bit.
fn embed_pair(m: &Array2<C64>, a: usize, b: usize, n: usize) -> Array2<C64> {
    let dim = 1 << n;
    let (ma, mb) = (1 << (n - 1 - a), 1 << (n - 1 - b));
    let mut out = Array2::zeros((dim, dim));
    for x in 0..dim {
        let rest = x & !(ma | mb);
        let xi = 2 * bit(x, a, n) + bit(x, b, n);
        for yi in 0..4 {
            let y = rest | if yi & 2 != 0 { ma } else { 0 } | if yi & 1 != 0 { mb } else { 0 };
            out[[x, y]] = m[[xi, yi]];
        }
    }
    out
}

/// Six-CZ decomposition of 2|000⟩⟨000| − I on qubits (0, 1, 2).
pub fn ccz_decomposition() -> Circuit {
    let (a, b, c) = (0, 1, 2);
    let cnot = |ctrl: usize, tgt: usize| [Gate::H(tgt), Gate::Cz(ctrl, tgt), Gate::H(tgt)];
    let mut gates = Vec::new();
    gates.extend(cnot(b, c));
    gates.push(Gate::Tdg(c));
    gates.extend(cnot(a, c));
    gates.push(Gate::T(c));
    gates.extend(cnot(b, c));
    gates.push(Gate::Tdg(c));
    gates.extend(cnot(a, c));
    gates.extend([Gate::T(b), Gate::T(c)]);
    gates.extend(cnot(a, b));
    gates.extend([Gate::T(a), Gate::Tdg(b)]);
    gates.extend(cnot(a, b));
    // Swapped-basis T gates differ from the textbook ones by e^{iπ/8} each,
    // and the conjugated CCZ carries an extra sign.
    Circuit { n_qubits: 3, gates, global_phase: -C64::from_polar(1.0, PI / 8.0) }
}

impl Circuit {
    pub fn cz_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cz(..))).count()
    }

    /// Matrix of the circuit with every CZ replaced by the 4×4 operator `cz`.
    pub fn assemble(&self, cz: &Array2<C64>) -> Result<Array2<C64>> {
        if cz.dim() != (4, 4) {
            return Err(Error::Config(format!("CZ operator must be 4×4, got {:?}", cz.dim())));
        }
        let n = self.n_qubits;
        let dim = 1 << n;
        let mut u = Array2::<C64>::eye(dim);
        for &g in &self.gates {
            let step = match g {
                Gate::Cz(p, q) => {
                    if p >= n || q >= n || p == q {
                        return Err(Error::Config(format!("invalid CZ placement ({p}, {q})")));
                    }
                    embed_pair(cz, p, q, n)
                }
                Gate::H(q) | Gate::T(q) | Gate::Tdg(q) => {
                    if q >= n {
                        return Err(Error::Config(format!("qubit {q} outside a {n}-qubit register")));
                    }
                    embed_single(single(g), q, n)
                }
            };
            u = step.dot(&u);
        }
        Ok(u.mapv(|v| v * self.global_phase))
    }
}

/// Largest entrywise deviation between two operators.
pub fn max_deviation(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
