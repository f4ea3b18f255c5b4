//! Jordan–Wigner statevectors over interleaved spin-orbital qubits
//! (α0, β0, α1, β1, …): spin orbital (p, σ) lives on qubit 2p + σ.

use num_complex::Complex64;

use crate::fci::FciSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub n_orb: usize,
    pub amplitudes: Vec<Complex64>,
}

#[inline]
pub fn qubit(orb: usize, beta: bool) -> usize {
    2 * orb + beta as usize
}

/// Applies a_q (create = false) or a†_q (create = true) to basis state `b`.
#[inline]
pub fn apply_ladder(b: u64, q: usize, create: bool) -> Option<(u64, f64)> {
    let occupied = b & (1 << q) != 0;
    if occupied == create {
        return None;
    }
    let sign = if (b & ((1u64 << q) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    Some((b ^ (1 << q), sign))
}

/// Applies a product of ladder operators, rightmost first.
pub fn apply_string(b: u64, ops: &[(usize, bool)]) -> Option<(u64, f64)> {
    let mut state = b;
    let mut sign = 1.0;
    for &(q, create) in ops.iter().rev() {
        let (s, sg) = apply_ladder(state, q, create)?;
        state = s;
        sign *= sg;
    }
    Some((state, sign))
}

/// Spin strings (α, β) of an interleaved basis state.
pub fn split_spins(b: u64, n_orb: usize) -> (u64, u64) {
    let mut a = 0u64;
    let mut c = 0u64;
    for p in 0..n_orb {
        if b & (1 << (2 * p)) != 0 {
            a |= 1 << p;
        }
        if b & (1 << (2 * p + 1)) != 0 {
            c |= 1 << p;
        }
    }
    (a, c)
}

pub fn join_spins(alpha: u64, beta: u64, n_orb: usize) -> u64 {
    let mut b = 0u64;
    for p in 0..n_orb {
        if alpha & (1 << p) != 0 {
            b |= 1 << (2 * p);
        }
        if beta & (1 << p) != 0 {
            b |= 1 << (2 * p + 1);
        }
    }
    b
}

/// Sign relating the interleaved product of creators to the α-then-β one:
/// (−1)^{#(β at p, α at q) with p < q}.
pub fn reorder_sign(alpha: u64, beta: u64) -> f64 {
    let mut inversions = 0u32;
    let mut bits = alpha;
    while bits != 0 {
        let q = bits.trailing_zeros();
        inversions += (beta & ((1u64 << q) - 1)).count_ones();
        bits &= bits - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// a†_{aα} a†_{aβ} a_{iβ} a_{iα}.
pub fn pair_excitation(i: usize, a: usize) -> [(usize, bool); 4] {
    [
        (qubit(a, false), true),
        (qubit(a, true), true),
        (qubit(i, true), false),
        (qubit(i, false), false),
    ]
}

impl Statevector {
    pub fn basis_state(n_orb: usize, b: u64) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << (2 * n_orb)];
        amplitudes[b as usize] = Complex64::new(1.0, 0.0);
        Statevector { n_orb, amplitudes }
    }

    /// Closed-shell reference with the lowest `n_pairs` orbitals doubly occupied.
    pub fn hartree_fock(n_orb: usize, n_pairs: usize) -> Self {
        Self::basis_state(n_orb, (1u64 << (2 * n_pairs)) - 1)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Σ_k coef_k · (string_k) |ψ⟩ for ladder-operator strings.
    pub fn apply_operator_sum(&self, terms: &[(f64, Vec<(usize, bool)>)]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        for (b, amp) in self.amplitudes.iter().enumerate() {
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            for (coef, ops) in terms {
                if let Some((t, sign)) = apply_string(b as u64, ops) {
                    out[t as usize] += amp * (coef * sign);
                }
            }
        }
        out
    }

    /// exp(A)|ψ⟩ for the anti-Hermitian operator A = Σ coef·string, by a
    /// Taylor series on 2^s scaled steps.
    pub fn apply_exponential(&mut self, terms: &[(f64, Vec<(usize, bool)>)]) {
        let scale: f64 = terms.iter().map(|(c, _)| c.abs()).sum();
        let mut steps = 1usize;
        while scale / steps as f64 > 0.5 {
            steps *= 2;
        }
        let scaled: Vec<(f64, Vec<(usize, bool)>)> = terms
            .iter()
            .map(|(c, o)| (c / steps as f64, o.clone()))
            .collect();
        for _ in 0..steps {
            let mut result = self.amplitudes.clone();
            let mut term = self.clone();
            for k in 1..=30 {
                let next = term.apply_operator_sum(&scaled);
                let inv = 1.0 / k as f64;
                let mut size = 0.0f64;
                for (t, n) in term.amplitudes.iter_mut().zip(next) {
                    *t = n * inv;
                    size = size.max(t.norm());
                }
                for (r, t) in result.iter_mut().zip(&term.amplitudes) {
                    *r += t;
                }
                if size < 1e-17 {
                    break;
                }
            }
            self.amplitudes = result;
        }
    }

    /// Amplitudes as a CI vector in `space` (α-then-β ordering). Weight
    /// outside the (nα, nβ) sector is returned separately.
    pub fn to_ci(&self, space: &FciSpace) -> (Vec<Complex64>, f64) {
        let mut ci = vec![Complex64::new(0.0, 0.0); space.dim()];
        let mut outside = 0.0;
        for (b, amp) in self.amplitudes.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let (a, c) = split_spins(b as u64, self.n_orb);
            if a.count_ones() as usize != space.n_alpha()
                || c.count_ones() as usize != space.n_beta()
            {
                outside += amp.norm_sqr();
                continue;
            }
            ci[space.index(a, c)] = amp * reorder_sign(a, c);
        }
        (ci, outside)
    }

    /// Inverse of [`Statevector::to_ci`].
    pub fn from_ci(space: &FciSpace, ci: &[Complex64]) -> Self {
        let n = space.n_orb;
        let mut sv = Statevector {
            n_orb: n,
            amplitudes: vec![Complex64::new(0.0, 0.0); 1 << (2 * n)],
        };
        for (i, c) in ci.iter().enumerate() {
            let (a, b) = space.determinant(i);
            sv.amplitudes[join_spins(a, b, n) as usize] = c * reorder_sign(a, b);
        }
        sv
    }
}

/// Generator T − T† for pair amplitudes given as (i, a, t).
pub fn upccd_generator(t: &[(usize, usize, f64)]) -> Vec<(f64, Vec<(usize, bool)>)> {
    let mut terms = Vec::with_capacity(2 * t.len());
    for &(i, a, v) in t {
        if v == 0.0 {
            continue;
        }
        terms.push((v, pair_excitation(i, a).to_vec()));
        terms.push((-v, pair_excitation(a, i).to_vec()));
    }
    terms
}

/// e^{T−T†}|Φ0⟩ with the lowest `n_pairs` orbitals doubly occupied in Φ0.
pub fn apply_upccd(n_orb: usize, n_pairs: usize, t: &[(usize, usize, f64)]) -> Statevector {
    let mut sv = Statevector::hartree_fock(n_orb, n_pairs);
    let gen = upccd_generator(t);
    if !gen.is_empty() {
        sv.apply_exponential(&gen);
    }
    sv
}
