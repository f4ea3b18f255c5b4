//! Occupation strings for one spin and their single-excitation tables.

/// One E_kl-type move `a†_k a_l` applied to a string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excitation {
    /// Composite pair index k·n + l.
    pub pair: u32,
    /// Index of the resulting string.
    pub target: u32,
    pub sign: f64,
}

/// All strings of `n_elec` electrons in `n_orb` orbitals, in ascending
/// bit order, with their excitation tables (diagonal moves included).
#[derive(Debug, Clone)]
pub struct StringSet {
    pub n_orb: usize,
    pub n_elec: usize,
    pub strings: Vec<u64>,
    pub excitations: Vec<Vec<Excitation>>,
    binom: Vec<Vec<u64>>,
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u64 = 1;
    for i in 0..k {
        r = r * (n - i) as u64 / (i + 1) as u64;
    }
    r
}

/// Sign of moving an operator past the occupied orbitals below `orb`.
#[inline]
pub fn parity_below(s: u64, orb: usize) -> f64 {
    if (s & ((1u64 << orb) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// a†_k a_l |s⟩ = sign |s'⟩, or None if it vanishes.
#[inline]
pub fn excite(s: u64, k: usize, l: usize) -> Option<(u64, f64)> {
    if s & (1 << l) == 0 {
        return None;
    }
    let mid = s ^ (1 << l);
    if mid & (1 << k) != 0 {
        return None;
    }
    let sign = parity_below(s, l) * parity_below(mid, k);
    Some((mid | (1 << k), sign))
}

impl StringSet {
    pub fn new(n_orb: usize, n_elec: usize) -> Self {
        assert!(n_orb <= 63 && n_elec <= n_orb);
        let binom: Vec<Vec<u64>> = (0..=n_orb)
            .map(|n| (0..=n_elec + 1).map(|k| binomial(n, k)).collect())
            .collect();
        let count = binomial(n_orb, n_elec) as usize;
        let mut strings = Vec::with_capacity(count);
        if n_elec == 0 {
            strings.push(0);
        } else {
            let mut s: u64 = (1u64 << n_elec) - 1;
            let limit = 1u64 << n_orb;
            while s < limit {
                strings.push(s);
                // next bit permutation (Gosper)
                let c = s & s.wrapping_neg();
                let r = s + c;
                s = (((r ^ s) >> 2) / c) | r;
            }
        }
        let mut set = StringSet {
            n_orb,
            n_elec,
            strings,
            excitations: Vec::new(),
            binom,
        };
        set.excitations = set
            .strings
            .iter()
            .map(|&s| {
                let mut ex = Vec::new();
                for l in 0..n_orb {
                    if s & (1 << l) == 0 {
                        continue;
                    }
                    for k in 0..n_orb {
                        if let Some((t, sign)) = excite(s, k, l) {
                            ex.push(Excitation {
                                pair: (k * n_orb + l) as u32,
                                target: set.index(t) as u32,
                                sign,
                            });
                        }
                    }
                }
                ex
            })
            .collect();
        set
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// Position of `s` in the ascending list (colexicographic rank).
    pub fn index(&self, s: u64) -> usize {
        let mut rank = 0u64;
        let mut seen = 0usize;
        let mut bits = s;
        while bits != 0 {
            let p = bits.trailing_zeros() as usize;
            seen += 1;
            rank += self.binom[p][seen];
            bits &= bits - 1;
        }
        rank as usize
    }
}

/// Occupied orbital indices of a string, ascending.
pub fn occupied(s: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(s.count_ones() as usize);
    let mut bits = s;
    while bits != 0 {
        out.push(bits.trailing_zeros() as usize);
        bits &= bits - 1;
    }
    out
}
