//! Counter-based Philox4x32-10 and the normal draws built on it.
//!
//! Every draw is a pure function of its key and counter, so walkers can be
//! propagated in any order or on any number of threads.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Ten-round Philox4x32 block function.
pub fn philox4x32(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = ctr;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, c[0]);
        let (hi1, lo1) = mulhilo(M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Independent draw families sharing one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    AuxField = 0,
    Overlap = 1,
    Initial = 2,
}

#[inline]
fn unit_open(hi: u32, lo: u32) -> f64 {
    let bits = (((hi as u64) << 32) | lo as u64) >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Seeded source of standard normals addressed by (walker, step, index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalStream {
    key: [u32; 2],
    stream: Stream,
}

impl NormalStream {
    pub fn new(seed: u64, stream: Stream) -> Self {
        NormalStream {
            key: [seed as u32, (seed >> 32) as u32],
            stream,
        }
    }

    fn pair(&self, walker: u64, step: u64, block: u64) -> (f64, f64) {
        let ctr = [
            block as u32,
            step as u32,
            walker as u32,
            (self.stream as u32) << 24 ^ ((walker >> 32) as u32 & 0x00FF_FFFF),
        ];
        let r = philox4x32(ctr, self.key);
        let u1 = unit_open(r[0], r[1]);
        let u2 = unit_open(r[2], r[3]);
        let rad = (-2.0 * u1.ln()).sqrt();
        let th = std::f64::consts::TAU * u2;
        (rad * th.cos(), rad * th.sin())
    }

    /// The normal deviate for one (walker, step, index) address.
    pub fn normal(&self, walker: u64, step: u64, index: u64) -> f64 {
        let (a, b) = self.pair(walker, step, index / 2);
        if index % 2 == 0 {
            a
        } else {
            b
        }
    }

    /// Fills `out[i]` with `normal(walker, step, i)`.
    pub fn fill(&self, walker: u64, step: u64, out: &mut [f64]) {
        for (blk, chunk) in out.chunks_mut(2).enumerate() {
            let (a, b) = self.pair(walker, step, blk as u64);
            chunk[0] = a;
            if chunk.len() > 1 {
                chunk[1] = b;
            }
        }
    }
}
