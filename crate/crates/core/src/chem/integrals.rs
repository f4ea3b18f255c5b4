//! McMurchie–Davidson one- and two-electron integrals over contracted
//! Cartesian Gaussians.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chem::basis::{BasisFunction, BasisSet};
use crate::chem::geometry::Geometry;
use crate::error::{Error, Result};

/// Boys function values F_0(t)..F_nmax(t).
pub fn boys(nmax: usize, t: f64) -> Vec<f64> {
    let mut f = vec![0.0; nmax + 1];
    if t < 35.0 {
        let n = nmax as f64;
        let mut term = 1.0 / (2.0 * n + 1.0);
        let mut sum = term;
        let mut k = 0.0;
        loop {
            term *= 2.0 * t / (2.0 * n + 2.0 * k + 3.0);
            sum += term;
            k += 1.0;
            if term < 1e-17 * sum {
                break;
            }
        }
        let et = (-t).exp();
        f[nmax] = et * sum;
        for m in (0..nmax).rev() {
            f[m] = (2.0 * t * f[m + 1] + et) / (2.0 * m as f64 + 1.0);
        }
    } else {
        let et = (-t).exp();
        f[0] = 0.5 * (PI / t).sqrt();
        for m in 0..nmax {
            f[m + 1] = ((2.0 * m as f64 + 1.0) * f[m] - et) / (2.0 * t);
        }
    }
    f
}

/// Hermite expansion coefficients E^{ij}_t for one Cartesian direction.
/// Indexed `[i][j][t]`.
fn hermite_e(imax: usize, jmax: usize, qx: f64, a: f64, b: f64) -> Vec<Vec<Vec<f64>>> {
    let p = a + b;
    let q = a * b / p;
    let tmax = imax + jmax;
    let mut e = vec![vec![vec![0.0; tmax + 2]; jmax + 1]; imax + 1];
    e[0][0][0] = (-q * qx * qx).exp();
    let get = |v: &Vec<f64>, t: isize| -> f64 {
        if t < 0 || t as usize >= v.len() {
            0.0
        } else {
            v[t as usize]
        }
    };
    for j in 0..=jmax {
        if j > 0 {
            let prev = e[0][j - 1].clone();
            for t in 0..=(j) {
                let ti = t as isize;
                e[0][j][t] = get(&prev, ti - 1) / (2.0 * p)
                    + q * qx / b * get(&prev, ti)
                    + (t as f64 + 1.0) * get(&prev, ti + 1);
            }
        }
        for i in 1..=imax {
            let prev = e[i - 1][j].clone();
            for t in 0..=(i + j) {
                let ti = t as isize;
                e[i][j][t] = get(&prev, ti - 1) / (2.0 * p) - q * qx / a * get(&prev, ti)
                    + (t as f64 + 1.0) * get(&prev, ti + 1);
            }
        }
    }
    e
}

/// Hermite Coulomb integrals R^0_{tuv} for t+u+v <= lmax, indexed
/// `t*(l+1)^2 + u*(l+1) + v` with l = lmax.
fn hermite_coulomb(lmax: usize, p: f64, pc: [f64; 3]) -> Vec<f64> {
    let d = lmax + 1;
    let idx = |t: usize, u: usize, v: usize| (t * d + u) * d + v;
    let r2 = pc[0] * pc[0] + pc[1] * pc[1] + pc[2] * pc[2];
    let f = boys(lmax, p * r2);
    let mut next = vec![0.0; d * d * d];
    let mut cur = vec![0.0; d * d * d];
    for n in (0..=lmax).rev() {
        let lim = lmax - n;
        for t in 0..=lim {
            for u in 0..=(lim - t) {
                for v in 0..=(lim - t - u) {
                    let val = if t > 0 {
                        let mut s = pc[0] * next[idx(t - 1, u, v)];
                        if t > 1 {
                            s += (t - 1) as f64 * next[idx(t - 2, u, v)];
                        }
                        s
                    } else if u > 0 {
                        let mut s = pc[1] * next[idx(t, u - 1, v)];
                        if u > 1 {
                            s += (u - 1) as f64 * next[idx(t, u - 2, v)];
                        }
                        s
                    } else if v > 0 {
                        let mut s = pc[2] * next[idx(t, u, v - 1)];
                        if v > 1 {
                            s += (v - 1) as f64 * next[idx(t, u, v - 2)];
                        }
                        s
                    } else {
                        (-2.0 * p).powi(n as i32) * f[n]
                    };
                    cur[idx(t, u, v)] = val;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    next
}

/// Primitive-pair Hermite data for a pair of basis functions.
struct PrimPair {
    p: f64,
    center: [f64; 3],
    /// c_a c_b
    coef: f64,
    /// (t, u, v, E_t E_u E_v)
    hermite: Vec<(usize, usize, usize, f64)>,
}

struct PairData {
    prims: Vec<PrimPair>,
    lsum: usize,
}

fn pair_data(fa: &BasisFunction, fb: &BasisFunction) -> PairData {
    let mut prims = Vec::new();
    let la = fa.powers;
    let lb = fb.powers;
    for (&a, &ca) in fa.exponents.iter().zip(&fa.coefficients) {
        for (&b, &cb) in fb.exponents.iter().zip(&fb.coefficients) {
            let p = a + b;
            let mut center = [0.0; 3];
            let mut es = Vec::with_capacity(3);
            for k in 0..3 {
                center[k] = (a * fa.center[k] + b * fb.center[k]) / p;
                let e = hermite_e(la[k], lb[k], fa.center[k] - fb.center[k], a, b);
                es.push(e[la[k]][lb[k]].clone());
            }
            let mut hermite = Vec::new();
            for t in 0..=(la[0] + lb[0]) {
                for u in 0..=(la[1] + lb[1]) {
                    for v in 0..=(la[2] + lb[2]) {
                        let c = es[0][t] * es[1][u] * es[2][v];
                        if c != 0.0 {
                            hermite.push((t, u, v, c));
                        }
                    }
                }
            }
            prims.push(PrimPair {
                p,
                center,
                coef: ca * cb,
                hermite,
            });
        }
    }
    PairData {
        prims,
        lsum: la.iter().sum::<usize>() + lb.iter().sum::<usize>(),
    }
}

fn primitive_overlap(
    a: f64,
    pa: [usize; 3],
    ca: [f64; 3],
    b: f64,
    pb: [usize; 3],
    cb: [f64; 3],
) -> f64 {
    let p = a + b;
    let mut s = (PI / p).powf(1.5);
    for k in 0..3 {
        let e = hermite_e(pa[k], pb[k], ca[k] - cb[k], a, b);
        s *= e[pa[k]][pb[k]][0];
    }
    s
}

fn primitive_kinetic(
    a: f64,
    pa: [usize; 3],
    ca: [f64; 3],
    b: f64,
    pb: [usize; 3],
    cb: [f64; 3],
) -> f64 {
    let mut t = 0.0;
    for k in 0..3 {
        let l = pb[k] as f64;
        let mut up = pb;
        up[k] += 2;
        let mut term = -2.0 * b * (2.0 * l + 1.0) * primitive_overlap(a, pa, ca, b, pb, cb)
            + 4.0 * b * b * primitive_overlap(a, pa, ca, b, up, cb);
        if pb[k] >= 2 {
            let mut down = pb;
            down[k] -= 2;
            term += l * (l - 1.0) * primitive_overlap(a, pa, ca, b, down, cb);
        }
        t += term;
    }
    -0.5 * t
}

/// Dense two-electron tensor in chemists' notation, stored once per
/// 8-fold symmetry class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eri {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn pair_index(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

impl Eri {
    pub fn zeros(n: usize) -> Self {
        let npair = n * (n + 1) / 2;
        Eri {
            n,
            data: vec![0.0; npair * (npair + 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(p: usize, q: usize, r: usize, s: usize) -> usize {
        pair_index(pair_index(p, q), pair_index(r, s))
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[Self::index(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let k = Self::index(p, q, r, s);
        self.data[k] = v;
    }

    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    /// Full n^4 row-major copy, element `((p*n+q)*n+r)*n+s`.
    pub fn to_full(&self) -> Vec<f64> {
        let n = self.n;
        let mut full = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        full[((p * n + q) * n + r) * n + s] = self.get(p, q, r, s);
                    }
                }
            }
        }
        full
    }

    /// Packs a full tensor, reading the canonical element of each class.
    pub fn from_full(n: usize, full: &[f64]) -> Self {
        let mut eri = Eri::zeros(n);
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if pair_index(p, q) >= pair_index(r, s) {
                            eri.set(p, q, r, s, full[((p * n + q) * n + r) * n + s]);
                        }
                    }
                }
            }
        }
        eri
    }

    /// Largest deviation from 8-fold symmetry in a full tensor.
    pub fn symmetry_defect(n: usize, full: &[f64]) -> f64 {
        let at = |p: usize, q: usize, r: usize, s: usize| full[((p * n + q) * n + r) * n + s];
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = at(p, q, r, s);
                        for w in [at(q, p, r, s), at(p, q, s, r), at(r, s, p, q)] {
                            worst = worst.max((v - w).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// AO-basis integrals for one geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralSet {
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    pub nuclear: DMatrix<f64>,
    pub eri: Eri,
    pub e_nuc: f64,
    pub warnings: Vec<String>,
}

impl IntegralSet {
    pub fn nbf(&self) -> usize {
        self.overlap.nrows()
    }

    /// T + V_ne.
    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.kinetic + &self.nuclear
    }
}

#[cfg(feature = "parallel")]
fn map_indices<F: Fn(usize) -> Vec<(usize, f64)> + Sync + Send>(
    n: usize,
    f: F,
) -> Vec<Vec<(usize, f64)>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<F: Fn(usize) -> Vec<(usize, f64)>>(n: usize, f: F) -> Vec<Vec<(usize, f64)>> {
    (0..n).map(f).collect()
}

pub fn compute_integrals(geom: &Geometry, basis: &BasisSet) -> Result<IntegralSet> {
    if basis.shells.iter().any(|s| s.atom >= geom.len()) {
        return Err(Error::Basis("shell refers to a missing atom".into()));
    }
    let funcs = &basis.functions;
    let n = funcs.len();
    let mut s = DMatrix::zeros(n, n);
    let mut t = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
    let pair_tables: Vec<PairData> = pairs
        .iter()
        .map(|&(i, j)| pair_data(&funcs[i], &funcs[j]))
        .collect();

    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (fa, fb) = (&funcs[i], &funcs[j]);
        let mut sij = 0.0;
        let mut tij = 0.0;
        for (&a, &ca) in fa.exponents.iter().zip(&fa.coefficients) {
            for (&b, &cb) in fb.exponents.iter().zip(&fb.coefficients) {
                sij +=
                    ca * cb * primitive_overlap(a, fa.powers, fa.center, b, fb.powers, fb.center);
                tij +=
                    ca * cb * primitive_kinetic(a, fa.powers, fa.center, b, fb.powers, fb.center);
            }
        }
        let pd = &pair_tables[k];
        let mut vij = 0.0;
        for atom in geom.atoms() {
            for pp in &pd.prims {
                let pc = [
                    pp.center[0] - atom.position[0],
                    pp.center[1] - atom.position[1],
                    pp.center[2] - atom.position[2],
                ];
                let r = hermite_coulomb(pd.lsum, pp.p, pc);
                let d = pd.lsum + 1;
                let mut acc = 0.0;
                for &(tt, uu, vv, e) in &pp.hermite {
                    acc += e * r[(tt * d + uu) * d + vv];
                }
                vij -= atom.charge as f64 * pp.coef * 2.0 * PI / pp.p * acc;
            }
        }
        s[(i, j)] = sij;
        s[(j, i)] = sij;
        t[(i, j)] = tij;
        t[(j, i)] = tij;
        v[(i, j)] = vij;
        v[(j, i)] = vij;
    }

    let npair = pairs.len();
    let rows = map_indices(npair, |ij| {
        let pa = &pair_tables[ij];
        (0..=ij)
            .map(|kl| {
                let pb = &pair_tables[kl];
                (kl, eri_pair(pa, pb))
            })
            .collect()
    });
    let mut eri = Eri::zeros(n);
    for (ij, row) in rows.into_iter().enumerate() {
        let (i, j) = pairs[ij];
        for (kl, val) in row {
            let (k, l) = pairs[kl];
            eri.set(i, j, k, l, val);
        }
    }

    let mut warnings = Vec::new();
    let min_eig = s
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_eig < 1e-8 {
        let msg = format!("near linear dependence: smallest overlap eigenvalue {min_eig:.3e}");
        log::warn!("{msg}");
        warnings.push(msg);
    }

    Ok(IntegralSet {
        overlap: s,
        kinetic: t,
        nuclear: v,
        eri,
        e_nuc: geom.nuclear_repulsion(),
        warnings,
    })
}

fn eri_pair(pa: &PairData, pb: &PairData) -> f64 {
    let l = pa.lsum + pb.lsum;
    let d = l + 1;
    let mut total = 0.0;
    for p1 in &pa.prims {
        for p2 in &pb.prims {
            let (p, q) = (p1.p, p2.p);
            let alpha = p * q / (p + q);
            let pq = [
                p1.center[0] - p2.center[0],
                p1.center[1] - p2.center[1],
                p1.center[2] - p2.center[2],
            ];
            let r = hermite_coulomb(l, alpha, pq);
            let mut acc = 0.0;
            for &(t, u, v, e1) in &p1.hermite {
                for &(tau, nu, phi, e2) in &p2.hermite {
                    let sign = if (tau + nu + phi) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += e1 * e2 * sign * r[((t + tau) * d + (u + nu)) * d + (v + phi)];
                }
            }
            total += p1.coef * p2.coef * 2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt()) * acc;
        }
    }
    total
}
