//! Embedded STO-3G data and contracted Cartesian Gaussian shells.

use serde::{Deserialize, Serialize};

use crate::chem::geometry::Geometry;
use crate::error::{Error, Result};

const STO3G_1S: [f64; 3] = [0.15432897, 0.53532814, 0.44463454];
const STO3G_2S: [f64; 3] = [-0.09996723, 0.39951283, 0.70011547];
const STO3G_2P: [f64; 3] = [0.15591628, 0.60768372, 0.39195739];

struct ElementData {
    symbol: &'static str,
    charge: u32,
    core: [f64; 3],
    valence: Option<[f64; 3]>,
}

const ELEMENTS: &[ElementData] = &[
    ElementData {
        symbol: "H",
        charge: 1,
        core: [3.42525091, 0.62391373, 0.16885540],
        valence: None,
    },
    ElementData {
        symbol: "He",
        charge: 2,
        core: [6.36242139, 1.15892300, 0.31364979],
        valence: None,
    },
    ElementData {
        symbol: "C",
        charge: 6,
        core: [71.6168370, 13.0450960, 3.53051220],
        valence: Some([2.94124940, 0.68348310, 0.22228990]),
    },
    ElementData {
        symbol: "N",
        charge: 7,
        core: [99.1061690, 18.0523120, 4.88566020],
        valence: Some([3.78045590, 0.87849660, 0.28571440]),
    },
    ElementData {
        symbol: "O",
        charge: 8,
        core: [130.709320, 23.8088610, 6.44360830],
        valence: Some([5.03315130, 1.16959610, 0.38038900]),
    },
];

pub fn nuclear_charge(symbol: &str) -> Option<u32> {
    ELEMENTS
        .iter()
        .find(|e| e.symbol == symbol)
        .map(|e| e.charge)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngularMomentum {
    S,
    P,
}

impl AngularMomentum {
    pub fn l(self) -> usize {
        match self {
            AngularMomentum::S => 0,
            AngularMomentum::P => 1,
        }
    }

    pub fn from_l(l: usize) -> Result<Self> {
        match l {
            0 => Ok(AngularMomentum::S),
            1 => Ok(AngularMomentum::P),
            _ => Err(Error::Basis(format!(
                "angular momentum l={l} is not supported (s and p only)"
            ))),
        }
    }

    /// Cartesian exponent triples in the order of the basis functions.
    pub fn cartesians(self) -> &'static [[usize; 3]] {
        match self {
            AngularMomentum::S => &[[0, 0, 0]],
            AngularMomentum::P => &[[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Shell {
    pub atom: usize,
    pub center: [f64; 3],
    pub angular: AngularMomentum,
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
}

/// One contracted Cartesian Gaussian with normalization folded into the
/// primitive coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFunction {
    pub atom: usize,
    pub center: [f64; 3],
    pub powers: [usize; 3],
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSet {
    pub name: String,
    pub shells: Vec<Shell>,
    pub functions: Vec<BasisFunction>,
}

impl BasisSet {
    /// STO-3G for the atoms of `geom`.
    pub fn sto3g(geom: &Geometry) -> Result<Self> {
        let mut shells = Vec::new();
        for (i, atom) in geom.atoms().iter().enumerate() {
            let data = ELEMENTS
                .iter()
                .find(|e| e.symbol == atom.symbol)
                .ok_or_else(|| Error::UnknownElement(atom.symbol.clone()))?;
            shells.push(Shell {
                atom: i,
                center: atom.position,
                angular: AngularMomentum::S,
                exponents: data.core.to_vec(),
                coefficients: STO3G_1S.to_vec(),
            });
            if let Some(val) = data.valence {
                shells.push(Shell {
                    atom: i,
                    center: atom.position,
                    angular: AngularMomentum::S,
                    exponents: val.to_vec(),
                    coefficients: STO3G_2S.to_vec(),
                });
                shells.push(Shell {
                    atom: i,
                    center: atom.position,
                    angular: AngularMomentum::P,
                    exponents: val.to_vec(),
                    coefficients: STO3G_2P.to_vec(),
                });
            }
        }
        Self::from_shells("STO-3G", shells)
    }

    pub fn by_name(name: &str, geom: &Geometry) -> Result<Self> {
        match name.to_ascii_lowercase().replace('-', "").as_str() {
            "sto3g" => Self::sto3g(geom),
            _ => Err(Error::Basis(format!("basis '{name}' is not embedded"))),
        }
    }

    pub fn from_shells(name: &str, shells: Vec<Shell>) -> Result<Self> {
        let mut functions = Vec::new();
        for sh in &shells {
            if sh.exponents.len() != sh.coefficients.len() || sh.exponents.is_empty() {
                return Err(Error::Basis("shell has mismatched primitive data".into()));
            }
            if sh.exponents.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::Basis("primitive exponents must be positive".into()));
            }
            for &powers in sh.angular.cartesians() {
                functions.push(normalized_function(sh, powers));
            }
        }
        Ok(BasisSet {
            name: name.to_string(),
            shells,
            functions,
        })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

fn double_factorial_odd(n: i64) -> f64 {
    // (2n-1)!!
    let mut r = 1.0;
    let mut k = 2 * n - 1;
    while k > 1 {
        r *= k as f64;
        k -= 2;
    }
    r
}

/// Normalization of a primitive x^i y^j z^k exp(-a r^2).
pub fn primitive_norm(a: f64, powers: [usize; 3]) -> f64 {
    let l = (powers[0] + powers[1] + powers[2]) as i32;
    let denom: f64 = powers
        .iter()
        .map(|&p| double_factorial_odd(p as i64))
        .product();
    (2.0 * a / std::f64::consts::PI).powf(0.75) * (4.0 * a).powf(l as f64 / 2.0) / denom.sqrt()
}

fn normalized_function(sh: &Shell, powers: [usize; 3]) -> BasisFunction {
    let mut coefficients: Vec<f64> = sh
        .exponents
        .iter()
        .zip(&sh.coefficients)
        .map(|(&a, &c)| c * primitive_norm(a, powers))
        .collect();
    // contracted self-overlap of same-centre primitives
    let l = powers[0] + powers[1] + powers[2];
    let prefactor: f64 = powers
        .iter()
        .map(|&p| double_factorial_odd(p as i64))
        .product();
    let mut s = 0.0;
    for (i, &ai) in sh.exponents.iter().enumerate() {
        for (j, &aj) in sh.exponents.iter().enumerate() {
            let p = ai + aj;
            s += coefficients[i]
                * coefficients[j]
                * prefactor
                * (std::f64::consts::PI / p).powf(1.5)
                / (2.0 * p).powi(l as i32);
        }
    }
    let scale = 1.0 / s.sqrt();
    coefficients.iter_mut().for_each(|c| *c *= scale);
    BasisFunction {
        atom: sh.atom,
        center: sh.center,
        powers,
        exponents: sh.exponents.clone(),
        coefficients,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::geometry::Units;

    #[test]
    fn sto3g_sizes() {
        let n2 = Geometry::diatomic("N", 1.2).unwrap();
        assert_eq!(BasisSet::sto3g(&n2).unwrap().len(), 10);
        let co2 = Geometry::new(
            &[
                ("O", [0.0, 0.0, -1.16]),
                ("C", [0.0, 0.0, 0.0]),
                ("O", [0.0, 0.0, 1.16]),
            ],
            Units::Angstrom,
        )
        .unwrap();
        assert_eq!(BasisSet::sto3g(&co2).unwrap().len(), 15);
        let h4 = Geometry::linear_chain("H", 4, 1.0).unwrap();
        assert_eq!(BasisSet::sto3g(&h4).unwrap().len(), 4);
    }

    #[test]
    fn rejects_higher_shells() {
        assert!(AngularMomentum::from_l(2).is_err());
        assert!(BasisSet::by_name("cc-pVDZ", &Geometry::diatomic("H", 0.74).unwrap()).is_err());
    }

    #[test]
    fn rejects_bad_exponent() {
        let sh = Shell {
            atom: 0,
            center: [0.0; 3],
            angular: AngularMomentum::S,
            exponents: vec![1.0, -0.5],
            coefficients: vec![0.5, 0.5],
        };
        assert!(BasisSet::from_shells("x", vec![sh]).is_err());
    }
}
