use serde::{Deserialize, Serialize};

use crate::chem::basis::nuclear_charge;
use crate::error::{Error, Result};

/// Ångström to Bohr.
pub const ANGSTROM_TO_BOHR: f64 = 1.8897259886;

const MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    Angstrom,
    Bohr,
}

impl Units {
    pub fn to_bohr(self) -> f64 {
        match self {
            Units::Angstrom => ANGSTROM_TO_BOHR,
            Units::Bohr => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub symbol: String,
    pub charge: u32,
    /// Position in Bohr.
    pub position: [f64; 3],
}

/// Nuclear framework. Positions are always stored in Bohr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    atoms: Vec<Atom>,
}

impl Geometry {
    /// Builds a geometry from `(symbol, position)` pairs given in `units`.
    pub fn new<S: AsRef<str>>(atoms: &[(S, [f64; 3])], units: Units) -> Result<Self> {
        let scale = units.to_bohr();
        let atoms = atoms
            .iter()
            .map(|(sym, pos)| {
                let symbol = normalize_symbol(sym.as_ref());
                let charge = nuclear_charge(&symbol)
                    .ok_or_else(|| Error::UnknownElement(sym.as_ref().to_string()))?;
                Ok(Atom {
                    symbol,
                    charge,
                    position: [pos[0] * scale, pos[1] * scale, pos[2] * scale],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let geom = Geometry { atoms };
        geom.validate()?;
        Ok(geom)
    }

    /// Evenly spaced chain of identical atoms along z.
    pub fn linear_chain(symbol: &str, n: usize, spacing_angstrom: f64) -> Result<Self> {
        let atoms: Vec<(&str, [f64; 3])> = (0..n)
            .map(|i| (symbol, [0.0, 0.0, i as f64 * spacing_angstrom]))
            .collect();
        Self::new(&atoms, Units::Angstrom)
    }

    /// Homonuclear diatomic along z.
    pub fn diatomic(symbol: &str, bond_angstrom: f64) -> Result<Self> {
        Self::linear_chain(symbol, 2, bond_angstrom)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.atoms.len() {
            for j in 0..i {
                let d = distance(&self.atoms[i].position, &self.atoms[j].position);
                if d <= MIN_SEPARATION {
                    return Err(Error::Geometry(format!(
                        "atoms {j} and {i} are {d:.3e} Bohr apart"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_nuclear_charge(&self) -> u32 {
        self.atoms.iter().map(|a| a.charge).sum()
    }

    /// Distance between two atoms in Bohr.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.atoms[i].position, &self.atoms[j].position)
    }

    /// Largest nearest-neighbour distance in Ångström.
    pub fn max_bond_angstrom(&self) -> f64 {
        let n = self.atoms.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.distance(i, j))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
            / ANGSTROM_TO_BOHR
    }

    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.atoms.len() {
            for j in 0..i {
                e += (self.atoms[i].charge * self.atoms[j].charge) as f64 / self.distance(i, j);
            }
        }
        e
    }

    /// Copy with one Cartesian coordinate of one atom shifted by `delta_angstrom`.
    pub fn displace(&self, atom: usize, axis: usize, delta_angstrom: f64) -> Result<Self> {
        if atom >= self.atoms.len() || axis > 2 {
            return Err(Error::Invalid(format!(
                "displacement index out of range: atom {atom}, axis {axis}"
            )));
        }
        let mut out = self.clone();
        out.atoms[atom].position[axis] += delta_angstrom * ANGSTROM_TO_BOHR;
        Ok(out)
    }

    /// Rigid translation by a vector in Bohr.
    pub fn translate(&self, shift: [f64; 3]) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            for k in 0..3 {
                a.position[k] += shift[k];
            }
        }
        out
    }

    /// Rigid rotation by a 3x3 orthogonal matrix (row-major).
    pub fn rotate(&self, rot: [[f64; 3]; 3]) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            let p = a.position;
            for (k, row) in rot.iter().enumerate() {
                a.position[k] = row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
            }
        }
        out
    }

    /// XYZ text in Ångström.
    pub fn to_xyz(&self, comment: &str) -> String {
        let mut s = format!("{}\n{}\n", self.atoms.len(), comment);
        for a in &self.atoms {
            let p = a.position.map(|x| x / ANGSTROM_TO_BOHR);
            s.push_str(&format!(
                "{} {:.10} {:.10} {:.10}\n",
                a.symbol, p[0], p[1], p[2]
            ));
        }
        s
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn normalize_symbol(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + &chars.as_str().to_ascii_lowercase(),
        None => String::new(),
    }
}

/// Parses XYZ text (coordinates in Ångström).
pub fn parse_xyz(text: &str) -> Result<Geometry> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let count: usize = first.trim().parse().map_err(|_| Error::Parse {
        line: 1,
        msg: format!("expected atom count, found '{}'", first.trim()),
    })?;
    // comment line
    lines.next();
    let mut atoms = Vec::with_capacity(count);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 'symbol x y z', found '{trimmed}'"),
            });
        }
        let mut pos = [0.0; 3];
        for k in 0..3 {
            pos[k] = fields[k + 1].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad coordinate '{}'", fields[k + 1]),
            })?;
        }
        let symbol = normalize_symbol(fields[0]);
        if nuclear_charge(&symbol).is_none() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("unknown element '{}'", fields[0]),
            });
        }
        atoms.push((symbol, pos));
    }
    if atoms.len() != count {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header declares {count} atoms, found {}", atoms.len()),
        });
    }
    Geometry::new(&atoms, Units::Angstrom)
}
