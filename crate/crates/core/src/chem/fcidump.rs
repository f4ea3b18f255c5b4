//! FCIDUMP (Molpro convention) reader and writer for MO-basis integrals.

use nalgebra::DMatrix;

use crate::chem::integrals::Eri;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Fcidump {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub h1: DMatrix<f64>,
    pub eri: Eri,
    pub ecore: f64,
}

impl Fcidump {
    pub fn to_string(&self, tol: f64) -> String {
        let n = self.norb;
        let mut out = format!(
            " &FCI NORB={:>3},NELEC={:>3},MS2={},\n  ORBSYM={}\n  ISYM=1,\n &END\n",
            n,
            self.nelec,
            self.ms2,
            "1,".repeat(n)
        );
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                            continue;
                        }
                        let v = self.eri.get(p, q, r, s);
                        if v.abs() > tol {
                            out.push_str(&format!(
                                "{:>24.16E} {:>4} {:>4} {:>4} {:>4}\n",
                                v,
                                p + 1,
                                q + 1,
                                r + 1,
                                s + 1
                            ));
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..=p {
                let v = self.h1[(p, q)];
                if v.abs() > tol {
                    out.push_str(&format!(
                        "{:>24.16E} {:>4} {:>4} {:>4} {:>4}\n",
                        v,
                        p + 1,
                        q + 1,
                        0,
                        0
                    ));
                }
            }
        }
        out.push_str(&format!(
            "{:>24.16E} {:>4} {:>4} {:>4} {:>4}\n",
            self.ecore, 0, 0, 0, 0
        ));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let end = text
            .find("&END")
            .or_else(|| text.find("/"))
            .ok_or(Error::Parse {
                line: 1,
                msg: "missing &END in FCIDUMP header".into(),
            })?;
        let header = &text[..end];
        let header_lines = header.lines().count();
        let field = |key: &str| -> Option<i64> {
            let upper = header.to_ascii_uppercase();
            let pos = upper.find(&format!("{key}="))?;
            let rest = &upper[pos + key.len() + 1..];
            let digits: String = rest
                .trim_start()
                .chars()
                .take_while(|c| c.is_ascii_digit() || *c == '-')
                .collect();
            digits.parse().ok()
        };
        let norb = field("NORB").ok_or(Error::Parse {
            line: 1,
            msg: "NORB missing".into(),
        })? as usize;
        let nelec = field("NELEC").unwrap_or(0) as usize;
        let ms2 = field("MS2").unwrap_or(0);
        let body_start = text[end..]
            .find('\n')
            .map(|k| end + k + 1)
            .unwrap_or(text.len());
        let mut h1 = DMatrix::zeros(norb, norb);
        let mut eri = Eri::zeros(norb);
        let mut ecore = 0.0;
        for (k, line) in text[body_start..].lines().enumerate() {
            let lineno = header_lines + 1 + k;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let f: Vec<&str> = t.split_whitespace().collect();
            if f.len() != 5 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected 'value p q r s', found '{t}'"),
                });
            }
            let val: f64 = f[0]
                .replace(['D', 'd'], "E")
                .parse()
                .map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad value '{}'", f[0]),
                })?;
            let mut idx = [0usize; 4];
            for j in 0..4 {
                idx[j] = f[j + 1].parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad index '{}'", f[j + 1]),
                })?;
                if idx[j] > norb {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("index {} exceeds NORB={norb}", idx[j]),
                    });
                }
            }
            match idx {
                [0, 0, 0, 0] => ecore = val,
                [p, q, 0, 0] if p > 0 && q > 0 => {
                    h1[(p - 1, q - 1)] = val;
                    h1[(q - 1, p - 1)] = val;
                }
                [p, q, r, s] if p > 0 && q > 0 && r > 0 && s > 0 => {
                    eri.set(p - 1, q - 1, r - 1, s - 1, val)
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "unsupported index pattern".into(),
                    })
                }
            }
        }
        Ok(Fcidump {
            norb,
            nelec,
            ms2,
            h1,
            eri,
            ecore,
        })
    }
}
