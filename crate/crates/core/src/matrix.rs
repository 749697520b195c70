//! Symmetric language-by-language matrices and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Gamma,
    Phi,
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed matrix csv: {0}")]
    Malformed(String),
    #[error("cannot parse value {value:?} at row {row}: {source}")]
    Value {
        value: String,
        row: usize,
        #[source]
        source: std::num::ParseFloatError,
    },
    #[error("matrix is not symmetric at ({0}, {1})")]
    Asymmetric(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    kind: MatrixKind,
    codes: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl LabeledMatrix {
    // Callers guarantee a square, symmetric row-major buffer.
    pub(crate) fn from_parts(kind: MatrixKind, codes: Vec<String>, flat: Vec<f64>) -> Self {
        let l = codes.len();
        debug_assert_eq!(flat.len(), l * l);
        let values = flat.chunks(l.max(1)).take(l).map(<[f64]>::to_vec).collect();
        Self {
            kind,
            codes,
            values,
        }
    }

    /// Builds a matrix from rows, checking shape and exact symmetry.
    pub fn new(
        kind: MatrixKind,
        codes: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, MatrixError> {
        let l = codes.len();
        if values.len() != l || values.iter().any(|r| r.len() != l) {
            return Err(MatrixError::Malformed(format!("expected a {l}x{l} matrix")));
        }
        for i in 0..l {
            for j in i + 1..l {
                if values[i][j].to_bits() != values[j][i].to_bits() {
                    return Err(MatrixError::Asymmetric(codes[i].clone(), codes[j].clone()));
                }
            }
        }
        Ok(Self {
            kind,
            codes,
            values,
        })
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn size(&self) -> usize {
        self.codes.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    pub fn get_by_code(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Writes `lang,<codes...>` followed by one row per language. Values are
    /// printed in shortest round-trip form, or with `round` decimals.
    pub fn write_csv<W: Write>(&self, w: W, round: Option<usize>) -> Result<(), MatrixError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["lang".to_string()];
        header.extend(self.codes.iter().cloned());
        out.write_record(&header)?;
        for (code, row) in self.codes.iter().zip(&self.values) {
            let mut rec = vec![code.clone()];
            rec.extend(row.iter().map(|&v| format_value(v, round)));
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, kind: MatrixKind) -> Result<Self, MatrixError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let codes: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut values = Vec::with_capacity(codes.len());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            match (rec.get(0), codes.get(i)) {
                (Some(c), Some(expected)) if c == expected => {}
                _ => {
                    return Err(MatrixError::Malformed(format!(
                        "row {i} label does not match header"
                    )))
                }
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|source| MatrixError::Value {
                            value: s.to_string(),
                            row: i,
                            source,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            values.push(row);
        }
        Self::new(kind, codes, values)
    }
}

pub fn format_value(v: f64, round: Option<usize>) -> String {
    match round {
        Some(d) => format!("{v:.d$}"),
        None => format!("{v}"),
    }
}
