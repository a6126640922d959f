//! JSON encoding of LTI systems.
//!
//! ```json
//! {"type": "tf", "num": [1.0], "den": [1.0, -0.5], "ts": 0.01}
//! {"type": "ss", "a": [[0.5]], "b": [[1.0]], "c": [[1.0]], "d": [[0.0]], "ts": 0.01}
//! ```
//! Matrices are lists of rows. An empty `a` describes a static gain.

use std::fs;
use std::path::Path;

use afdr_core::lti::{StateSpace, TransferFunction};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemFile {
    Tf {
        num: Vec<f64>,
        den: Vec<f64>,
        ts: f64,
    },
    Ss {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
        ts: f64,
    },
}

fn matrix(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    // A system without states may write `b` and `c` as empty lists.
    if rows.is_empty() && (nrows == 0 || ncols == 0) {
        return Ok(DMatrix::zeros(nrows, ncols));
    }
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(AppError::Config(format!(
            "matrix {name} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SystemFile {
    pub fn to_state_space(&self) -> Result<StateSpace> {
        match self {
            Self::Tf { num, den, ts } => Ok(TransferFunction::new(num, den, *ts)?.to_state_space()),
            Self::Ss { a, b, c, d, ts } => {
                let n = a.len();
                let p = d.len();
                let m = d.first().map_or(0, |r| r.len());
                if p == 0 || m == 0 {
                    return Err(AppError::Config("matrix d must be nonempty".into()));
                }
                Ok(StateSpace::new(
                    matrix(a, n, n, "a")?,
                    matrix(b, n, m, "b")?,
                    matrix(c, p, n, "c")?,
                    matrix(d, p, m, "d")?,
                    *ts,
                )?)
            }
        }
    }

    pub fn from_state_space(g: &StateSpace) -> Self {
        Self::Ss {
            a: rows_of(g.a()),
            b: rows_of(g.b()),
            c: rows_of(g.c()),
            d: rows_of(g.d()),
            ts: g.ts(),
        }
    }

    pub fn from_transfer_function(tf: &TransferFunction) -> Self {
        Self::Tf {
            num: tf.num().to_vec(),
            den: tf.den().to_vec(),
            ts: tf.ts(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| AppError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("system files always serialize");
        fs::write(path, text + "\n").map_err(|e| AppError::io(path, e))
    }
}

pub fn load_system(path: &Path) -> Result<StateSpace> {
    SystemFile::read(path)?.to_state_space()
}
