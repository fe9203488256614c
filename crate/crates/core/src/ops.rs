//! Single-site spin operators in the `σz` eigenbasis (index 0 = up, 1 = down).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Op2 = [[f64; 2]; 2];

pub const IDENTITY: Op2 = [[1.0, 0.0], [0.0, 1.0]];
pub const SIGMA_X: Op2 = [[0.0, 1.0], [1.0, 0.0]];
pub const SIGMA_Z: Op2 = [[1.0, 0.0], [0.0, -1.0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Z,
}

impl Axis {
    pub fn op(self) -> Op2 {
        match self {
            Axis::X => SIGMA_X,
            Axis::Z => SIGMA_Z,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Z => f.write_str("z"),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}'"))),
        }
    }
}

pub(crate) fn scaled(op: Op2, factor: f64) -> Op2 {
    [
        [op[0][0] * factor, op[0][1] * factor],
        [op[1][0] * factor, op[1][1] * factor],
    ]
}

pub(crate) fn is_zero(op: &Op2) -> bool {
    op.iter().flatten().all(|&v| v == 0.0)
}

/// Row-major 2x2 as a flat vector.
pub(crate) fn to_vec(op: Op2) -> Vec<f64> {
    vec![op[0][0], op[0][1], op[1][0], op[1][1]]
}
