use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::repr::EmbeddingSequence;
use crate::{Error, Result};

/// Ground cost between two embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostFunction {
    /// `1 − ⟨x, y⟩ / (‖x‖‖y‖)`, in `[0, 2]`; 1 when either norm is below
    /// `1e-12`.
    #[default]
    Cosine,
    Euclidean,
}

const ZERO_NORM: f64 = 1e-12;

impl CostFunction {
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            CostFunction::Cosine => {
                let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
                for (a, b) in x.iter().zip(y) {
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                let (nx, ny) = (math::sqrt(nx), math::sqrt(ny));
                if nx < ZERO_NORM || ny < ZERO_NORM {
                    return 1.0;
                }
                (1.0 - dot / (nx * ny)).clamp(0.0, 2.0)
            }
            CostFunction::Euclidean => {
                math::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CostFunction::Cosine => "cosine",
            CostFunction::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(CostFunction::Cosine),
            "euclidean" => Ok(CostFunction::Euclidean),
            other => Err(Error::Config(alloc::format!("unknown cost function `{other}`"))),
        }
    }
}

/// Dense row-major `rows × cols` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::contract("cost matrix data must have rows·cols entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// `C[t][t'] = c(behavior_t, expert_t')`.
pub fn cost_matrix(
    behavior: &EmbeddingSequence,
    expert: &EmbeddingSequence,
    cost: CostFunction,
) -> Result<CostMatrix> {
    if behavior.len() != expert.len() {
        return Err(Error::contract(alloc::format!(
            "trajectory lengths differ: {} vs {}",
            behavior.len(),
            expert.len()
        )));
    }
    if behavior.dim() != expert.dim() {
        return Err(Error::contract("embedding dimensions differ"));
    }
    let t = behavior.len();
    let mut data = Vec::with_capacity(t * t);
    for x in behavior.iter() {
        for y in expert.iter() {
            data.push(cost.eval(x, y));
        }
    }
    if data.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite { op: "cost_matrix" });
    }
    CostMatrix::new(t, t, data)
}
