use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Labeled samples with a fixed train/eval split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
    pub eval_x: Matrix,
    pub eval_y: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(train_x: Matrix, train_y: Vec<usize>, eval_x: Matrix, eval_y: Vec<usize>, classes: usize) -> Result<Self> {
        if train_x.rows() != train_y.len() || eval_x.rows() != eval_y.len() {
            return Err(Error::Shape("feature rows and label counts differ".into()));
        }
        if train_x.cols() != eval_x.cols() {
            return Err(Error::Shape("train and eval feature widths differ".into()));
        }
        if train_y.iter().chain(&eval_y).any(|&y| y >= classes) {
            return Err(Error::InvalidInput(format!("label out of range for {classes} classes")));
        }
        if train_y.is_empty() {
            return Err(Error::InvalidInput("empty training split".into()));
        }
        Ok(Dataset {
            train_x,
            train_y,
            eval_x,
            eval_y,
            classes,
        })
    }

    pub fn features(&self) -> usize {
        self.train_x.cols()
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }

    /// Gathers the given training rows into a batch.
    pub fn train_batch(&self, idx: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.train_x.select_rows(idx),
            idx.iter().map(|&i| self.train_y[i]).collect(),
        )
    }
}
