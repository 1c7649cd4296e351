//! Sampled functions on tensor grids (x nodes by graded t nodes).

use crate::error::{LabError, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridFunction {
    pub x_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    /// `values[ix][jt]`
    pub values: Vec<Vec<f64>>,
    /// Declared power of vanishing at t = 0, if known.
    pub vanishing_order: Option<f64>,
}

impl GridFunction {
    pub fn new(x_nodes: Vec<f64>, t_nodes: Vec<f64>, values: Vec<Vec<f64>>) -> Result<GridFunction> {
        if t_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::Grid("t nodes must be strictly increasing".into()));
        }
        if values.len() != x_nodes.len() || values.iter().any(|row| row.len() != t_nodes.len()) {
            return Err(LabError::Grid("value matrix does not match the node lists".into()));
        }
        if let Some((i, j)) = values
            .iter()
            .enumerate()
            .find_map(|(i, row)| row.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
        {
            return Err(LabError::Grid(format!(
                "non-finite value at x = {}, t = {}",
                x_nodes[i], t_nodes[j]
            )));
        }
        Ok(GridFunction { x_nodes, t_nodes, values, vanishing_order: None })
    }

    pub fn from_fn(x_nodes: &[f64], t_nodes: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Result<GridFunction> {
        let values = x_nodes
            .par_iter()
            .map(|&x| t_nodes.iter().map(|&t| f(x, t)).collect())
            .collect();
        GridFunction::new(x_nodes.to_vec(), t_nodes.to_vec(), values)
    }

    pub fn try_from_fn(
        x_nodes: &[f64],
        t_nodes: &[f64],
        f: impl Fn(f64, f64) -> Result<f64> + Sync,
    ) -> Result<GridFunction> {
        let values = x_nodes
            .par_iter()
            .map(|&x| t_nodes.iter().map(|&t| f(x, t)).collect::<Result<Vec<f64>>>())
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(x_nodes.to_vec(), t_nodes.to_vec(), values)
    }

    pub fn with_vanishing_order(mut self, m: f64) -> Self {
        self.vanishing_order = Some(m);
        self
    }

    pub fn map(&self, f: impl Fn(f64, f64, f64) -> f64) -> Result<GridFunction> {
        let values = self
            .x_nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, row)| self.t_nodes.iter().zip(row).map(|(&t, &v)| f(x, t, v)).collect())
            .collect();
        GridFunction::new(self.x_nodes.clone(), self.t_nodes.clone(), values)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        if self.x_nodes != other.x_nodes || self.t_nodes != other.t_nodes {
            return Err(LabError::Grid("grids differ".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect())
            .collect();
        GridFunction::new(self.x_nodes.clone(), self.t_nodes.clone(), values)
    }

    /// `max_x |g(x, t_j)|`.
    pub fn max_abs_at(&self, j: usize) -> f64 {
        self.values.iter().map(|row| row[j].abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.t_nodes.len()).map(|j| self.max_abs_at(j)).fold(0.0, f64::max)
    }

    /// Columns with `t >= t_min`.
    pub fn max_abs_above(&self, t_min: f64) -> f64 {
        (0..self.t_nodes.len())
            .filter(|&j| self.t_nodes[j] >= t_min)
            .map(|j| self.max_abs_at(j))
            .fold(0.0, f64::max)
    }

    /// CSV rows `x,t,value`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| LabError::Config(format!("csv output: {e}"));
        wr.write_record(["x", "t", "value"]).map_err(io)?;
        for (x, row) in self.x_nodes.iter().zip(&self.values) {
            for (t, v) in self.t_nodes.iter().zip(row) {
                wr.write_record([format!("{x:.16e}"), format!("{t:.16e}"), format!("{v:.16e}")])
                    .map_err(io)?;
            }
        }
        wr.flush().map_err(|e| LabError::Config(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// `t_j = r (j/n)^beta`, j = 1..=n.
pub fn graded_nodes(r: f64, n: usize, beta: f64) -> Vec<f64> {
    (1..=n).map(|j| r * (j as f64 / n as f64).powf(beta)).collect()
}

/// Grading exponent `max(2, 2/gamma_min)`.
pub fn grading_exponent(gamma_min: f64) -> f64 {
    if gamma_min > 0.0 {
        (2.0 / gamma_min).max(2.0)
    } else {
        2.0
    }
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}
