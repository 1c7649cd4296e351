//! Summation of an infinite coefficient triangle with cutoffs `eta(lambda t)`,
//! lambda doubled per term until its C^{i-1} norm drops below `2^{-i}`.

use super::extension::Cutoff;
use crate::boundary_algebra::Poly;
use crate::error::{LabError, Result};
use crate::jet::Jet;
use serde::Serialize;
use std::collections::HashMap;

pub const BOREL_LAMBDA_MAX: f64 = 1152921504606846976.0; // 2^60
const SAMPLES: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BorelEntry {
    pub i: usize,
    pub j: u32,
    pub lambda: f64,
    /// Estimated C^{i-1} norm of `c_{i,j} eta(lambda t) t^i`.
    pub norm: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BorelResult {
    pub int_part: usize,
    pub r: f64,
    pub cutoff: Cutoff,
    pub entries: Vec<BorelEntry>,
    #[serde(skip)]
    coeffs: Vec<Poly>,
}

impl BorelResult {
    /// `w^{(j)}(x, t) = sum_i c_{i,j}(x) eta(lambda_{i,j} t) t^i`.
    pub fn partial_sum(&self, j: u32, x: f64, t: f64) -> f64 {
        self.entries
            .iter()
            .zip(&self.coeffs)
            .filter(|(e, _)| e.j == j)
            .map(|(e, c)| c.eval(x) * self.cutoff.value(e.lambda * t) * t.powi(e.i as i32))
            .sum()
    }

    /// Sum of the term norms in the columns `j >= k - [m] + 1`.
    pub fn tail_norm(&self, k: usize) -> f64 {
        let from = (k + 1).saturating_sub(self.int_part) as u32;
        self.entries.iter().filter(|e| e.j >= from).map(|e| e.norm).sum()
    }

    pub fn tail_bound(k: usize) -> f64 {
        2f64.powi(1 - k as i32)
    }

    pub fn all_bounds_met(&self) -> bool {
        self.entries.iter().all(|e| e.norm <= e.bound)
    }
}

/// `sup_{tau in [0, tau_max]} |d^nu/dtau^nu (eta(tau) tau^i)|` for nu = 0..=order.
fn profile_sups(cutoff: &Cutoff, i: usize, order: usize, tau_max: f64) -> Vec<f64> {
    let mut sups = vec![0.0f64; order + 1];
    for k in 0..=SAMPLES {
        let tau = tau_max * k as f64 / SAMPLES as f64;
        let jet = cutoff.jet(tau, order).mul(&Jet::variable(tau, order).powi(i));
        for (nu, s) in sups.iter_mut().enumerate() {
            *s = s.max(jet.derivative(nu).abs());
        }
    }
    sups
}

/// Terms `(i, j)` with `int_part <= i <= norms_to`, `0 <= j <= i - int_part`.
pub fn borel_sum(
    coeff: &dyn Fn(usize, u32) -> Poly,
    int_part: usize,
    norms_to: usize,
    r: f64,
) -> Result<BorelResult> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(LabError::Parameter(format!("strip height {r} outside (0, 1]")));
    }
    let cutoff = Cutoff::new(0.5, 1.0);
    let mut cache: HashMap<(usize, u64), Vec<f64>> = HashMap::new();
    let mut entries = Vec::new();
    let mut coeffs = Vec::new();
    for i in int_part..=norms_to {
        let order = i.saturating_sub(1);
        let bound = 2f64.powi(-(i as i32));
        for j in 0..=(i - int_part) as u32 {
            let c = coeff(i, j);
            let dx: Vec<f64> = (0..=order).map(|tau| c.deriv_n(tau).sup_abs(-1.0, 1.0)).collect();
            let mut lambda = 1.0f64;
            let norm = loop {
                let sups = cache
                    .entry((i, lambda.to_bits()))
                    .or_insert_with(|| profile_sups(&cutoff, i, order, (lambda * r).min(1.0)));
                // d_t^nu [eta(lambda t) t^i] = lambda^{nu - i} (eta tau^i)^{(nu)}(lambda t)
                let mut norm = 0.0;
                for (tau, dc) in dx.iter().enumerate() {
                    for nu in 0..=order - tau {
                        norm += dc * lambda.powi(nu as i32 - i as i32) * sups[nu];
                    }
                }
                if norm <= bound {
                    break norm;
                }
                lambda *= 2.0;
                if lambda > BOREL_LAMBDA_MAX {
                    return Err(LabError::NonConvergentTerm(format!(
                        "term ({i}, {j}) keeps C^{order} norm {norm:.3e} above {bound:.3e} at lambda = 2^60"
                    )));
                }
            };
            entries.push(BorelEntry { i, j, lambda, norm, bound });
            coeffs.push(c);
        }
    }
    Ok(BorelResult { int_part, r, cutoff, entries, coeffs })
}
