//! Smooth cutoffs, Taylor extensions from boundary data, and the split of an
//! expansion into a regular part and singular log columns.

use super::Expansion;
use crate::boundary_algebra::Poly;
use crate::jet::Jet;
use serde::Serialize;

/// `g(z) = exp(-1/z)` for z > 0, flat at 0; below the cut its jet is numerically zero.
fn flat_jet(z: &Jet) -> Jet {
    let z0 = z.value();
    if z0 <= 0.0 || 1.0 / z0 > 650.0 {
        return Jet::constant(0.0, z.order());
    }
    z.recip().scale(-1.0).exp()
}

/// Smooth step: 1 on `[0, inner]`, 0 on `[outer, inf)`, infinitely flat at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    pub fn new(inner: f64, outer: f64) -> Cutoff {
        assert!(0.0 < inner && inner < outer);
        Cutoff { inner, outer }
    }

    /// Cutoff used for extensions on `(0, r]`: 1 up to r/2, 0 at r.
    pub fn for_height(r: f64) -> Cutoff {
        Cutoff::new(0.5 * r, r)
    }

    /// Taylor jet of the cutoff at `t`.
    pub fn jet(&self, t: f64, order: usize) -> Jet {
        if t <= self.inner {
            return Jet::constant(1.0, order);
        }
        if t >= self.outer {
            return Jet::constant(0.0, order);
        }
        let w = self.outer - self.inner;
        let z = Jet::variable(t, order).offset(-self.inner).scale(1.0 / w);
        let up = flat_jet(&z.scale(-1.0).offset(1.0));
        let down = flat_jet(&z);
        let denom = up.add(&down);
        up.div(&denom)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t, 0).value()
    }
}

/// `w(x, t) = eta(t) * sum_{i >= vanish_below} c_i(x) t^i / i!`, so that
/// `d_t^i w(., 0) = c_i` for the listed orders.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaylorExtension {
    pub values: Vec<Poly>,
    pub vanish_below: usize,
    pub cutoff: Cutoff,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl TaylorExtension {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.eval_dt(0, x, t)
    }

    /// `d_t^n w(x, t)` from exact jets.
    pub fn eval_dt(&self, n: usize, x: f64, t: f64) -> f64 {
        let mut poly = Jet::constant(0.0, n);
        let tj = Jet::variable(t, n);
        for (i, c) in self.values.iter().enumerate().skip(self.vanish_below) {
            if c.is_zero() {
                continue;
            }
            poly = poly.add(&tj.powi(i).scale(c.eval(x) / factorial(i)));
        }
        poly.mul(&self.cutoff.jet(t, n)).derivative(n)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().skip(self.vanish_below).all(Poly::is_zero)
    }
}

/// Extension of boundary data `values[i] = d_t^i w(., 0)` into the strip of height `r`.
pub fn extend_taylor(values: Vec<Poly>, vanish_below: usize, r: f64) -> TaylorExtension {
    TaylorExtension {
        values,
        vanish_below,
        cutoff: Cutoff::for_height(r),
    }
}

/// `u ~ v + sum_j w_j t^gamma (log t)^j` with `w_j` vanishing to order `[m] + j`.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionVW {
    pub v: TaylorExtension,
    pub w: Vec<TaylorExtension>,
    pub gamma: Poly,
    pub int_part: i32,
}

impl DecompositionVW {
    pub fn reconstruct(&self, x: f64, t: f64) -> f64 {
        let g = self.gamma.eval(x);
        let lt = t.ln();
        let tg = t.powf(g);
        self.v.eval(x, t)
            + self
                .w
                .iter()
                .enumerate()
                .map(|(j, w)| w.eval(x, t) * tg * lt.powi(j as i32))
                .sum::<f64>()
    }
}

pub fn decompose_vw(e: &Expansion, r: f64) -> DecompositionVW {
    let v_vals: Vec<Poly> = e
        .c_int
        .iter()
        .enumerate()
        .map(|(i, c)| c.scale(factorial(i)))
        .collect();
    let m = e.int_part.max(0) as usize;
    let w = (0..=e.k.saturating_sub(m))
        .map(|j| {
            let vals: Vec<Poly> = (0..=e.k)
                .map(|i| {
                    if i >= m + j {
                        e.c_log_at(i as i32, j as u32).scale(factorial(i))
                    } else {
                        Poly::zero()
                    }
                })
                .collect();
            extend_taylor(vals, m + j, r)
        })
        .collect();
    DecompositionVW {
        v: extend_taylor(v_vals, 0, r),
        w,
        gamma: e.gamma.clone(),
        int_part: e.int_part,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_shape_and_smoothness() {
        let c = Cutoff::for_height(1.0);
        assert_eq!(c.value(0.2), 1.0);
        assert_eq!(c.value(1.0), 0.0);
        assert!((c.value(0.75) - 0.5).abs() < 1e-15);
        // jets agree with finite differences
        let t = 0.7;
        let h = 1e-4;
        let d1 = (c.value(t + h) - c.value(t - h)) / (2.0 * h);
        let d2 = (c.value(t + h) - 2.0 * c.value(t) + c.value(t - h)) / (h * h);
        let j = c.jet(t, 4);
        assert!((j.derivative(1) - d1).abs() < 1e-6);
        assert!((j.derivative(2) - d2).abs() < 1e-4);
        // flat near both ends
        assert!(c.jet(0.5 + 1e-3, 6).derivative(3).abs() < 1e-100);
    }

    #[test]
    fn extension_reproduces_taylor_data() {
        let w = extend_taylor(vec![Poly::constant(1.0), Poly::zero(), Poly::constant(2.0)], 0, 1.0);
        assert!((w.eval(0.3, 0.0) - 1.0).abs() < 1e-15);
        assert!(w.eval_dt(1, 0.3, 0.0).abs() < 1e-15);
        assert!((w.eval_dt(2, 0.3, 0.0) - 2.0).abs() < 1e-14);
        let z = extend_taylor(vec![Poly::zero(); 3], 0, 1.0);
        assert!(z.is_zero() && z.eval(0.0, 0.3) == 0.0);
        let w2 = extend_taylor(vec![Poly::constant(5.0), Poly::constant(1.0), Poly::constant(1.0)], 2, 1.0);
        let h = 1e-3;
        assert!((w2.eval(0.0, h) / h).abs() < 1e-2);
        assert!((w2.eval(0.0, h) / (h * h) - 0.5).abs() < 1e-12);
    }
}
