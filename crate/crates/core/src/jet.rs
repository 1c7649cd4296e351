//! Truncated Taylor arithmetic for exact high-order derivatives of cutoffs.

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(a: f64, order: usize) -> Jet {
        let mut c = vec![0.0; order + 1];
        c[0] = a;
        Jet { c }
    }

    /// The independent variable expanded at `t0`.
    pub fn variable(t0: f64, order: usize) -> Jet {
        let mut j = Jet::constant(t0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of degree k.
    pub fn coeff(&self, k: usize) -> f64 {
        self.c[k]
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * (1..=k).map(|m| m as f64).product::<f64>()
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn offset(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.c.len();
        let mut c = vec![0.0; n];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate().take(n - i) {
                c[i + j] += a * b;
            }
        }
        Jet { c }
    }

    pub fn recip(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut b = vec![0.0; n];
        b[0] = 1.0 / a0;
        for k in 1..n {
            let s: f64 = (1..=k).map(|m| self.c[m] * b[k - m]).sum();
            b[k] = -s / a0;
        }
        Jet { c: b }
    }

    pub fn div(&self, o: &Jet) -> Jet {
        self.mul(&o.recip())
    }

    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut e = vec![0.0; n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|m| m as f64 * self.c[m] * e[k - m]).sum();
            e[k] = s / k as f64;
        }
        Jet { c: e }
    }

    /// `t^p` for a non-negative integer p.
    pub fn powi(&self, p: usize) -> Jet {
        (0..p).fold(Jet::constant(1.0, self.order()), |acc, _| acc.mul(self))
    }
}
