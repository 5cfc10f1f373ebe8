//! Truncated Taylor series ("jet") arithmetic in one variable.
//!
//! A jet stores the coefficients `c[k] = f^(k)(x0)/k!` up to a fixed order.
//! Propagating jets through products, quotients, exp and log gives exact
//! derivatives of composite expressions without finite differencing; this is
//! what the tau-function evaluators use to produce pointwise derivatives of
//! `ln det M` to any order.

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub c: Vec<f64>,
}

impl Jet {
    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn constant(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        Jet { c }
    }

    /// The identity jet `x0 + (x - x0)`.
    pub fn variable(v: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = v;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    /// Jet of the affine function `a + b (x - x0)`.
    pub fn affine(a: f64, b: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = a;
        if order >= 1 {
            c[1] = b;
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `f^(s)(x0)` recovered from the coefficient.
    pub fn derivative(&self, s: usize) -> f64 {
        if s > self.order() {
            return 0.0;
        }
        self.c[s] * factorial(s)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        debug_assert_eq!(self.order(), o.order());
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        debug_assert_eq!(self.order(), o.order());
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_assign(&mut self, o: &Jet) {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            *a += b;
        }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let k = self.order();
        let mut out = vec![0.0; k + 1];
        for i in 0..=k {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..=(k - i) {
                out[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c: out }
    }

    /// Quotient jet; requires a nonzero constant term in the denominator.
    pub fn div(&self, den: &Jet) -> Jet {
        let k = self.order();
        let mut q = vec![0.0; k + 1];
        for m in 0..=k {
            let mut s = self.c[m];
            for i in 0..m {
                s -= q[i] * den.c[m - i];
            }
            q[m] = s / den.c[0];
        }
        Jet { c: q }
    }

    /// `exp(self)` via the standard recurrence `(e^f)' = f' e^f`.
    pub fn exp(&self) -> Jet {
        let k = self.order();
        let mut f = vec![0.0; k + 1];
        f[0] = self.c[0].exp();
        for m in 0..k {
            let mut s = 0.0;
            for i in 0..=m {
                s += (i + 1) as f64 * self.c[i + 1] * f[m - i];
            }
            f[m + 1] = s / (m + 1) as f64;
        }
        Jet { c: f }
    }

    /// `ln(self)`; requires a positive constant term.
    pub fn ln(&self) -> Jet {
        let k = self.order();
        let mut g = vec![0.0; k + 1];
        g[0] = self.c[0].ln();
        let dnum = self.diff_jet();
        let q = dnum.div(self);
        for m in 0..k {
            g[m + 1] = q.c[m] / (m + 1) as f64;
        }
        Jet { c: g }
    }

    /// `ln(1 + self)`, accurate for small constant terms.
    pub fn ln_1p(&self) -> Jet {
        let k = self.order();
        let mut g = vec![0.0; k + 1];
        g[0] = self.c[0].ln_1p();
        let mut one_plus = self.clone();
        one_plus.c[0] += 1.0;
        let q = self.diff_jet().div(&one_plus);
        for m in 0..k {
            g[m + 1] = q.c[m] / (m + 1) as f64;
        }
        Jet { c: g }
    }

    /// Coefficients of the derivative series, truncated to the same order
    /// (top coefficient unknown, set to zero).
    fn diff_jet(&self) -> Jet {
        let k = self.order();
        let mut d = vec![0.0; k + 1];
        for i in 0..k {
            d[i] = (i + 1) as f64 * self.c[i + 1];
        }
        Jet { c: d }
    }
}

pub fn factorial(n: usize) -> f64 {
    let mut f = 1.0;
    for i in 2..=n {
        f *= i as f64;
    }
    f
}

/// A jet times `exp(ln_scale)`, for products of exponentials whose magnitudes
/// overflow f64. The mantissa jet is kept with an O(1) leading coefficient;
/// `ln_scale` absorbs the rest.
#[derive(Debug, Clone)]
pub struct ScaledJet {
    pub ln_scale: f64,
    pub jet: Jet,
}

impl ScaledJet {
    pub fn from_jet(jet: Jet) -> Self {
        ScaledJet { ln_scale: 0.0, jet }.normalized()
    }

    /// `exp(a + b (x - x0))` as a scaled jet: mantissa `exp(b (x-x0))` jet,
    /// scale `a`. Never overflows regardless of `a`.
    pub fn exp_affine(a: f64, b: f64, order: usize) -> Self {
        let jet = Jet::affine(0.0, b, order).exp();
        ScaledJet { ln_scale: a, jet }
    }

    fn normalized(mut self) -> Self {
        let lead = self.jet.c[0].abs();
        if lead.is_finite() && lead > 0.0 && !(1e-100..=1e100).contains(&lead) {
            let l = lead.ln();
            self.ln_scale += l;
            self.jet = self.jet.scale((-l).exp());
        }
        self
    }

    pub fn mul(&self, o: &ScaledJet) -> ScaledJet {
        ScaledJet {
            ln_scale: self.ln_scale + o.ln_scale,
            jet: self.jet.mul(&o.jet),
        }
        .normalized()
    }

    pub fn div(&self, o: &ScaledJet) -> ScaledJet {
        ScaledJet {
            ln_scale: self.ln_scale - o.ln_scale,
            jet: self.jet.div(&o.jet),
        }
        .normalized()
    }

    pub fn add(&self, o: &ScaledJet) -> ScaledJet {
        // rescale the smaller term onto the larger one's scale
        let (hi, lo) = if self.ln_scale >= o.ln_scale {
            (self, o)
        } else {
            (o, self)
        };
        let shift = (lo.ln_scale - hi.ln_scale).exp(); // <= 1, may underflow to 0
        ScaledJet {
            ln_scale: hi.ln_scale,
            jet: hi.jet.add(&lo.jet.scale(shift)),
        }
        .normalized()
    }

    pub fn scale(&self, s: f64) -> ScaledJet {
        ScaledJet {
            ln_scale: self.ln_scale,
            jet: self.jet.scale(s),
        }
        .normalized()
    }

    /// Collapse to a plain jet; underflows to zero when the scale is below
    /// f64 range, which downstream code treats as an exactly-zero tail.
    pub fn into_plain(self) -> Jet {
        let s = self.ln_scale.exp();
        self.jet.scale(s)
    }
}
