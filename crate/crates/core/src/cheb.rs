//! Chebyshev interpolation on an interval.
//!
//! Small utility used to turn expensive smooth scalar functions (built by
//! quadrature) into cheap polynomial evaluations.  Fitting samples the target
//! at Chebyshev points of the first kind; evaluation uses Clenshaw recurrence.

#[derive(Debug, Clone)]
pub struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Fits `f` on `[a,b]` with an `n`-term expansion.
    pub fn fit(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(n >= 1 && b > a);
        let nf = n as f64;
        let vals: Vec<f64> = (0..n)
            .map(|k| {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / nf;
                let x = theta.cos();
                f(0.5 * (a + b) + 0.5 * (b - a) * x)
            })
            .collect();
        let mut coeffs = vec![0.0; n];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &v) in vals.iter().enumerate() {
                let theta = std::f64::consts::PI * (k as f64 + 0.5) / nf;
                acc += v * (j as f64 * theta).cos();
            }
            *c = 2.0 * acc / nf;
        }
        coeffs[0] *= 0.5;
        Chebyshev { a, b, coeffs }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let t2 = 2.0 * t;
        let mut d = 0.0;
        let mut dd = 0.0;
        for &c in self.coeffs.iter().skip(1).rev() {
            let sv = d;
            d = t2 * d - dd + c;
            dd = sv;
        }
        t * d - dd + self.coeffs[0]
    }

    /// Largest magnitude among the trailing `k` coefficients; a cheap proxy
    /// for the truncation error of the fit.
    pub fn tail_estimate(&self, k: usize) -> f64 {
        let n = self.coeffs.len();
        self.coeffs[n.saturating_sub(k)..]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reproduces_smooth_function() {
        let c = Chebyshev::fit(0.0, 2.0, 40, |x| (1.0 + x * x).recip());
        for i in 0..=50 {
            let x = 2.0 * i as f64 / 50.0;
            assert_relative_eq!(c.eval(x), (1.0 + x * x).recip(), epsilon = 1e-13);
        }
        assert!(c.tail_estimate(2) < 1e-12);
    }

    #[test]
    fn exact_on_low_degree_polynomials() {
        let c = Chebyshev::fit(-1.0, 3.0, 6, |x| 2.0 - x + 0.5 * x * x * x);
        for i in 0..=20 {
            let x = -1.0 + 4.0 * i as f64 / 20.0;
            let exact = 2.0 - x + 0.5 * x * x * x;
            assert_relative_eq!(c.eval(x), exact, epsilon = 1e-12, max_relative = 1e-12);
        }
    }
}
