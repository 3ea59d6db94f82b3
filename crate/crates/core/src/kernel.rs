//! Scalar weight functions of the nonlocal area integrand.
//!
//! For order `s` in (0, 1/2) and dimension `d`, all weights derive from the
//! density `(1 + r^2)^{-q}` with `q = (d + 1 + 2s)/2`:
//!
//! - `F(rho)  = int_0^rho (rho - r) (1+r^2)^{-q} dr` (even, convex, F(0)=0)
//! - `G(rho)  = F'(rho) = int_0^rho (1+r^2)^{-q} dr` (odd, bounded)
//! - `Gt(rho) = G(rho)/rho = int_0^1 (1 + rho^2 r^2)^{-q} dr` (even, Gt(0)=1)
//! - `Fpp(rho) = F''(rho) = (1+rho^2)^{-q}`
//!
//! `G` is bounded by `K = Gamma((d+2s)/2) sqrt(pi) / (2 Gamma((d+1+2s)/2))`.
//! The reference evaluator integrates the definitions by adaptive
//! Gauss-Legendre quadrature (relative tolerance 1e-12) and switches to a
//! three-term asymptotic tail beyond `|rho| = 1e4`.  Because assembly calls
//! these functions at every quadrature node, a Chebyshev proxy of the same
//! accuracy backs the `*_fast` entry points; it is fitted from the reference
//! evaluator at construction time and checked against it in the test suite.

use crate::cheb::Chebyshev;
use crate::rules;
use crate::{Error, Result};
use std::sync::OnceLock;

/// Switch point between direct quadrature and the asymptotic tail of `G`.
const TAIL_CROSSOVER: f64 = 1e4;

/// Below this the power series of `Gt` (and `F`) is used directly.
const SERIES_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    F,
    G,
    Gtilde,
    Fpp,
}

/// Immutable bundle of kernel constants for one `(d, s)` pair.
#[derive(Debug)]
pub struct KernelParams {
    d: usize,
    s: f64,
    q: f64,
    k_bound: f64,
    cds: f64,
    accel: OnceLock<Accel>,
}

impl KernelParams {
    /// `d` must be 1 or 2 and `s` strictly inside (0, 1/2).
    pub fn new(d: usize, s: f64) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::domain(format!("dimension must be 1 or 2, got {d}")));
        }
        if !(s > 0.0 && s < 0.5) {
            return Err(Error::domain(format!(
                "order s must lie strictly in (0, 1/2), got {s}"
            )));
        }
        let q = (d as f64 + 1.0 + 2.0 * s) / 2.0;
        let g = statrs::function::gamma::gamma;
        let k_bound =
            g((d as f64 + 2.0 * s) / 2.0) * std::f64::consts::PI.sqrt() / (2.0 * g(q));
        let alpha_d = if d == 1 { 2.0 } else { std::f64::consts::PI };
        Ok(KernelParams {
            d,
            s,
            q,
            k_bound,
            cds: (1.0 - 2.0 * s) / alpha_d,
            accel: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Exponent of the underlying density, `(d + 1 + 2s)/2`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Upper bound of `|G|`: the full half-line integral of the density.
    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }

    /// Normalization constant `(1 - 2s)/alpha_d` of the scaled forms.
    pub fn cds(&self) -> f64 {
        self.cds
    }

    /// Kernel exponent of the reduced pair integrands, `d + 2s - 1`.
    pub fn form_exponent(&self) -> f64 {
        self.d as f64 + 2.0 * self.s - 1.0
    }

    /// Reference evaluation by adaptive quadrature.  Parity is exact: the
    /// function is evaluated at `|rho|` and the sign restored afterwards.
    pub fn eval(&self, kind: KernelKind, rho: f64) -> f64 {
        let a = rho.abs();
        match kind {
            KernelKind::G => rho.signum() * self.g_abs(a),
            KernelKind::Gtilde => self.gt_abs(a),
            KernelKind::F => self.f_abs(a),
            KernelKind::Fpp => self.fpp(a),
        }
    }

    fn g_abs(&self, a: f64) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        if a >= TAIL_CROSSOVER {
            return self.k_bound - self.g_tail(a);
        }
        let q = self.q;
        rules::integrate_adaptive(&|r: f64| (1.0 + r * r).powf(-q), 0.0, a, 1e-12)
    }

    /// Asymptotic remainder `int_a^inf (1+r^2)^{-q} dr` for large `a`.
    fn g_tail(&self, a: f64) -> f64 {
        let q = self.q;
        let t1 = a.powf(1.0 - 2.0 * q) / (2.0 * q - 1.0);
        let t2 = q * a.powf(-1.0 - 2.0 * q) / (2.0 * q + 1.0);
        let t3 = 0.5 * q * (q + 1.0) * a.powf(-3.0 - 2.0 * q) / (2.0 * q + 3.0);
        t1 - t2 + t3
    }

    fn gt_abs(&self, a: f64) -> f64 {
        if a <= SERIES_CUTOFF {
            let q = self.q;
            let m = a * a;
            return 1.0 - q * m / 3.0 + q * (q + 1.0) * m * m / 10.0;
        }
        self.g_abs(a) / a
    }

    fn f_abs(&self, a: f64) -> f64 {
        let q = self.q;
        if a <= SERIES_CUTOFF {
            let m = a * a;
            return m * (0.5 - q * m / 12.0 + q * (q + 1.0) * m * m / 60.0);
        }
        // F(a) = a G(a) - int_0^a r (1+r^2)^{-q} dr, the last term in closed form.
        a * self.g_abs(a) - (1.0 - (1.0 + a * a).powf(1.0 - q)) / (2.0 * (q - 1.0))
    }

    fn fpp(&self, a: f64) -> f64 {
        (1.0 + a * a).powf(-self.q)
    }

    /// Chebyshev-accelerated evaluation; agrees with [`eval`](Self::eval) to
    /// about 1e-13 relative and is an order of magnitude cheaper.
    #[inline]
    pub fn eval_fast(&self, kind: KernelKind, rho: f64) -> f64 {
        match kind {
            KernelKind::G => self.g_fast(rho),
            KernelKind::Gtilde => self.gt_fast(rho),
            KernelKind::F => self.f_fast(rho),
            KernelKind::Fpp => self.fpp(rho.abs()),
        }
    }

    #[inline]
    pub fn g_fast(&self, rho: f64) -> f64 {
        let a = rho.abs();
        if a <= 1.0 {
            rho * self.accel().inner.eval(a * a)
        } else {
            let w = 1.0 / a;
            let g = self.k_bound - w.powf(2.0 * self.q - 1.0) * self.accel().outer.eval(w * w);
            rho.signum() * g
        }
    }

    #[inline]
    pub fn gt_fast(&self, rho: f64) -> f64 {
        let a = rho.abs();
        if a <= 1.0 {
            self.accel().inner.eval(a * a)
        } else {
            self.g_fast(a) / a
        }
    }

    #[inline]
    pub fn f_fast(&self, rho: f64) -> f64 {
        let a = rho.abs();
        let q = self.q;
        if a <= SERIES_CUTOFF {
            let m = a * a;
            return m * (0.5 - q * m / 12.0 + q * (q + 1.0) * m * m / 60.0);
        }
        a * self.g_fast(a) - (1.0 - (1.0 + a * a).powf(1.0 - q)) / (2.0 * (q - 1.0))
    }

    /// `F(rho)/rho^2`, stable near zero; used by the far-field energy tail.
    #[inline]
    pub fn f_over_rho2_fast(&self, rho: f64) -> f64 {
        let a = rho.abs();
        let q = self.q;
        if a <= 1e-3 {
            let m = a * a;
            0.5 - q * m / 12.0 + q * (q + 1.0) * m * m / 60.0
        } else {
            self.f_fast(a) / (a * a)
        }
    }

    fn accel(&self) -> &Accel {
        self.accel.get_or_init(|| Accel::build(self))
    }
}

/// Chebyshev proxies: `inner` interpolates `Gt(rho)` in the variable `rho^2`
/// on [0,1]; `outer` interpolates `B(v) = int_0^1 tau^{2q-2} (1+v tau^2)^{-q}
/// dtau` in `v = rho^{-2}` on [0,1], so that for `|rho| >= 1`
/// `G(rho) = K - rho^{1-2q} B(rho^{-2})`.  Both functions are analytic on a
/// neighbourhood of [0,1]; 48 terms reach full accuracy.
#[derive(Debug)]
struct Accel {
    inner: Chebyshev,
    outer: Chebyshev,
}

impl Accel {
    fn build(p: &KernelParams) -> Self {
        let q = p.q;
        let inner = Chebyshev::fit(0.0, 1.0, 48, |m| {
            let rho = m.sqrt();
            p.gt_abs(rho)
        });
        // Spectral rule for the weight tau^{2q-2}; the remaining factor is
        // analytic in tau on [0,1] for every v in [0,1].
        let jac = rules::gauss_jacobi(40, 2.0 * q - 2.0);
        let outer = Chebyshev::fit(0.0, 1.0, 48, |v| {
            jac.apply(|tau| (1.0 + v * tau * tau).powf(-q))
        });
        Accel { inner, outer }
    }
}
