//! One-dimensional quadrature rules.
//!
//! Provides Gauss-Legendre rules of arbitrary order, Gauss-Jacobi rules on
//! `[0,1]` with weight `t^alpha` (used to absorb the algebraic factors left by
//! the singularity-removing transforms), and a small adaptive Gauss-Legendre
//! integrator for smooth one-dimensional integrands.

use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::Mutex;

/// Nodes and weights of a quadrature rule on `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f`; exact meaning depends on the rule's weight.
    pub fn apply(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Gauss-Legendre rule with `n` points on `[0,1]`: sum w_i f(t_i) = int_0^1 f.
///
/// Nodes are roots of the Legendre polynomial P_n, found by Newton iteration
/// from the Chebyshev initial guess; exact for polynomials of degree 2n-1.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "rule order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Root on (-1,1); symmetric counterpart filled by the loop as well.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
    }
    // Ascending order is convenient for composite use.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    Rule {
        nodes: idx.iter().map(|&i| nodes[i]).collect(),
        weights: idx.iter().map(|&i| weights[i]).collect(),
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Jacobi rule on `[0,1]` with weight `t^alpha`, `alpha > -1`:
/// sum w_i f(t_i) = int_0^1 t^alpha f(t) dt for f polynomial of degree 2n-1.
///
/// Built by the Golub-Welsch method from the three-term recurrence of the
/// Jacobi polynomials with parameters (0, alpha) on `[-1,1]`.
pub fn gauss_jacobi(n: usize, alpha: f64) -> Rule {
    assert!(n >= 1, "rule order must be positive");
    assert!(alpha > -1.0, "Jacobi exponent must exceed -1");
    if alpha == 0.0 {
        return gauss_legendre(n);
    }
    let b = alpha;
    // Monic recurrence coefficients for weight (1+x)^b on [-1,1].
    let diag = |k: usize| -> f64 {
        let kf = k as f64;
        if k == 0 {
            b / (b + 2.0)
        } else {
            b * b / ((2.0 * kf + b) * (2.0 * kf + b + 2.0))
        }
    };
    let offdiag_sq = |k: usize| -> f64 {
        let kf = k as f64;
        4.0 * kf * kf * (kf + b) * (kf + b)
            / ((2.0 * kf + b).powi(2) * (2.0 * kf + b + 1.0) * (2.0 * kf + b - 1.0))
    };
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = diag(k);
        if k + 1 < n {
            let off = offdiag_sq(k + 1).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let q0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + x), mu0 * q0 * q0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Map from weight (1+x)^b on [-1,1] to t^alpha on [0,1].
    let scale = 2f64.powf(-b - 1.0);
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| scale * p.1).collect(),
    }
}

/// Process-wide cache of Jacobi rules keyed by (n, alpha bits).
pub fn cached_jacobi(n: usize, alpha: f64) -> Rule {
    static CACHE: Mutex<Option<HashMap<(usize, u64), Rule>>> = Mutex::new(None);
    let key = (n, alpha.to_bits());
    let mut guard = CACHE.lock().unwrap();
    let map = guard.get_or_insert_with(HashMap::new);
    map.entry(key).or_insert_with(|| gauss_jacobi(n, alpha)).clone()
}

/// Adaptive Gauss-Legendre integration of `f` over `[a,b]` to relative
/// tolerance `rel_tol` (with an absolute floor for near-zero integrals).
///
/// Bisects intervals until the 15-point estimate is stable against the sum of
/// the two half-interval estimates.
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = gauss_legendre(15);
    let whole = apply_on(&rule, f, a, b);
    let scale = whole.abs().max(1e-300);
    adaptive_step(f, a, b, whole, rel_tol * scale, &rule, 0)
}

fn apply_on(rule: &Rule, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| len * w * f(a + len * t))
        .sum()
}

fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    rule: &Rule,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = apply_on(rule, f, a, m);
    let right = apply_on(rule, f, m, b);
    let err = (left + right - whole).abs();
    if err <= tol || depth >= 48 || m == a || m == b {
        return left + right;
    }
    adaptive_step(f, a, m, left, 0.5 * tol, rule, depth + 1)
        + adaptive_step(f, m, b, right, 0.5 * tol, rule, depth + 1)
}
