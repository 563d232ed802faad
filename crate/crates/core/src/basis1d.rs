//! Univariate Gauss-Lobatto machinery on the reference interval `[0, 1]`.
//!
//! Interpolation (Lagrange) polynomials `φ_i` live on the `p + 1` Gauss-Lobatto
//! nodes, histopolation polynomials `ψ_i` of degree `p - 1` have unit integral
//! over the `i`-th sub-interval and zero integral over the others. Physical
//! intervals of length `h` reuse these reference objects through an affine map;
//! the physical `ψ` carries a `1/h` factor.

use faer::prelude::*;
use faer::Mat;

use crate::error::{CongaError, Result};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre polynomial `P_n` and its derivative at `t ∈ [-1, 1]`.
pub fn legendre(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, t);
    let (mut dprev, mut dcur) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * cur - kf * prev) / (kf + 1.0);
        let dnext = dprev + (2.0 * kf + 1.0) * cur;
        prev = cur;
        cur = next;
        dprev = dcur;
        dcur = dnext;
    }
    (cur, dcur)
}

/// Gauss-Lobatto points of degree `p` mapped to `[0, 1]`: the endpoints and
/// the roots of `P_p'`.
pub fn gauss_lobatto(p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(CongaError::InvalidDegree);
    }
    let n = p as f64;
    let mut pts = vec![0.0; p + 1];
    pts[p] = 1.0;
    for j in 1..p {
        // Chebyshev-Gauss-Lobatto initial guess, increasing in j.
        let mut t = -(std::f64::consts::PI * j as f64 / n).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (pv, dp) = legendre(p, t);
            let d2p = (2.0 * t * dp - n * (n + 1.0) * pv) / (1.0 - t * t);
            let step = dp / d2p;
            t -= step;
            if step.abs() < NEWTON_TOL {
                break;
            }
        }
        pts[j] = 0.5 * (1.0 + t);
    }
    symmetrize(&mut pts);
    Ok(pts)
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`, returned as `(nodes, weights)`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut t = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (pv, d) = legendre(n, t);
            let step = pv / d;
            t -= step;
            if step.abs() < NEWTON_TOL {
                break;
            }
        }
        let (_, dp) = legendre(n, t);
        nodes[i] = 0.5 * (1.0 + t);
        weights[i] = 1.0 / ((1.0 - t * t) * dp * dp);
    }
    symmetrize(&mut nodes);
    for i in 0..n / 2 {
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// Enforce x_j = 1 - x_{n-1-j} exactly; the midpoint of odd rules becomes 1/2.
fn symmetrize(pts: &mut [f64]) {
    let n = pts.len();
    for j in 0..n / 2 {
        let x = 0.5 * (pts[j] + 1.0 - pts[n - 1 - j]);
        pts[j] = x;
        pts[n - 1 - j] = 1.0 - x;
    }
    if n % 2 == 1 {
        pts[n / 2] = 0.5;
    }
}

/// A quadrature rule on `[0, 1]`.
/// Points per sub-interval used by [`Basis1D::dof_rule`].
pub const DOF_POINTS: usize = 16;

#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Reference Gauss-Lobatto basis of degree `p`.
#[derive(Debug, Clone)]
pub struct Basis1D {
    p: usize,
    ref_nodes: Vec<f64>,
    /// Gauss-Legendre rule with `p + 1` points on `[0, 1]`, reused on every
    /// sub-interval through an affine map.
    gauss: Quadrature,
    /// Composite rule over all Gauss-Lobatto sub-intervals.
    composite: Quadrature,
    /// Coefficients of `ψ_i` in the shifted Legendre basis: `ψ_i = Σ_m c[(m, i)] L_m`.
    psi_coeffs: Mat<f64>,
    fine: Quadrature,
    node_mass: Mat<f64>,
    edge_mass: Mat<f64>,
}

impl Basis1D {
    pub fn new(p: usize) -> Result<Self> {
        let ref_nodes = gauss_lobatto(p)?;
        let (gx, gw) = gauss_legendre(p + 1);
        let gauss = Quadrature { nodes: gx, weights: gw };

        let mut cx = Vec::with_capacity(p * (p + 1));
        let mut cw = Vec::with_capacity(p * (p + 1));
        for j in 0..p {
            let (a, b) = (ref_nodes[j], ref_nodes[j + 1]);
            for (x, w) in gauss.nodes.iter().zip(&gauss.weights) {
                cx.push(a + (b - a) * x);
                cw.push((b - a) * w);
            }
        }
        let composite = Quadrature { nodes: cx, weights: cw };

        // Moment system: A[(j, m)] = ∫_{ζ_j}^{ζ_{j+1}} L_m; columns of A^{-1} are ψ_i.
        let moments = Mat::<f64>::from_fn(p, p, |j, m| {
            let (a, b) = (ref_nodes[j], ref_nodes[j + 1]);
            (b - a) * gauss.integrate(|s| legendre(m, 2.0 * (a + (b - a) * s) - 1.0).0)
        });
        let psi_coeffs = moments.partial_piv_lu().solve(Mat::<f64>::identity(p, p));

        let mut basis = Basis1D {
            p,
            ref_nodes,
            gauss,
            composite,
            psi_coeffs,
            fine: {
                let (x, w) = gauss_legendre((p + 1).max(DOF_POINTS));
                Quadrature { nodes: x, weights: w }
            },
            node_mass: Mat::zeros(0, 0),
            edge_mass: Mat::zeros(0, 0),
        };
        basis.node_mass = basis.gram(p + 1, |b, x| b.phi_all(x));
        basis.edge_mass = basis.gram(p, |b, x| b.psi_all(x));
        Ok(basis)
    }

    fn gram(&self, n: usize, values: impl Fn(&Self, f64) -> Vec<f64>) -> Mat<f64> {
        let mut g = Mat::<f64>::zeros(n, n);
        for (&x, &w) in self.composite.nodes.iter().zip(&self.composite.weights) {
            let v = values(self, x);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        g
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    /// Gauss-Lobatto nodes on `[0, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.ref_nodes
    }

    /// Gauss-Legendre rule on `[0, 1]` with `p + 1` points.
    pub fn gauss(&self) -> &Quadrature {
        &self.gauss
    }

    /// Composite Gauss rule over the Gauss-Lobatto sub-intervals of `[0, 1]`,
    /// exact for polynomials of degree `2p + 1` on each sub-interval.
    pub fn quadrature(&self) -> &Quadrature {
        &self.composite
    }

    /// Gauss rule mapped onto sub-interval `[ζ_j, ζ_{j+1}]`.
    pub fn subinterval_rule(&self, j: usize) -> Quadrature {
        let (a, b) = (self.ref_nodes[j], self.ref_nodes[j + 1]);
        Quadrature {
            nodes: self.gauss.nodes.iter().map(|x| a + (b - a) * x).collect(),
            weights: self.gauss.weights.iter().map(|w| (b - a) * w).collect(),
        }
    }

    /// High-order Gauss rule on sub-interval `j`, for degrees of freedom of
    /// smooth (non-polynomial) data.
    pub fn dof_rule(&self, j: usize) -> Quadrature {
        let (a, b) = (self.ref_nodes[j], self.ref_nodes[j + 1]);
        Quadrature {
            nodes: self.fine.nodes.iter().map(|x| a + (b - a) * x).collect(),
            weights: self.fine.weights.iter().map(|w| (b - a) * w).collect(),
        }
    }

    /// Reference node mass `N_ij = ∫₀¹ φ_i φ_j`.
    pub fn node_mass(&self) -> &Mat<f64> {
        &self.node_mass
    }

    /// Reference edge mass `E_ij = ∫₀¹ ψ_i ψ_j`.
    pub fn edge_mass(&self) -> &Mat<f64> {
        &self.edge_mass
    }

    pub fn lagrange_eval(&self, i: usize, x: f64) -> Result<f64> {
        if i > self.p {
            return Err(CongaError::IndexOutOfRange { index: i, limit: self.p + 1 });
        }
        Ok(self.phi(i, x))
    }

    pub fn histopolation_eval(&self, i: usize, x: f64) -> Result<f64> {
        if i >= self.p {
            return Err(CongaError::IndexOutOfRange { index: i, limit: self.p });
        }
        Ok(self.psi(i, x))
    }

    pub(crate) fn phi(&self, i: usize, x: f64) -> f64 {
        let zi = self.ref_nodes[i];
        self.ref_nodes.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &zj)| (x - zj) / (zi - zj)).product()
    }

    pub(crate) fn phi_deriv(&self, i: usize, x: f64) -> f64 {
        let z = &self.ref_nodes;
        let mut total = 0.0;
        for m in (0..=self.p).filter(|&m| m != i) {
            let mut term = 1.0 / (z[i] - z[m]);
            for j in (0..=self.p).filter(|&j| j != i && j != m) {
                term *= (x - z[j]) / (z[i] - z[j]);
            }
            total += term;
        }
        total
    }

    pub(crate) fn psi(&self, i: usize, x: f64) -> f64 {
        let t = 2.0 * x - 1.0;
        (0..self.p).map(|m| self.psi_coeffs[(m, i)] * legendre(m, t).0).sum()
    }

    /// All `p + 1` Lagrange values at `x`.
    pub fn phi_all(&self, x: f64) -> Vec<f64> {
        (0..=self.p).map(|i| self.phi(i, x)).collect()
    }

    /// All `p` histopolation values at `x`.
    pub fn psi_all(&self, x: f64) -> Vec<f64> {
        let t = 2.0 * x - 1.0;
        let leg: Vec<f64> = (0..self.p).map(|m| legendre(m, t).0).collect();
        (0..self.p).map(|i| (0..self.p).map(|m| self.psi_coeffs[(m, i)] * leg[m]).sum()).collect()
    }

    /// Histopolation moment matrix `H_ij = ∫_{ζ_j}^{ζ_{j+1}} ψ_i`, which must be the identity.
    pub fn histopolation_moments(&self) -> Mat<f64> {
        Mat::from_fn(self.p, self.p, |i, j| self.subinterval_rule(j).integrate(|x| self.psi(i, x)))
    }

    /// Maximum residual of `φ_i' = ψ_{i-1} - ψ_i` (with `ψ_{-1} = ψ_p = 0`)
    /// over `samples` equispaced points of `[0, 1]`.
    pub fn derivative_relation_residual(&self, samples: usize) -> f64 {
        let samples = samples.max(2);
        let mut worst: f64 = 0.0;
        for s in 0..samples {
            let x = s as f64 / (samples - 1) as f64;
            let psi = self.psi_all(x);
            for i in 0..=self.p {
                let left = if i > 0 { psi[i - 1] } else { 0.0 };
                let right = if i < self.p { psi[i] } else { 0.0 };
                worst = worst.max((self.phi_deriv(i, x) - (left - right)).abs());
            }
        }
        worst
    }

    /// Whether the derivative relation holds to `1e-12` on 50 sample points.
    pub fn derivative_relation_check(&self) -> bool {
        self.derivative_relation_residual(50) <= 1e-12
    }
}
