use conga_core::assembly::local_mass;
use conga_core::conga::{adjoint_apply, conga_diff, harmonic_basis, hodge_operator, Decomposer, NULLSPACE_TOL};
use conga_core::femspace::{geometric_dofs, BrokenField, SmoothFunction};
use conga_core::linalg::SparseLu;
use conga_core::{Basis1D, ComplexOperators, Grid, GridSpec, Level, Space, SparseOperator};
use proptest::prelude::*;

fn ops(k: usize, p: usize) -> ComplexOperators {
    ComplexOperators::new(Grid::new(GridSpec::square(k, p)).unwrap()).unwrap()
}

/// Composite Simpson on `[0, 1]`, independent of the library's Gauss rules.
fn simpson(f: impl Fn(f64) -> f64) -> f64 {
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn local_mass_matches_simpson_oracle() {
    for p in 1..=3 {
        let g = Grid::new(GridSpec::square(2, p).with_side(3.0)).unwrap();
        let b = Basis1D::new(p).unwrap();
        let h = g.h();
        let n = |i: usize, j: usize| simpson(|x| b.lagrange_eval(i, x).unwrap() * b.lagrange_eval(j, x).unwrap());
        let e =
            |i: usize, j: usize| simpson(|x| b.histopolation_eval(i, x).unwrap() * b.histopolation_eval(j, x).unwrap());
        let m0 = local_mass(&g, Level::Zero);
        let m2 = local_mass(&g, Level::Two);
        for (a, b2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            for (c, d) in [(0, 0), (1, 0), (p, 1)] {
                let row = a * (p + 1) + b2;
                let col = c * (p + 1) + d;
                let want = h * h * n(a, c) * n(b2, d);
                assert!((m0[(row, col)] - want).abs() < 1e-9, "M0 p={p}");
            }
        }
        let last = p - 1;
        let want = e(0, last) * e(0, 0) / (h * h);
        assert!((m2[(0, last * p)] - want).abs() < 1e-9, "M2 p={p}");
    }
}

#[test]
fn polynomial_data_commutes_exactly() {
    let o = ops(3, 2);
    let g = o.grid();
    let f = SmoothFunction::scalar(|[x, y]| x * x * y - 0.5 * y * y);
    let grad = SmoothFunction::vector(|[x, y]| [2.0 * x * y, x * x - y]);
    let lhs = o.diff(Level::Zero).unwrap().mul_vec(&geometric_dofs(g, Level::Zero, &f).unwrap().coeffs).unwrap();
    let rhs = geometric_dofs(g, Level::One, &grad).unwrap().coeffs;
    let defect = lhs.iter().zip(&rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(defect < 1e-12, "{defect}");
}

#[test]
fn folded_and_removed_boundary_conditions_agree() {
    for spec in [GridSpec::square(3, 2), GridSpec::annulus(3, 1)] {
        let o = ComplexOperators::new(Grid::new(spec).unwrap()).unwrap();
        let (p, c) = (o.projection(Level::One), o.conforming_basis(Level::One));
        let n = o.grid().dim(Level::One);
        // P C = C
        assert!(p.matmul(c).unwrap().add_scaled(-1.0, c).unwrap().max_abs() < 1e-14);
        let m = o.mass(Level::One);
        let d = o.diff(Level::One).unwrap();
        let a = d.transpose().matmul(o.mass(Level::Two)).unwrap().matmul(d).unwrap().add_scaled(1.0, m).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (0.37 * i as f64).cos()).collect();

        let reduced = c.transpose().matmul(&a).unwrap().matmul(c).unwrap();
        let x = SparseLu::new(&reduced).unwrap().solve(&c.tmul_vec(&b).unwrap()).unwrap();
        let removed = c.mul_vec(&x).unwrap();

        let i_minus_p = SparseOperator::identity(Space::Broken(Level::One), n).add_scaled(-1.0, p).unwrap();
        let folded = p
            .transpose()
            .matmul(&a)
            .unwrap()
            .matmul(p)
            .unwrap()
            .add_scaled(1.0, &i_minus_p.transpose().matmul(&i_minus_p).unwrap())
            .unwrap();
        let y = SparseLu::new(&folded).unwrap().solve(&p.tmul_vec(&b).unwrap()).unwrap();
        let folded = p.mul_vec(&y).unwrap();

        let scale = removed.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        let diff = removed.iter().zip(&folded).fold(0.0f64, |s, (u, v)| s.max((u - v).abs()));
        assert!(diff <= 1e-10 * scale, "{diff} vs {scale}");
    }
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conga_sequence_is_a_complex(k in 1usize..5, p in 1usize..4, seed in any::<u64>()) {
        let o = ops(k, p);
        let n0 = o.grid().dim(Level::Zero);
        let v: Vec<f64> = (0..n0).map(|i| ((seed as f64 + i as f64) * 0.618).sin()).collect();
        let dp0 = conga_diff(Level::Zero, &o).unwrap();
        let dp1 = conga_diff(Level::One, &o).unwrap();
        let w = dp1.mul_vec(&dp0.mul_vec(&v).unwrap()).unwrap();
        prop_assert!(w.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn projection_is_idempotent((k, p, v) in (1usize..4, 1usize..4)
        .prop_flat_map(|(k, p)| (Just(k), Just(p), vector(2 * k * k * p * (p + 1))))) {
        let o = ops(k, p);
        let pm = o.projection(Level::One);
        let once = pm.mul_vec(&v).unwrap();
        let twice = pm.mul_vec(&once).unwrap();
        prop_assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() < 1e-13));
    }

    #[test]
    fn adjoint_matches_discrete_curl((q, v) in (vector(36), vector(48))) {
        let o = ops(2, 2);
        let q = BrokenField::new(o.grid(), Level::Two, q[..o.grid().dim(Level::Two)].to_vec()).unwrap();
        let dp = conga_diff(Level::One, &o).unwrap();
        let lhs = o.inner(Level::One, &adjoint_apply(&q, &o).unwrap().coeffs, &v).unwrap();
        let rhs = o.inner(Level::Two, &q.coeffs, &dp.mul_vec(&v).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn decomposition_is_orthogonal_and_complete(v in vector(48)) {
        let o = ops(2, 2);
        let op = hodge_operator(Level::One, &o, o.strong_penalty()).unwrap();
        let basis = harmonic_basis(&op, &o, NULLSPACE_TOL).unwrap();
        let v = BrokenField::new(o.grid(), Level::One, v).unwrap();
        let d = Decomposer::new(Level::One, &o, &basis).unwrap().decompose(&v, &o).unwrap();
        let c = d.components();
        let scale = o.norm(Level::One, &v.coeffs).unwrap().powi(2).max(1e-30);
        for i in 0..4 {
            for j in i + 1..4 {
                prop_assert!(o.inner(Level::One, &c[i].coeffs, &c[j].coeffs).unwrap().abs() <= 1e-10 * scale);
            }
        }
        let sum: Vec<f64> = (0..v.len()).map(|i| c.iter().map(|f| f.coeffs[i]).sum::<f64>() - v.coeffs[i]).collect();
        prop_assert!(o.norm(Level::One, &sum).unwrap() <= 1e-10 * scale.sqrt().max(1e-15));
    }
}
