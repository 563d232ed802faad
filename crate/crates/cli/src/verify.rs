//! Structural property checks run per sweep point.

use conga_core::conga::{adjoint_apply, conga_diff, harmonic_basis, hodge_operator, Decomposer, NULLSPACE_TOL};
use conga_core::femspace::{geometric_dofs, l2_norm, BrokenField, SmoothFunction};
use conga_core::solve::{helmholtz_case, solve_source_mixed};
use conga_core::{Basis1D, ComplexOperators, Level};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{AlphaPolicy, ExperimentConfig};
use crate::error::Result;
use crate::output::{render_csv, render_json, RunOutput};
use crate::run::{build_ops, demo_field};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyRow {
    pub p: usize,
    #[serde(rename = "K")]
    pub cells: usize,
    pub property: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Checks {
    p: usize,
    k: usize,
    rows: Vec<PropertyRow>,
}

impl Checks {
    fn at_most(&mut self, property: &'static str, value: f64, tolerance: f64) {
        self.rows.push(PropertyRow {
            p: self.p,
            cells: self.k,
            property,
            value,
            tolerance,
            passed: value <= tolerance,
        });
    }

    fn equal(&mut self, property: &'static str, value: usize, expected: usize) {
        self.rows.push(PropertyRow {
            p: self.p,
            cells: self.k,
            property,
            value: value as f64,
            tolerance: expected as f64,
            passed: value == expected,
        });
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn duality_1d(c: &mut Checks) -> Result<()> {
    let basis = Basis1D::new(c.p)?;
    let h = basis.histopolation_moments();
    let mut defect = 0.0f64;
    for i in 0..c.p {
        for j in 0..c.p {
            defect = defect.max((h[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    c.at_most("histopolation_duality", defect, 1e-12);
    c.at_most("derivative_relation", basis.derivative_relation_residual(50), 1e-12);
    Ok(())
}

fn complex(c: &mut Checks, ops: &ComplexOperators) -> Result<()> {
    let d0 = ops.diff(Level::Zero)?;
    let d1 = ops.diff(Level::One)?;
    c.at_most("complex_D1D0", d1.matmul(d0)?.max_abs(), 0.0);
    let conga = conga_diff(Level::One, ops)?.matmul(&conga_diff(Level::Zero, ops)?)?;
    c.at_most("complex_conga", conga.max_abs(), 1e-12);
    let mut idem = 0.0f64;
    for level in Level::ALL {
        let p = ops.projection(level);
        idem = idem.max(p.matmul(p)?.add_scaled(-1.0, p)?.max_abs());
    }
    c.at_most("projection_idempotent", idem, 1e-13);
    Ok(())
}

fn commuting(c: &mut Checks, ops: &ComplexOperators) -> Result<()> {
    let g = ops.grid();
    let f = SmoothFunction::scalar(|[x, y]| x.sin() * y.cos());
    let grad_f = SmoothFunction::vector(|[x, y]| [x.cos() * y.cos(), -x.sin() * y.sin()]);
    let v = SmoothFunction::vector(|[x, y]| [x.cos() * (2.0 * y).sin(), x.sin() * y.cos()]);
    let curl_v = SmoothFunction::scalar(|[x, y]| x.cos() * y.cos() - 2.0 * x.cos() * (2.0 * y).cos());
    let lhs0 = ops.diff(Level::Zero)?.mul_vec(&geometric_dofs(g, Level::Zero, &f)?.coeffs)?;
    let e0 = max_abs(&sub(&lhs0, &geometric_dofs(g, Level::One, &grad_f)?.coeffs));
    let lhs1 = ops.diff(Level::One)?.mul_vec(&geometric_dofs(g, Level::One, &v)?.coeffs)?;
    let e1 = max_abs(&sub(&lhs1, &geometric_dofs(g, Level::Two, &curl_v)?.coeffs));
    c.at_most("commuting_grad", e0, 1e-10);
    c.at_most("commuting_curl", e1, 1e-10);
    Ok(())
}

fn adjoint(c: &mut Checks, ops: &ComplexOperators, rng: &mut ChaCha8Rng) -> Result<()> {
    let g = ops.grid();
    let mut worst = 0.0f64;
    for level in [Level::Zero, Level::One] {
        let next = level.next().expect("levels 0 and 1 have successors");
        let dp = conga_diff(level, ops)?;
        for _ in 0..5 {
            let q = BrokenField::new(g, next, random(g.dim(next), rng))?;
            let v = random(g.dim(level), rng);
            let lhs = ops.inner(level, &adjoint_apply(&q, ops)?.coeffs, &v)?;
            let rhs = ops.inner(next, &q.coeffs, &dp.mul_vec(&v)?)?;
            worst = worst.max((lhs - rhs).abs() / (ops.norm(next, &q.coeffs)? * ops.norm(level, &v)?));
        }
    }
    c.at_most("adjoint_identity", worst, 1e-11);
    Ok(())
}

fn harmonic_and_decomposition(c: &mut Checks, ops: &ComplexOperators, alpha: f64, seed: u64) -> Result<()> {
    let op = hodge_operator(Level::One, ops, alpha)?;
    let basis = harmonic_basis(&op, ops, NULLSPACE_TOL)?;
    c.equal("harmonic_dimension", basis.len(), ops.grid().betti_one());
    c.rows.push(PropertyRow {
        p: c.p,
        cells: c.k,
        property: "nullspace_gap_ratio",
        value: basis.cut.gap_ratio,
        tolerance: conga_core::conga::MIN_GAP_RATIO,
        passed: basis.cut.well_separated(),
    });
    let v = demo_field(ops, seed)?;
    let d = Decomposer::new(Level::One, ops, &basis)?.decompose(&v, ops)?;
    let comps = d.components();
    let sum: Vec<f64> = (0..v.len()).map(|i| comps.iter().map(|f| f.coeffs[i]).sum()).collect();
    let nv = ops.norm(Level::One, &v.coeffs)?;
    c.at_most("decomposition_reconstruction", ops.norm(Level::One, &sub(&sum, &v.coeffs))? / nv, 1e-10);
    let mut ortho = 0.0f64;
    for i in 0..4 {
        for j in i + 1..4 {
            ortho = ortho.max(ops.inner(Level::One, &comps[i].coeffs, &comps[j].coeffs)?.abs() / (nv * nv));
        }
    }
    c.at_most("decomposition_orthogonality", ortho, 1e-10);
    let case = helmholtz_case(3.5);
    let s = solve_source_mixed(Level::One, &case.source, ops, alpha, &basis, true)?;
    let bound = l2_norm(ops.grid(), Level::One, &case.source)? / alpha;
    c.at_most("jump_bound_ratio", s.diagnostics.jump_norm / bound, 1.0 + 1e-6);
    Ok(())
}

fn check_point(config: &ExperimentConfig, p: usize, k: usize) -> Result<Vec<PropertyRow>> {
    let ops = build_ops(config, p, k)?;
    let mut c = Checks { p, k, rows: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((p as u64) << 32 | k as u64));
    duality_1d(&mut c)?;
    complex(&mut c, &ops)?;
    commuting(&mut c, &ops)?;
    adjoint(&mut c, &ops, &mut rng)?;
    let alpha = match config.alphas[0] {
        AlphaPolicy::Zero => ops.strong_penalty(),
        policy => policy.resolve(&ops),
    };
    if alpha > 0.0 {
        harmonic_and_decomposition(&mut c, &ops, alpha, config.seed)?;
    }
    Ok(c.rows)
}

pub fn run_verify(config: &ExperimentConfig) -> Result<RunOutput> {
    let per_point: Vec<Vec<PropertyRow>> =
        config.sweep().into_par_iter().map(|(p, k)| check_point(config, p, k)).collect::<Result<_>>()?;
    let rows: Vec<PropertyRow> = per_point.into_iter().flatten().collect();
    let failed: Vec<_> =
        rows.iter().filter(|r| !r.passed).map(|r| json!({"p": r.p, "K": r.cells, "property": r.property})).collect();
    let passed = failed.is_empty();
    let extra = json!({"passed": passed, "failed": failed});
    Ok(RunOutput { csv: render_csv(config, &rows)?, json: render_json(config, &rows, extra)?, passed })
}
