//! Experiment sweeps: source convergence, eigenvalue study, decomposition demo.

use std::time::Instant;

use conga_core::assembly::AssemblyOptions;
use conga_core::conga::{harmonic_basis, hodge_operator, Decomposer, NullspaceCut, NULLSPACE_TOL};
use conga_core::femspace::{l2_project, BrokenField, SmoothFunction};
use conga_core::linalg::generalized_eigen;
use conga_core::solve::{exact_eigenpairs, match_eigenvalues, solve_helmholtz, solve_helmholtz_conforming};
use conga_core::{ComplexOperators, Grid, Level};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::cases;
use crate::config::{AlphaPolicy, ExperimentConfig, Mask};
use crate::error::Result;
use crate::output::{render_csv, render_json, RunOutput};

pub(crate) fn build_ops(config: &ExperimentConfig, p: usize, k: usize) -> Result<ComplexOperators> {
    let grid = Grid::new(config.grid_spec(k, p))?;
    let options = AssemblyOptions { flip_curl_sign: config.corrupt_d1, ..Default::default() };
    Ok(ComplexOperators::with_options(grid, options)?)
}

/// Runs `f` over the sweep points in parallel and returns the results in
/// sweep order along with per-point wall times.
fn sweep<T: Send>(
    config: &ExperimentConfig,
    f: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Result<Vec<(usize, usize, T, f64)>> {
    config
        .sweep()
        .into_par_iter()
        .map(|(p, k)| {
            let start = Instant::now();
            let out = f(p, k)?;
            Ok((p, k, out, start.elapsed().as_secs_f64()))
        })
        .collect()
}

fn timings<T>(points: &[(usize, usize, T, f64)]) -> Vec<serde_json::Value> {
    points.iter().map(|(p, k, _, t)| json!({"p": p, "K": k, "runtime_s": t})).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub p: usize,
    #[serde(rename = "K")]
    pub cells: usize,
    pub h: f64,
    pub alpha_policy: String,
    pub alpha: f64,
    pub filtered: bool,
    pub rel_l2_error_broken: f64,
    pub rel_l2_error_conforming_part: f64,
    pub jump_norm: f64,
    pub rel_l2_error_conforming_solver: f64,
    /// `false` when the exact solution vanishes and errors are absolute.
    pub relative: bool,
}

pub fn run_convergence(config: &ExperimentConfig) -> Result<RunOutput> {
    let case = cases::lookup(&config.case, config.omega.unwrap_or(3.5))?;
    let points = sweep(config, |p, k| {
        let ops = build_ops(config, p, k)?;
        let (_, reference) = solve_helmholtz_conforming(case.omega, &case.source, &ops, Some(&case.solution))?;
        let reference = reference.expect("exact solution supplied");
        config
            .alphas
            .iter()
            .map(|&policy| {
                let alpha = policy.resolve(&ops);
                let (_, rep) =
                    solve_helmholtz(case.omega, &case.source, &ops, alpha, config.filtered, Some(&case.solution))?;
                let err = rep.error.expect("exact solution supplied");
                let perr = rep.conforming_error.expect("exact solution supplied");
                Ok(ConvergenceRow {
                    p,
                    cells: k,
                    h: rep.h,
                    alpha_policy: policy.to_string(),
                    alpha,
                    filtered: config.filtered,
                    rel_l2_error_broken: err.value,
                    rel_l2_error_conforming_part: perr.value,
                    jump_norm: rep.jump_norm,
                    rel_l2_error_conforming_solver: reference.value,
                    relative: err.relative,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<ConvergenceRow> = points.iter().flat_map(|(_, _, r, _)| r.clone()).collect();
    let extra = json!({"case": case.name, "omega": case.omega, "timings": timings(&points)});
    Ok(RunOutput { csv: render_csv(config, &rows)?, json: render_json(config, &rows, extra)?, passed: true })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenRow {
    pub p: usize,
    #[serde(rename = "K")]
    pub cells: usize,
    pub alpha_policy: String,
    pub alpha: f64,
    pub index: usize,
    pub lambda_h: f64,
    pub lambda_exact: Option<f64>,
    pub abs_error: Option<f64>,
    pub spurious: Option<bool>,
    /// Size of the near-zero block excluded for `α = 0`.
    pub nullity: usize,
}

fn exact_list_applies(config: &ExperimentConfig) -> bool {
    config.mask == Mask::Square && (config.side - 2.0 * std::f64::consts::PI).abs() < 1e-12
}

pub fn run_eigen_study(config: &ExperimentConfig) -> Result<RunOutput> {
    let exact: Option<Vec<f64>> =
        exact_list_applies(config).then(|| exact_eigenpairs(config.eigen_count).iter().map(|m| m.lambda).collect());
    let points = sweep(config, |p, k| {
        let ops = build_ops(config, p, k)?;
        let n = ops.grid().dim(Level::One);
        let mut rows = Vec::new();
        let mut meta = Vec::new();
        for &policy in &config.alphas {
            let alpha = policy.resolve(&ops);
            let op = hodge_operator(Level::One, &ops, alpha)?;
            let skip = policy == AlphaPolicy::Zero;
            let eig = generalized_eigen(&op.stiffness, ops.mass_blocks(Level::One), false)?;
            let cut = NullspaceCut::from_eigenvalues(&eig.values, NULLSPACE_TOL);
            let first = if skip { cut.nullity } else { 0 };
            let count = config.eigen_count.min(n - first);
            let eigenvalues = &eig.values[first..first + count];
            let matches = exact.as_ref().map(|e| match_eigenvalues(eigenvalues, e));
            for (index, &lambda_h) in eigenvalues.iter().enumerate() {
                let m = matches.as_ref().and_then(|m| m.get(index));
                rows.push(EigenRow {
                    p,
                    cells: k,
                    alpha_policy: policy.to_string(),
                    alpha,
                    index,
                    lambda_h,
                    lambda_exact: m.map(|m| m.exact),
                    abs_error: m.map(|m| m.abs_error),
                    spurious: m.map(|m| m.spurious),
                    nullity: cut.nullity,
                });
            }
            meta.push(json!({
                "p": p, "K": k, "alpha_policy": policy.to_string(), "alpha": alpha,
                "nullspace": cut, "requested": config.eigen_count, "returned": count,
            }));
        }
        Ok((rows, meta))
    })?;
    let rows: Vec<EigenRow> = points.iter().flat_map(|(_, _, (r, _), _)| r.clone()).collect();
    let spectra: Vec<_> = points.iter().flat_map(|(_, _, (_, m), _)| m.clone()).collect();
    let extra = json!({"spectra": spectra, "exact_reference": exact.is_some(), "timings": timings(&points)});
    Ok(RunOutput { csv: render_csv(config, &rows)?, json: render_json(config, &rows, extra)?, passed: true })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecomposeRow {
    pub p: usize,
    #[serde(rename = "K")]
    pub cells: usize,
    pub dim_exact: usize,
    pub dim_harmonic: usize,
    pub dim_coexact: usize,
    pub dim_jump: usize,
    pub norm_v: f64,
    pub norm_exact: f64,
    pub norm_harmonic: f64,
    pub norm_coexact: f64,
    pub norm_jump: f64,
    pub reconstruction: f64,
    pub max_orthogonality: f64,
}

/// A smooth field with a circulating part plus a seeded broken perturbation.
pub(crate) fn demo_field(ops: &ComplexOperators, seed: u64) -> Result<BrokenField> {
    let c = 0.5 * ops.grid().side();
    let w = std::f64::consts::PI / ops.grid().side();
    let smooth = SmoothFunction::vector(move |[x, y]| {
        let (dx, dy) = (x - c, y - c);
        let r2 = dx * dx + dy * dy + 1.0;
        [-dy / r2 + (w * y).sin(), dx / r2 + (2.0 * w * x).cos()]
    });
    let mut v = l2_project(ops, Level::One, &smooth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    v.coeffs.iter_mut().for_each(|a| *a += 0.05 * rng.random_range(-1.0..1.0));
    Ok(v)
}

pub fn run_decompose(config: &ExperimentConfig) -> Result<RunOutput> {
    let points = sweep(config, |p, k| {
        let ops = build_ops(config, p, k)?;
        let alpha = match config.alphas[0] {
            AlphaPolicy::Zero => ops.strong_penalty(),
            policy => policy.resolve(&ops),
        };
        let op = hodge_operator(Level::One, &ops, alpha)?;
        let basis = harmonic_basis(&op, &ops, NULLSPACE_TOL)?;
        let v = demo_field(&ops, config.seed)?;
        let d = Decomposer::new(Level::One, &ops, &basis)?.decompose(&v, &ops)?;
        let norm = |c: &[f64]| ops.norm(Level::One, c);
        let comps = d.components();
        let sum: Vec<f64> = (0..v.len()).map(|i| comps.iter().map(|c| c.coeffs[i]).sum()).collect();
        let diff: Vec<f64> = sum.iter().zip(&v.coeffs).map(|(a, b)| a - b).collect();
        let nv = norm(&v.coeffs)?;
        let mut ortho = 0.0f64;
        for i in 0..4 {
            for j in i + 1..4 {
                ortho = ortho.max(ops.inner(Level::One, &comps[i].coeffs, &comps[j].coeffs)?.abs() / (nv * nv));
            }
        }
        Ok(DecomposeRow {
            p,
            cells: k,
            dim_exact: d.dims[0],
            dim_harmonic: d.dims[1],
            dim_coexact: d.dims[2],
            dim_jump: d.dims[3],
            norm_v: nv,
            norm_exact: norm(&d.v_b.coeffs)?,
            norm_harmonic: norm(&d.v_h.coeffs)?,
            norm_coexact: norm(&d.v_bstar.coeffs)?,
            norm_jump: norm(&d.v_jump.coeffs)?,
            reconstruction: norm(&diff)? / nv,
            max_orthogonality: ortho,
        })
    })?;
    let rows: Vec<DecomposeRow> = points.iter().map(|(_, _, r, _)| r.clone()).collect();
    let extra = json!({"timings": timings(&points)});
    Ok(RunOutput { csv: render_csv(config, &rows)?, json: render_json(config, &rows, extra)?, passed: true })
}
