//! Levenberg-Marquardt least squares with adaptive damping and box-bound
//! projection.

use serde::Serialize;

use crate::{Error, Result};

/// One observation. `branch` distinguishes data families sharing parameters
/// (e.g. squeezing vs anti-squeezing); single-family fits use 0.
#[derive(Debug, Clone, Copy)]
pub struct FitPoint {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
    pub branch: i32,
}

impl FitPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, sigma: 1.0, branch: 0 }
    }

    pub fn with_branch(x: f64, y: f64, branch: i32) -> Self {
        Self { x, y, sigma: 1.0, branch }
    }
}

pub type ModelFn<'a> = &'a dyn Fn(&[f64], f64, i32) -> f64;
pub type JacobianFn<'a> = &'a dyn Fn(&[f64], f64, i32) -> Vec<f64>;

pub enum Jacobian<'a> {
    Analytic(JacobianFn<'a>),
    /// Central finite differences with the given per-parameter relative step.
    FiniteDifference { h_rel: f64 },
}

pub struct FitProblem<'a> {
    pub model: ModelFn<'a>,
    pub jacobian: Jacobian<'a>,
    pub data: &'a [FitPoint],
    pub initial: Vec<f64>,
    /// Box bounds; use infinities for unbounded parameters.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Optional characteristic parameter scales for finite-difference steps.
    pub scale: Option<Vec<f64>>,
    /// Iteration cap; `None` uses the default of 500.
    pub max_iterations: Option<usize>,
}

impl<'a> FitProblem<'a> {
    pub fn new(model: ModelFn<'a>, data: &'a [FitPoint], initial: Vec<f64>) -> Self {
        let n = initial.len();
        Self {
            model,
            jacobian: Jacobian::FiniteDifference { h_rel: 1e-6 },
            data,
            initial,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            scale: None,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceReason {
    GradientNorm,
    StepSize,
    /// Accepted step no longer reduces the cost meaningfully.
    CostReduction,
    MaxIterations,
    SingularNormalEquations,
    DegenerateData,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: ConvergenceReason,
    /// Cost after every accepted step (strictly non-increasing).
    pub cost_trace: Vec<f64>,
    /// Identifiability and data-quality warnings.
    pub flags: Vec<String>,
}

const MAX_ITERATIONS: usize = 500;
const GRADIENT_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;
const COST_TOL: f64 = 1e-12;
const LAMBDA_MAX: f64 = 1e14;

/// Minimizes `sum ((model(p, x_i) - y_i)/sigma_i)^2` over box-bounded `p`.
pub fn least_squares(problem: &FitProblem) -> Result<FitResult> {
    let n = problem.initial.len();
    let m = problem.data.len();
    if n == 0 {
        return Err(Error::Config("fit needs at least one free parameter".into()));
    }
    if m < n {
        return Err(Error::Config(format!(
            "fit needs at least as many data points ({m}) as parameters ({n})"
        )));
    }
    if problem.lower.len() != n || problem.upper.len() != n {
        return Err(Error::Config("bound arrays must match the parameter count".into()));
    }
    for (i, p) in problem.initial.iter().enumerate() {
        if *p < problem.lower[i] || *p > problem.upper[i] {
            return Err(Error::Config(format!(
                "initial parameter {i} = {p} outside bounds [{}, {}]",
                problem.lower[i], problem.upper[i]
            )));
        }
    }
    if problem.data.iter().any(|d| d.sigma <= 0.0) {
        return Err(Error::Config("data sigmas must be positive".into()));
    }

    let mut params = problem.initial.clone();
    let mut resid = residuals(problem, &params)?.ok_or_else(|| {
        Error::Domain(format!("model returned a non-finite value at parameters {params:?}"))
    })?;
    let mut cost = resid.iter().map(|r| r * r).sum::<f64>();
    let mut cost_trace = vec![cost];
    let mut lambda = 1e-10;
    let mut iterations = 0;
    let mut reason = ConvergenceReason::MaxIterations;
    let mut converged = false;
    let max_iterations = problem.max_iterations.unwrap_or(MAX_ITERATIONS);

    while iterations < max_iterations {
        iterations += 1;
        let jac = jacobian(problem, &params)?;

        // normal equations pieces
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (row, r) in jac.iter().zip(resid.iter()) {
            for a in 0..n {
                jtr[a] += row[a] * r;
                for b in a..n {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        let grad_inf = jtr.iter().fold(0.0_f64, |acc, g| acc.max(g.abs()));
        if grad_inf < GRADIENT_TOL {
            reason = ConvergenceReason::GradientNorm;
            converged = true;
            break;
        }

        // damped step, retried with increasing damping until the cost drops
        let mut stepped = false;
        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                // Marquardt scaling with a small absolute floor for flat directions
                a[i][i] += lambda * jtj[i][i].max(1e-30) + lambda * 1e-12;
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(delta) = solve_dense(&a, &rhs) else {
                if lambda >= LAMBDA_MAX {
                    reason = ConvergenceReason::SingularNormalEquations;
                    break;
                }
                lambda *= 10.0;
                continue;
            };

            let trial: Vec<f64> = params
                .iter()
                .zip(delta.iter())
                .enumerate()
                .map(|(i, (p, d))| (p + d).clamp(problem.lower[i], problem.upper[i]))
                .collect();
            // a non-finite model at a trial point is a rejected step, not an
            // input error
            let Some(trial_resid) = residuals(problem, &trial)? else {
                if lambda >= LAMBDA_MAX {
                    reason = ConvergenceReason::SingularNormalEquations;
                    break;
                }
                lambda *= 10.0;
                continue;
            };
            let trial_cost = trial_resid.iter().map(|r| r * r).sum::<f64>();

            if trial_cost < cost {
                let step_rel = l2(&delta) / l2(&params).max(1e-30);
                let improvement = (cost - trial_cost) / cost.max(1e-300);
                params = trial;
                resid = trial_resid;
                cost = trial_cost;
                cost_trace.push(cost);
                lambda = (lambda / 4.0).max(1e-14);
                stepped = true;
                if step_rel < STEP_TOL {
                    reason = ConvergenceReason::StepSize;
                    converged = true;
                } else if improvement < COST_TOL {
                    reason = ConvergenceReason::CostReduction;
                    converged = true;
                }
                break;
            }
            if lambda >= LAMBDA_MAX {
                reason = ConvergenceReason::SingularNormalEquations;
                break;
            }
            lambda *= 10.0;
        }

        if converged {
            break;
        }
        if !stepped {
            // maximum damping could not reduce the cost: treat a tiny
            // gradient as converged, otherwise report the failure
            if grad_inf < 1e-6 * (1.0 + cost) {
                reason = ConvergenceReason::StepSize;
                converged = true;
            }
            break;
        }
    }
    if iterations >= max_iterations && !converged {
        reason = ConvergenceReason::MaxIterations;
    }

    // covariance from the unscaled normal equations at the solution
    let jac = jacobian(problem, &params)?;
    let mut jtj = vec![vec![0.0; n]; n];
    for row in &jac {
        for a in 0..n {
            for b in 0..n {
                jtj[a][b] += row[a] * row[b];
            }
        }
    }
    let dof = (m.saturating_sub(n)).max(1) as f64;
    let s2 = cost / dof;
    let covariance = match invert_dense(&jtj) {
        Some(inv) => inv
            .into_iter()
            .map(|row| row.into_iter().map(|v| v * s2).collect())
            .collect(),
        None => vec![vec![f64::NAN; n]; n],
    };
    let std_errors = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();

    Ok(FitResult {
        params,
        covariance,
        std_errors,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        reason,
        cost_trace,
        flags: Vec::new(),
    })
}

/// `Ok(None)` marks a non-finite model value; the caller decides whether
/// that is an input error (initial point) or a rejected trial.
fn residuals(problem: &FitProblem, params: &[f64]) -> Result<Option<Vec<f64>>> {
    let mut out = Vec::with_capacity(problem.data.len());
    for d in problem.data {
        let y = (problem.model)(params, d.x, d.branch);
        if !y.is_finite() {
            return Ok(None);
        }
        out.push((y - d.y) / d.sigma);
    }
    Ok(Some(out))
}

fn jacobian(problem: &FitProblem, params: &[f64]) -> Result<Vec<Vec<f64>>> {
    let rows = match &problem.jacobian {
        Jacobian::Analytic(f) => problem
            .data
            .iter()
            .map(|d| {
                let row = f(params, d.x, d.branch);
                row.iter().map(|v| v / d.sigma).collect()
            })
            .collect(),
        Jacobian::FiniteDifference { h_rel } => {
            let scale = problem.scale.clone().unwrap_or_default();
            let raw = numeric_jacobian_scaled(problem.model, params, problem.data, *h_rel, &scale)?;
            raw.into_iter()
                .zip(problem.data.iter())
                .map(|(row, d)| row.into_iter().map(|v| v / d.sigma).collect())
                .collect()
        }
    };
    Ok(rows)
}

/// Central-difference Jacobian with per-parameter relative steps; rows are
/// data points, columns parameters.
pub fn numeric_jacobian(
    model: ModelFn,
    params: &[f64],
    data: &[FitPoint],
    h_rel: f64,
) -> Result<Vec<Vec<f64>>> {
    numeric_jacobian_scaled(model, params, data, h_rel, &[])
}

fn numeric_jacobian_scaled(
    model: ModelFn,
    params: &[f64],
    data: &[FitPoint],
    h_rel: f64,
    scale: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = params.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        // explicit scales override the parameter magnitude entirely
        let h = if scale.is_empty() {
            h_rel * params[k].abs().max(1e-8)
        } else {
            h_rel * scale[k].abs().max(1e-300)
        };
        let mut plus = params.to_vec();
        let mut minus = params.to_vec();
        plus[k] += h;
        minus[k] -= h;
        // use the realized step to cancel the representation error of h;
        // evaluate one perturbed vector over all data before the other so
        // models that simulate once per parameter vector stay cheap
        let h2 = plus[k] - minus[k];
        let eval_all = |q: &[f64]| -> Result<Vec<f64>> {
            data.iter()
                .map(|d| {
                    let v = model(q, d.x, d.branch);
                    if !v.is_finite() {
                        return Err(Error::Domain(format!(
                            "model returned a non-finite value while perturbing parameter {k}"
                        )));
                    }
                    Ok(v)
                })
                .collect()
        };
        let a = eval_all(&plus)?;
        let b = eval_all(&minus)?;
        let col: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| (x - y) / h2).collect();
        cols.push(col);
    }
    let m = data.len();
    Ok((0..m).map(|i| (0..n).map(|k| cols[k][i]).collect()).collect())
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting; returns None when singular.
fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut x = b.to_vec();
    for col in 0..n {
        let (pivot, pmax) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        if pmax <= 1e-300 || !pmax.is_finite() {
            return None;
        }
        m.swap(col, pivot);
        x.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for c in col + 1..n {
            s -= m[col][c] * x[c];
        }
        x[col] = s / m[col][col];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut inv = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let col = solve_dense(a, &e)?;
        for i in 0..n {
            inv[i][k] = col[i];
        }
    }
    // symmetrize against elimination round-off
    let mut sym = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            sym[i][j] = 0.5 * (inv[i][j] + inv[j][i]);
        }
    }
    Some(sym)
}
