//! Least squares with absorbed fixed effects and cluster-robust inference.
//!
//! Regressors and outcome are demeaned by alternating projections over the
//! absorbed factors, then OLS is run on the residualized data. The
//! covariance is the CR1 sandwich
//!
//! ```text
//! V = c · (X'X)⁻¹ (Σ_g s_g s_g') (X'X)⁻¹,   s_g = Σ_{i∈g} x_i e_i
//! c = G/(G−1) · (N−1)/(N−K)
//! ```
//!
//! with `K` the regressor count plus the rank of the absorbed dummies.

mod demean;
mod models;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub use demean::{demean, dummy_rank, DemeanOutcome, Factor, NotConverged};
pub use models::*;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("no observations")]
    Empty,
    #[error("column {name} has {got} rows, expected {expected}")]
    Length { name: String, expected: usize, got: usize },
    #[error("clustered inference needs at least 2 clusters, found {0}")]
    TooFewClusters(usize),
    #[error("regressors collinear after absorbing fixed effects: {}", .0.join(", "))]
    Collinear(Vec<String>),
    #[error("no residual degrees of freedom (N = {n}, K = {k})")]
    NoDegreesOfFreedom { n: usize, k: usize },
    #[error("demeaning of {column} did not converge: {iterations} sweeps, last relative change {final_change:e}")]
    NotConverged { column: String, iterations: usize, final_change: f64 },
    #[error("baseline period {0} not present in the data")]
    MissingBaseline(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for FeOptions {
    fn default() -> Self {
        FeOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Outcome, named regressors, absorbed factors and the clustering factor,
/// all over the same rows.
#[derive(Clone, Debug)]
pub struct FeDesign {
    pub y: Vec<f64>,
    pub regressors: Vec<(String, Vec<f64>)>,
    pub absorb: Vec<Factor>,
    pub cluster: Factor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Two-sided normal p-value.
    pub p_value: f64,
}

impl Term {
    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub final_change: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub terms: Vec<Term>,
    /// Row-major, in `terms` order.
    pub clustered_cov: Vec<Vec<f64>>,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Regressors plus rank of the absorbed dummies.
    pub k: usize,
    pub absorbed_dims: Vec<String>,
    pub convergence: Convergence,
}

impl RegressionResult {
    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.term(name).map(|t| t.estimate)
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.term(name).map(|t| t.se)
    }
}

fn p_value(est: f64, se: f64) -> f64 {
    if se > 0.0 {
        let z = (est / se).abs();
        2.0 * (1.0 - Normal::standard().cdf(z))
    } else if est == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// OLS of `design.y` on the regressors with the absorbed factors swept out,
/// clustered by `design.cluster`. With nothing absorbed an intercept is.
pub fn fe_regression(design: &FeDesign, options: &FeOptions) -> Result<RegressionResult, PanelError> {
    let n = design.y.len();
    if n == 0 {
        return Err(PanelError::Empty);
    }
    let check = |name: &str, len: usize| {
        if len == n {
            Ok(())
        } else {
            Err(PanelError::Length {
                name: name.to_string(),
                expected: n,
                got: len,
            })
        }
    };
    for (name, col) in &design.regressors {
        check(name, col.len())?;
    }
    for f in &design.absorb {
        check(&f.name, f.len())?;
    }
    check(&design.cluster.name, design.cluster.len())?;
    let g = design.cluster.n_levels();
    if g < 2 {
        return Err(PanelError::TooFewClusters(g));
    }
    let p = design.regressors.len();
    if p == 0 {
        return Err(PanelError::Invalid("no regressors".into()));
    }

    let absorb: Vec<Factor> = if design.absorb.is_empty() {
        vec![Factor::constant("intercept", n)]
    } else {
        design.absorb.clone()
    };
    let k = p + dummy_rank(&absorb);
    if n <= k {
        return Err(PanelError::NoDegreesOfFreedom { n, k });
    }

    let mut columns: Vec<Vec<f64>> = design.regressors.iter().map(|(_, c)| c.clone()).collect();
    columns.push(design.y.clone());
    let outcome = demean(&mut columns, &absorb, options.tolerance, options.max_sweeps).map_err(|e| PanelError::NotConverged {
        column: design
            .regressors
            .get(e.column)
            .map_or_else(|| "outcome".to_string(), |(name, _)| name.clone()),
        iterations: e.iterations,
        final_change: e.final_change,
    })?;
    let y = DVector::from_vec(columns.pop().expect("outcome column"));

    // a regressor that vanishes under demeaning is spanned by the factors
    let names: Vec<&str> = design.regressors.iter().map(|(n, _)| n.as_str()).collect();
    let raw_norms: Vec<f64> = design.regressors.iter().map(|(_, c)| norm(c)).collect();
    let absorbed: Vec<String> = columns
        .iter()
        .zip(&raw_norms)
        .zip(&names)
        .filter(|((c, raw), _)| norm(c) <= 1e-7 * raw.max(f64::MIN_POSITIVE))
        .map(|(_, n)| n.to_string())
        .collect();
    if !absorbed.is_empty() {
        return Err(PanelError::Collinear(absorbed));
    }

    let x = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let xtx = x.transpose() * &x;
    let xtx_inv = checked_inverse(&xtx, &names)?;
    let beta = &xtx_inv * (x.transpose() * &y);
    let resid = &y - &x * &beta;

    let mut scores = DMatrix::<f64>::zeros(g, p);
    for (i, &c) in design.cluster.codes().iter().enumerate() {
        for j in 0..p {
            scores[(c as usize, j)] += x[(i, j)] * resid[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64));
    let mut cov = &xtx_inv * meat * &xtx_inv * factor;
    cov = (&cov + cov.transpose()) * 0.5;

    let terms = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let est = beta[j];
            let se = cov[(j, j)].max(0.0).sqrt();
            Term {
                name: name.to_string(),
                estimate: est,
                se,
                ci_low: est - Z_95 * se,
                ci_high: est + Z_95 * se,
                p_value: p_value(est, se),
            }
        })
        .collect();
    Ok(RegressionResult {
        terms,
        clustered_cov: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        n_obs: n,
        n_clusters: g,
        k,
        absorbed_dims: design.absorb.iter().map(|f| f.name.clone()).collect(),
        convergence: Convergence {
            iterations: outcome.iterations,
            final_change: outcome.final_change,
        },
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inverse of a Gram matrix, reporting the regressors involved in any
/// near-exact linear dependence.
fn checked_inverse(xtx: &DMatrix<f64>, names: &[&str]) -> Result<DMatrix<f64>, PanelError> {
    let p = xtx.nrows();
    let d: Vec<f64> = (0..p).map(|i| xtx[(i, i)].sqrt()).collect();
    let scaled = DMatrix::from_fn(p, p, |i, j| xtx[(i, j)] / (d[i] * d[j]));
    let eig = SymmetricEigen::new(scaled.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut involved = Vec::new();
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= max * 1e-12 {
            let v = eig.eigenvectors.column(k);
            for (j, name) in names.iter().enumerate() {
                if v[j].abs() > 1e-6 && !involved.contains(&name.to_string()) {
                    involved.push(name.to_string());
                }
            }
        }
    }
    if !involved.is_empty() {
        return Err(PanelError::Collinear(involved));
    }
    let inv = scaled
        .cholesky()
        .ok_or_else(|| PanelError::Collinear(names.iter().map(|s| s.to_string()).collect()))?
        .inverse();
    Ok(DMatrix::from_fn(p, p, |i, j| inv[(i, j)] / (d[i] * d[j])))
}
