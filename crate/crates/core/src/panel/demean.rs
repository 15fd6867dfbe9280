use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

/// A categorical dimension: one level code per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub name: String,
    codes: Vec<u32>,
    counts: Vec<f64>,
}

impl Factor {
    /// Levels are numbered in sorted label order, so the coding does not
    /// depend on row order.
    pub fn from_labels<T: Ord + Clone>(name: impl Into<String>, labels: &[T]) -> Factor {
        let mut levels: BTreeMap<T, u32> = labels.iter().map(|l| (l.clone(), 0)).collect();
        for (i, v) in levels.values_mut().enumerate() {
            *v = i as u32;
        }
        let codes = labels.iter().map(|l| levels[l]).collect();
        Self::from_codes(name, codes)
    }

    /// `codes` must be dense (`0..n_levels`, every level present).
    fn from_codes(name: impl Into<String>, codes: Vec<u32>) -> Factor {
        let n = codes.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let mut counts = vec![0.0; n];
        for &c in &codes {
            counts[c as usize] += 1.0;
        }
        debug_assert!(counts.iter().all(|&c| c > 0.0));
        Factor {
            name: name.into(),
            codes,
            counts,
        }
    }

    /// A single-level factor; absorbing it removes the mean.
    pub fn constant(name: impl Into<String>, n: usize) -> Factor {
        Self::from_codes(name, vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn n_levels(&self) -> usize {
        self.counts.len()
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn select(&self, rows: &[usize]) -> Factor {
        let labels: Vec<u32> = rows.iter().map(|&r| self.codes[r]).collect();
        Factor::from_labels(self.name.clone(), &labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemeanOutcome {
    pub iterations: usize,
    /// Largest fixed-effect update in the final sweep, relative to the
    /// column's initial max-abs value.
    pub final_change: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotConverged {
    pub column: usize,
    pub iterations: usize,
    pub final_change: f64,
}

fn demean_column(col: &mut [f64], factors: &[Factor], tol: f64, max_iter: usize) -> Result<DemeanOutcome, (usize, f64)> {
    let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || factors.is_empty() {
        return Ok(DemeanOutcome {
            iterations: 0,
            final_change: 0.0,
        });
    }
    let mut means = Vec::new();
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        change = 0.0;
        for f in factors {
            means.clear();
            means.resize(f.n_levels(), 0.0);
            for (v, &c) in col.iter().zip(&f.codes) {
                means[c as usize] += v;
            }
            for (m, n) in means.iter_mut().zip(&f.counts) {
                *m /= n;
                change = change.max(m.abs());
            }
            for (v, &c) in col.iter_mut().zip(&f.codes) {
                *v -= means[c as usize];
            }
        }
        change /= scale;
        if change <= tol {
            return Ok(DemeanOutcome {
                iterations: it,
                final_change: change,
            });
        }
    }
    Err((max_iter, change))
}

/// Projects every column onto the orthogonal complement of the factors'
/// dummy space by alternating projections. Columns are independent, so
/// the parallel loop is bitwise reproducible.
pub fn demean(columns: &mut [Vec<f64>], factors: &[Factor], tol: f64, max_iter: usize) -> Result<DemeanOutcome, NotConverged> {
    let outcomes: Vec<_> = columns
        .par_iter_mut()
        .map(|c| demean_column(c, factors, tol, max_iter))
        .collect();
    let mut total = DemeanOutcome {
        iterations: 0,
        final_change: 0.0,
    };
    for (column, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                total.iterations = total.iterations.max(o.iterations);
                total.final_change = total.final_change.max(o.final_change);
            }
            Err((iterations, final_change)) => {
                return Err(NotConverged {
                    column,
                    iterations,
                    final_change,
                })
            }
        }
    }
    Ok(total)
}

fn components(a: &Factor, b: &Factor) -> usize {
    let na = a.n_levels();
    let mut parent: Vec<usize> = (0..na + b.n_levels()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut n = parent.len();
    for (&ca, &cb) in a.codes.iter().zip(&b.codes) {
        let (ra, rb) = (find(&mut parent, ca as usize), find(&mut parent, na + cb as usize));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            n -= 1;
        }
    }
    n
}

/// Largest total level count for which the rank of three or more factors is
/// computed exactly from their dense Gram matrix.
const DENSE_RANK_LIMIT: usize = 2_000;

/// Column rank of the stacked dummy matrix of `factors`.
pub fn dummy_rank(factors: &[Factor]) -> usize {
    match factors {
        [] => 0,
        [a] => a.n_levels(),
        [a, b] => a.n_levels() + b.n_levels() - components(a, b),
        _ => {
            let total: usize = factors.iter().map(Factor::n_levels).sum();
            if total <= DENSE_RANK_LIMIT {
                dense_rank(factors, total)
            } else {
                log::warn!("{total} fixed-effect levels: using the pairwise rank bound for the small-sample correction");
                let pair = dummy_rank(&factors[..2]);
                pair + factors[2..].iter().map(|f| f.n_levels() - 1).sum::<usize>()
            }
        }
    }
}

fn dense_rank(factors: &[Factor], total: usize) -> usize {
    let offsets: Vec<usize> = factors
        .iter()
        .scan(0, |acc, f| {
            let o = *acc;
            *acc += f.n_levels();
            Some(o)
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(total, total);
    let mut cols = vec![0usize; factors.len()];
    for row in 0..factors[0].len() {
        for (k, f) in factors.iter().enumerate() {
            cols[k] = offsets[k] + f.codes[row] as usize;
        }
        for &i in &cols {
            for &j in &cols {
                gram[(i, j)] += 1.0;
            }
        }
    }
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eig.eigenvalues.iter().filter(|v| **v > max * 1e-10).count()
}
