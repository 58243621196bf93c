//! Exact minimization of the shortfall sum over a portfolio complex.
//!
//! For a threshold r the objective is sum_t (r - w'Y_t)_+ with w ranging over
//! one face of the complex; the complex optimum is the best face. On a face
//! with vertex returns p_tj and barycentric weights u this is the LP
//!
//!   min sum_t W_t  s.t.  W_t >= r - p_t.u,  sum u = 1,  u, W >= 0.
//!
//! Rows never crossing r are resolved in presolve: rows with max_j p_tj <= r
//! always pay r - p_t.u and fold into a linear objective, rows with
//! min_j p_tj >= r never pay. Only crossing rows carry a shortfall and a
//! surplus column, and the solve warm-starts at the best vertex, so a typical
//! call costs a handful of pivots.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::Error;
use crate::panel::ReturnPanel;
use crate::sets::{PortfolioSet, PortfolioWeights};
use crate::simplex::{self, GeneralLp, GeneralRow, Sense, Tableau};
use crate::Result;

/// Objective values further below zero than this are treated as solver
/// breakdown rather than roundoff.
const NEGATIVE_OBJECTIVE_GUARD: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Branch-and-bound stopped at the node cap; the value is a valid bound
    /// from the best incumbent found.
    NodeLimit,
}

/// Minimizer of the shortfall sum at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub value: f64,
    pub weights: PortfolioWeights,
    pub face_index: usize,
    pub iterations: u64,
    pub status: SolveStatus,
}

/// Minimize sum_t (r - w'Y_t)_+ over the complex.
pub fn solve_hinge_min(
    panel: &ReturnPanel,
    set: &PortfolioSet,
    r: f64,
    tols: &Tolerances,
) -> Result<LpSolution> {
    if panel.assets() != set.assets() {
        return Err(Error::DimensionMismatch {
            expected: set.assets(),
            found: panel.assets(),
        });
    }
    let prepared = PreparedHinge::new(panel, set);
    let m = prepared.solve(r, tols)?;
    let weights =
        PortfolioWeights::from_combination(&set.face_vertices(m.face), &m.coeffs)?;
    Ok(LpSolution {
        value: m.value,
        weights,
        face_index: m.face,
        iterations: m.iterations,
        status: SolveStatus::Optimal,
    })
}

/// Best face optimum across the complex.
#[derive(Debug, Clone)]
pub(crate) struct ComplexMin {
    pub value: f64,
    pub face: usize,
    /// Barycentric coordinates on the winning face.
    pub coeffs: Vec<f64>,
    pub iterations: u64,
}

/// Vertex return columns of one face with the row envelope and prefix sums
/// ordered by the row maximum, so presolve partitioning is a binary search.
pub(crate) struct PreparedFace {
    m: usize,
    /// cols[j][t] = vertex_j . Y_t.
    cols: Vec<Vec<f64>>,
    lo: Vec<f64>,
    /// Row indices sorted by ascending row maximum.
    order_hi: Vec<u32>,
    hi_sorted: Vec<f64>,
    /// prefix[j][k] = sum of cols[j] over the first k rows of `order_hi`.
    prefix: Vec<Vec<f64>>,
}

impl PreparedFace {
    fn new(panel: &ReturnPanel, vertices: &[&[f64]]) -> Self {
        let t_len = panel.periods();
        let m = vertices.len();
        let cols: Vec<Vec<f64>> = vertices
            .iter()
            .map(|v| (0..t_len).map(|t| dot(panel.row(t), v)).collect())
            .collect();
        let mut lo = vec![f64::INFINITY; t_len];
        let mut hi = vec![f64::NEG_INFINITY; t_len];
        for col in &cols {
            for (t, &p) in col.iter().enumerate() {
                lo[t] = lo[t].min(p);
                hi[t] = hi[t].max(p);
            }
        }
        let mut order_hi: Vec<u32> = (0..t_len as u32).collect();
        order_hi.sort_by(|&a, &b| {
            hi[a as usize]
                .total_cmp(&hi[b as usize])
                .then(a.cmp(&b))
        });
        let hi_sorted: Vec<f64> = order_hi.iter().map(|&t| hi[t as usize]).collect();
        let prefix: Vec<Vec<f64>> = cols
            .iter()
            .map(|col| {
                let mut acc = 0.0;
                let mut p = Vec::with_capacity(t_len + 1);
                p.push(0.0);
                for &t in &order_hi {
                    acc += col[t as usize];
                    p.push(acc);
                }
                p
            })
            .collect();
        Self {
            m,
            cols,
            lo,
            order_hi,
            hi_sorted,
            prefix,
        }
    }

    pub(crate) fn vertex_count(&self) -> usize {
        self.m
    }

    pub(crate) fn vertex_returns(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub(crate) fn row_min(&self) -> &[f64] {
        &self.lo
    }

    /// Rows with max <= r (folded), and the crossing rows with min < r < max.
    pub(crate) fn split(&self, r: f64) -> (usize, Vec<u32>) {
        let k = self.hi_sorted.partition_point(|&h| h <= r);
        let crossing: Vec<u32> = self.order_hi[k..]
            .iter()
            .copied()
            .filter(|&t| self.lo[t as usize] < r)
            .collect();
        (k, crossing)
    }

    fn solve(&self, r: f64, tols: &Tolerances) -> Result<FaceMin> {
        let (k, crossing) = self.split(r);
        let konst = k as f64 * r;
        let lin: Vec<f64> = (0..self.m).map(|j| -self.prefix[j][k]).collect();

        if crossing.is_empty() {
            // Linear objective over the simplex: a vertex wins.
            let mut best = 0usize;
            for j in 1..self.m {
                if konst + lin[j] < konst + lin[best] {
                    best = j;
                }
            }
            let mut coeffs = vec![0.0; self.m];
            coeffs[best] = 1.0;
            return Ok(FaceMin {
                value: guard(konst + lin[best])?,
                coeffs,
                iterations: 0,
            });
        }

        // Vertex objectives over the crossing rows pick the warm start.
        let c = crossing.len();
        let mut p_mat = vec![0.0; c * self.m];
        for (q, &t) in crossing.iter().enumerate() {
            for j in 0..self.m {
                p_mat[q * self.m + j] = self.cols[j][t as usize];
            }
        }
        let mut vertex_obj = lin.clone();
        for q in 0..c {
            for j in 0..self.m {
                let d = r - p_mat[q * self.m + j];
                if d > 0.0 {
                    vertex_obj[j] += d;
                }
            }
        }
        let mut j0 = 0usize;
        for j in 1..self.m {
            if vertex_obj[j] < vertex_obj[j0] {
                j0 = j;
            }
        }
        if konst + vertex_obj[j0] == 0.0 {
            let mut coeffs = vec![0.0; self.m];
            coeffs[j0] = 1.0;
            return Ok(FaceMin {
                value: 0.0,
                coeffs,
                iterations: 0,
            });
        }

        match self.solve_crossing_tableau(r, konst, &lin, &crossing, &p_mat, j0, tols) {
            Ok(v) => Ok(v),
            // Warm-started path hit numerical trouble; redo with the
            // two-phase fallback before giving up.
            Err(_) => self.solve_crossing_general(r, konst, &lin, &crossing, &p_mat, tols),
        }
    }

    /// Build the tableau already reduced on the crash basis: shortfall or
    /// surplus per crossing row (whichever is nonnegative at vertex j0) and
    /// u_j0 for the convexity row.
    #[allow(clippy::too_many_arguments)]
    fn solve_crossing_tableau(
        &self,
        r: f64,
        konst: f64,
        lin: &[f64],
        crossing: &[u32],
        p_mat: &[f64],
        j0: usize,
        tols: &Tolerances,
    ) -> Result<FaceMin> {
        let m = self.m;
        let c = crossing.len();
        let rows = c + 1;
        let cols = m + 2 * c;
        let stride = cols + 1;
        let mut a = vec![0.0; (rows + 1) * stride];
        let mut basis = vec![0usize; rows];

        let mut rc_u: Vec<f64> = (0..m).map(|j| lin[j] - lin[j0]).collect();
        let mut basis_value = lin[j0];
        for q in 0..c {
            let p0 = p_mat[q * m + j0];
            let d = r - p0;
            let shortfall_basic = d > 0.0;
            let sign = if shortfall_basic { 1.0 } else { -1.0 };
            let row = &mut a[q * stride..(q + 1) * stride];
            for j in 0..m {
                row[j] = sign * (p_mat[q * m + j] - p0);
            }
            row[m + q] = sign;
            row[m + c + q] = -sign;
            row[cols] = sign * d;
            if shortfall_basic {
                basis[q] = m + q;
                basis_value += d;
                for j in 0..m {
                    rc_u[j] -= p_mat[q * m + j] - p0;
                }
                a[rows * stride + m + c + q] = 1.0;
            } else {
                basis[q] = m + c + q;
                a[rows * stride + m + q] = 1.0;
            }
        }
        {
            let sum_row = &mut a[c * stride..(c + 1) * stride];
            for j in 0..m {
                sum_row[j] = 1.0;
            }
            sum_row[cols] = 1.0;
            basis[c] = j0;
        }
        a[rows * stride..rows * stride + m].copy_from_slice(&rc_u);
        a[rows * stride + cols] = -basis_value;

        let mut t = Tableau::from_parts(rows, cols, a, basis);
        t.optimize(tols.lp_tol, 2000 + 100 * (rows as u64 + cols as u64))?;
        let mut x = vec![0.0; cols];
        t.extract(&mut x);
        x.truncate(m);
        Ok(FaceMin {
            value: guard(konst + t.value())?,
            coeffs: x,
            iterations: t.iterations,
        })
    }

    fn solve_crossing_general(
        &self,
        r: f64,
        konst: f64,
        lin: &[f64],
        crossing: &[u32],
        p_mat: &[f64],
        tols: &Tolerances,
    ) -> Result<FaceMin> {
        let m = self.m;
        let c = crossing.len();
        let mut cost = vec![0.0; m + c];
        cost[..m].copy_from_slice(lin);
        for w in &mut cost[m..] {
            *w = 1.0;
        }
        let mut rows = Vec::with_capacity(c + 1);
        for q in 0..c {
            let mut coeffs: Vec<(usize, f64)> =
                (0..m).map(|j| (j, -p_mat[q * m + j])).collect();
            coeffs.push((m + q, -1.0));
            rows.push(GeneralRow {
                coeffs,
                sense: Sense::Le,
                rhs: -r,
            });
        }
        rows.push(GeneralRow {
            coeffs: (0..m).map(|j| (j, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
        let lp = GeneralLp {
            num_vars: m + c,
            cost,
            rows,
        };
        let s = simplex::solve_general(&lp, tols.lp_tol)?;
        Ok(FaceMin {
            value: guard(konst + s.value)?,
            coeffs: s.x[..m].to_vec(),
            iterations: s.iterations,
        })
    }
}

#[derive(Debug, Clone)]
struct FaceMin {
    value: f64,
    coeffs: Vec<f64>,
    iterations: u64,
}

fn guard(raw: f64) -> Result<f64> {
    if raw < NEGATIVE_OBJECTIVE_GUARD {
        return Err(Error::NumericalFailure(format!(
            "shortfall objective {raw} below zero"
        )));
    }
    Ok(raw.max(0.0))
}

fn dot(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Per-face workspaces for repeated solves on one panel and set.
pub(crate) struct PreparedHinge {
    faces: Vec<PreparedFace>,
}

impl PreparedHinge {
    pub(crate) fn new(panel: &ReturnPanel, set: &PortfolioSet) -> Self {
        let faces = (0..set.faces().len())
            .map(|f| PreparedFace::new(panel, &set.face_vertices(f)))
            .collect();
        Self { faces }
    }

    pub(crate) fn faces(&self) -> &[PreparedFace] {
        &self.faces
    }

    /// Minimum over all faces; ties keep the lowest face index.
    pub(crate) fn solve(&self, r: f64, tols: &Tolerances) -> Result<ComplexMin> {
        let mut best: Option<ComplexMin> = None;
        let mut iterations = 0u64;
        for (f, face) in self.faces.iter().enumerate() {
            let sol = face.solve(r, tols)?;
            iterations += sol.iterations;
            let better = match &best {
                None => true,
                Some(b) => sol.value < b.value,
            };
            if better {
                best = Some(ComplexMin {
                    value: sol.value,
                    face: f,
                    coeffs: sol.coeffs,
                    iterations: 0,
                });
            }
        }
        let mut out = best.expect("validated sets have at least one face");
        out.iterations = iterations;
        Ok(out)
    }
}
