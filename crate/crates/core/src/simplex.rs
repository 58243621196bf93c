//! Dense-tableau primal simplex, the one LP engine in the crate.
//!
//! Two entry styles: `Tableau` for equality-form problems where the caller
//! supplies a feasible starting basis (the hinge LPs warm-start at a face
//! vertex and skip phase 1), and `solve_general` for arbitrary rows via the
//! textbook two-phase method. Pricing is Dantzig's rule, switching to
//! Bland's rule after a degenerate streak so cycling cannot occur.

use crate::error::Error;
use crate::Result;

/// Pivots with no objective progress tolerated before Bland's rule kicks in.
const DEGENERATE_STREAK: u32 = 40;

pub(crate) struct Tableau {
    rows: usize,
    cols: usize,
    /// (rows + 1) x (cols + 1); last row is the objective, last column the rhs.
    a: Vec<f64>,
    basis: Vec<usize>,
    banned: Vec<bool>,
    pub iterations: u64,
}

impl Tableau {
    /// `rows_dense[i]` has `cols` coefficients; minimize `cost . x`.
    pub fn new(cost: &[f64], rows_dense: Vec<Vec<f64>>, rhs: &[f64]) -> Self {
        let rows = rows_dense.len();
        let cols = cost.len();
        let stride = cols + 1;
        let mut a = vec![0.0; (rows + 1) * stride];
        for (i, row) in rows_dense.iter().enumerate() {
            debug_assert_eq!(row.len(), cols);
            a[i * stride..i * stride + cols].copy_from_slice(row);
            a[i * stride + cols] = rhs[i];
        }
        a[rows * stride..rows * stride + cols].copy_from_slice(cost);
        Self {
            rows,
            cols,
            a,
            basis: Vec::new(),
            banned: vec![false; cols],
            iterations: 0,
        }
    }

    /// Adopt an already-reduced tableau: basis columns are identity columns,
    /// the objective row holds reduced costs, the rhs column is the (feasible)
    /// basic solution, and the objective rhs is minus the basis objective.
    pub fn from_parts(rows: usize, cols: usize, a: Vec<f64>, basis: Vec<usize>) -> Self {
        debug_assert_eq!(a.len(), (rows + 1) * (cols + 1));
        debug_assert_eq!(basis.len(), rows);
        Self {
            rows,
            cols,
            a,
            basis,
            banned: vec![false; cols],
            iterations: 0,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    /// Gaussian steps that turn the chosen basis columns into the identity.
    /// Fails if the basis is singular or the implied point infeasible.
    pub fn install_basis(&mut self, basis: Vec<usize>, tol: f64) -> Result<()> {
        debug_assert_eq!(basis.len(), self.rows);
        let stride = self.cols + 1;
        for (i, &col) in basis.iter().enumerate() {
            // Bring a nonzero for `col` into row i using rows i.. only;
            // earlier rows already hold previous basis columns.
            let pivot_row = (i..self.rows)
                .max_by(|&p, &q| self.at(p, col).abs().total_cmp(&self.at(q, col).abs()))
                .ok_or_else(|| Error::NumericalFailure("basis shorter than rows".into()))?;
            if self.at(pivot_row, col).abs() <= tol {
                return Err(Error::NumericalFailure("singular starting basis".into()));
            }
            if pivot_row != i {
                for j in 0..stride {
                    self.a.swap(i * stride + j, pivot_row * stride + j);
                }
            }
            self.reduce_on(i, col);
        }
        self.basis = basis;
        for i in 0..self.rows {
            let b = self.rhs(i);
            if b < -1e-7 {
                return Err(Error::NumericalFailure(format!(
                    "infeasible starting basis, rhs {b}"
                )));
            }
            if b < 0.0 {
                self.a[i * stride + self.cols] = 0.0;
            }
        }
        Ok(())
    }

    /// Normalize row `i` on column `col` and eliminate `col` everywhere else,
    /// objective row included.
    fn reduce_on(&mut self, i: usize, col: usize) {
        let stride = self.cols + 1;
        let inv = 1.0 / self.at(i, col);
        if inv != 1.0 {
            for j in 0..stride {
                self.a[i * stride + j] *= inv;
            }
        }
        self.a[i * stride + col] = 1.0;
        for r in 0..=self.rows {
            if r == i {
                continue;
            }
            let factor = self.at(r, col);
            if factor != 0.0 {
                for j in 0..stride {
                    let sub = factor * self.a[i * stride + j];
                    self.a[r * stride + j] -= sub;
                }
                self.a[r * stride + col] = 0.0;
            }
        }
    }

    pub fn ban(&mut self, col: usize) {
        self.banned[col] = true;
    }

    /// Primal simplex until no reduced cost is below `-tol`.
    pub fn optimize(&mut self, tol: f64, max_iterations: u64) -> Result<()> {
        let stride = self.cols + 1;
        let obj = self.rows * stride;
        let mut streak: u32 = 0;
        loop {
            let bland = streak > DEGENERATE_STREAK;
            let mut enter = usize::MAX;
            let mut best = -tol;
            for j in 0..self.cols {
                if self.banned[j] {
                    continue;
                }
                let rc = self.a[obj + j];
                if rc < best {
                    enter = j;
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            if enter == usize::MAX {
                return Ok(());
            }

            let mut leave = usize::MAX;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let coef = self.at(i, enter);
                if coef > tol {
                    let ratio = self.rhs(i) / coef;
                    if ratio < best_ratio - 1e-12
                        || (ratio < best_ratio + 1e-12
                            && (leave == usize::MAX || self.basis[i] < self.basis[leave]))
                    {
                        best_ratio = ratio;
                        leave = i;
                    }
                }
            }
            if leave == usize::MAX {
                return Err(Error::Unbounded);
            }
            streak = if best_ratio <= tol { streak + 1 } else { 0 };

            self.reduce_on(leave, enter);
            self.basis[leave] = enter;
            self.iterations += 1;
            if self.iterations > max_iterations {
                return Err(Error::NumericalFailure(format!(
                    "simplex exceeded {max_iterations} pivots"
                )));
            }
        }
    }

    /// Objective value of the current basis (minimization).
    pub fn value(&self) -> f64 {
        -self.rhs(self.rows)
    }

    pub fn extract(&self, x: &mut [f64]) {
        x.fill(0.0);
        for (i, &col) in self.basis.iter().enumerate() {
            if col < x.len() {
                x[col] = self.rhs(i);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Le,
    // Production rows are Le or Eq; Ge keeps the general solver honest in
    // tests.
    #[cfg_attr(not(test), allow(dead_code))]
    Ge,
    Eq,
}

pub(crate) struct GeneralRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

pub(crate) struct GeneralLp {
    pub num_vars: usize,
    /// Minimized objective over the structural variables.
    pub cost: Vec<f64>,
    pub rows: Vec<GeneralRow>,
}

pub(crate) struct GeneralSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub iterations: u64,
}

/// Two-phase dense simplex for arbitrary row senses. Structural variables
/// are nonnegative; shift beforehand if a lower bound differs.
pub(crate) fn solve_general(lp: &GeneralLp, tol: f64) -> Result<GeneralSolution> {
    let n = lp.num_vars;
    let m = lp.rows.len();

    // Column map: structural, then one slack/surplus per inequality row,
    // then artificials where the start lacks an identity column.
    let mut slack_col = vec![usize::MAX; m];
    let mut next = n;
    for (i, row) in lp.rows.iter().enumerate() {
        if row.sense != Sense::Eq {
            slack_col[i] = next;
            next += 1;
        }
    }
    let mut artificial_col = vec![usize::MAX; m];
    let mut needs_artificial = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = row.rhs < 0.0;
        let slack_is_basic = match row.sense {
            Sense::Le => !flip,
            Sense::Ge => flip,
            Sense::Eq => false,
        };
        if !slack_is_basic {
            artificial_col[i] = next;
            needs_artificial.push(i);
            next += 1;
        }
    }
    let cols = next;

    let mut dense = vec![vec![0.0; cols]; m];
    let mut rhs = vec![0.0; m];
    let mut basis = vec![usize::MAX; m];
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
        for &(j, c) in &row.coeffs {
            debug_assert!(j < n);
            dense[i][j] += sign * c;
        }
        rhs[i] = sign * row.rhs;
        if slack_col[i] != usize::MAX {
            let coef = match row.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => unreachable!(),
            };
            dense[i][slack_col[i]] = sign * coef;
        }
        basis[i] = if artificial_col[i] != usize::MAX {
            dense[i][artificial_col[i]] = 1.0;
            artificial_col[i]
        } else {
            slack_col[i]
        };
    }

    let max_iter = 2000 + 100 * (m as u64 + cols as u64);

    // Phase 1: minimize the artificial mass.
    let mut phase1_cost = vec![0.0; cols];
    for &i in &needs_artificial {
        phase1_cost[artificial_col[i]] = 1.0;
    }
    let mut t = Tableau::new(&phase1_cost, dense.clone(), &rhs);
    t.install_basis(basis.clone(), tol)?;
    if !needs_artificial.is_empty() {
        t.optimize(tol, max_iter)?;
        if t.value() > 1e-7 {
            return Err(Error::Infeasible);
        }
        // Drive basic artificials out on degenerate pivots so they cannot
        // re-inflate in phase 2. A row with no eligible pivot is redundant
        // (all real coefficients zero) and harmlessly keeps its artificial.
        let first_artificial = cols - needs_artificial.len();
        for i in 0..m {
            if t.basis[i] < first_artificial {
                continue;
            }
            let replacement = (0..first_artificial)
                .max_by(|&p, &q| t.at(i, p).abs().total_cmp(&t.at(i, q).abs()));
            if let Some(j) = replacement {
                if t.at(i, j).abs() > 1e-7 {
                    t.reduce_on(i, j);
                    t.basis[i] = j;
                }
            }
        }
    }

    // Phase 2 on a fresh tableau seeded with phase 1's final basis;
    // leftover artificials sit in provably vacuous rows and may not re-enter.
    let final_basis = t.basis.clone();
    let iterations_phase1 = t.iterations;
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.cost);
    let mut t2 = Tableau::new(&cost, dense, &rhs);
    t2.install_basis(final_basis, tol)?;
    for &i in &needs_artificial {
        t2.ban(artificial_col[i]);
    }
    t2.optimize(tol, max_iter)?;

    let mut x = vec![0.0; cols];
    t2.extract(&mut x);
    x.truncate(n);
    Ok(GeneralSolution {
        value: t2.value(),
        x,
        iterations: iterations_phase1 + t2.iterations,
    })
}
