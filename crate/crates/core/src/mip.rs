//! Exact maximization of the clipped-sum objective over a portfolio complex.
//!
//! For a threshold r the objective is sum_t max(w'Y_t, r), maximized over
//! each face and then across faces. The mixed-integer model attaches a binary
//! b_t to every row that can sit on either side of r:
//!
//!   max sum X_t   s.t.  X_t <= p_t.u + M(1 - b_t),  X_t <= r + M b_t,
//!                       p_t.u - r <= M b_t,  sum u = 1,  u >= 0,
//!
//! with M = |r| + max |p_tj| + 1 per face. The relaxation also carries the
//! envelope row X_t <= sum_j u_j max(p_tj, r), which every integer-feasible
//! point satisfies, so adding it cannot cut the true optimum. On a face the
//! envelope makes the root relaxation equal max_j sum_t max(p_tj, r): each
//! row's contribution is linear in u under the envelope, a linear objective
//! over the simplex peaks at a vertex, and any vertex is integer-feasible.
//! The root therefore closes at the best-vertex incumbent and branching only
//! happens when the shortcut is disabled (as the tests do to drive the
//! branch-and-bound machinery).

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::Error;
use crate::lp::{PreparedFace, PreparedHinge, SolveStatus};
use crate::panel::ReturnPanel;
use crate::sets::{PortfolioSet, PortfolioWeights};
use crate::simplex::{self, GeneralLp, GeneralRow, Sense};
use crate::Result;

pub const DEFAULT_NODE_CAP: u64 = 1_000_000;

/// Binaries this close to an integer count as settled.
const INTEGRALITY_TOL: f64 = 1e-6;

/// Maximizer of the clipped sum at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MipSolution {
    pub value: f64,
    pub weights: PortfolioWeights,
    pub face_index: usize,
    /// Per period: 1 when the chosen portfolio return clears the threshold.
    pub indicators: Vec<u8>,
    pub nodes_explored: u64,
    pub iterations: u64,
    pub status: SolveStatus,
}

/// Maximize sum_t max(w'Y_t, r) over the complex.
pub fn solve_max_of_max(
    panel: &ReturnPanel,
    set: &PortfolioSet,
    r: f64,
    tols: &Tolerances,
) -> Result<MipSolution> {
    solve_max_of_max_capped(panel, set, r, tols, DEFAULT_NODE_CAP)
}

pub fn solve_max_of_max_capped(
    panel: &ReturnPanel,
    set: &PortfolioSet,
    r: f64,
    tols: &Tolerances,
    node_cap: u64,
) -> Result<MipSolution> {
    if panel.assets() != set.assets() {
        return Err(Error::DimensionMismatch {
            expected: set.assets(),
            found: panel.assets(),
        });
    }
    let prepared = PreparedHinge::new(panel, set);
    let best = solve_prepared_max(&prepared, r, tols, node_cap)?;
    let weights =
        PortfolioWeights::from_combination(&set.face_vertices(best.face), &best.coeffs)?;
    let indicators = (0..panel.periods())
        .map(|t| u8::from(dot(panel.row(t), weights.as_slice()) > r + tols.tie_tol))
        .collect();
    Ok(MipSolution {
        value: best.value,
        weights,
        face_index: best.face,
        indicators,
        nodes_explored: best.nodes,
        iterations: best.iterations,
        status: if best.capped {
            SolveStatus::NodeLimit
        } else {
            SolveStatus::Optimal
        },
    })
}

#[derive(Debug, Clone)]
pub(crate) struct ComplexMax {
    pub value: f64,
    pub face: usize,
    pub coeffs: Vec<f64>,
    pub nodes: u64,
    pub iterations: u64,
    pub capped: bool,
}

/// Maximum over all faces; ties keep the lowest face index.
pub(crate) fn solve_prepared_max(
    prepared: &PreparedHinge,
    r: f64,
    tols: &Tolerances,
    node_cap: u64,
) -> Result<ComplexMax> {
    let mut best: Option<ComplexMax> = None;
    let mut nodes = 0u64;
    let mut iterations = 0u64;
    let mut capped = false;
    for (f, face) in prepared.faces().iter().enumerate() {
        let sol = solve_face_max(face, r, tols, node_cap, true)?;
        nodes += sol.nodes;
        iterations += sol.iterations;
        capped |= sol.capped;
        let better = match &best {
            None => true,
            Some(b) => sol.value > b.value,
        };
        if better {
            best = Some(ComplexMax {
                value: sol.value,
                face: f,
                coeffs: sol.coeffs,
                nodes: 0,
                iterations: 0,
                capped: false,
            });
        }
    }
    let mut out = best.expect("validated sets have at least one face");
    out.nodes = nodes;
    out.iterations = iterations;
    out.capped = capped;
    Ok(out)
}

#[derive(Debug, Clone)]
struct FaceMax {
    value: f64,
    coeffs: Vec<f64>,
    nodes: u64,
    iterations: u64,
    capped: bool,
}

struct Incumbent {
    value: f64,
    coeffs: Vec<f64>,
    indicators: Vec<u8>,
}

/// Candidate replaces the incumbent on a strictly better value, or on an
/// equal value with a lexicographically smaller indicator vector.
fn offer(incumbent: &mut Option<Incumbent>, value: f64, coeffs: Vec<f64>, indicators: Vec<u8>) {
    let take = match incumbent {
        None => true,
        Some(inc) => value > inc.value || (value == inc.value && indicators < inc.indicators),
    };
    if take {
        *incumbent = Some(Incumbent {
            value,
            coeffs,
            indicators,
        });
    }
}

fn face_indicators(face: &PreparedFace, u: &[f64], r: f64, tie_tol: f64) -> Vec<u8> {
    let t_len = face.row_min().len();
    (0..t_len)
        .map(|t| {
            let p: f64 = (0..face.vertex_count())
                .map(|j| u[j] * face.vertex_returns(j)[t])
                .sum();
            u8::from(p > r + tie_tol)
        })
        .collect()
}

fn face_objective(face: &PreparedFace, u: &[f64], r: f64) -> f64 {
    let t_len = face.row_min().len();
    (0..t_len)
        .map(|t| {
            let p: f64 = (0..face.vertex_count())
                .map(|j| u[j] * face.vertex_returns(j)[t])
                .sum();
            p.max(r)
        })
        .sum()
}

fn solve_face_max(
    face: &PreparedFace,
    r: f64,
    tols: &Tolerances,
    node_cap: u64,
    root_shortcut: bool,
) -> Result<FaceMax> {
    let m = face.vertex_count();
    let t_len = face.row_min().len();

    // Best vertex, with the tie rules applied to exact vertex evaluations.
    let mut incumbent: Option<Incumbent> = None;
    let mut root_bound = f64::NEG_INFINITY;
    for j in 0..m {
        let col = face.vertex_returns(j);
        let value: f64 = col.iter().map(|&p| p.max(r)).sum();
        root_bound = root_bound.max(value);
        let indicators: Vec<u8> = (0..t_len)
            .map(|t| u8::from(col[t] > r + tols.tie_tol))
            .collect();
        let mut coeffs = vec![0.0; m];
        coeffs[j] = 1.0;
        offer(&mut incumbent, value, coeffs, indicators);
    }
    let vertex_best = incumbent.as_ref().expect("nonempty face").value;

    if root_shortcut && root_bound <= vertex_best + tols.mip_tol {
        // Envelope-tight root: relaxation and incumbent coincide, so the
        // tree is a single closed node.
        let inc = incumbent.unwrap();
        return Ok(FaceMax {
            value: inc.value,
            coeffs: inc.coeffs,
            nodes: 1,
            iterations: 0,
            capped: false,
        });
    }
    if !root_shortcut {
        // Cold start so relaxations actually drive the search.
        incumbent = None;
    }

    let (_, crossing) = face.split(r);
    let mut nodes = 0u64;
    let mut iterations = 0u64;
    let mut capped = false;
    // Nodes ordered by bound, then insertion id.
    let mut queue: Vec<Node> = vec![Node {
        id: 0,
        bound: f64::INFINITY,
        fixes: Vec::new(),
    }];
    let mut next_id = 1u64;
    while let Some(pos) = pick_best(&queue) {
        let node = queue.swap_remove(pos);
        if nodes >= node_cap {
            capped = true;
            break;
        }
        nodes += 1;
        if let Some(inc) = &incumbent {
            if node.bound <= inc.value + tols.mip_tol {
                continue;
            }
        }
        let relax = match node_relaxation(face, r, &crossing, &node.fixes, tols) {
            Ok(s) => s,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        };
        iterations += relax.iterations;
        if let Some(inc) = &incumbent {
            if relax.value <= inc.value + tols.mip_tol {
                continue;
            }
        }
        let fractional = relax
            .b
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > INTEGRALITY_TOL && b < 1.0 - INTEGRALITY_TOL)
            .min_by(|(p, &a), (q, &b)| {
                (a - 0.5)
                    .abs()
                    .total_cmp(&(b - 0.5).abs())
                    .then(p.cmp(q))
            })
            .map(|(q, _)| q);
        match fractional {
            None => {
                let value = face_objective(face, &relax.u, r);
                let indicators = face_indicators(face, &relax.u, r, tols.tie_tol);
                offer(&mut incumbent, value, relax.u, indicators);
            }
            Some(q) => {
                for fix in [false, true] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((q, fix));
                    queue.push(Node {
                        id: next_id,
                        bound: relax.value,
                        fixes,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let inc = incumbent.ok_or_else(|| {
        Error::NumericalFailure("node cap reached before any incumbent".into())
    })?;
    Ok(FaceMax {
        value: inc.value,
        coeffs: inc.coeffs,
        nodes,
        iterations,
        capped,
    })
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    bound: f64,
    /// (crossing-row position, fixed binary value).
    fixes: Vec<(usize, bool)>,
}

fn pick_best(queue: &[Node]) -> Option<usize> {
    (0..queue.len()).max_by(|&p, &q| {
        queue[p]
            .bound
            .total_cmp(&queue[q].bound)
            .then(queue[q].id.cmp(&queue[p].id))
    })
}

struct Relaxation {
    value: f64,
    u: Vec<f64>,
    /// Binary values for all crossing rows, fixed ones included.
    b: Vec<f64>,
    iterations: u64,
}

/// LP relaxation of one node. Rows fixed to 1 contribute their portfolio
/// return linearly; rows fixed to 0 contribute r and constrain the return to
/// stay at or below r.
fn node_relaxation(
    face: &PreparedFace,
    r: f64,
    crossing: &[u32],
    fixes: &[(usize, bool)],
    tols: &Tolerances,
) -> Result<Relaxation> {
    let m = face.vertex_count();
    let t_len = face.row_min().len();
    let c = crossing.len();
    let mut fixed = vec![None; c];
    for &(q, v) in fixes {
        fixed[q] = Some(v);
    }
    let free: Vec<usize> = (0..c).filter(|&q| fixed[q].is_none()).collect();

    let mut big_m = r.abs() + 1.0;
    for j in 0..m {
        for &p in face.vertex_returns(j) {
            big_m = big_m.max(r.abs() + p.abs() + 1.0);
        }
    }

    // Linear objective piece and constant piece from settled rows.
    let mut constant = 0.0;
    let mut lin = vec![0.0; m];
    let crossing_mark = {
        let mut mark = vec![false; t_len];
        for &t in crossing {
            mark[t as usize] = true;
        }
        mark
    };
    for t in 0..t_len {
        if crossing_mark[t] {
            continue;
        }
        if face.row_min()[t] >= r {
            for (j, l) in lin.iter_mut().enumerate() {
                *l += face.vertex_returns(j)[t];
            }
        } else {
            constant += r;
        }
    }

    // Variables: u, then per free row a shifted value and a binary.
    let var_x = |slot: usize| m + 2 * slot;
    let var_b = |slot: usize| m + 2 * slot + 1;
    let num_vars = m + 2 * free.len();
    let mut cost = vec![0.0; num_vars];
    let mut rows: Vec<GeneralRow> = Vec::with_capacity(4 * free.len() + fixes.len() + 1);

    for (slot, &q) in free.iter().enumerate() {
        let t = crossing[q] as usize;
        let shift = face.row_min()[t];
        constant += shift;
        cost[var_x(slot)] = -1.0;
        // value <= return + M(1 - b)
        let mut row_a: Vec<(usize, f64)> = (0..m)
            .map(|j| (j, -face.vertex_returns(j)[t]))
            .collect();
        row_a.push((var_x(slot), 1.0));
        row_a.push((var_b(slot), big_m));
        rows.push(GeneralRow {
            coeffs: row_a,
            sense: Sense::Le,
            rhs: big_m - shift,
        });
        // value <= r + M b
        rows.push(GeneralRow {
            coeffs: vec![(var_x(slot), 1.0), (var_b(slot), -big_m)],
            sense: Sense::Le,
            rhs: r - shift,
        });
        // return - r <= M b
        let mut row_c: Vec<(usize, f64)> = (0..m)
            .map(|j| (j, face.vertex_returns(j)[t]))
            .collect();
        row_c.push((var_b(slot), -big_m));
        rows.push(GeneralRow {
            coeffs: row_c,
            sense: Sense::Le,
            rhs: r,
        });
        // Envelope: value <= sum_j u_j max(p_tj, r); valid for every integer
        // point and the source of the tight root bound.
        let mut row_d: Vec<(usize, f64)> = (0..m)
            .map(|j| (j, -face.vertex_returns(j)[t].max(r)))
            .collect();
        row_d.push((var_x(slot), 1.0));
        rows.push(GeneralRow {
            coeffs: row_d,
            sense: Sense::Le,
            rhs: -shift,
        });
        // b <= 1
        rows.push(GeneralRow {
            coeffs: vec![(var_b(slot), 1.0)],
            sense: Sense::Le,
            rhs: 1.0,
        });
    }
    for (q, state) in fixed.iter().enumerate() {
        let Some(v) = state else { continue };
        let t = crossing[q] as usize;
        if *v {
            for (j, l) in lin.iter_mut().enumerate() {
                *l += face.vertex_returns(j)[t];
            }
        } else {
            constant += r;
            rows.push(GeneralRow {
                coeffs: (0..m).map(|j| (j, face.vertex_returns(j)[t])).collect(),
                sense: Sense::Le,
                rhs: r + tols.tie_tol,
            });
        }
    }
    for (j, l) in lin.iter().enumerate() {
        cost[j] = -l;
    }
    rows.push(GeneralRow {
        coeffs: (0..m).map(|j| (j, 1.0)).collect(),
        sense: Sense::Eq,
        rhs: 1.0,
    });

    let lp = GeneralLp {
        num_vars,
        cost,
        rows,
    };
    let s = simplex::solve_general(&lp, tols.lp_tol)?;
    let mut b = vec![0.0; c];
    for (q, state) in fixed.iter().enumerate() {
        if *state == Some(true) {
            b[q] = 1.0;
        }
    }
    for (slot, &q) in free.iter().enumerate() {
        b[q] = s.x[var_b(slot)];
    }
    Ok(Relaxation {
        value: constant - s.value,
        u: s.x[..m].to_vec(),
        b,
        iterations: s.iterations,
    })
}

fn dot(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn panel(rows: Vec<Vec<f64>>) -> ReturnPanel {
        let n = rows[0].len();
        let names = (0..n).map(|i| format!("a{}", i + 1)).collect();
        ReturnPanel::new(rows, names, None).unwrap()
    }

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn singleton_matches_direct_evaluation() {
        let p = panel(vec![vec![0.02], vec![-0.03], vec![0.01]]);
        let set = PortfolioSet::singleton(vec![1.0]).unwrap();
        for &r in &[-0.05, 0.0, 0.015, 0.1] {
            let sol = solve_max_of_max(&p, &set, r, &tols()).unwrap();
            let expect: f64 = [0.02, -0.03, 0.01].iter().map(|&x: &f64| x.max(r)).sum();
            assert_abs_diff_eq!(sol.value, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn beats_or_matches_every_vertex() {
        let p = panel(vec![
            vec![0.03, -0.02, 0.01],
            vec![-0.01, 0.04, 0.0],
            vec![0.02, 0.01, -0.03],
            vec![-0.02, -0.01, 0.05],
        ]);
        let set = PortfolioSet::standard_simplex(3);
        let r = 0.005;
        let sol = solve_max_of_max(&p, &set, r, &tols()).unwrap();
        for j in 0..3 {
            let vertex: f64 = (0..4).map(|t| p.row(t)[j].max(r)).sum();
            assert!(sol.value >= vertex - 1e-12);
        }
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.nodes_explored, 1);
    }

    #[test]
    fn value_is_monotone_in_threshold() {
        let p = panel(vec![
            vec![0.021, -0.013],
            vec![-0.008, 0.017],
            vec![0.004, 0.009],
            vec![-0.019, -0.002],
        ]);
        let set = PortfolioSet::standard_simplex(2);
        let mut last = f64::NEG_INFINITY;
        for i in 0..30 {
            let r = -0.03 + 0.002 * i as f64;
            let sol = solve_max_of_max(&p, &set, r, &tols()).unwrap();
            assert!(sol.value >= last - 1e-12);
            last = sol.value;
        }
    }

    #[test]
    fn indicators_respect_the_threshold() {
        let p = panel(vec![
            vec![0.03, -0.02],
            vec![-0.01, 0.04],
            vec![0.02, 0.01],
        ]);
        let set = PortfolioSet::standard_simplex(2);
        let r = 0.015;
        let sol = solve_max_of_max(&p, &set, r, &tols()).unwrap();
        for (t, &b) in sol.indicators.iter().enumerate() {
            let ret = dot(p.row(t), sol.weights.as_slice());
            if b == 1 {
                assert!(ret > r);
            } else {
                assert!(ret <= r + 1e-9);
            }
        }
    }

    #[test]
    fn branch_and_bound_agrees_with_root_shortcut() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for case in 0..60 {
            let t_len = rng.random_range(3..=7);
            let m = rng.random_range(1..=3usize);
            let rows: Vec<Vec<f64>> = (0..t_len)
                .map(|_| (0..m).map(|_| rng.random_range(-0.05..0.05)).collect())
                .collect();
            let p = panel(rows);
            let set = PortfolioSet::standard_simplex(m);
            let prepared = PreparedHinge::new(&p, &set);
            let face = &prepared.faces()[0];
            let r = rng.random_range(-0.04..0.04);
            let fast = solve_face_max(face, r, &tols(), DEFAULT_NODE_CAP, true).unwrap();
            let slow = solve_face_max(face, r, &tols(), DEFAULT_NODE_CAP, false).unwrap();
            assert_abs_diff_eq!(fast.value, slow.value, epsilon = 1e-7);
            assert!(!slow.capped, "case {case} hit the node cap");
        }
    }

    #[test]
    fn incompatible_zero_fixes_are_infeasible() {
        // Keeping row 0 at or below r needs w2 <= 1/3, row 1 needs w1 <= 1/3;
        // both together leave no point on the simplex.
        let p = panel(vec![vec![0.00, 0.03], vec![0.03, 0.00]]);
        let set = PortfolioSet::standard_simplex(2);
        let prepared = PreparedHinge::new(&p, &set);
        let face = &prepared.faces()[0];
        let r = 0.01;
        let (_, crossing) = face.split(r);
        assert_eq!(crossing.len(), 2);
        let res = node_relaxation(face, r, &crossing, &[(0, false), (1, false)], &tols());
        assert!(matches!(res, Err(Error::Infeasible)));
    }

    #[test]
    fn node_cap_reports_limit() {
        let p = panel(vec![
            vec![0.03, -0.02],
            vec![-0.01, 0.04],
            vec![0.02, -0.03],
            vec![-0.02, 0.01],
        ]);
        let set = PortfolioSet::standard_simplex(2);
        let prepared = PreparedHinge::new(&p, &set);
        let face = &prepared.faces()[0];
        // Cold start with a one-node budget: either the root is already
        // integral or the cap must be reported.
        let sol = solve_face_max(face, 0.0, &tols(), 1, false);
        match sol {
            Ok(s) => assert!(s.capped || s.nodes <= 1),
            Err(Error::NumericalFailure(_)) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
