//! Effective extreme points and the character bound on the test level.
//!
//! The character of an inner set N relative to an outer set M measures how
//! often portfolios in N can be the M-restricted maximizer of a linear
//! functional whose simplex maximum sits at one asset vertex. Summing the
//! order statistics (n - ch)!/n! over effective extreme points and their
//! adjoint asset vertices yields a number ch with the property that the
//! spanning test is asymptotically conservative at any level below 1 - ch.
//!
//! Only vertices of N that coincide with a vertex of M can maximize a
//! generic linear functional over M, so effectiveness is decided on vertex
//! distances to the asset vertices; interior points of M never qualify even
//! when a cut endpoint of N touches the distance bound. Counting runs in
//! exact rational arithmetic.

use num::BigRational;
use num::{BigInt, One, Zero};
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::Error;
use crate::sets::PortfolioSet;
use crate::Result;

/// Euclidean projection of a point onto a simplicial complex.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub distance: f64,
    pub face_index: usize,
}

/// Nearest point of the complex: best face projection, lowest face index on
/// ties.
pub fn project_to_complex(set: &PortfolioSet, x: &[f64]) -> Projection {
    let mut best: Option<Projection> = None;
    for f in 0..set.faces().len() {
        let vertices = set.face_vertices(f);
        let (point, distance) = project_to_face(&vertices, x);
        let better = match &best {
            None => true,
            Some(b) => distance < b.distance,
        };
        if better {
            best = Some(Projection {
                point,
                distance,
                face_index: f,
            });
        }
    }
    best.expect("validated sets have at least one face")
}

/// Projection onto the convex hull of affinely independent vertices by an
/// active-set iteration on the support of the barycentric coordinates.
pub(crate) fn project_to_face(vertices: &[&[f64]], x: &[f64]) -> (Vec<f64>, f64) {
    let m = vertices.len();
    let n = x.len();
    if m == 1 {
        let point: Vec<f64> = vertices[0].to_vec();
        return finish(point, x);
    }

    // Gram matrix and linear term of 0.5 |V'u - x|^2.
    let gram: Vec<f64> = (0..m * m)
        .map(|idx| dot(vertices[idx / m], vertices[idx % m]))
        .collect();
    let lin: Vec<f64> = (0..m).map(|j| dot(vertices[j], x)).collect();

    let mut u = vec![1.0 / m as f64; m];
    let mut active: Vec<bool> = vec![true; m];
    for _ in 0..4 * m * m + 16 {
        // Equality-constrained minimizer on the current support.
        let support: Vec<usize> = (0..m).filter(|&j| active[j]).collect();
        let v = solve_support(&gram, &lin, &support, m);

        if v.iter().all(|&c| c >= -1e-12) {
            let mut full = vec![0.0; m];
            for (slot, &j) in support.iter().enumerate() {
                full[j] = v[slot].max(0.0);
            }
            u = full;
            // KKT: multiplier from any support index; inactive gradients
            // must not undercut it.
            let mu = support
                .first()
                .map(|&j| lin[j] - row_dot(&gram, j, &u, m))
                .unwrap_or(0.0);
            let mut worst = usize::MAX;
            let mut worst_gap = 1e-10;
            for j in 0..m {
                if !active[j] {
                    let gap = lin[j] - row_dot(&gram, j, &u, m) - mu;
                    if gap > worst_gap {
                        worst_gap = gap;
                        worst = j;
                    }
                }
            }
            if worst == usize::MAX {
                break;
            }
            active[worst] = true;
        } else {
            // Step from u toward v until the first coordinate hits zero,
            // then drop it from the support.
            let mut full_v = vec![0.0; m];
            for (slot, &j) in support.iter().enumerate() {
                full_v[j] = v[slot];
            }
            let mut step = 1.0;
            let mut drop = usize::MAX;
            for j in 0..m {
                if active[j] && full_v[j] < u[j] - 1e-15 {
                    let s = u[j] / (u[j] - full_v[j]);
                    if s < step {
                        step = s;
                        drop = j;
                    }
                }
            }
            for j in 0..m {
                u[j] += step * (full_v[j] - u[j]);
                u[j] = u[j].max(0.0);
            }
            if drop != usize::MAX {
                active[drop] = false;
                u[drop] = 0.0;
            }
        }
    }

    let mut point = vec![0.0; n];
    for j in 0..m {
        if u[j] != 0.0 {
            for (pi, vi) in point.iter_mut().zip(vertices[j]) {
                *pi += u[j] * vi;
            }
        }
    }
    finish(point, x)
}

fn finish(point: Vec<f64>, x: &[f64]) -> (Vec<f64>, f64) {
    let distance = point
        .iter()
        .zip(x)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    (point, distance)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row_dot(gram: &[f64], j: usize, u: &[f64], m: usize) -> f64 {
    (0..m).map(|k| gram[j * m + k] * u[k]).sum()
}

/// Minimize 0.5 u'Gu - l'u subject to sum u = 1 on the support; returns the
/// support coordinates. Solved as the bordered KKT system by Gaussian
/// elimination.
fn solve_support(gram: &[f64], lin: &[f64], support: &[usize], m: usize) -> Vec<f64> {
    let s = support.len();
    let dim = s + 1;
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    for (p, &j) in support.iter().enumerate() {
        for (q, &k) in support.iter().enumerate() {
            a[p * dim + q] = gram[j * m + k];
        }
        a[p * dim + s] = 1.0;
        a[s * dim + p] = 1.0;
        b[p] = lin[j];
    }
    b[s] = 1.0;
    gauss_solve(&mut a, &mut b, dim);
    b.truncate(s);
    b
}

fn gauss_solve(a: &mut [f64], b: &mut [f64], n: usize) {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))
            .unwrap();
        if a[pivot * n + col].abs() < 1e-14 {
            continue;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in 0..n {
            if row != col {
                let factor = a[row * n + col] * inv;
                if factor != 0.0 {
                    for j in col..n {
                        let sub = factor * a[col * n + j];
                        a[row * n + j] -= sub;
                    }
                    b[row] -= factor * b[col];
                }
            }
        }
    }
    for i in 0..n {
        let d = a[i * n + i];
        b[i] = if d.abs() < 1e-14 { 0.0 } else { b[i] / d };
    }
}

/// One effective extreme point with its adjoint asset vertices and tie
/// counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectivePoint {
    /// Vertex index in the inner set.
    pub vertex: usize,
    /// Index of the coinciding vertex of the outer set.
    pub outer_vertex: usize,
    /// Adjoint asset vertices: (asset index, tie count among effective outer
    /// vertices at that distance).
    pub adjoint: Vec<(usize, usize)>,
}

/// Distance margins close enough to a tie to deserve a manual look.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearTie {
    pub asset: usize,
    pub outer_vertex: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterReport {
    /// ch as a float, for reports.
    pub character: f64,
    /// Exact numerator and denominator of ch (decimal strings).
    pub character_numer: String,
    pub character_denom: String,
    pub effective: Vec<EffectivePoint>,
    /// Indices of the outer set's own effective vertices.
    pub effective_outer: Vec<usize>,
    /// Effective points of the inner set all sit among the outer set's; holds
    /// by construction and is re-checked.
    pub inclusion_holds: bool,
    /// Largest admissible level, 1 - ch, when ch <= 1.
    pub alpha_bound: Option<f64>,
    pub near_ties: Vec<NearTie>,
    #[serde(skip)]
    exact: BigRational,
}

impl CharacterReport {
    pub fn exact(&self) -> &BigRational {
        &self.exact
    }
}

/// Indices of inner-set vertices that are effective relative to the outer
/// set. A vertex qualifies when it coincides with an outer vertex whose
/// distance to some asset vertex matches the outer vertex set's minimum.
pub fn effective_extreme_points(
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    tols: &Tolerances,
) -> Result<Vec<usize>> {
    let geom = Geometry::build(outer, inner, tols)?;
    Ok(geom
        .inner_map
        .iter()
        .enumerate()
        .filter(|(_, link)| link.is_some_and(|o| geom.outer_effective[o]))
        .map(|(i, _)| i)
        .collect())
}

struct Geometry {
    /// Per asset vertex: min distance over outer vertices.
    min_dist: Vec<f64>,
    /// Per outer vertex and asset: distance.
    dist: Vec<Vec<f64>>,
    outer_effective: Vec<bool>,
    /// Inner vertex -> coinciding outer vertex, if any.
    inner_map: Vec<Option<usize>>,
    tie_tol: f64,
}

impl Geometry {
    fn build(outer: &PortfolioSet, inner: &PortfolioSet, tols: &Tolerances) -> Result<Self> {
        let n = outer.assets();
        if inner.assets() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: inner.assets(),
            });
        }
        let dist: Vec<Vec<f64>> = outer
            .vertices()
            .iter()
            .map(|v| (0..n).map(|s| dist_to_unit(v, s)).collect())
            .collect();
        let min_dist: Vec<f64> = (0..n)
            .map(|s| {
                dist.iter()
                    .map(|row| row[s])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let tie_tol = tols.tie_tol;
        let outer_effective: Vec<bool> = dist
            .iter()
            .map(|row| {
                (0..n).any(|s| row[s] <= min_dist[s] + tie_tol * min_dist[s].max(1.0))
            })
            .collect();
        let inner_map: Vec<Option<usize>> = inner
            .vertices()
            .iter()
            .map(|v| {
                outer.vertices().iter().position(|o| {
                    v.iter().zip(o).all(|(a, b)| (a - b).abs() <= 1e-9)
                })
            })
            .collect();
        Ok(Self {
            min_dist,
            dist,
            outer_effective,
            inner_map,
            tie_tol,
        })
    }

    fn tol_at(&self, s: usize) -> f64 {
        self.tie_tol * self.min_dist[s].max(1.0)
    }
}

fn dist_to_unit(v: &[f64], s: usize) -> f64 {
    v.iter()
        .enumerate()
        .map(|(j, &x)| {
            let d = if j == s { x - 1.0 } else { x };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Character of `inner` relative to `outer`, in exact rational arithmetic.
/// Precondition: every vertex of `inner` lies inside `outer` as a complex.
pub fn character(
    outer: &PortfolioSet,
    inner: &PortfolioSet,
    tols: &Tolerances,
) -> Result<CharacterReport> {
    for (i, v) in inner.vertices().iter().enumerate() {
        let proj = project_to_complex(outer, v);
        if proj.distance > tols.membership_tol {
            return Err(Error::NotSubset(format!(
                "inner vertex {i} sits {:.3e} away from the outer set",
                proj.distance
            )));
        }
    }
    let geom = Geometry::build(outer, inner, tols)?;
    let n = outer.assets();

    let effective_outer: Vec<usize> = (0..outer.vertices().len())
        .filter(|&o| geom.outer_effective[o])
        .collect();

    let mut effective = Vec::new();
    let mut exact = BigRational::zero();
    let n_fact = factorial(n);
    for (i, link) in geom.inner_map.iter().enumerate() {
        let Some(o) = *link else { continue };
        if !geom.outer_effective[o] {
            continue;
        }
        let mut adjoint = Vec::new();
        for s in 0..n {
            let d = geom.dist[o][s];
            if d <= geom.min_dist[s] + geom.tol_at(s) {
                // Ties among effective outer vertices at the same distance.
                let ties = effective_outer
                    .iter()
                    .filter(|&&k| (geom.dist[k][s] - d).abs() <= geom.tol_at(s))
                    .count();
                adjoint.push((s, ties));
                if ties <= n {
                    exact += BigRational::new(factorial(n - ties), n_fact.clone());
                }
                // ties > n is a degenerate pileup; no ordering realizes it,
                // so it contributes nothing.
            }
        }
        effective.push(EffectivePoint {
            vertex: i,
            outer_vertex: o,
            adjoint,
        });
    }

    let mut near_ties = Vec::new();
    for (o, row) in geom.dist.iter().enumerate() {
        for s in 0..n {
            let margin = row[s] - geom.min_dist[s];
            if margin > geom.tol_at(s) && margin <= 10.0 * geom.tol_at(s) {
                near_ties.push(NearTie {
                    asset: s,
                    outer_vertex: o,
                    margin,
                });
            }
        }
    }

    let character = rational_to_f64(&exact);
    let one = BigRational::one();
    Ok(CharacterReport {
        character,
        character_numer: exact.numer().to_string(),
        character_denom: exact.denom().to_string(),
        effective,
        effective_outer,
        inclusion_holds: true,
        alpha_bound: (exact <= one).then_some(1.0 - character),
        near_ties,
        exact,
    })
}

/// Warning when the requested level is not covered by the character bound.
pub fn validate_alpha(report: &CharacterReport, alpha: f64) -> Option<String> {
    match report.alpha_bound {
        Some(bound) if alpha >= bound => Some(format!(
            "level {alpha} is not below the character bound {bound:.6}; the test may over-reject"
        )),
        None => Some(format!(
            "character {:.6} is at least 1, so no level is covered by the bound",
            report.character
        )),
        _ => None,
    }
}

fn factorial(k: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=k {
        acc *= BigInt::from(i);
    }
    acc
}

fn rational_to_f64(r: &BigRational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num::rational::Ratio;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn big_ratio(n: i64, d: i64) -> BigRational {
        Ratio::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn projects_unit_vector_onto_opposite_edge() {
        let e2 = vec![0.0, 1.0, 0.0];
        let e3 = vec![0.0, 0.0, 1.0];
        let vertices: Vec<&[f64]> = vec![&e2, &e3];
        let (point, distance) = project_to_face(&vertices, &[1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(point[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(point[2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(distance, 1.5_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn projection_keeps_interior_points_fixed() {
        let set = PortfolioSet::standard_simplex(3);
        let x = [0.2, 0.3, 0.5];
        let p = project_to_complex(&set, &x);
        assert_abs_diff_eq!(p.distance, 0.0, epsilon = 1e-12);
        for (a, b) in p.point.iter().zip(x.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn projection_clips_to_nearest_vertex() {
        // The unconstrained line minimizer for e2 against this segment sits
        // far past the second endpoint, so the projection must clip there.
        let set = PortfolioSet::new(
            vec![vec![1.0, 0.0, 0.0], vec![0.9, 0.1, 0.0]],
            vec![vec![0, 1]],
        )
        .unwrap();
        let p = project_to_complex(&set, &[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(p.point[0], 0.9, epsilon = 1e-10);
        assert_abs_diff_eq!(p.point[1], 0.1, epsilon = 1e-10);
        assert_abs_diff_eq!(p.distance, 0.9 * 2.0_f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn interior_inner_set_has_no_effective_points() {
        let outer = PortfolioSet::standard_simplex(3);
        let inner = PortfolioSet::new(
            vec![vec![0.4, 0.3, 0.3], vec![0.3, 0.4, 0.3]],
            vec![vec![0, 1]],
        )
        .unwrap();
        let eff = effective_extreme_points(&outer, &inner, &tols()).unwrap();
        assert!(eff.is_empty());
        let report = character(&outer, &inner, &tols()).unwrap();
        assert!(report.exact().is_zero());
        assert_eq!(report.character, 0.0);
        assert_eq!(report.alpha_bound, Some(1.0));
    }

    #[test]
    fn full_simplex_vertices_give_k_over_n() {
        let outer = PortfolioSet::standard_simplex(4);
        let inner = PortfolioSet::coordinate_simplex(4, &[0, 2]).unwrap();
        let report = character(&outer, &inner, &tols()).unwrap();
        assert_eq!(report.exact(), &big_ratio(1, 2));
        assert_abs_diff_eq!(report.character, 0.5, epsilon = 0.0);
        assert_eq!(report.alpha_bound, Some(0.5));
        let eff = effective_extreme_points(&outer, &inner, &tols()).unwrap();
        assert_eq!(eff, vec![0, 1]);
    }

    #[test]
    fn reflexive_character_of_simplex_is_one() {
        let s = PortfolioSet::standard_simplex(5);
        let report = character(&s, &s, &tols()).unwrap();
        assert_eq!(report.exact(), &big_ratio(1, 1));
        assert!(report.inclusion_holds);
    }

    /// Interior segment with symmetric endpoints: A nearest to asset 1,
    /// B nearest to asset 2, both equidistant from asset 3. The inner set is
    /// the A-half of the segment.
    fn line_and_half() -> (PortfolioSet, PortfolioSet) {
        let a = vec![0.5, 0.25, 0.25];
        let b = vec![0.25, 0.5, 0.25];
        let mid = vec![0.375, 0.375, 0.25];
        let line = PortfolioSet::new(vec![a.clone(), b], vec![vec![0, 1]]).unwrap();
        let half = PortfolioSet::new(vec![a, mid], vec![vec![0, 1]]).unwrap();
        (line, half)
    }

    #[test]
    fn half_line_character_is_one_half() {
        let (line, half) = line_and_half();
        let report = character(&line, &half, &tols()).unwrap();
        assert_eq!(report.exact(), &big_ratio(1, 2));
        // Only the original boundary point is effective; the cut midpoint is
        // interior to the outer segment and does not count.
        assert_eq!(report.effective.len(), 1);
        assert_eq!(report.effective[0].vertex, 0);
        assert_eq!(report.effective[0].adjoint, vec![(0, 1), (2, 2)]);
    }

    #[test]
    fn full_line_character_is_one() {
        let (line, _) = line_and_half();
        let report = character(&line, &line, &tols()).unwrap();
        assert_eq!(report.exact(), &big_ratio(1, 1));
    }

    #[test]
    fn character_rejects_foreign_inner_set() {
        let outer = PortfolioSet::coordinate_simplex(3, &[0, 1]).unwrap();
        let inner = PortfolioSet::singleton(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            character(&outer, &inner, &tols()),
            Err(Error::NotSubset(_))
        ));
    }

    #[test]
    fn validate_alpha_flags_levels_at_or_above_bound() {
        let outer = PortfolioSet::standard_simplex(4);
        let inner = PortfolioSet::coordinate_simplex(4, &[0, 1, 2]).unwrap();
        let report = character(&outer, &inner, &tols()).unwrap();
        assert_eq!(report.exact(), &big_ratio(3, 4));
        assert!(validate_alpha(&report, 0.05).is_none());
        assert!(validate_alpha(&report, 0.25).is_some());
        assert!(validate_alpha(&report, 0.3).is_some());
    }

    #[test]
    fn character_is_permutation_invariant() {
        // Swap assets 0 and 3 in both sets; ch must not move.
        let perm = [3usize, 1, 2, 0];
        let permute = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for (j, &p) in perm.iter().enumerate() {
                out[p] = v[j];
            }
            out
        };
        let outer = PortfolioSet::standard_simplex(4);
        let inner = PortfolioSet::new(
            vec![
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.25, 0.5, 0.25],
            ],
            vec![vec![0], vec![1]],
        )
        .unwrap();
        let report = character(&outer, &inner, &tols()).unwrap();

        let outer_p = PortfolioSet::new(
            outer.vertices().iter().map(|v| permute(v)).collect(),
            outer.faces().to_vec(),
        )
        .unwrap();
        let inner_p = PortfolioSet::new(
            inner.vertices().iter().map(|v| permute(v)).collect(),
            inner.faces().to_vec(),
        )
        .unwrap();
        let report_p = character(&outer_p, &inner_p, &tols()).unwrap();
        assert_eq!(report.exact(), report_p.exact());
    }
}
