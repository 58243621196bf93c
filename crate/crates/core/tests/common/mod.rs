//! Brute-force reference optimizers and random instance generation, shared
//! by the solver-verification test targets. Everything here is written
//! against the problem statement directly and never calls the production
//! simplex, presolve, or branching code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use msdspan::{PortfolioSet, ReturnPanel};

pub fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Uniform draw from the probability simplex.
pub fn random_point(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Random simplicial complex with up to `max_faces` faces of up to n
/// vertices each, all inside the simplex on n assets.
pub fn random_complex(rng: &mut ChaCha12Rng, n: usize, max_faces: usize) -> PortfolioSet {
    loop {
        let face_count = rng.random_range(1..=max_faces);
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for _ in 0..face_count {
            let m = rng.random_range(1..=n);
            let start = vertices.len();
            for _ in 0..m {
                vertices.push(random_point(rng, n));
            }
            faces.push((start..start + m).collect());
        }
        if let Ok(set) = PortfolioSet::new(vertices, faces) {
            return set;
        }
    }
}

pub fn random_panel(rng: &mut ChaCha12Rng, periods: usize, assets: usize) -> ReturnPanel {
    let rows: Vec<Vec<f64>> = (0..periods)
        .map(|_| {
            (0..assets)
                .map(|_| rng.random_range(-0.1..0.1))
                .collect()
        })
        .collect();
    let names = (0..assets).map(|j| format!("a{}", j + 1)).collect();
    ReturnPanel::new(rows, names, None).unwrap()
}

pub struct Instance {
    pub panel: ReturnPanel,
    pub set: PortfolioSet,
    pub z: f64,
}

/// One random solver instance within the small-oracle regime.
pub fn random_instance(rng: &mut ChaCha12Rng) -> Instance {
    let n = rng.random_range(2..=3);
    let periods = rng.random_range(2..=8);
    let panel = random_panel(rng, periods, n);
    let set = random_complex(rng, n, 3);
    let z = rng.random_range(-0.08..0.08);
    Instance { panel, set, z }
}

/// Per-face projected returns p[t][j] = vertex_j . Y_t.
fn projected(panel: &ReturnPanel, face: &[&[f64]]) -> Vec<Vec<f64>> {
    (0..panel.periods())
        .map(|t| {
            let row = panel.row(t);
            face.iter()
                .map(|v| v.iter().zip(row).map(|(w, r)| w * r).sum())
                .collect()
        })
        .collect()
}

fn face_vertices(set: &PortfolioSet, f: usize) -> Vec<&[f64]> {
    set.faces()[f]
        .iter()
        .map(|&i| set.vertices()[i].as_slice())
        .collect()
}

/// Keep the half-plane g . x <= b of a convex polygon.
fn clip(poly: &[(f64, f64)], g: (f64, f64), b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let cur = poly[i];
        let nxt = poly[(i + 1) % poly.len()];
        let dc = g.0 * cur.0 + g.1 * cur.1 - b;
        let dn = g.0 * nxt.0 + g.1 * nxt.1 - b;
        if dc <= 0.0 {
            out.push(cur);
        }
        if (dc < 0.0 && dn > 0.0) || (dc > 0.0 && dn < 0.0) {
            let s = dc / (dc - dn);
            out.push((cur.0 + s * (nxt.0 - cur.0), cur.1 + s * (nxt.1 - cur.1)));
        }
    }
    out
}

/// Exact minimum of sum_t max(z - w.Y_t, 0) over one face, by enumerating
/// which rows fall short and solving each linear piece on its polytope.
fn face_hinge_min_exact(p: &[Vec<f64>], z: f64) -> f64 {
    let t_len = p.len();
    let m = p[0].len();
    if m == 1 {
        return p.iter().map(|row| (z - row[0]).max(0.0)).sum();
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << t_len) {
        // Bit t set: row t is short, contributes z - w.Y_t, needs w.Y_t <= z.
        if m == 2 {
            // w.Y_t = a + lambda d on lambda in [0, 1].
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut konst = 0.0;
            let mut slope = 0.0;
            let mut feasible = true;
            for t in 0..t_len {
                let a = p[t][0];
                let d = p[t][1] - p[t][0];
                let short = mask >> t & 1 == 1;
                if short {
                    konst += z - a;
                    slope -= d;
                }
                // short: a + lambda d <= z; surplus: >= z.
                let bound = z - a;
                if d.abs() < 1e-300 {
                    if short && a > z || !short && a < z {
                        feasible = false;
                        break;
                    }
                } else if short == (d > 0.0) {
                    hi = hi.min(bound / d);
                } else {
                    lo = lo.max(bound / d);
                }
            }
            if feasible && lo <= hi {
                best = best.min((konst + slope * lo).min(konst + slope * hi));
            }
        } else {
            // Triangle in (l2, l3); w.Y_t = a + l2 u + l3 v.
            let mut poly = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
            let mut konst = 0.0;
            let mut grad = (0.0f64, 0.0f64);
            for t in 0..t_len {
                let a = p[t][0];
                let u = p[t][1] - p[t][0];
                let v = p[t][2] - p[t][0];
                if mask >> t & 1 == 1 {
                    konst += z - a;
                    grad.0 -= u;
                    grad.1 -= v;
                    poly = clip(&poly, (u, v), z - a);
                } else {
                    poly = clip(&poly, (-u, -v), a - z);
                }
                if poly.is_empty() {
                    break;
                }
            }
            for &(l2, l3) in &poly {
                best = best.min(konst + grad.0 * l2 + grad.1 * l3);
            }
        }
    }
    best
}

/// Exact maximum of sum_t max(w.Y_t, r) over one face, by enumerating the
/// rows clearing the floor and solving each linear piece on its polytope.
fn face_clipped_max_exact(p: &[Vec<f64>], r: f64) -> f64 {
    let t_len = p.len();
    let m = p[0].len();
    if m == 1 {
        return p.iter().map(|row| row[0].max(r)).sum();
    }
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << t_len) {
        // Bit t set: row t clears the floor, contributes w.Y_t, needs
        // w.Y_t >= r.
        if m == 2 {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut konst = 0.0;
            let mut slope = 0.0;
            let mut feasible = true;
            for t in 0..t_len {
                let a = p[t][0];
                let d = p[t][1] - p[t][0];
                let clears = mask >> t & 1 == 1;
                if clears {
                    konst += a;
                    slope += d;
                } else {
                    konst += r;
                }
                let bound = r - a;
                if d.abs() < 1e-300 {
                    if clears && a < r || !clears && a > r {
                        feasible = false;
                        break;
                    }
                } else if clears == (d > 0.0) {
                    lo = lo.max(bound / d);
                } else {
                    hi = hi.min(bound / d);
                }
            }
            if feasible && lo <= hi {
                best = best.max((konst + slope * lo).max(konst + slope * hi));
            }
        } else {
            let mut poly = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
            let mut konst = 0.0;
            let mut grad = (0.0f64, 0.0f64);
            for t in 0..t_len {
                let a = p[t][0];
                let u = p[t][1] - p[t][0];
                let v = p[t][2] - p[t][0];
                if mask >> t & 1 == 1 {
                    konst += a;
                    grad.0 += u;
                    grad.1 += v;
                    poly = clip(&poly, (-u, -v), a - r);
                } else {
                    konst += r;
                    poly = clip(&poly, (u, v), r - a);
                }
                if poly.is_empty() {
                    break;
                }
            }
            for &(l2, l3) in &poly {
                best = best.max(konst + grad.0 * l2 + grad.1 * l3);
            }
        }
    }
    best
}

/// Exact shortfall minimum over the whole complex.
pub fn oracle_hinge_min(panel: &ReturnPanel, set: &PortfolioSet, z: f64) -> f64 {
    (0..set.faces().len())
        .map(|f| face_hinge_min_exact(&projected(panel, &face_vertices(set, f)), z))
        .fold(f64::INFINITY, f64::min)
}

/// Exact clipped-sum maximum over the whole complex.
pub fn oracle_clipped_max(panel: &ReturnPanel, set: &PortfolioSet, r: f64) -> f64 {
    (0..set.faces().len())
        .map(|f| face_clipped_max_exact(&projected(panel, &face_vertices(set, f)), r))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn hinge_value_2(p: &[Vec<f64>], z: f64, l: f64) -> f64 {
    p.iter()
        .map(|row| (z - (row[0] + l * (row[1] - row[0]))).max(0.0))
        .sum()
}

fn hinge_value_3(p: &[Vec<f64>], z: f64, l2: f64, l3: f64) -> f64 {
    p.iter()
        .map(|row| {
            let w = row[0] + l2 * (row[1] - row[0]) + l3 * (row[2] - row[0]);
            (z - w).max(0.0)
        })
        .sum()
}

/// Barycentric grid search for the shortfall minimum: a full lattice scan at
/// `step`, then local shrinking rescans. Convexity keeps the optimum inside
/// the shrinking bracket.
pub fn grid_hinge_min(panel: &ReturnPanel, set: &PortfolioSet, z: f64, step: f64) -> f64 {
    let mut best = f64::INFINITY;
    for f in 0..set.faces().len() {
        let p = projected(panel, &face_vertices(set, f));
        let m = p[0].len();
        let value = match m {
            1 => p.iter().map(|row| (z - row[0]).max(0.0)).sum(),
            2 => {
                let cells = (1.0 / step).round() as usize;
                let mut arg = 0.0;
                let mut val = f64::INFINITY;
                for i in 0..=cells {
                    let l = i as f64 * step;
                    let v = hinge_value_2(&p, z, l);
                    if v < val {
                        val = v;
                        arg = l;
                    }
                }
                let mut s = step;
                for _ in 0..9 {
                    let lo = (arg - s).max(0.0);
                    let hi = (arg + s).min(1.0);
                    s /= 10.0;
                    let mut l = lo;
                    while l <= hi + 1e-15 {
                        let v = hinge_value_2(&p, z, l);
                        if v < val {
                            val = v;
                            arg = l;
                        }
                        l += s;
                    }
                }
                val
            }
            _ => {
                let cells = (1.0 / step).round() as usize;
                let mut arg = (0.0, 0.0);
                let mut val = f64::INFINITY;
                for i in 0..=cells {
                    for j in 0..=cells - i {
                        let l2 = i as f64 * step;
                        let l3 = j as f64 * step;
                        let v = hinge_value_3(&p, z, l2, l3);
                        if v < val {
                            val = v;
                            arg = (l2, l3);
                        }
                    }
                }
                let mut s = step;
                for _ in 0..14 {
                    let lo2 = (arg.0 - 2.0 * s).max(0.0);
                    let hi2 = (arg.0 + 2.0 * s).min(1.0);
                    let lo3 = (arg.1 - 2.0 * s).max(0.0);
                    let hi3 = (arg.1 + 2.0 * s).min(1.0);
                    s /= 4.0;
                    let mut l2 = lo2;
                    while l2 <= hi2 + 1e-15 {
                        let mut l3 = lo3;
                        while l3 <= hi3 + 1e-15 {
                            if l2 + l3 <= 1.0 + 1e-12 {
                                let v = hinge_value_3(&p, z, l2, l3.min(1.0 - l2));
                                if v < val {
                                    val = v;
                                    arg = (l2, l3.min(1.0 - l2));
                                }
                            }
                            l3 += s;
                        }
                        l2 += s;
                    }
                }
                val
            }
        };
        best = best.min(value);
    }
    best
}
