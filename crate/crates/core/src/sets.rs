//! Portfolio sets as simplicial complexes on the unit simplex.
//!
//! A set is a list of vertices (long-only weight vectors) plus faces given as
//! vertex index lists; the set is the union of the convex hulls of the faces.
//! Faces must be genuine simplices: their vertices affinely independent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Coordinates match within this tolerance when checking for duplicate
/// vertices; vertex sums must hit 1 at this tolerance too.
pub const VERTEX_TOL: f64 = 1e-12;

/// Rank tolerance for the affine-independence check, relative to the largest
/// coordinate difference in the face.
const RANK_TOL: f64 = 1e-9;

/// Long-only portfolio weight vector: finite, nonnegative, summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PortfolioWeights(Vec<f64>);

impl PortfolioWeights {
    /// Sum must be within 1e-9 of 1; entries below -1e-12 are rejected and
    /// tiny negative round-off is clamped to 0.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(Error::InvalidWeights(format!("non-finite weight at index {i}")));
            }
            if *w < -VERTEX_TOL {
                return Err(Error::InvalidWeights(format!(
                    "negative weight {w} at index {i}"
                )));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Convex combination of face vertices; round-off is clamped and the
    /// result renormalized so downstream validation is exact.
    pub(crate) fn from_combination(vertices: &[&[f64]], coeffs: &[f64]) -> Result<Self> {
        debug_assert_eq!(vertices.len(), coeffs.len());
        let n = vertices[0].len();
        let mut w = vec![0.0; n];
        for (v, &c) in vertices.iter().zip(coeffs) {
            for (wi, vi) in w.iter_mut().zip(v.iter()) {
                *wi += c * vi;
            }
        }
        let sum: f64 = w.iter().map(|x| x.max(0.0)).sum();
        if !(sum > 0.5) {
            return Err(Error::NumericalFailure(format!(
                "degenerate combination, mass {sum}"
            )));
        }
        for x in w.iter_mut() {
            *x = x.max(0.0) / sum;
        }
        Self::new(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for PortfolioWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Self::new(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Deserialize)]
struct RawSet {
    vertices: Vec<Vec<f64>>,
    faces: Vec<Vec<usize>>,
}

/// Simplicial complex of long-only portfolios. Always validated on
/// construction, including deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSet")]
pub struct PortfolioSet {
    vertices: Vec<Vec<f64>>,
    faces: Vec<Vec<usize>>,
}

impl TryFrom<RawSet> for PortfolioSet {
    type Error = Error;

    fn try_from(raw: RawSet) -> Result<Self> {
        Self::new(raw.vertices, raw.faces)
    }
}

impl PortfolioSet {
    pub fn new(vertices: Vec<Vec<f64>>, faces: Vec<Vec<usize>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidSet("no vertices".into()));
        }
        let n = vertices[0].len();
        if n == 0 {
            return Err(Error::InvalidSet("zero-dimensional vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != n {
                return Err(Error::InvalidSet(format!(
                    "vertex {i} has {} coordinates, expected {n}",
                    v.len()
                )));
            }
            let mut sum = 0.0;
            for (j, &x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::InvalidSet(format!(
                        "non-finite coordinate {j} in vertex {i}"
                    )));
                }
                if x < -VERTEX_TOL {
                    return Err(Error::InvalidSet(format!(
                        "negative coordinate {x} in vertex {i}"
                    )));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSet(format!("vertex {i} sums to {sum}, not 1")));
            }
        }
        for i in 1..vertices.len() {
            for k in 0..i {
                let close = vertices[i]
                    .iter()
                    .zip(&vertices[k])
                    .all(|(a, b)| (a - b).abs() <= VERTEX_TOL);
                if close {
                    return Err(Error::InvalidSet(format!("vertices {k} and {i} coincide")));
                }
            }
        }

        if faces.is_empty() {
            return Err(Error::InvalidSet("no faces".into()));
        }
        let mut referenced = vec![false; vertices.len()];
        for (f, face) in faces.iter().enumerate() {
            if face.is_empty() {
                return Err(Error::InvalidSet(format!("face {f} is empty")));
            }
            for &idx in face {
                if idx >= vertices.len() {
                    return Err(Error::InvalidSet(format!(
                        "face {f} references vertex {idx}, only {} exist",
                        vertices.len()
                    )));
                }
                referenced[idx] = true;
            }
            for (a, &idx) in face.iter().enumerate() {
                if face[..a].contains(&idx) {
                    return Err(Error::InvalidSet(format!(
                        "face {f} repeats vertex {idx}"
                    )));
                }
            }
            if !affinely_independent(&vertices, face) {
                return Err(Error::InvalidSet(format!(
                    "face {f} has affinely dependent vertices"
                )));
            }
        }
        if let Some(i) = referenced.iter().position(|r| !r) {
            return Err(Error::InvalidSet(format!(
                "vertex {i} belongs to no face"
            )));
        }
        Ok(Self { vertices, faces })
    }

    /// Full simplex on n assets: the unit vectors as one face.
    pub fn standard_simplex(n: usize) -> Self {
        let vertices: Vec<Vec<f64>> = (0..n).map(|i| unit_vector(n, i)).collect();
        Self {
            faces: vec![(0..n).collect()],
            vertices,
        }
    }

    /// Simplex over a subset of coordinates, embedded in n assets.
    pub fn coordinate_simplex(n: usize, coords: &[usize]) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSet("no coordinates given".into()));
        }
        for &c in coords {
            if c >= n {
                return Err(Error::InvalidSet(format!(
                    "coordinate {c} out of range for {n} assets"
                )));
            }
        }
        let vertices: Vec<Vec<f64>> = coords.iter().map(|&c| unit_vector(n, c)).collect();
        Self::new(vertices, vec![(0..coords.len()).collect()])
    }

    /// One-point set.
    pub fn singleton(vertex: Vec<f64>) -> Result<Self> {
        Self::new(vec![vertex], vec![vec![0]])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn assets(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i]
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn face_vertices(&self, f: usize) -> Vec<&[f64]> {
        self.faces[f].iter().map(|&i| self.vertices[i].as_slice()).collect()
    }

    /// Distance from a weight vector to the nearest point of the complex.
    pub fn membership_residual(&self, weights: &PortfolioWeights) -> Result<f64> {
        if weights.len() != self.assets() {
            return Err(Error::DimensionMismatch {
                expected: self.assets(),
                found: weights.len(),
            });
        }
        Ok(crate::character::project_to_complex(self, weights.as_slice()).distance)
    }

    /// Append the faces (and any new vertices) of `other`; the result keeps
    /// this set's vertices first so existing indices stay valid.
    pub fn union(&self, other: &PortfolioSet) -> Result<PortfolioSet> {
        if other.assets() != self.assets() {
            return Err(Error::DimensionMismatch {
                expected: self.assets(),
                found: other.assets(),
            });
        }
        let mut vertices = self.vertices.clone();
        let mut faces = self.faces.clone();
        let mut remap = Vec::with_capacity(other.vertices.len());
        for v in &other.vertices {
            let found = vertices.iter().position(|u| {
                u.iter().zip(v).all(|(a, b)| (a - b).abs() <= VERTEX_TOL)
            });
            remap.push(match found {
                Some(i) => i,
                None => {
                    vertices.push(v.clone());
                    vertices.len() - 1
                }
            });
        }
        for face in &other.faces {
            let mapped: Vec<usize> = face.iter().map(|&i| remap[i]).collect();
            if !faces.contains(&mapped) {
                faces.push(mapped);
            }
        }
        PortfolioSet::new(vertices, faces)
    }
}

fn unit_vector(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Rank of the difference matrix must equal face size minus one.
fn affinely_independent(vertices: &[Vec<f64>], face: &[usize]) -> bool {
    let m = face.len();
    if m == 1 {
        return true;
    }
    let n = vertices[0].len();
    let base = &vertices[face[0]];
    let mut rows: Vec<Vec<f64>> = face[1..]
        .iter()
        .map(|&i| {
            vertices[i]
                .iter()
                .zip(base)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter().map(|x| x.abs()))
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let mut rank = 0;
    for col in 0..n {
        if rank == rows.len() {
            break;
        }
        let pivot = (rank..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().total_cmp(&rows[b][col].abs())
        });
        let Some(p) = pivot else { break };
        if rows[p][col].abs() <= RANK_TOL * scale {
            continue;
        }
        rows.swap(rank, p);
        let inv = 1.0 / rows[rank][col];
        for r in rank + 1..rows.len() {
            let factor = rows[r][col] * inv;
            if factor != 0.0 {
                for c in col..n {
                    let sub = factor * rows[rank][c];
                    rows[r][c] -= sub;
                }
            }
        }
        rank += 1;
    }
    rank == m - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_simplex_has_unit_vertices() {
        let s = PortfolioSet::standard_simplex(3);
        assert_eq!(s.assets(), 3);
        assert_eq!(s.vertices().len(), 3);
        assert_eq!(s.faces(), &[vec![0, 1, 2]]);
        assert_eq!(s.vertex(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_vertex_sum() {
        let err = PortfolioSet::new(vec![vec![0.5, 0.4]], vec![vec![0]]);
        assert!(matches!(err, Err(Error::InvalidSet(_))));
    }

    #[test]
    fn rejects_negative_coordinate() {
        let err = PortfolioSet::new(vec![vec![1.2, -0.2]], vec![vec![0]]);
        assert!(matches!(err, Err(Error::InvalidSet(_))));
    }

    #[test]
    fn rejects_out_of_range_face_index() {
        let err = PortfolioSet::new(vec![vec![1.0, 0.0]], vec![vec![0, 1]]);
        assert!(matches!(err, Err(Error::InvalidSet(_))));
    }

    #[test]
    fn rejects_unreferenced_vertex() {
        let err = PortfolioSet::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0]],
        );
        assert!(matches!(err, Err(Error::InvalidSet(_))));
    }

    #[test]
    fn rejects_duplicate_vertices() {
        let err = PortfolioSet::new(
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![vec![0], vec![1]],
        );
        assert!(matches!(err, Err(Error::InvalidSet(_))));
    }

    #[test]
    fn rejects_affinely_dependent_face() {
        // Midpoint of the other two vertices: rank 1 instead of 2.
        let err = PortfolioSet::new(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.5, 0.5, 0.0],
            ],
            vec![vec![0, 1, 2]],
        );
        assert!(matches!(err, Err(Error::InvalidSet(_))));
    }

    #[test]
    fn accepts_triangle_face() {
        assert!(PortfolioSet::standard_simplex(4).faces().len() == 1);
        let s = PortfolioSet::new(
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![vec![0, 1, 2]],
        );
        assert!(s.is_ok());
    }

    #[test]
    fn json_round_trip_validates() {
        let s = PortfolioSet::coordinate_simplex(4, &[0, 1]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: PortfolioSet = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);

        let bad = r#"{"vertices": [[0.7, 0.2]], "faces": [[0]]}"#;
        assert!(serde_json::from_str::<PortfolioSet>(bad).is_err());
    }

    #[test]
    fn union_merges_shared_vertices() {
        let l = PortfolioSet::standard_simplex(3);
        let k = PortfolioSet::coordinate_simplex(3, &[0, 1]).unwrap();
        let u = l.union(&k).unwrap();
        assert_eq!(u.vertices().len(), 3);
        assert_eq!(u.faces().len(), 2);
    }

    #[test]
    fn weights_validate() {
        assert!(PortfolioWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(PortfolioWeights::new(vec![0.5, 0.6]).is_err());
        assert!(PortfolioWeights::new(vec![1.5, -0.5]).is_err());
        let w = PortfolioWeights::new(vec![1.0, -1e-13]).unwrap();
        assert_eq!(w.as_slice()[1], 0.0);
    }
}
