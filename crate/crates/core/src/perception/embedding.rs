use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PerceptionError;

pub const EMBEDDING_DIM: usize = 128;

/// Face embedding; the dimension is checked at construction and on deserialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FaceEmbedding(Vec<f64>);

impl FaceEmbedding {
    pub fn new(values: Vec<f64>) -> Result<Self, PerceptionError> {
        if values.len() != EMBEDDING_DIM {
            return Err(PerceptionError::Dimension {
                expected: EMBEDDING_DIM,
                got: values.len(),
            });
        }
        Ok(Self(values))
    }

    /// Standard basis vector `u_i` (zero-based).
    pub fn basis(i: usize) -> Self {
        let mut v = vec![0.0; EMBEDDING_DIM];
        v[i] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FaceEmbedding {
    type Error = PerceptionError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FaceEmbedding> for Vec<f64> {
    fn from(e: FaceEmbedding) -> Self {
        e.0
    }
}

/// Σ (a_i − b_i)² over equal-length slices.
pub fn l2_squared_slices(a: &[f64], b: &[f64]) -> Result<f64, PerceptionError> {
    if a.len() != b.len() {
        return Err(PerceptionError::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Squared Euclidean distance; symmetric, zero iff equal.
pub fn l2_squared(e: &FaceEmbedding, reference: &FaceEmbedding) -> f64 {
    e.0.iter().zip(&reference.0).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateMode {
    /// Match when S ≤ threshold (small distance means same face).
    #[default]
    DistanceMatch,
    /// Match when S ≥ threshold, the inequality as literally written.
    AtLeast,
}

/// Boundary is inclusive in both modes.
pub fn identifier_predicate(s: f64, threshold: f64, mode: PredicateMode) -> bool {
    match mode {
        PredicateMode::DistanceMatch => s <= threshold,
        PredicateMode::AtLeast => s >= threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub name: String,
    pub embedding: FaceEmbedding,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gallery {
    pub entries: Vec<GalleryEntry>,
}

impl Gallery {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, embedding: FaceEmbedding) {
        self.entries.push(GalleryEntry {
            name: name.into(),
            embedding,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, PerceptionError> {
        serde_json::from_str(text).map_err(|e| PerceptionError::Gallery(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gallery serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PerceptionError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| PerceptionError::Gallery(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PerceptionError> {
        std::fs::write(path.as_ref(), self.to_json())
            .map_err(|e| PerceptionError::Gallery(format!("{}: {e}", path.as_ref().display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Identification {
    Identity { name: String, distance: f64 },
    Unknown { min_distance: f64 },
}

fn best<'a>(a: (&'a str, f64), b: (&'a str, f64)) -> (&'a str, f64) {
    // smaller S first, then lexicographic name
    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}

fn conclude(best: (&str, f64), threshold: f64) -> Identification {
    if identifier_predicate(best.1, threshold, PredicateMode::DistanceMatch) {
        Identification::Identity {
            name: best.0.to_string(),
            distance: best.1,
        }
    } else {
        Identification::Unknown { min_distance: best.1 }
    }
}

pub fn identify_sequential(
    query: &FaceEmbedding,
    gallery: &Gallery,
    threshold: f64,
) -> Result<Identification, PerceptionError> {
    let b = gallery
        .entries
        .iter()
        .map(|g| (g.name.as_str(), l2_squared(query, &g.embedding)))
        .reduce(best)
        .ok_or(PerceptionError::EmptyGallery)?;
    Ok(conclude(b, threshold))
}

/// Nearest gallery entry under DistanceMatch; ties go to the smaller name.
pub fn identify(query: &FaceEmbedding, gallery: &Gallery, threshold: f64) -> Result<Identification, PerceptionError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        // `best` is associative and commutative, so reduction order is irrelevant.
        let b = gallery
            .entries
            .par_iter()
            .map(|g| (g.name.as_str(), l2_squared(query, &g.embedding)))
            .reduce_with(best)
            .ok_or(PerceptionError::EmptyGallery)?;
        Ok(conclude(b, threshold))
    }
    #[cfg(not(feature = "parallel"))]
    {
        identify_sequential(query, gallery, threshold)
    }
}
