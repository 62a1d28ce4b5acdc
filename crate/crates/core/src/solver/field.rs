use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format::{ser_real, ser_reals};
use crate::mesh::{Mesh, Point, QuadPoint};
use crate::weights::WeightSpec;

/// Nodal P1 field, tied to its mesh by content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    mesh_hash: String,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(invalid(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("field value at node {i} is not finite")));
        }
        Ok(Self {
            mesh_hash: mesh.content_hash().to_owned(),
            values,
        })
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            mesh_hash: mesh.content_hash().to_owned(),
            values: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self {
            mesh_hash: mesh.content_hash().to_owned(),
            values: vec![c; mesh.num_nodes()],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Result<Self> {
        Self::new(mesh, mesh.nodes().iter().map(|&p| f(p)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mesh_hash(&self) -> &str {
        &self.mesh_hash
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            mesh_hash: self.mesh_hash.clone(),
            values: self.values.iter().map(|v| lambda * v).collect(),
        }
    }

    /// Pointwise combination `self + s * other` on the same mesh.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Self> {
        if other.mesh_hash != self.mesh_hash {
            return Err(Error::MeshMismatch {
                expected: self.mesh_hash.clone(),
                found: other.mesh_hash.clone(),
            });
        }
        Ok(Self {
            mesh_hash: self.mesh_hash.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        })
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.mesh_hash != mesh.content_hash() || self.values.len() != mesh.num_nodes() {
            return Err(Error::MeshMismatch {
                expected: mesh.content_hash().to_owned(),
                found: self.mesh_hash.clone(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, mesh: &Mesh, q: &QuadPoint) -> f64 {
        let t = mesh.triangles()[q.triangle];
        q.bary[0] * self.values[t[0]] + q.bary[1] * self.values[t[1]] + q.bary[2] * self.values[t[2]]
    }

    /// Constant gradient on triangle `t`.
    #[inline]
    pub fn gradient(&self, mesh: &Mesh, t: usize) -> [f64; 2] {
        let tri = mesh.triangles()[t];
        let g = &mesh.geometry()[t].grad;
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += self.values[tri[k]] * g[k][0];
            out[1] += self.values[tri[k]] * g[k][1];
        }
        out
    }

    /// Value at an arbitrary point, by point location.
    pub fn value_at(&self, mesh: &Mesh, x: Point) -> Option<f64> {
        let (t, b) = mesh.locate(x)?;
        let tri = mesh.triangles()[t];
        Some((0..3).map(|k| b[k] * self.values[tri[k]]).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_document(&self, weight: Option<&WeightSpec>, provenance: Option<Provenance>) -> FieldDocument {
        FieldDocument {
            mesh_hash: self.mesh_hash.clone(),
            values: self.values.clone(),
            weight: weight.map(|w| WeightRecord {
                alpha: w.alpha(),
                epsilon: w.epsilon(),
            }),
            provenance,
        }
    }

    pub fn from_document(doc: FieldDocument, mesh: &Mesh) -> Result<Self> {
        let f = Self::new(mesh, doc.values)?;
        if doc.mesh_hash != mesh.content_hash() {
            return Err(Error::MeshMismatch {
                expected: mesh.content_hash().to_owned(),
                found: doc.mesh_hash,
            });
        }
        Ok(f)
    }

    pub fn write_json(&self, path: impl AsRef<Path>, weight: Option<&WeightSpec>, provenance: Option<Provenance>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.to_document(weight, provenance))?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>, mesh: &Mesh) -> Result<Self> {
        let doc: FieldDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_document(doc, mesh)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldDocument {
    pub mesh_hash: String,
    #[serde(serialize_with = "ser_reals")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightRecord {
    #[serde(serialize_with = "ser_real")]
    pub alpha: f64,
    #[serde(serialize_with = "ser_real")]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub problem: String,
    #[serde(serialize_with = "ser_real")]
    pub tol: f64,
    pub iterations: usize,
}
