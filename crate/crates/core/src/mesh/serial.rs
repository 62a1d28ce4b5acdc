use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryMarker, Mesh};
use crate::error::{Error, Result};
use crate::format::{ser_real, ser_reals};

/// On-disk mesh layout: flat node and triangle arrays, 0-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshDocument {
    #[serde(serialize_with = "ser_reals")]
    pub nodes: Vec<f64>,
    pub triangles: Vec<usize>,
    pub boundary: BoundaryDocument,
    pub meta: MeshMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryDocument {
    pub edges: Vec<[usize; 2]>,
    pub markers: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshMeta {
    #[serde(rename = "R0", serialize_with = "ser_real")]
    pub r0: f64,
    #[serde(serialize_with = "ser_real")]
    pub h: f64,
    #[serde(serialize_with = "ser_real")]
    pub grading: f64,
    pub hash: String,
}

impl Mesh {
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            nodes: self.nodes.iter().flat_map(|p| *p).collect(),
            triangles: self.triangles.iter().flat_map(|t| *t).collect(),
            boundary: BoundaryDocument {
                edges: self.boundary.iter().map(|e| e.nodes).collect(),
                markers: self.boundary.iter().map(|e| e.marker.as_str().to_owned()).collect(),
            },
            meta: MeshMeta {
                r0: self.radius,
                h: self.h,
                grading: self.grading,
                hash: self.hash.clone(),
            },
        }
    }

    pub fn from_document(doc: MeshDocument) -> Result<Self> {
        if doc.nodes.len() % 2 != 0 || doc.triangles.len() % 3 != 0 {
            return Err(Error::Parse("node or triangle array has the wrong length".into()));
        }
        if doc.boundary.edges.len() != doc.boundary.markers.len() {
            return Err(Error::Parse("boundary edges and markers differ in length".into()));
        }
        let nodes: Vec<[f64; 2]> = doc.nodes.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let triangles: Vec<[usize; 3]> = doc.triangles.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        if triangles.iter().flatten().chain(doc.boundary.edges.iter().flatten()).any(|&i| i >= nodes.len()) {
            return Err(Error::Parse("node index out of range".into()));
        }
        let markers = doc
            .boundary
            .markers
            .iter()
            .map(|m| BoundaryMarker::parse(m))
            .collect::<Result<Vec<_>>>()?;
        let mesh = Mesh::assemble(
            nodes,
            triangles,
            doc.boundary.edges,
            markers,
            doc.meta.r0,
            doc.meta.h,
            doc.meta.grading,
        )?;
        if !doc.meta.hash.is_empty() && doc.meta.hash != mesh.hash {
            return Err(Error::MeshMismatch {
                expected: doc.meta.hash,
                found: mesh.hash,
            });
        }
        Ok(mesh)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
