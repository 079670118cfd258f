//! `hho-mesh-v1` JSON mesh files.

use std::path::Path;

use hho_core::mesh::{validate, Mesh, Point};
use serde::{Deserialize, Serialize};

use crate::error::{HhoError, Result};

pub const FORMAT: &str = "hho-mesh-v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    format: String,
    vertices: Vec<[f64; 2]>,
    faces: Vec<FaceRecord>,
    cells: Vec<CellRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceRecord {
    v: [usize; 2],
    cells: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellRecord {
    faces: Vec<usize>,
    signs: Vec<f64>,
}

pub fn to_json(mesh: &Mesh) -> String {
    let file = MeshFile {
        format: FORMAT.to_string(),
        vertices: mesh.vertices.iter().map(|p| [p.x, p.y]).collect(),
        faces: mesh
            .faces
            .iter()
            .map(|f| FaceRecord {
                v: f.vertices,
                cells: f.cell_ids().collect(),
            })
            .collect(),
        cells: mesh
            .cells
            .iter()
            .map(|c| CellRecord {
                faces: c.faces.clone(),
                signs: c.signs.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("mesh serializes")
}

/// Parses and validates a mesh; geometry is recomputed from the topology.
pub fn from_json(text: &str) -> Result<Mesh> {
    let file: MeshFile = serde_json::from_str(text)?;
    if file.format != FORMAT {
        return Err(HhoError::MeshFormat(format!("unsupported format {:?}, expected {FORMAT:?}", file.format)));
    }
    let mesh = Mesh::from_topology(
        file.vertices.iter().map(|v| Point::new(v[0], v[1])).collect(),
        file.faces.iter().map(|f| f.v).collect(),
        file.faces.iter().map(|f| f.cells.clone()).collect(),
        file.cells.iter().map(|c| c.faces.clone()).collect(),
        file.cells.iter().map(|c| c.signs.clone()).collect(),
    )?;
    let report = validate(&mesh);
    if !report.is_valid() {
        return Err(hho_core::error::MeshError::Invalid(report.failures).into());
    }
    Ok(mesh)
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(mesh)).map_err(|e| HhoError::io(path, e))
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path).map_err(|e| HhoError::io(path, e))?;
    from_json(&text)
}
