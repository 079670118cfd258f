use hho::mesh_io::{from_json, load_mesh, save_mesh, to_json};
use hho::HhoError;
use hho_core::mesh::{build_rect_mesh, build_tri_mesh, build_voronoi_mesh};
use serde_json::Value;

fn rect_json() -> Value {
    serde_json::from_str(&to_json(&build_rect_mesh(2, 2).unwrap())).unwrap()
}

#[test]
fn round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for mesh in [
        build_rect_mesh(3, 2).unwrap(),
        build_tri_mesh(3).unwrap(),
        build_voronoi_mesh(40, 7, 10).unwrap(),
    ] {
        let path = dir.path().join("m.json");
        save_mesh(&mesh, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back, mesh);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert_eq!((a.x.to_bits(), a.y.to_bits()), (b.x.to_bits(), b.y.to_bits()));
        }
        assert_eq!(to_json(&back), to_json(&mesh));
    }
}

#[test]
fn face_with_three_cells_is_rejected() {
    let mut v = rect_json();
    let face = v["faces"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|f| f["cells"].as_array().unwrap().len() == 2)
        .unwrap();
    let cells = face["cells"].as_array_mut().unwrap();
    let other = (0..4).find(|c| !cells.contains(&Value::from(*c))).unwrap();
    cells.push(Value::from(other));
    let err = from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("face adjacency"), "{err}");
}

#[test]
fn open_cell_loop_is_rejected() {
    let mut v = rect_json();
    let cell = &mut v["cells"][0];
    cell["faces"].as_array_mut().unwrap().pop();
    cell["signs"].as_array_mut().unwrap().pop();
    let err = from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("cell boundary not closed"), "{err}");
}

#[test]
fn syntax_error_reports_position() {
    let err = from_json("{\n  \"format\": \"hho-mesh-v1\",\n  \"vertices\": [[0, 0],\n    [1 1]]\n}").unwrap_err();
    assert!(matches!(err, HhoError::MeshJson(_)));
    let msg = err.to_string();
    assert!(msg.contains("line 4"), "{msg}");
    assert!(msg.contains("column"), "{msg}");
}

#[test]
fn unknown_format_version_is_rejected() {
    let mut v = rect_json();
    v["format"] = Value::from("hho-mesh-v2");
    let err = from_json(&v.to_string()).unwrap_err();
    assert!(matches!(err, HhoError::MeshFormat(_)), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_mesh(std::path::Path::new("/nonexistent/mesh.json")).unwrap_err();
    assert!(matches!(err, HhoError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}
