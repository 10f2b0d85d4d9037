use tracefem::analysis::BenchmarkConfig;
use tracefem::export::{vtk_string, PointData};
use tracefem::membrane::{AssemblyOptions, StabilizationParams};
use tracefem::reconstruct::{merge_surface_nodes, ReconstructionConfig, SourceKind, SurfaceKind};
use tracefem::study::{MeshLadder, MembraneLevel};
use vtkio::model::{Attribute, CellType, DataSet, Piece, VertexNumbers};
use vtkio::Vtk;

fn parse(text: &str) -> vtkio::model::UnstructuredGridPiece {
    let vtk = Vtk::parse_legacy_be(text.as_bytes()).expect("valid legacy vtk");
    let DataSet::UnstructuredGrid { mut pieces, .. } = vtk.data else {
        panic!("not an unstructured grid");
    };
    match pieces.remove(0) {
        Piece::Inline(p) => *p,
        _ => panic!("expected inline piece"),
    }
}

#[test]
fn quadratic_cells_survive_a_reader() {
    let mesh = MeshLadder::default().build(1, 2).unwrap();
    let field = tracefem::levelset::AnalyticField::x_cylinder(1.0);
    let rec = tracefem::study::reconstruct_from(&mesh, &field, SourceKind::Exact, &ReconstructionConfig::default())
        .unwrap();
    let merged = merge_surface_nodes(&rec.surface);
    let phi: Vec<f64> = merged.points.iter().map(|x| field.value(x)).collect();
    let text = vtk_string(&merged, "cylinder", &[PointData::Scalars("phi", &phi)]).unwrap();

    let piece = parse(&text);
    let points: Vec<f64> = piece.points.cast_into().unwrap();
    assert_eq!(points.len(), 3 * merged.points.len());
    for (p, x) in points.chunks(3).zip(&merged.points) {
        assert!((p[0] - x.x).abs() + (p[1] - x.y).abs() + (p[2] - x.z).abs() < 1e-12);
    }

    let types = &piece.cells.types;
    assert_eq!(types.len(), merged.cells.len());
    for (t, (kind, _)) in types.iter().zip(&merged.cells) {
        let want = match kind {
            SurfaceKind::Tri6 => CellType::QuadraticTriangle,
            SurfaceKind::Quad8 => CellType::QuadraticQuad,
            SurfaceKind::Tri3 => CellType::Triangle,
        };
        assert_eq!(*t, want);
    }
    assert!(types.contains(&CellType::QuadraticTriangle));
    assert!(types.contains(&CellType::QuadraticQuad));

    let VertexNumbers::Legacy { num_cells, vertices } = &piece.cells.cell_verts else {
        panic!("legacy connectivity expected");
    };
    assert_eq!(*num_cells as usize, merged.cells.len());
    let mut it = vertices.iter();
    for (_, ids) in &merged.cells {
        assert_eq!(*it.next().unwrap() as usize, ids.len());
        for &id in ids {
            assert_eq!(*it.next().unwrap() as usize, id);
        }
    }

    let names: Vec<&str> = piece
        .data
        .point
        .iter()
        .map(|a| match a {
            Attribute::DataArray(d) => d.name.as_str(),
            Attribute::Field { name, .. } => name.as_str(),
        })
        .collect();
    assert_eq!(names, ["phi"]);
}

#[test]
fn membrane_solution_file() {
    let mesh = MeshLadder::default().build(1, 2).unwrap();
    let level = MembraneLevel::new(
        mesh,
        SourceKind::Exact,
        &ReconstructionConfig::default(),
        BenchmarkConfig::default(),
        &AssemblyOptions::default(),
    )
    .unwrap();
    let u = level.solve(&StabilizationParams::new(1.0, 1.0).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solution.vtk");
    level.write_vtk(&path, &u).unwrap();
    let piece = parse(&std::fs::read_to_string(&path).unwrap());
    let mut names: Vec<String> = piece
        .data
        .point
        .iter()
        .filter_map(|a| match a {
            Attribute::DataArray(d) => Some(d.name.clone()),
            _ => None,
        })
        .collect();
    names.sort();
    assert_eq!(names, ["displacement", "displacement_magnitude", "stress_error"]);
}
