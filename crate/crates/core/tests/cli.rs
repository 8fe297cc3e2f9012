use std::path::{Path, PathBuf};
use std::process::Command;

use phasefrac::io::curves::parse_curves;
use phasefrac::io::write_vtk;
use phasefrac::mesh::{generate_notched_square, NotchedSquareSpec};
use vtkio::model::{Attribute, CellType, DataSet, Piece, VertexNumbers};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasefrac"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("phasefrac-cli-{tag}-{}", std::process::id()));
    std::fs::remove_dir_all(&d).ok();
    std::fs::create_dir_all(&d).unwrap();
    d
}

const SMALL: &str = r#"
[mesh]
h = 0.1

[material]
bulk_modulus = 121030.0
poisson_ratio = 0.227
w0 = 75.94
eta = 0.052

[load]
increment = 1e-3
final = 6e-3

[[load.driven]]
set = "top"
component = "y"

[[load.fixed]]
set = "top"
components = ["x"]

[[load.fixed]]
set = "bottom"
components = ["x", "y"]

[solver]
linear_solver = "direct"

[output]
snapshot_every = 2
"#;

struct Grid {
    points: usize,
    cell_types: Vec<CellType>,
    cells: usize,
    damage: Vec<f64>,
    displacement: Vec<f64>,
}

fn read_vtk(path: &Path) -> Grid {
    let vtk = vtkio::Vtk::import(path).expect("vtk parses");
    let DataSet::UnstructuredGrid { pieces, .. } = vtk.data else {
        panic!("not an unstructured grid")
    };
    let Piece::Inline(p) = pieces.into_iter().next().unwrap() else {
        panic!("piece not inline")
    };
    let cells = match &p.cells.cell_verts {
        VertexNumbers::Legacy { num_cells, .. } => *num_cells as usize,
        VertexNumbers::XML { offsets, .. } => offsets.len(),
    };
    let points = p.num_points();
    let mut damage = Vec::new();
    let mut displacement = Vec::new();
    for a in p.data.point {
        if let Attribute::DataArray(d) = a {
            let v: Vec<f64> = d.data.cast_into().unwrap();
            match d.name.as_str() {
                "damage" => damage = v,
                "displacement" => displacement = v,
                other => panic!("unexpected array {other}"),
            }
        }
    }
    Grid {
        points,
        cell_types: p.cells.types.clone(),
        cells,
        damage,
        displacement,
    }
}

#[test]
fn run_writes_curves_snapshots_and_config() {
    let dir = temp_dir("run");
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.join("out");
    let status = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let rows = parse_curves(&std::fs::read_to_string(out.join("curves.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.converged));
    assert!(rows.windows(2).all(|w| w[1].dissipated >= w[0].dissipated));
    let head = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(head.starts_with("# units: displacement mm"));

    for name in [
        "step_00002.vtk",
        "step_00004.vtk",
        "step_00006.vtk",
        "final.vtk",
        "config.toml",
        "diagnostics.csv",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    assert!(!out.join("step_00001.vtk").exists());
    let g = read_vtk(&out.join("final.vtk"));
    assert!(g.cell_types.iter().all(|t| *t == CellType::Quad));
    assert_eq!(g.cells, g.cell_types.len());
    assert_eq!(g.damage.len(), g.points);
    assert_eq!(g.displacement.len(), 3 * g.points);

    // the saved config reproduces the run bit for bit
    let again = dir.join("again");
    let status = bin()
        .args([
            "run",
            out.join("config.toml").to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
            "--quiet",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(
        std::fs::read(out.join("curves.csv")).unwrap(),
        std::fs::read(again.join("curves.csv")).unwrap()
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn iteration_cap_gives_exit_code_two() {
    let dir = temp_dir("cap");
    let text = SMALL
        .replace("final = 6e-3", "final = 6e-3\n")
        .replace("[solver]", "[solver]\nmax_iterations = 1\ntol_u = 1e-14");
    let cfg = dir.join("capped.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            dir.join("o").to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = parse_curves(&std::fs::read_to_string(dir.join("o/curves.csv")).unwrap()).unwrap();
    assert!(rows.iter().any(|r| !r.converged));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_key_fails_with_its_name() {
    let dir = temp_dir("missing");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, SMALL.replace("w0 = 75.94", "")).unwrap();
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--quiet"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("w0"));
    let out = bin()
        .args(["run", dir.join("absent.toml").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn presets_are_listed_and_printed() {
    let out = bin().arg("presets").output().unwrap();
    let s = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        s.lines().collect::<Vec<_>>(),
        ["experiment1-2d", "experiment2-2d", "experiment1-3d"]
    );
    let out = bin().args(["presets", "experiment2-2d"]).output().unwrap();
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("final = 12.7e-3"));
    let out = bin().args(["presets", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn preset_with_overrides_and_snapshot_flag() {
    let dir = temp_dir("preset");
    let cfg = dir.join("short.toml");
    std::fs::write(
        &cfg,
        "[mesh]\nh = 0.1\nrefinement = { half_width = 0.05, h = 0.05 }\n[load]\nincrement = 1e-3\nfinal = 2e-3\n",
    )
    .unwrap();
    let out = dir.join("o");
    let status = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--preset",
            "experiment1-2d",
            "--out",
            out.to_str().unwrap(),
        ])
        .args(["--snapshot-every", "1", "--quiet"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("step_00001.vtk").exists());
    let resolved = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("w0 = 75.94"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn vtk_files_parse_with_a_third_party_reader() {
    let dir = temp_dir("vtk");
    let quad = generate_notched_square(&NotchedSquareSpec {
        h: 0.25,
        ..Default::default()
    })
    .unwrap();
    let n = quad.num_nodes();
    write_vtk(&quad, &vec![0.0; 2 * n], &vec![0.0; n], dir.join("q.vtk")).unwrap();
    let g = read_vtk(&dir.join("q.vtk"));
    assert_eq!((g.points, g.cells), (n, 16));
    assert!(g.damage.iter().all(|a| *a == 0.0));

    let hex = generate_notched_square(&NotchedSquareSpec {
        h: 0.25,
        thickness: Some(0.1),
        layers: 2,
        ..Default::default()
    })
    .unwrap();
    let n = hex.num_nodes();
    let alpha: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    write_vtk(&hex, &vec![1e-3; 3 * n], &alpha, dir.join("h.vtk")).unwrap();
    let g = read_vtk(&dir.join("h.vtk"));
    assert_eq!(
        g.cell_types
            .iter()
            .filter(|t| **t == CellType::Hexahedron)
            .count(),
        hex.num_elements()
    );
    assert_eq!(g.damage, alpha);
    assert!(write_vtk(&hex, &[0.0], &alpha, dir.join("bad.vtk")).is_err());
    assert!(write_vtk(&hex, &vec![0.0; 3 * n], &alpha, "/nonexistent/dir/x.vtk").is_err());
    std::fs::remove_dir_all(&dir).ok();
}
