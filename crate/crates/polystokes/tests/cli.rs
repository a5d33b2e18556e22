//! End-to-end checks of the command-line interface: artifacts and exit codes
//! (0 success, 2 solver failure, 3 invalid input).

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polystokes"))
}

#[test]
fn solve_writes_report_and_mesh() {
    let dir = std::env::temp_dir().join("polystokes_cli_solve");
    std::fs::remove_dir_all(&dir).ok();
    let status = bin()
        .args([
            "solve",
            "--mesh",
            "uniform:4",
            "--k",
            "2",
            "--case",
            "patch",
            "--out",
        ])
        .arg(&dir)
        .arg("--dump-matrices")
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["report.csv", "mesh.txt", "A.coo", "B.coo", "N.coo"] {
        let meta = std::fs::metadata(dir.join(f)).unwrap_or_else(|_| panic!("missing {f}"));
        assert!(meta.len() > 0, "{f} is empty");
    }
    let csv = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("h,n_p,dim_v0,dim_q,dim_z,e_v,e_p"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn converge_writes_csv_svg_dat() {
    let dir = std::env::temp_dir().join("polystokes_cli_converge");
    std::fs::remove_dir_all(&dir).ok();
    let status = bin()
        .args([
            "converge", "--family", "uniform", "--k", "1", "--levels", "2", "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["report.csv", "errors.svg", "errors.dat"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let svg = std::fs::read_to_string(dir.join("errors.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn meshgen_round_trips_through_solve() {
    let dir = std::env::temp_dir().join("polystokes_cli_meshgen");
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    let mesh_path = dir.join("m.txt");
    let status = bin()
        .args(["meshgen", "--mesh", "voronoi:9,4", "--lloyd", "30", "--out"])
        .arg(&mesh_path)
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args(["solve", "--k", "1", "--case", "patch", "--mesh"])
        .arg(&mesh_path)
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_input_exits_3() {
    // Unknown mesh file.
    let st = bin()
        .args(["solve", "--mesh", "/no/such/mesh.txt", "--k", "1", "--out", "/tmp/x"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
    // Unsupported order.
    let st = bin()
        .args(["solve", "--mesh", "uniform:2", "--k", "9", "--out", "/tmp/x"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
    // Malformed mesh spec.
    let st = bin()
        .args(["solve", "--mesh", "uniform:zero", "--k", "1", "--out", "/tmp/x"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(3));
    // Bad CLI flags.
    let st = bin().args(["solve", "--nope"]).status().unwrap();
    assert_eq!(st.code(), Some(3));
}
