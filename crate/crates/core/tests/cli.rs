use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use symnodes::compatibility::{prescriptions_for, verify_face_match};
use symnodes::nodefile::NodeFile;
use symnodes::{reference_element, ElementKind};

fn symnodes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symnodes"))
        .args(args)
        .output()
        .expect("spawn symnodes")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_line_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("line2.nodes");
    let o = symnodes(&["generate", "--element", "line", "--degree", "2", "--out", path_str(&out), "--resolution", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = NodeFile::read(&out).unwrap();
    assert_eq!(f.source, "optimized");
    let mut xs: Vec<f64> = f.nodes.iter().map(|x| x[0]).collect();
    xs.sort_by(f64::total_cmp);
    assert_eq!(xs, vec![-1.0, 0.0, 1.0]);
}

#[test]
fn triangle_one_has_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("tri1.nodes");
    let o = symnodes(&[
        "generate", "--element", "tri", "--degree", "1", "--out", path_str(&out),
        "--cache-dir", path_str(&cache), "--resolution", "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = NodeFile::read(&out).unwrap();
    assert_eq!(f.nodes.len(), 3);
    for v in [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]] {
        assert!(f.nodes.iter().any(|x| (x[0] - v[0]).abs() < 1e-12 && (x[1] - v[1]).abs() < 1e-12));
    }
    // the line set used for the edges went to the cache
    assert!(cache.join("line_p1.nodes").exists());
}

#[test]
fn pyramid_matches_cached_faces() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let out = dir.path().join("pyr4.nodes");
    let o = symnodes(&[
        "generate", "--element", "pyramid", "--degree", "4", "--out", path_str(&out),
        "--cache-dir", path_str(&cache), "--resolution", "6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dist = NodeFile::read_distribution(&out).unwrap();
    assert_eq!(dist.len(), 55);
    let faces = vec![
        NodeFile::read_distribution(&cache.join("tri_p4.nodes")).unwrap(),
        NodeFile::read_distribution(&cache.join("quad_p4.nodes")).unwrap(),
    ];
    let pres = prescriptions_for(ElementKind::Pyramid, &faces).unwrap();
    assert!(verify_face_match(reference_element(ElementKind::Pyramid), &dist, &pres, 1e-10));
}

#[test]
fn evaluate_linear_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("l1.nodes");
    fs::write(
        &file,
        "# element: line\n# degree: 1\n# count: 2\n# source: mine\n-1\n1\n",
    )
    .unwrap();
    let o = symnodes(&["evaluate", path_str(&file), "--resolution", "100", "--header"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], symnodes::cli::CSV_HEADER);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&cells[..3], &["line", "1", "mine"]);
    let lebesgue: f64 = cells[3].parse().unwrap();
    assert!((lebesgue - 1.0).abs() < 1e-12);
    // mass matrix of the hat functions is [[2/3, 1/3], [1/3, 2/3]]
    let cond: f64 = cells[5].parse().unwrap();
    assert!((cond - 3.0).abs() < 1e-10);
}

#[test]
fn evaluate_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.nodes");
    fs::write(&short, "# element: line\n# degree: 2\n# count: 3\n-1\n1\n").unwrap();
    let o = symnodes(&["evaluate", path_str(&short)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("node count mismatch"), "{}", stderr(&o));

    let outside = dir.path().join("outside.nodes");
    fs::write(&outside, "# element: line\n# degree: 1\n# count: 2\n-1\n1.5\n").unwrap();
    let o = symnodes(&["evaluate", path_str(&outside)]);
    assert_eq!(o.status.code(), Some(2));

    let o = symnodes(&["evaluate", path_str(&dir.path().join("missing.nodes"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degree_cap_needs_override() {
    let o = symnodes(&["generate", "--element", "hex", "--degree", "12"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_line_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let o = symnodes(&[
        "compare", "--element", "line", "--degree-range", "1..10", "--resolution", "400",
        "--distributions", "optimized,gll,uniform,bogus", "--cache-dir", path_str(&cache),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("unknown distribution 'bogus'"));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 30);
    let leb = |p: usize, name: &str| -> f64 {
        rows.iter()
            .find(|r| r[1] == p.to_string() && r[2] == name)
            .map(|r| r[3].parse().unwrap())
            .unwrap()
    };
    for p in 1..=10 {
        assert!(leb(p, "optimized") <= leb(p, "uniform") * (1.0 + 1e-9), "p={p}");
    }
    // uniform nodes degrade quickly
    assert!(leb(10, "uniform") > 2.0 * leb(10, "gll"));
}

#[test]
fn tabulate_is_reproducible_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tab");
    let args = [
        "tabulate", "--element", "line,tri", "--degree-range", "1..3", "--out", path_str(&out),
        "--resolution", "20", "--seed", "5",
    ];
    let o = symnodes(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let names = ["line_p1", "line_p2", "line_p3", "tri_p1", "tri_p2", "tri_p3"];
    let first: Vec<Vec<u8>> = names
        .iter()
        .map(|n| fs::read(out.join(format!("{n}.nodes"))).unwrap())
        .collect();
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
    for line in manifest.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["status"], "ok", "{line}");
    }

    // drop one file, rerun, and expect the same bytes everywhere
    fs::remove_file(out.join("tri_p2.nodes")).unwrap();
    let o = symnodes(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    for (n, want) in names.iter().zip(&first) {
        assert_eq!(&fs::read(out.join(format!("{n}.nodes"))).unwrap(), want, "{n}");
    }
    assert_eq!(fs::read_to_string(out.join("manifest.jsonl")).unwrap(), manifest);
}
