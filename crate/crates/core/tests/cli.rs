use std::path::PathBuf;
use std::process::{Command, Output};

fn meshes() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("meshes")
}

fn gentess(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gentess")).args(args).output().expect("binary runs")
}

fn mesh_arg(name: &str) -> String {
    meshes().join(format!("{name}.json")).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mesh_check_reports_the_counts() {
    let o = gentess(&["mesh", "check", &mesh_arg("tjunction_1")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("cells: 3"));
    assert!(text.contains("regular: true"));
}

#[test]
fn dim_csv_ends_with_total() {
    let o = gentess(&["dim", &mesh_arg("tjunction_1"), "--n", "4", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("term,value"));
    assert_eq!(text.lines().last(), Some("dim,28"));
}

#[test]
fn dim_json_parses() {
    let o = gentess(&["--format", "json", "dim", &mesh_arg("tensor_2x2")]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // C^1 cubic-like splines on a 2x2 grid: 6 x 6
    assert_eq!(v["dim"], 36);
}

const TRIG_JSON: &str = r#"{"kind": "ExpTrig", "params": {"alpha": 0.2, "beta": 0.4}}"#;

#[test]
fn verify_passes_on_a_chained_mesh() {
    let o = gentess(&["verify", &mesh_arg("chained_t"), "--n", "5", "--r", "1", "--generators", TRIG_JSON]);
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert_eq!(row[0], row[1]);
    assert_eq!(row[1], row[2]);
    assert_eq!(row[4], "PASS");
}

#[test]
fn basis_rows_sum_to_one() {
    let o = gentess(&["basis", "--generators", "hyperbolic", "--n", "5", "--a", "0", "--b", "1.5", "--samples", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("s,B_0,B_1,B_2,B_3,B_4"));
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1..].iter().sum::<f64>() - 1.0).abs() < 1e-9, "{line}");
    }
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn basis_fn_is_one_at_its_point() {
    let o = gentess(&["basis-fn", &mesh_arg("single_cell"), "--xi", "0", "--grid", "3x3"]);
    assert_eq!(o.status.code(), Some(0));
    let first = stdout(&o).lines().nth(1).unwrap().to_string();
    let value: f64 = first.split(',').nth(2).unwrap().parse().unwrap();
    assert!((value - 1.0).abs() < 1e-12);
}

#[test]
fn interp_writes_coefficients_to_a_file() {
    let dir = std::env::temp_dir().join(format!("gentess-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("q.csv");
    let o = gentess(&["interp", &mesh_arg("tensor_2x2"), "--f", "cosh_sinh", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let sup: f64 = text.lines().find_map(|l| l.strip_prefix("# sup_error = ")).unwrap().parse().unwrap();
    assert!(sup < 1e-8);
    assert!(text.lines().any(|l| l == "cell,i,j,coefficient"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn convergence_table_has_orders() {
    let o = gentess(&["convergence", "--levels", "3", "--f", "sin2s_plus_t", "--n", "4", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    let order: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(order > 3.5, "{text}");
}

#[test]
fn validation_errors_exit_with_one() {
    for args in [
        vec!["dim".to_string(), "no-such-mesh.json".to_string()],
        vec!["verify".to_string(), mesh_arg("pinwheel")],
        vec!["dim".to_string(), mesh_arg("non_regular")],
        vec![
            "basis".into(),
            "--generators".into(),
            "trigonometric".into(),
            "--n".into(),
            "4".into(),
            "--a".into(),
            "0".into(),
            "--b".into(),
            "4".into(),
        ],
        vec!["dim".to_string(), mesh_arg("tensor_2x2"), "--n".into(), "4".into(), "--r".into(), "2".into()],
        vec!["no-such-command".to_string()],
    ] {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = gentess(&refs);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}
