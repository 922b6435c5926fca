use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use towercalc::dsl::parse_expr;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_towercalc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

#[test]
fn parity_obstruction() {
    let o = run(&["retractable", &fixture("parachute_n22_23.grp")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with(r#"{"verdict":"No","obstruction":"parity""#), "{}", stdout(&o));
    let o = run(&["retractable", &fixture("parachute_n22_24.grp")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["verdict"], "Yes");
}

#[test]
fn classification_verbs() {
    let o = run(&["equiv", &fixture("f2.grp"), &fixture("s2.grp")]);
    assert_eq!(stdout(&o).trim(), r#"{"equiv":true}"#);
    let o = run(&["core", &fixture("k.grp"), "--orders", "5"]);
    let v = json(&o);
    assert_eq!(v["normal_form"], "{P1, P2}");
    assert_eq!(v["confluent"], true);
    assert_eq!(json(&run(&["equiv", &fixture("k.grp"), &fixture("p1p2.grp")]))["equiv"], true);
    assert_eq!(json(&run(&["ecore", &fixture("s2.grp")]))["normal_form"], "F(2)");
    assert_eq!(json(&run(&["efree", &fixture("n3.grp")]))["efree"], false);
    assert_eq!(json(&run(&["prime", &fixture("n3.grp")]))["verdict"], "Yes");
    assert_eq!(json(&run(&["minimal", &fixture("n4.grp")]))["verdict"], "Yes");
    assert_eq!(json(&run(&["minimal", &fixture("s2.grp")]))["verdict"], "No");
    let k = json(&run(&["minimal", &fixture("k.grp")]));
    assert_eq!(k["certificate"]["reason"], "rigid-k-construction");
}

#[test]
fn unknown_exits_with_two() {
    let o = run(&["minimal", &fixture("opaque_atom.grp")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["verdict"], "Unknown");
    assert!(json(&o)["bounds"].is_string());
    let o = run(&["discriminate", &fixture("torus_broken.grp")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["found_n"], Value::Null);
}

#[test]
fn errors_exit_with_one() {
    let o = run(&["core", &fixture("bad_syntax.grp")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":1:"));
    let o = run(&["core", &fixture("not_retractable.grp")]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["tower", "upgrade", &fixture("k.grp")]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["core", &fixture("missing.grp")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn discriminating_sequence() {
    let o = run(&["discriminate", &fixture("torus.grp"), "--radius", "2", "--nmax", "64"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["found_n"].is_u64());
    assert!(v.get("elapsed").is_none());
    let timed = json(&run(&["discriminate", &fixture("torus.grp"), "--timing"]));
    assert!(timed["elapsed"].is_f64());
}

#[test]
fn tower_operations_print_parseable_towers() {
    for op in ["normalize", "stabilize"] {
        let o = run(&["tower", op, &fixture("two_bottoms.grp")]);
        assert_eq!(o.status.code(), Some(0), "{}", op);
        let v = json(&o);
        let text = v["tower"].as_str().unwrap();
        parse_expr(text).unwrap_or_else(|e| panic!("{}: {}\n{}", op, e, text));
    }
    let normal = json(&run(&["tower", "normalize", &fixture("two_bottoms.grp")]));
    let stable = json(&run(&["tower", "stabilize", &fixture("two_bottoms.grp")]));
    assert_eq!(stable["b1_mod2"].as_u64().unwrap(), normal["b1_mod2"].as_u64().unwrap() + 1);
}

#[test]
fn dot_and_validate() {
    let o = run(&["dot", &fixture("k.grp")]);
    let text = stdout(&o);
    assert!(text.starts_with("digraph"));
    assert_eq!(text.matches("->").count(), 2);
    assert_eq!(json(&run(&["validate", &fixture("k.grp")]))["valid"], true);
}

#[test]
fn config_defaults_and_flag_override() {
    let dir = std::env::temp_dir().join(format!("towercalc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("bounds.toml");
    std::fs::write(&cfg, "nmax = 8\nradius = 1\n").unwrap();
    let cfg = cfg.to_string_lossy().into_owned();
    let torus = fixture("torus.grp");
    let v = json(&run(&["discriminate", &torus, "--config", &cfg]));
    assert_eq!((v["nmax"].as_u64(), v["radius"].as_u64()), (Some(8), Some(1)));
    let v = json(&run(&["discriminate", &torus, "--config", &cfg, "--nmax", "16"]));
    assert_eq!((v["nmax"].as_u64(), v["radius"].as_u64()), (Some(16), Some(1)));
    std::fs::write(dir.join("bad.toml"), "depth = 3\n").unwrap();
    let o = run(&["discriminate", &torus, "--config", &dir.join("bad.toml").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reports_are_byte_stable() {
    let cases: Vec<Vec<String>> = vec![
        vec!["retractable".into(), fixture("parachute_n22_24.grp")],
        vec!["core".into(), fixture("k.grp"), "--orders".into(), "3".into(), "--seed".into(), "7".into()],
        vec!["discriminate".into(), fixture("torus.grp")],
        vec!["tower".into(), "stabilize".into(), fixture("two_bottoms.grp")],
        vec!["catalog".into(), "--max-genus".into(), "2".into(), "--max-index".into(), "3".into()],
        vec!["dot".into(), fixture("k.grp")],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (a, b) = (run(&args), run(&args));
        assert_eq!(a.stdout, b.stdout, "{:?}", args);
        assert_eq!(a.status.code(), b.status.code());
    }
}
