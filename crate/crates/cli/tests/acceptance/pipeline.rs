use std::collections::HashSet;
use std::process::Command;

use kinrep_cli::config::PipelineConfig;
use kinrep_cli::error::CliError;
use kinrep_cli::io::{read_solution, write_solution};
use kinrep_cli::pipeline::{fixture_solution, run_pipeline, Stage};
use kinrep_cli::suite::run_suite;

fn shock_config(extra: &str) -> PipelineConfig {
    PipelineConfig::from_toml(&format!(
        "{extra}\n[initial]\nfixture = \"shock\"\n[grid]\nn = 64\n"
    ))
    .unwrap()
}

#[test]
fn same_seed_gives_identical_summaries() {
    let cfg = shock_config("levels = [2, 3]\nseed = 7");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        run_pipeline(&cfg, Stage::Export)
            .unwrap()
            .write(d.path())
            .unwrap();
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    for f in ["summary.json", "curves_n3.csv", "nu.csv", "solution.csv"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f), "{f}");
    }
    let other = shock_config("levels = [2, 3]\nseed = 8");
    let a = serde_json::to_string(&run_pipeline(&other, Stage::Kinetic).unwrap().summary).unwrap();
    let b = String::from_utf8(read(&dirs[0], "summary.json")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn every_level_gets_an_ensemble_record() {
    let cfg = shock_config("levels = [2, 3, 4, 5]");
    let s = run_pipeline(&cfg, Stage::Represent).unwrap().summary;
    assert_eq!(s.ensembles.len(), 4);
    for n in 2..=5 {
        for kind in ["pushforward", "total variation", "horizontal"] {
            let prefix = format!("n={n} ");
            assert!(
                s.checks
                    .iter()
                    .any(|c| c.name.starts_with(&prefix) && c.name.contains(kind)),
                "n={n} {kind}"
            );
        }
    }
    let names: HashSet<_> = s.checks.iter().map(|c| (&c.stage, &c.name)).collect();
    assert_eq!(names.len(), s.checks.len(), "duplicate checks");
    assert!(s.passed);
    assert!(s
        .checks
        .iter()
        .all(|c| (c.slack - (c.rhs - c.lhs)).abs() == 0.0));
}

#[test]
fn step_condition_violation_is_reported() {
    let cfg = shock_config("l = 100.0\nlevels = [3]");
    let err = run_pipeline(&cfg, Stage::Represent).err().unwrap();
    assert!(matches!(
        err,
        CliError::Stage {
            stage: "represent",
            ..
        }
    ));
    assert!(
        err.to_string().contains("s_bar <= 1/(|f''|_inf * L^2)"),
        "{err}"
    );
}

#[test]
fn solution_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["shock", "box-2d", "glued"] {
        let sol = fixture_solution(name, Some(32)).unwrap();
        let header = write_solution(dir.path(), name, &sol).unwrap();
        let back = read_solution(&header).unwrap();
        assert_eq!(back.slices, sol.slices, "{name}");
        assert_eq!((back.t0, back.dt, back.kind), (sol.t0, sol.dt, sol.kind));
        assert_eq!(back.mass, sol.mass);
    }
}

#[test]
fn corrupted_solution_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let sol = fixture_solution("shock", Some(32)).unwrap();
    let header = write_solution(dir.path(), "s", &sol).unwrap();
    let csv = dir.path().join("s.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "0.5,abc";
    std::fs::write(&csv, lines.join("\n")).unwrap();
    let toml = format!("[initial]\nsolution = {:?}\n", header.to_str().unwrap());
    let cfg = PipelineConfig::from_toml(&toml).unwrap();
    let err = run_pipeline(&cfg, Stage::Kinetic).err().unwrap();
    assert!(matches!(err, CliError::Ingest { .. }));
    assert!(err.to_string().contains("s.csv"), "{err}");

    std::fs::write(&header, "{ not json").unwrap();
    let err = read_solution(&header).err().unwrap();
    assert!(err.to_string().contains("s.json"), "{err}");
}

#[test]
fn saved_solution_feeds_later_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shock_config("levels = [2]");
    let direct = run_pipeline(&cfg, Stage::Represent).unwrap().summary;
    run_pipeline(&cfg, Stage::Solve)
        .unwrap()
        .write(dir.path())
        .unwrap();
    let toml = format!(
        "levels = [2]\n[initial]\nsolution = {:?}\n",
        dir.path().join("solution.json").to_str().unwrap()
    );
    let loaded = run_pipeline(&PipelineConfig::from_toml(&toml).unwrap(), Stage::Represent)
        .unwrap()
        .summary;
    assert_eq!(loaded.ensembles, direct.ensembles);
}

#[test]
fn custom_flux_and_data() {
    let toml = r#"
levels = [2]
[flux]
id = "cubic"
d = 1
coeffs = [[0.0, 0.0, 0.5, 0.2]]
u_max = 1.0
[initial.data]
type = "piecewise-linear"
knots = [[-0.5, 0.0], [0.0, 0.8], [0.5, 0.0]]
[grid]
d = 1
lo = [-1.0, 0.0]
hi = [2.0, 0.0]
n = 96
t_final = 0.5
"#;
    let cfg = PipelineConfig::from_toml(toml).unwrap();
    let b = run_pipeline(&cfg, Stage::Dissipate).unwrap();
    assert!(
        b.summary.passed,
        "{:?}",
        b.summary
            .checks
            .iter()
            .filter(|c| !c.holds)
            .collect::<Vec<_>>()
    );
    assert_eq!(b.summary.solution.flux_id, "cubic");
    assert!(b.summary.dissipation[0].eulerian_signed <= 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        "[initial]\nfixture = \"nope\"",
        "[initial]\nfixture = \"shock\"\ncsv = \"u.csv\"",
        "[initial]\n",
        "levels = [9]\n[initial]\nfixture = \"shock\"",
        "[initial]\nfixture = \"shock\"\n[grid]\nt_final = 2.0",
        "[initial]\nfixture = \"shock\"\n[grid]\nn = 100000",
        "[initial]\nfixture = \"shock\"\n[verify]\ncriteria = [11]",
        "[initial]\nfixture = \"shock\"\n[structure]\ncount = 3",
        "bogus = 1\n[initial]\nfixture = \"shock\"",
        "[initial]\ndata = { type = \"constant\", value = 0.5 }",
    ];
    for t in bad {
        assert!(
            matches!(PipelineConfig::from_toml(t), Err(CliError::Config(_))),
            "{t}"
        );
    }
    let cfg = shock_config("entropies = [[-1.0, 0.5]]");
    assert!(matches!(
        run_pipeline(&cfg, Stage::Dissipate),
        Err(CliError::Config(_))
    ));
}

#[test]
fn empty_verify_list() {
    assert!(run_suite(&[], 0).is_empty());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("v.toml");
    std::fs::write(
        &cfg,
        "[initial]\nfixture = \"shock\"\n[verify]\ncriteria = []\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kinrep"))
        .args(["verify", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0/0"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "levels = [2]\n[initial]\nfixture = \"shock\"\n[grid]\nn = 64\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_kinrep"))
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join("out"))
            .output()
            .unwrap()
    };
    let ok = run(&["represent", "--seed", "3"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(dir.path().join("out/summary.json").exists());
    let bad = run(&["represent", "--level", "12"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("level 12"));
}
