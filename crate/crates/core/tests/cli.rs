mod common;

use common::{fixtures, marker_project, staged, wall, Markers};
use wall::sonar::mock::{MockProject, MockSonarServer};

async fn wall_async(args: Vec<String>, envs: Vec<(String, String)>) -> common::Output {
    tokio::task::spawn_blocking(move || {
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let e: Vec<(&str, &str)> = envs.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        wall(&a, &e)
    })
    .await
    .unwrap()
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn extract_writes_golden_csv() {
    let text = std::fs::read_to_string(fixtures().join("sample/sonar.json")).unwrap();
    let project: MockProject = serde_json::from_str(&text).unwrap();
    let server = MockSonarServer::start(project).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("issues.csv");
    let o = wall_async(
        s(&[
            "extract",
            "--server-url",
            &server.url(),
            "--token-env",
            "WALL_TEST_TOKEN",
            "--project-key",
            "eagle:project",
            "--out",
            out.to_str().unwrap(),
        ]),
        vec![("WALL_TEST_TOKEN".into(), "squ_fixture_token".into())],
    )
    .await;
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        std::fs::read_to_string(fixtures().join("sample/issues.csv")).unwrap()
    );
    assert!(o.stderr.contains("BUG: 1"));
}

#[tokio::test(flavor = "multi_thread")]
async fn extract_bad_token_exits_2() {
    let project = MockProject {
        project_key: "p".into(),
        token: "right".into(),
        issues: vec![],
    };
    let server = MockSonarServer::start(project).await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let args = s(&["extract", "--server-url", &server.url(), "--project-key", "p", "--out", out.to_str().unwrap()]);
    let o = wall_async(args.clone(), vec![("SONAR_TOKEN".into(), "wrong".into())]).await;
    assert_eq!(o.code, 2, "{}", o.stderr);
    // Unset variable is also an auth problem.
    let o = wall_async(args.clone(), vec![]).await;
    assert_eq!(o.code, 2);
    // Empty project: header-only CSV.
    let o = wall_async(args, vec![("SONAR_TOKEN".into(), "right".into())]).await;
    assert_eq!(o.code, 0);
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "File_Location,File_Name,Line,Message,Type\n"
    );
}

#[test]
fn extract_unreachable_exits_3() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = wall(
        &["extract", "--server-url", &url, "--project-key", "p", "--out", out.to_str().unwrap()],
        &[("SONAR_TOKEN", "t")],
    );
    assert_eq!(o.code, 3, "{}", o.stderr);
}

#[test]
fn revise_all_sample_with_mock_provider() {
    let (dir, root) = staged("sample/Project");
    let provider = fixtures().join("sample/provider.toml");
    let csv = fixtures().join("sample/issues.csv");
    let o = wall(
        &[
            "revise-all",
            "--mock-provider",
            provider.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--root",
            root.to_str().unwrap(),
            "--model",
            "gpt-4o",
        ],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stderr.contains("revised 3/3 files"), "{}", o.stderr);
    let out = dir.path().join("Project.Revised");
    let app = std::fs::read_to_string(out.join("client/src/Revised.App.jsx")).unwrap();
    assert!(!app.contains("<>"));
    let ctl = std::fs::read_to_string(out.join("client/src/components/Revised.OfflineControl.jsx")).unwrap();
    assert!(ctl.contains("onKeyDown"));
    let dep = std::fs::read_to_string(out.join("deploy/helm/dis/Revised.deployment.yaml")).unwrap();
    assert!(dep.contains("limits:"));
    assert!(!out.join("Revised.README.md").exists());
    assert!(dir.path().join("Project.Revised.manifest.json").is_file());
    assert!(dir.path().join("Project.Revised.ledger.csv").is_file());
    // Without a rescan each changed file counts its issues as revised.
    assert!(o.stdout.contains("1 / $"), "{}", o.stdout);
}

#[test]
fn revise_all_failure_exits_4_and_keeps_tree() {
    let (dir, root) = staged("sample/Project");
    let provider = dir.path().join("p.toml");
    std::fs::write(
        &provider,
        "[tiers]\n\"gpt-4o\" = \"advanced\"\n\n[[rule]]\npath = \"**/App.jsx\"\naction = \"fail\"\n\n[[rule]]\naction = \"replace\"\ncontent = \"ok\\n\"\n",
    )
    .unwrap();
    let csv = fixtures().join("sample/issues.csv");
    let o = wall(
        &[
            "revise-all",
            "--mock-provider",
            provider.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--root",
            root.to_str().unwrap(),
            "--model",
            "gpt-4o",
        ],
        &[],
    );
    assert_eq!(o.code, 4, "{}", o.stderr);
    let out = dir.path().join("Project.Revised");
    assert!(!out.join("client/src/Revised.App.jsx").exists());
    assert!(out.join("deploy/helm/dis/Revised.deployment.yaml").is_file());
}

#[test]
fn revise_all_empty_csv_is_nothing_to_do() {
    let (dir, root) = staged("sample/Project");
    let csv = dir.path().join("empty.csv");
    std::fs::write(&csv, "File_Location,File_Name,Line,Message,Type\n").unwrap();
    let provider = fixtures().join("sample/provider.toml");
    let o = wall(
        &[
            "revise-all",
            "--mock-provider",
            provider.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--root",
            root.to_str().unwrap(),
            "--model",
            "gpt-4o",
        ],
        &[],
    );
    assert_eq!(o.code, 0);
    assert!(o.stderr.contains("nothing to do"));
    assert!(!dir.path().join("Project.Revised").exists());
}

#[test]
fn hybrid_on_experiment1_replay_prints_cheap_rates() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("Replay");
    marker_project(
        &root,
        563,
        Markers { easy: 117, hard: 117, stuck: 0 },
        Markers { easy: 59, hard: 2, stuck: 0 },
        Markers { easy: 3718, hard: 2219, stuck: 1367 },
    );
    let analyzer = fixtures().join("markers.analyzer.toml");
    let provider = fixtures().join("markers.provider.toml");
    let csv = dir.path().join("issues.csv");
    let scanned = wall::analyzer::MockAnalyzer::load(&analyzer).unwrap().scan(&root).unwrap();
    assert_eq!(scanned.len(), 7599);
    std::fs::write(&csv, wall::issues::to_csv_string(&scanned)).unwrap();
    let o = wall(
        &[
            "hybrid",
            "--mock-provider",
            provider.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--root",
            root.to_str().unwrap(),
            "--cheap",
            "gpt-3.5-turbo",
            "--advanced",
            "gpt-4o",
            "--analyzer",
            &format!("mock:{}", analyzer.display()),
        ],
        &[],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rate_line = o
        .stdout
        .lines()
        .find(|l| l.starts_with("gpt-3.5-turbo success rate"))
        .unwrap_or_else(|| panic!("{}", o.stdout));
    assert!(rate_line.contains("50.0% (117/234)"), "{rate_line}");
    assert!(rate_line.contains("96.7% (59/61)"), "{rate_line}");
    assert!(rate_line.contains("50.9% (3718/7304)"), "{rate_line}");
    let hybrid_line = o.stdout.lines().find(|l| l.starts_with("gpt-3.5-turbo + gpt-4o (")).unwrap();
    assert!(hybrid_line.contains("234 / $") && hybrid_line.contains("61 / $") && hybrid_line.contains("5937 / $"));
}

#[test]
fn hybrid_needs_analyzer() {
    let (_dir, root) = staged("sample/Project");
    let provider = fixtures().join("sample/provider.toml");
    let csv = fixtures().join("sample/issues.csv");
    let o = wall(
        &[
            "hybrid",
            "--mock-provider",
            provider.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--root",
            root.to_str().unwrap(),
            "--cheap",
            "gpt-3.5-turbo",
            "--advanced",
            "gpt-4o",
        ],
        &[],
    );
    assert_eq!(o.code, 1);
}

#[test]
fn compare_identical_and_substitution() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, "a\nb\nc\n").unwrap();
    std::fs::write(&b, "a\nx\nc\n").unwrap();
    let o = wall(&["compare", "--original", a.to_str().unwrap(), "--revised", a.to_str().unwrap()], &[]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.ends_with("precision=1.0000 recall=1.0000 f1=1.0000\n"));
    let o = wall(&["compare", "--original", a.to_str().unwrap(), "--revised", b.to_str().unwrap()], &[]);
    assert_eq!(o.stdout, "  a\n- b\n+ x\n  c\nprecision=0.6667 recall=0.6667 f1=0.6667\n");
    let o = wall(
        &["compare", "--original", a.to_str().unwrap(), "--revised", b.to_str().unwrap(), "--format", "structured"],
        &[],
    );
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["rows"][1]["kind"], "removed");
    assert_eq!(v["metrics"]["matched"], 2);
    assert!(o.stderr.contains("f1=0.6667"));
    let o = wall(
        &["compare", "--original", a.to_str().unwrap(), "--revised", b.to_str().unwrap(), "--format", "html"],
        &[],
    );
    assert_eq!(o.stdout.matches("<tr class=\"wall-removed\"").count(), 1);
    assert_eq!(o.stdout.matches("<tr class=\"wall-added\"").count(), 1);
}

#[test]
fn compare_missing_file_exits_1() {
    let o = wall(&["compare", "--original", "/nonexistent/a", "--revised", "/nonexistent/b"], &[]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("cannot read"));
}

#[test]
fn report_experiment1() {
    let l = fixtures().join("experiment1.ledger.csv");
    let o = wall(&["report", "--ledger", l.to_str().unwrap()], &[]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let hybrid = o.stdout.lines().find(|l| l.starts_with("GPT-3.5 Turbo + GPT-4o (")).unwrap();
    assert!(hybrid.contains("234 / $4.76"), "{hybrid}");
    assert!(o.stdout.contains("savings 19.7%"));
    let o = wall(&["report", "--ledger", l.to_str().unwrap(), "--format", "structured"], &[]);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(v["savings_pct"], "19.7");
}

#[test]
fn report_missing_ledger_exits_1() {
    let o = wall(&["report", "--ledger", "/nonexistent/l.csv"], &[]);
    assert_eq!(o.code, 1);
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wall.toml");
    std::fs::write(&cfg, "workers = 0\n").unwrap();
    let (_d, root) = staged("sample/Project");
    let csv = fixtures().join("sample/issues.csv");
    let o = wall(
        &[
            "--config",
            cfg.to_str().unwrap(),
            "revise-all",
            "--csv",
            csv.to_str().unwrap(),
            "--root",
            root.to_str().unwrap(),
            "--model",
            "gpt-4o",
        ],
        &[],
    );
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("workers"));
}
