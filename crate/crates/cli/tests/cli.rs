use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"
epochs = 1
seeds = [4]
slots = 5
episodes_per_epoch = 2
meta_iterations = 1
meta_tasks_per_iteration = 2
meta_episodes_per_task = 1
"#;

fn twintier(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twintier"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn one_epoch_case_study_writes_three_single_row_csvs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.toml", TINY);
    let out = tmp.path().join("out");
    let o = twintier(&["--config", s(&cfg), "--command", "case-study", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let seed = out.join("seed_4");
    for stem in ["ppo_random", "ppo_ml", "ppo_tl"] {
        let text = fs::read_to_string(seed.join(format!("{stem}.csv"))).unwrap();
        assert_eq!(text.lines().count(), 2, "{stem}: {text}");
        assert!(text.starts_with("epoch,mean_total_reward,policy_entropy"));
    }
    assert!(seed.join("reward.svg").exists() && seed.join("entropy.svg").exists());
    assert!(out.join("summary.csv").exists());
    let meta = fs::read_to_string(out.join("metadata.json")).unwrap();
    assert!(meta.contains("\"command\": \"case-study\""));
    assert!(meta.contains("\"clip_eps\""), "resolved config echoed in full");
}

#[test]
fn seeds_flag_overrides_the_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.toml", TINY);
    let o = twintier(&["--config", s(&cfg), "--seeds", "1,2", "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = String::from_utf8(o.stdout).unwrap();
    assert!(json.contains("\"seeds\": [\n    1,\n    2\n  ]"), "{json}");
}

#[test]
fn config_errors_exit_with_two_and_list_every_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "clip_eps = 1.5\ngamma_ = 0.9\n");
    let o = twintier(&["--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("clip_eps") && err.contains("gamma_"), "{err}");

    assert_eq!(twintier(&["--command", "juggle", "--check"]).status.code(), Some(2));
    assert_eq!(twintier(&["--profile", "huge", "--check"]).status.code(), Some(2));
    assert_eq!(twintier(&["--command", "plot"]).status.code(), Some(2));
    assert_eq!(twintier(&["--command", "orchestrate"]).status.code(), Some(2));
}

#[test]
fn plot_rejects_bad_schema_without_writing() {
    let tmp = TempDir::new().unwrap();
    let bad = write(tmp.path(), "bad.csv", "epoch,reward\n0,1.0\n");
    let out = tmp.path().join("plots");
    let o = twintier(&["--command", "plot", "--inputs", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("policy_entropy"), "{}", stderr(&o));
    assert!(!out.join("reward.svg").exists());
}

#[test]
fn plot_is_byte_identical_on_replot() {
    let tmp = TempDir::new().unwrap();
    let csvs: Vec<PathBuf> = (0..3)
        .map(|i| {
            write(
                tmp.path(),
                &format!("run{i}.csv"),
                &format!("epoch,mean_total_reward,policy_entropy\n0,{i}.0,1.4\n1,{i}.5,1.3\n"),
            )
        })
        .collect();
    let inputs = csvs.iter().map(|p| s(p)).collect::<Vec<_>>().join(",");
    let render = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = twintier(&["--command", "plot", "--inputs", &inputs, "--labels", "a,b,c", "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (fs::read(out.join("reward.svg")).unwrap(), fs::read(out.join("entropy.svg")).unwrap())
    };
    let (r1, e1) = render("p1");
    let (r2, e2) = render("p2");
    assert_eq!(r1, r2);
    assert_eq!(e1, e2);
    let svg = String::from_utf8(r1).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn scripted_case_study_matches_the_cli() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.toml", TINY);
    let direct = tmp.path().join("direct");
    let o = twintier(&["--config", s(&cfg), "--command", "case-study", "--out", s(&direct)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let script = write(tmp.path(), "scenario.toml", &format!("{TINY}\n[[stage]]\nkind = \"case_study\"\n"));
    let scripted = tmp.path().join("scripted");
    let o = twintier(&["--command", "orchestrate", "--scenario", s(&script), "--out", s(&scripted)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(scripted.join("events.jsonl").exists());

    let scripted = scripted.join("case_study");
    assert_eq!(
        fs::read(direct.join("summary.csv")).unwrap(),
        fs::read(scripted.join("summary.csv")).unwrap()
    );
    for stem in ["ppo_random", "ppo_ml", "ppo_tl", "source_task2", "meta_history"] {
        let name = format!("seed_4/{stem}.csv");
        assert_eq!(fs::read(direct.join(&name)).unwrap(), fs::read(scripted.join(&name)).unwrap(), "{name}");
    }
}
