//! Drives the `echogrid` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn echogrid(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echogrid"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("ECHOGRID_HRIR_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let top = String::from_utf8(echogrid(dir.path(), &["--help"]).stdout).unwrap();
    for s in ["gen-scene", "simulate", "render", "stats", "serve", "--config", "--seed", "--out-dir"] {
        assert!(top.contains(s), "top-level help lacks {s}");
    }
    let expect: &[(&str, &[&str])] = &[
        ("gen-scene", &["--task", "--out"]),
        ("simulate", &["--task", "--mode", "--agent", "--seeds", "--crossover", "--no-logs"]),
        ("render", &["--log", "--scene", "--out"]),
        ("stats", &["--design", "--report", "<INPUT>"]),
        ("serve", &["--addr", "--pcm"]),
    ];
    for (cmd, flags) in expect {
        let o = echogrid(dir.path(), &[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let h = String::from_utf8(o.stdout).unwrap();
        for f in *flags {
            assert!(h.contains(f), "{cmd} help lacks {f}");
        }
    }
}

#[test]
fn simulate_batch_writes_logs_and_rows_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--task", "localization", "--mode", "3d", "--agent", "sweep", "--seeds", "0..9"];
    for d in [&a, &b] {
        let o = echogrid(d.path(), &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let csv_a = std::fs::read(a.path().join("summary.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.path().join("summary.csv")).unwrap());
    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("seed,task,mode,agent,time_s,found,mean_error_m,missed\r\n"));
    let logs: Vec<_> = std::fs::read_dir(a.path().join("logs")).unwrap().collect();
    assert_eq!(logs.len(), 10);
    for entry in logs {
        let name = entry.unwrap().file_name();
        let other = b.path().join("logs").join(&name);
        assert_eq!(std::fs::read(a.path().join("logs").join(&name)).unwrap(), std::fs::read(other).unwrap());
    }
    // Nine significant digits at most.
    for line in text.lines().skip(1) {
        let err = line.split(',').nth(6).unwrap();
        let digits = err.chars().filter(char::is_ascii_digit).collect::<String>();
        assert!(digits.trim_start_matches('0').len() <= 9, "{err}");
    }
}

#[test]
fn crossover_has_the_protocol_shape_and_feeds_stats() {
    let d = tempfile::tempdir().unwrap();
    let o = echogrid(d.path(), &["simulate", "--crossover", "--seeds", "0..15"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut r = csv::Reader::from_path(d.path().join("crossover.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 16 * 8);
    let mut cells = std::collections::BTreeMap::<(String, String, String), usize>::new();
    for row in &rows {
        *cells.entry((row[1].to_string(), row[2].to_string(), row[3].to_string())).or_default() += 1;
    }
    // Two groups x two sessions, modes swapped between groups.
    let want: Vec<(&str, &str, &str)> =
        vec![("2d3d", "1", "2d"), ("2d3d", "2", "3d"), ("3d2d", "1", "3d"), ("3d2d", "2", "2d")];
    assert_eq!(cells.len(), 4);
    for (g, s, m) in want {
        assert_eq!(cells[&(g.to_string(), s.to_string(), m.to_string())], 8 * 4, "{g} {s} {m}");
    }

    let o = echogrid(d.path(), &["stats", d.path().join("logs").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(d.path().join("stats_report.json")).unwrap()).unwrap();
    let per_group: Vec<&Value> = report["anova"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["analysis"] == "rm_one" && a["metric"] == "loc_error_m" && a["subset"].as_str().unwrap().starts_with("group"))
        .collect();
    assert_eq!(per_group.len(), 2);
    for a in per_group {
        assert_eq!(a["results"][0]["df1"], 1.0);
        assert_eq!(a["results"][0]["df2"], 7.0);
    }
    // Boxplots per (session, mode, course): localization 4 + navigation 4 x 3, two metrics each.
    assert_eq!(report["boxplots"].as_array().unwrap().len(), 2 * (4 + 12));
}

#[test]
fn stats_csv_constant_and_missing_cell() {
    let d = tempfile::tempdir().unwrap();
    let mut text = String::from("subject,factor1,factor2,value\n");
    for s in 0..4 {
        for a in ["2d", "3d"] {
            text += &format!("s{s},{a},x,1.25\n");
        }
    }
    std::fs::write(d.path().join("c.csv"), &text).unwrap();
    let o = echogrid(d.path(), &["stats", d.path().join("c.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&std::fs::read(d.path().join("stats_report.json")).unwrap()).unwrap();
    for a in report["anova"].as_array().unwrap() {
        for r in a["results"].as_array().unwrap() {
            assert_eq!(r["f"], 0.0);
        }
    }

    let holes = text.replace("s2,3d,x,1.25\n", "");
    std::fs::write(d.path().join("m.csv"), holes).unwrap();
    let o = echogrid(d.path(), &["stats", d.path().join("m.csv").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("subject=s2, factor1=3d, factor2=x"), "{}", stderr(&o));
}

#[test]
fn gen_scene_and_render_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let o = echogrid(d.path(), &["gen-scene", "--task", "navigation"]);
    assert_eq!(code(&o), 2, "seed is mandatory");
    for _ in 0..2 {
        let o = echogrid(d.path(), &["gen-scene", "--task", "localization", "--seed", "4", "--out", "s4.json"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let o = echogrid(d.path(), &["gen-scene", "--task", "localization", "--seed", "5", "--out", "s5.json"]);
    assert_eq!(code(&o), 0);
    let o = echogrid(d.path(), &["gen-scene", "--task", "corridor"]);
    assert_eq!(code(&o), 0);
    assert!(d.path().join("scene_corridor.json").exists());

    let o = echogrid(d.path(), &["simulate", "--task", "localization", "--mode", "3d", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = d.path().join("logs/localization_3d_sweep_seed4.jsonl");
    let log = log.to_str().unwrap();
    let s4 = d.path().join("s4.json");
    let s5 = d.path().join("s5.json");

    let o = echogrid(d.path(), &["render", "--log", log, "--scene", s5.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("seed mismatch"), "{}", stderr(&o));

    let mut wavs = Vec::new();
    for name in ["a.wav", "b.wav"] {
        let out = d.path().join(name);
        let o = echogrid(d.path(), &["render", "--log", log, "--scene", s4.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        wavs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(wavs[0], wavs[1]);
    assert_eq!(&wavs[0][..4], b"RIFF");
    // Without --scene the layout is regenerated from the log header.
    let o = echogrid(d.path(), &["render", "--log", log]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(d.path().join("localization_3d_sweep_seed4.wav")).unwrap(), wavs[0]);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&echogrid(d.path(), &["simulate", "--bogus"])), 2);
    assert_eq!(code(&echogrid(d.path(), &["simulate", "--task", "navigation", "--mode", "2d"])), 2, "no seeds");
    let o = echogrid(d.path(), &["simulate", "--task", "navigation", "--mode", "2d", "--agent", "sweep", "--seed", "1"]);
    assert_eq!(code(&o), 2, "agent mismatch");
    assert_eq!(code(&echogrid(d.path(), &["stats", "/nonexistent/x.csv"])), 3);
    assert_eq!(code(&echogrid(d.path(), &["render", "--log", "/nonexistent.jsonl"])), 3);

    std::fs::write(d.path().join("cfg.json"), r#"{"tick_hz": -1}"#).unwrap();
    let cfg = d.path().join("cfg.json");
    let o = echogrid(d.path(), &["--config", cfg.to_str().unwrap(), "gen-scene", "--task", "corridor"]);
    assert_eq!(code(&o), 3);

    // Output directory is a regular file: nothing can be written.
    let blocker = d.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_echogrid"))
        .args(["gen-scene", "--task", "corridor", "--out-dir"])
        .arg(&blocker)
        .output()
        .unwrap();
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    let o = Command::new(env!("CARGO_BIN_EXE_echogrid"))
        .args(["render", "--log", "x.jsonl", "--out-dir"])
        .arg(d.path())
        .env("ECHOGRID_HRIR_DIR", d.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn hrir_override_is_used() {
    let d = tempfile::tempdir().unwrap();
    let o = echogrid(d.path(), &["simulate", "--task", "localization", "--mode", "2d", "--seed", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let log = d.path().join("logs/localization_2d_sweep_seed2.jsonl");
    let bundled = d.path().join("bundled.wav");
    let o = echogrid(d.path(), &["render", "--log", log.to_str().unwrap(), "--out", bundled.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // A set with the left and right channels swapped mirrors the image.
    let set = echogrid_core::audio::bundled_hrir();
    let mut entries = set.entries.clone();
    for e in &mut entries {
        std::mem::swap(&mut e.left, &mut e.right);
    }
    let swapped = echogrid_core::audio::HrirSet::new(set.sample_rate, entries).unwrap();
    let hdir = d.path().join("hrir");
    echogrid_core::audio::hrir::write_hrir_dir(&swapped, &hdir).unwrap();
    let mirrored = d.path().join("mirrored.wav");
    let o = Command::new(env!("CARGO_BIN_EXE_echogrid"))
        .args(["render", "--log", log.to_str().unwrap(), "--out", mirrored.to_str().unwrap()])
        .env("ECHOGRID_HRIR_DIR", &hdir)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let read = |p: &Path| echogrid_core::audio::wav::read_stereo(std::fs::File::open(p).unwrap()).unwrap().0;
    let (a, b) = (read(&bundled), read(&mirrored));
    assert_eq!(a.len(), b.len());
    assert!(a.iter().any(|x| *x != 0.0));
    for (fa, fb) in a.chunks(2).zip(b.chunks(2)) {
        assert!((fa[0] - fb[1]).abs() < 1e-3 && (fa[1] - fb[0]).abs() < 1e-3);
    }
}
