use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use brecs_core::io::episode::read_episode;
use brecs_core::io::vox::write_vox;
use brecs_core::{GridDims, VoxelGrid};

fn brecs(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_brecs"));
    cmd.args(args).env_remove("BRECS_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn generate(out: &Path, seed: &str) -> Output {
    brecs(
        &[
            "generate",
            "--size",
            "16",
            "--budget",
            "12",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ],
        &[],
    )
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn generate_is_deterministic_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(generate(&a, "3").status.success());
    assert!(generate(&b, "3").status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(read_episode(&a).unwrap().len(), 12);

    let o = brecs(&["validate", "--episode", a.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "valid");
}

#[test]
fn complete_rejects_mismatched_dims() {
    let dir = tempfile::tempdir().unwrap();
    let partial = dir.path().join("p.json");
    assert!(generate(&partial, "0").status.success());
    let target = dir.path().join("t.vox");
    write_vox(&target, &VoxelGrid::new(GridDims::cube(8).unwrap(), false)).unwrap();
    let o = brecs(
        &[
            "complete",
            "--target",
            target.to_str().unwrap(),
            "--partial",
            partial.to_str().unwrap(),
            "--out",
            dir.path().join("c.json").to_str().unwrap(),
        ],
        &[],
    );
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("dims mismatch"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn missing_input_gives_one_line_error() {
    let o = brecs(&["validate", "--episode", "/nonexistent/ep.json"], &[]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn relative_outputs_go_under_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = brecs(
        &[
            "generate",
            "--size",
            "16",
            "--budget",
            "4",
            "--out",
            "runs/g.json",
        ],
        &[("BRECS_OUT_DIR", dir.path())],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("runs/g.json").is_file());
}

#[test]
fn ldraw_and_partial_round_out_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let ep = dir.path().join("e.json");
    assert!(generate(&ep, "5").status.success());
    let part = dir.path().join("half.json");
    let o = brecs(
        &[
            "make-partial",
            "--episode",
            ep.to_str().unwrap(),
            "--out",
            part.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_episode(&part).unwrap().len(), 6);
    let o = brecs(&["validate", "--episode", part.to_str().unwrap()], &[]);
    assert!(o.status.success());

    let ldr = dir.path().join("e.ldr");
    let o = brecs(
        &[
            "ldraw",
            "--episode",
            ep.to_str().unwrap(),
            "--out",
            ldr.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&ldr).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("1 ")).count(), 12);
}
