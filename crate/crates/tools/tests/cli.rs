use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn core(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core")
        .join(rel)
}

fn run(bin: &str, args: &[&Path]) -> Output {
    Command::new(bin).args(args).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn assemble_dump_reassemble() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_uaasm");
    let first = dir.path().join("read.uavm");
    let listing = dir.path().join("read.s");
    let second = dir.path().join("again.uavm");
    let out = run(
        bin,
        &[
            Path::new("build"),
            &core("programs/read_node.s"),
            Path::new("-o"),
            &first,
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let out = run(bin, &[Path::new("dump"), &first]);
    assert!(out.status.success());
    std::fs::write(&listing, &out.stdout).unwrap();
    let out = run(
        bin,
        &[Path::new("build"), &listing, Path::new("-o"), &second],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
}

#[test]
fn assembly_errors_one_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("bad.s");
    std::fs::write(&src, "start:\n    JMP nowhere\n    FROB s0\n").unwrap();
    let out = run(
        env!("CARGO_BIN_EXE_uaasm"),
        &[
            Path::new("build"),
            &src,
            Path::new("-o"),
            &dir.path().join("bad.uavm"),
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert_eq!(err.lines().count(), 2, "{err}");
    assert!(err.lines().all(|l| l.contains("line")), "{err}");
}

#[test]
fn compile_report_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_uansc");
    let image = dir.path().join("acc.nsim");
    let out = run(
        bin,
        &[
            Path::new("compile"),
            &core("models/acceptance.txt"),
            Path::new("-o"),
            &image,
            Path::new("--report"),
        ],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    let size = |name: &str| -> usize {
        report
            .lines()
            .find(|l| l.split_whitespace().next() == Some(name))
            .and_then(|l| l.split_whitespace().nth(1))
            .unwrap()
            .parse()
            .unwrap()
    };
    let parts: usize = ["header", "index", "namespaces", "records", "slots"]
        .map(size)
        .iter()
        .sum();
    assert_eq!(parts, size("total"));
    assert_eq!(
        size("total") as u64,
        std::fs::metadata(&image).unwrap().len()
    );
    assert!(size("total") <= 36864);

    let out = run(bin, &[Path::new("verify"), &image]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("ok "));

    let mut bytes = std::fs::read(&image).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&image, bytes).unwrap();
    let out = run(bin, &[Path::new("verify"), &image]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("totalSize"));
}
