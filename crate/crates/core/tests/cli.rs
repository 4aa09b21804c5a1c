use std::path::Path;
use std::process::{Command, Output};

fn afm_span(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afm-span"))
        .args(args)
        .current_dir(dir)
        .env_remove("AFM_SPAN_OUT")
        .output()
        .unwrap()
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = afm_span(&["export"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 1\n[trainer]\nlearning_rate_per_ps = 0.1\n").unwrap();
    let o = afm_span(&["export", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_symbol_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = afm_span(&["export", "--seed", "1", "--symbol", "Q", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreachable_calibration_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 1\n[calibration]\nalpha_min = 0.2\nalpha_max = 0.2\n").unwrap();
    let o = afm_span(&["calibrate", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn export_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["symbols.txt", "library_Z.toml", "config_resolved.toml"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = afm_span(&["export", "--seed", "7", "--symbol", "Z", "--out", "out"], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(dir.path().join("out").join(n)).unwrap()).collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn environment_overrides_output_directory_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_afm-span"))
        .args(["export", "--seed", "3"])
        .current_dir(dir.path())
        .env("AFM_SPAN_OUT", "from_env")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let resolved = std::fs::read_to_string(dir.path().join("from_env/config_resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 3"));
}
