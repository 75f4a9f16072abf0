use std::path::Path;
use std::process::Command;

fn peb(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_peb")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str =
    "seed = 4\n[grid]\nradial_steps = 4\nazimuth_steps = 5\n[system]\nn_bs = 16\nn_ue = 16\nn_beams = 9\n";

#[test]
fn grid_output_is_deterministic_apart_from_the_version_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = peb(&[
            "grid",
            "--config",
            &cfg,
            "--scenario",
            "los+c",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    let tb = std::fs::read_to_string(&b).unwrap();
    assert_eq!(
        ta.lines().skip(1).collect::<Vec<_>>(),
        tb.lines().skip(1).collect::<Vec<_>>()
    );
    assert!(ta.starts_with("# tool: peb "));
    assert!(ta.contains("# seed: 4\n"));
    assert!(ta.contains("# scenario: los+c\n"));
    let data: Vec<&str> = ta.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "x,y,z,M,snr_db,peb_m,oeb_deg,peb_approx_m,oeb_approx_deg,flag");
    assert_eq!(data.len(), 1 + 20);
}

#[test]
fn seed_changes_the_cluster_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let run = |seed: &str| {
        let o = peb(&["grid", "--config", &cfg, "--scenario", "los+c", "--seed", seed]);
        assert!(o.status.success());
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .skip(3)
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn cdf_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{SMALL}[sweep]\naxis = \"n_r\"\nvalues = [4, 9, 16, 25]\n"),
    );
    let o = peb(&["cdf", "--config", &cfg, "--field", "oeb"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "value,cdf");
    assert!(rows.last().unwrap().ends_with(",1"));

    let o = peb(&["sweep", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("# axis: n_r\n"));
    assert!(text.contains("# slopes: speb_ul="));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "axis_value,peb90_ul,peb90_dl,oeb90_ul,oeb90_dl");
    assert_eq!(rows.len(), 5);
}

#[test]
fn factors_table() {
    let o = peb(&["factors", "--sizes", "16,100", "--separation", "10"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "n,rx_db,tx_db");
    assert!(rows[2].starts_with("100,"));
    let rx: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(rx < -20.0);
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[system]\nn_bs = 10\n");
    let o = peb(&["grid", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.n_bs"));

    let typo = write(dir.path(), "typo.toml", "[system]\nn_bss = 16\n");
    assert_eq!(peb(&["grid", "--config", &typo]).status.code(), Some(2));
    assert_eq!(peb(&["grid", "--scenario", "los+x"]).status.code(), Some(2));
    assert_eq!(peb(&["cdf", "--field", "nope"]).status.code(), Some(2));
}

#[test]
fn all_flagged_sweep_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[grid]\npoints = [[0.0, 0.0, -10.0]]\n[system]\nn_bs = 16\nn_ue = 16\n",
    );
    let o = peb(&["grid", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    // records are still written
    assert!(String::from_utf8(o.stdout).unwrap().contains(",degenerate"));
    assert_eq!(peb(&["cdf", "--config", &cfg]).status.code(), Some(3));
}
