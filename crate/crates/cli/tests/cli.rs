use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neumann-rbf"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("neumann-rbf-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn header(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines().next().unwrap_or("").to_string()
}

fn assert_reproducible(args: &[&str], files: &[&str]) {
    let (a, b) = (scratch(&format!("{}-a", args[0])), scratch(&format!("{}-b", args[0])));
    ok(args, &a);
    ok(args, &b);
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn ref_sweep_writes_one_file_per_mode() {
    let out = scratch("ref");
    ok(&["ref-sweep", "--n-alpha", "9"], &out);
    for m in ["none", "approach1", "approach2"] {
        let p = out.join(format!("ref_sweep_{m}.csv"));
        assert_eq!(header(&p), "alpha,kappa,lambda_I,lambda_B,interp_err,N_rem");
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().count(), 10);
    }
    let sel = scratch("ref-select");
    ok(&["ref-sweep", "--n-alpha", "5", "--mode", "select"], &sel);
    assert!(sel.join("ref_sweep_approach1.csv").exists());
    assert!(!sel.join("ref_sweep_none.csv").exists());
}

#[test]
fn vmap_and_optdir_headers() {
    let out = scratch("vmap");
    ok(&["vmap", "--resolution", "9", "--arrangement", "hex5"], &out);
    assert_eq!(header(&out.join("vmap.csv")), "x,y,vnorm,vx,vy");
    assert_eq!(header(&out.join("vmap_curve.csv")), "x,y,vnorm,vx,vy");
    assert_eq!(std::fs::read_to_string(out.join("vmap.csv")).unwrap().lines().count(), 82);

    ok(&["optdir", "--eps-grid", "0.5,1", "--seed", "3"], &out);
    assert_eq!(
        header(&out.join("optdir.csv")),
        "eps_s,perturbed,augmented,node,x,y,nx,ny,residual,iterations,converged"
    );
}

#[test]
fn appendixc_headers() {
    let out = scratch("appc");
    ok(&["appendixc", "--max-iter", "3"], &out);
    assert_eq!(header(&out.join("appendixc_positions.csv")), "alpha,kind,node,x,y");
    assert_eq!(header(&out.join("appendixc_history.csv")), "alpha,iter,cost");
}

#[test]
fn domain_commands_on_a_coarse_set() {
    let out = scratch("domain");
    let common = ["--n-interior", "250", "--poly-grid", "2", "--eps-grid", "0.5", "--dmin-grid", "0,0.7"];
    let with = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd];
        v.extend_from_slice(&common);
        v.extend_from_slice(extra);
        ok(&v, &out);
    };
    with("stability", &["--iters", "5"]);
    assert_eq!(header(&out.join("stability_plain.csv")), "P,eps_s,dmin,stable,growth");
    assert_eq!(header(&out.join("stability_projected.csv")), "P,eps_s,dmin,stable,growth");
    assert_eq!(header(&out.join("hhd_history.csv")), "iter,div_norm,sup_norm");
    with("poisson", &["--mode", "none", "--poly", "2"]);
    assert_eq!(header(&out.join("poisson_plain.csv")), "P,eps_s,dmin,nrmse");
    assert_eq!(header(&out.join("poisson_refinement.csv")), "spacing,N_I,nrmse");
    assert!(!out.join("poisson_projected.csv").exists());
    with("nodegen", &["--mode", "both"]);
    assert!(out.join("nodes_plain.txt").exists() && out.join("nodes_projected.txt").exists());
}

#[test]
fn reruns_are_byte_identical() {
    assert_reproducible(&["optdir", "--eps-grid", "0.5", "--seed", "11"], &["optdir.csv"]);
    assert_reproducible(
        &["vmap", "--resolution", "7", "--seed", "5", "--arrangement", "hex12"],
        &["vmap.csv", "vmap_curve.csv"],
    );
    assert_reproducible(&["ref-sweep", "--n-alpha", "7"], &["ref_sweep_none.csv", "ref_sweep_approach1.csv"]);
}

#[test]
fn config_file_and_flag_precedence() {
    let out = scratch("cfg");
    let cfg = out.join("run.cfg");
    std::fs::write(&cfg, "# vmap settings\narrangement = hex3\nresolution = 5\neps-s = 0.8\n").unwrap();
    ok(&["vmap", "--config", cfg.to_str().unwrap(), "--resolution", "6"], &out);
    assert_eq!(std::fs::read_to_string(out.join("vmap.csv")).unwrap().lines().count(), 37);
}

#[test]
fn exit_codes() {
    let out = scratch("codes");
    assert_eq!(run(&["vmap", "--kernel", "nope"], &out).status.code(), Some(2));
    assert_eq!(run(&["vmap", "--eps-s", "0.1"], &out).status.code(), Some(2));
    assert_eq!(run(&["vmap", "--dmin", "1.5"], &out).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"], &out).status.code(), Some(2));
    let bad_cfg = out.join("bad.cfg");
    std::fs::write(&bad_cfg, "colour = red\n").unwrap();
    assert_eq!(run(&["vmap", "--config", bad_cfg.to_str().unwrap()], &out).status.code(), Some(2));
    // a spacing this coarse leaves too few interior nodes
    assert_eq!(run(&["nodegen", "--spacing", "5"], &out).status.code(), Some(3));
    let file = out.join("not-a-dir");
    std::fs::write(&file, "x").unwrap();
    assert_eq!(run(&["appendixc", "--max-iter", "1"], &file).status.code(), Some(1));
}
