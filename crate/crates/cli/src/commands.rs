use crate::config::{Flags, Mode};
use neumann_rbf::experiments::{
    default_map_dmin, default_map_eps_s, default_mi, domain_nodes, domain_spacing, hhd_run, optdir_table,
    placement_run, poisson_refinement, poisson_sweep, ref_sweep, stability_map, vmap_curve, vmap_grid, Arrangement,
    DomainRunConfig, OptDirConfig, RefMode, RefSweepConfig, VRow, VmapConfig, DEFAULT_EPS_S,
};
use neumann_rbf::geometry::write_nodes;
use neumann_rbf::{KernelSpec, NodeSet, PolyBasis};
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub enum Failure {
    Numerical(neumann_rbf::Error),
    Io(String),
}

impl From<neumann_rbf::Error> for Failure {
    fn from(e: neumann_rbf::Error) -> Self {
        match e {
            neumann_rbf::Error::Io(m) => Failure::Io(m),
            other => Failure::Numerical(other),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Out = Result<(), Failure>;

/// Resolved settings with per-command defaults applied.
pub struct Run {
    pub flags: Flags,
}

impl Run {
    fn kernel_name(&self) -> &str {
        self.flags.kernel.as_deref().unwrap_or("mq")
    }
    fn eps_s(&self) -> f64 {
        self.flags.eps_s.unwrap_or(0.5)
    }
    fn dmin(&self) -> f64 {
        self.flags.dmin.unwrap_or(0.7)
    }
    fn out_dir(&self) -> Result<PathBuf, Failure> {
        let dir = self.flags.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
    fn writer(&self, name: &str) -> Result<csv::Writer<File>, Failure> {
        let path = self.out_dir()?.join(name);
        log::info!("writing {}", path.display());
        Ok(csv::Writer::from_path(path)?)
    }
    fn domain_spacing(&self) -> f64 {
        self.flags.spacing.unwrap_or_else(|| domain_spacing(self.flags.n_interior.unwrap_or(3000)))
    }
    fn node_sets(&self, default: Mode) -> Result<Vec<(&'static str, NodeSet)>, Failure> {
        let s = self.domain_spacing();
        let mode = self.flags.mode.unwrap_or(default);
        let mut sets = Vec::new();
        if matches!(mode, Mode::None | Mode::Select | Mode::Both) {
            sets.push(("plain", domain_nodes(s, false)?));
        }
        if matches!(mode, Mode::Project | Mode::Both) {
            sets.push(("projected", domain_nodes(s, true)?));
        }
        Ok(sets)
    }
    fn domain_cfg(&self, eps_s: f64, degree: usize, d_min: Option<f64>) -> DomainRunConfig {
        DomainRunConfig {
            kernel: self.kernel_name().to_string(),
            eps_s,
            degree,
            m_i: self.flags.mi.unwrap_or(default_mi(degree)),
            d_min,
            skip_singular: self.flags.skip_singular,
        }
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

pub fn ref_sweep_cmd(run: &Run) -> Out {
    let spacing = run.flags.spacing.unwrap_or(1.0);
    let mut cfg = RefSweepConfig::standard(spacing)?;
    cfg.kernel = KernelSpec::from_name(run.kernel_name(), run.eps_s(), spacing)?;
    cfg.basis = run.flags.poly.map_or(PolyBasis::none(2), |p| PolyBasis::new(p, 2));
    cfg.d_min = run.dmin();
    cfg.n_alpha = run.flags.n_alpha.unwrap_or(cfg.n_alpha);
    cfg.lebesgue_res = run.flags.lebesgue_res.unwrap_or(cfg.lebesgue_res);
    let modes: &[RefMode] = match run.flags.mode.unwrap_or(Mode::Both) {
        Mode::None => &[RefMode::Plain],
        Mode::Select => &[RefMode::Select],
        Mode::Project => &[RefMode::Project],
        Mode::Both => &[RefMode::Plain, RefMode::Select, RefMode::Project],
    };
    for &mode in modes {
        let rows = ref_sweep(&cfg, mode);
        let mut w = run.writer(&format!("ref_sweep_{}.csv", mode.name()))?;
        w.write_record(["alpha", "kappa", "lambda_I", "lambda_B", "interp_err", "N_rem"])?;
        for r in &rows {
            w.write_record([
                num(r.alpha),
                num(r.kappa),
                num(r.lambda_i),
                num(r.lambda_b),
                num(r.interp_err),
                r.n_rem.to_string(),
            ])?;
        }
        w.flush()?;
        let kmax = rows.iter().map(|r| r.kappa).fold(0.0, f64::max);
        let emax = rows.iter().map(|r| r.interp_err).fold(0.0, f64::max);
        println!("{}: {} samples, max kappa {:.3e}, max error {:.3e}", mode.name(), rows.len(), kmax, emax);
    }
    Ok(())
}

fn write_vrows(w: &mut csv::Writer<File>, rows: &[VRow]) -> Out {
    w.write_record(["x", "y", "vnorm", "vx", "vy"])?;
    for r in rows {
        w.write_record([num(r.x), num(r.y), num(r.vnorm), num(r.vx), num(r.vy)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn vmap_cmd(run: &Run) -> Out {
    let spacing = run.flags.spacing.unwrap_or(1.0);
    let arrangement = Arrangement::parse(run.flags.arrangement.as_deref().unwrap_or("hex3"))?;
    let mut cfg =
        VmapConfig::new(KernelSpec::from_name(run.kernel_name(), run.eps_s(), spacing)?, spacing, arrangement);
    cfg.seed = run.flags.seed;
    cfg.resolution = run.flags.resolution.unwrap_or(cfg.resolution);
    let grid = vmap_grid(&cfg)?;
    write_vrows(&mut run.writer("vmap.csv")?, &grid)?;
    let curve = vmap_curve(&cfg, 201)?;
    write_vrows(&mut run.writer("vmap_curve.csv")?, &curve)?;
    let vmax = grid.iter().map(|r| r.vnorm).fold(0.0, f64::max);
    println!("vmap: {} grid points, max |v| {:.3e}", grid.len(), vmax);
    Ok(())
}

pub fn optdir_cmd(run: &Run) -> Out {
    let mut cfg = OptDirConfig {
        kernel: run.kernel_name().to_string(),
        eps_s: run.flags.eps_grid.clone().unwrap_or_else(|| DEFAULT_EPS_S.to_vec()),
        spacing: run.flags.spacing.unwrap_or(1.0),
        seed: run.flags.seed,
        degree: run.flags.poly.unwrap_or(2),
        ..OptDirConfig::default()
    };
    cfg.max_iter = run.flags.max_iter.unwrap_or(cfg.max_iter);
    let rows = optdir_table(&cfg)?;
    let mut w = run.writer("optdir.csv")?;
    w.write_record([
        "eps_s",
        "perturbed",
        "augmented",
        "node",
        "x",
        "y",
        "nx",
        "ny",
        "residual",
        "iterations",
        "converged",
    ])?;
    for r in &rows {
        w.write_record([
            num(r.eps_s),
            r.perturbed.to_string(),
            r.augmented.to_string(),
            r.node.to_string(),
            num(r.x),
            num(r.y),
            num(r.nx),
            num(r.ny),
            num(r.residual),
            r.iterations.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    let failed = rows.iter().filter(|r| !r.converged).count();
    println!("optdir: {} rows, {} not converged", rows.len(), failed);
    Ok(())
}

pub fn stability_cmd(run: &Run) -> Out {
    let n_iter = run.flags.iters.unwrap_or(50);
    let degrees = run.flags.poly_grid.clone().unwrap_or_else(|| vec![2, 3, 4]);
    let eps = run.flags.eps_grid.clone().unwrap_or_else(default_map_eps_s);
    let mode = run.flags.mode.unwrap_or(Mode::Both);
    let dmins = match mode {
        Mode::None => vec![0.0],
        _ => run.flags.dmin_grid.clone().unwrap_or_else(default_map_dmin),
    };
    for (name, nodes) in run.node_sets(Mode::Both)? {
        println!("{name}: {} interior nodes", nodes.n_interior());
        let rows = stability_map(&nodes, &degrees, &eps, &dmins, n_iter);
        let mut w = run.writer(&format!("stability_{name}.csv"))?;
        w.write_record(["P", "eps_s", "dmin", "stable", "growth"])?;
        for r in &rows {
            w.write_record([r.degree.to_string(), num(r.eps_s), num(r.d_min), r.stable.to_string(), num(r.growth)])?;
        }
        w.flush()?;
        println!("{name}: {}/{} stable", rows.iter().filter(|r| r.stable).count(), rows.len());
    }
    // iteration history of the configured single run on the plain node set
    let nodes = domain_nodes(run.domain_spacing(), matches!(mode, Mode::Project))?;
    let d = run.dmin();
    let cfg = run.domain_cfg(run.eps_s(), run.flags.poly.unwrap_or(2), (d > 0.0).then_some(d));
    let r = hhd_run(&nodes, &cfg, n_iter)?;
    let mut w = run.writer("hhd_history.csv")?;
    w.write_record(["iter", "div_norm", "sup_norm"])?;
    for (i, (dn, sn)) in r.state.div_norm_history.iter().zip(&r.state.sup_norm_history).enumerate() {
        w.write_record([(i + 1).to_string(), num(*dn), num(*sn)])?;
    }
    w.flush()?;
    println!("history run: growth {:.3e} ({:?})", r.growth, r.stability);
    Ok(())
}

pub fn poisson_cmd(run: &Run) -> Out {
    let degrees = run.flags.poly_grid.clone().unwrap_or_else(|| vec![2, 3, 4]);
    let eps = run.flags.eps_grid.clone().unwrap_or_else(|| vec![run.eps_s()]);
    let dmins = run.flags.dmin_grid.clone().unwrap_or_else(|| (0..20).map(|k| k as f64 * 0.05).collect());
    for (name, nodes) in run.node_sets(Mode::Both)? {
        let rows = poisson_sweep(&nodes, &degrees, &eps, &dmins);
        let mut w = run.writer(&format!("poisson_{name}.csv"))?;
        w.write_record(["P", "eps_s", "dmin", "nrmse"])?;
        for r in &rows {
            w.write_record([r.degree.to_string(), num(r.eps_s), num(r.d_min), num(r.nrmse)])?;
        }
        w.flush()?;
        let best = rows.iter().min_by(|a, b| a.nrmse.total_cmp(&b.nrmse));
        if let Some(b) = best {
            println!("{name}: lowest NRMSE {:.3e} at P={} dmin={}", b.nrmse, b.degree, b.d_min);
        }
    }
    let cfg = run.domain_cfg(run.eps_s(), run.flags.poly.unwrap_or(3), Some(run.dmin()));
    let r = poisson_refinement(run.domain_spacing(), &cfg)?;
    let mut w = run.writer("poisson_refinement.csv")?;
    w.write_record(["spacing", "N_I", "nrmse"])?;
    w.write_record([num(r.spacing), r.n_interior.to_string(), num(r.nrmse)])?;
    w.write_record([num(0.5 * r.spacing), r.fine_n_interior.to_string(), num(r.fine_nrmse)])?;
    w.flush()?;
    println!("refinement: {:.3e} -> {:.3e} (ratio {:.2})", r.nrmse, r.fine_nrmse, r.ratio());
    Ok(())
}

pub fn appendixc_cmd(run: &Run) -> Out {
    let spacing = run.flags.spacing.unwrap_or(1.0);
    let mut cfg = RefSweepConfig::standard(spacing)?;
    cfg.kernel = KernelSpec::from_name(run.kernel_name(), run.eps_s(), spacing)?;
    let step = run.flags.step.unwrap_or(0.05);
    let max_iter = run.flags.max_iter.unwrap_or(100);
    let mut pos = run.writer("appendixc_positions.csv")?;
    pos.write_record(["alpha", "kind", "node", "x", "y"])?;
    let mut hist = run.writer("appendixc_history.csv")?;
    hist.write_record(["alpha", "iter", "cost"])?;
    for alpha in [-PI / 12.0, 0.0, PI / 12.0] {
        let r = placement_run(alpha, &cfg, step, max_iter)?;
        for (kind, pts) in
            [("initial", r.initial.clone()), ("final", r.final_positions()), ("projected", r.projected.clone())]
        {
            for (k, p) in pts.iter().enumerate() {
                pos.write_record([num(alpha), kind.to_string(), k.to_string(), num(p.x), num(p.y)])?;
            }
        }
        for (i, c) in r.result.cost_history.iter().enumerate() {
            hist.write_record([num(alpha), i.to_string(), num(*c)])?;
        }
        let h = &r.result.cost_history;
        println!(
            "alpha {alpha:+.4}: cost {:.4e} -> {:.4e} in {} steps, {} merged",
            h[0],
            h[h.len() - 1],
            h.len() - 1,
            r.result.merged
        );
    }
    pos.flush()?;
    hist.flush()?;
    Ok(())
}

fn write_node_file(path: &Path, nodes: &NodeSet) -> Out {
    write_nodes(nodes, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn nodegen_cmd(run: &Run) -> Out {
    let dir = run.out_dir()?;
    for (name, nodes) in run.node_sets(Mode::None)? {
        let path = dir.join(format!("nodes_{name}.txt"));
        write_node_file(&path, &nodes)?;
        println!(
            "{name}: {} interior, {} boundary nodes, spacing {:.6e} -> {}",
            nodes.n_interior(),
            nodes.len() - nodes.n_interior(),
            nodes.spacing(),
            path.display()
        );
    }
    Ok(())
}
