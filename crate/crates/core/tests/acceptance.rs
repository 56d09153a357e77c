//! Acceptance checks. Each check prints one PASS/FAIL line with its measured
//! values and runtime; the process exits non-zero if any check fails.

use nalgebra::{DMatrix, Matrix2};
use neumann_rbf::experiments::{
    domain_nodes, domain_spacing, hhd_run, placement_run, poisson_refinement, poisson_run, ref_sweep, DomainRunConfig,
    RefMode, RefRow, RefSweepConfig,
};
use neumann_rbf::optdir::{
    det_from_blocks, full_matrix, iterate_g, normals_dmat, schur_data, single_node_v, symmetric_three_node_case,
    two_node_closed_form, two_node_matrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use neumann_rbf::{DMat, KernelSpec, NodeKind, NodeSet, Point, PolyBasis, Stencil};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::f64::consts::{FRAC_PI_3, FRAC_PI_8, PI};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_unit(rng: &mut StdRng) -> Point {
    let t = rng.gen_range(0.0..2.0 * PI);
    Point::new(t.cos(), t.sin())
}

/// Points in a disc with pairwise separation at least 0.6 (unit spacing).
fn scattered(rng: &mut StdRng, n: usize) -> Vec<Point> {
    let r = 0.8 * (n as f64).sqrt();
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if p.norm() <= r && pts.iter().all(|q| (p - q).norm() >= 0.6) {
            pts.push(p);
        }
    }
    pts
}

fn random_stencil(rng: &mut StdRng, m_i: usize, m_b: usize) -> (NodeSet, Stencil) {
    let pts = scattered(rng, m_i + m_b);
    let kinds = (0..m_i + m_b).map(|k| if k < m_i { NodeKind::Interior } else { NodeKind::Boundary }).collect();
    let normals = (0..m_i + m_b).map(|k| if k < m_i { Point::zeros() } else { random_unit(rng) }).collect();
    let nodes = NodeSet::new_unchecked(pts, kinds, normals, 1.0).unwrap();
    (nodes, Stencil::new(0, (0..m_i).collect(), (m_i..m_i + m_b).collect()))
}

fn random_dmat(rng: &mut StdRng, rows: usize, cols: usize) -> DMat {
    DMat::from_fn(rows, cols, 2, |_, _| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn angle_mod_sign(a: &Point, b: &Point) -> f64 {
    (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos()
}

fn check_block_determinant() -> Outcome {
    let mut rng = StdRng::seed_from_u64(101);
    let kernel = KernelSpec::mq(0.5).unwrap();
    let basis = PolyBasis::none(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (m_i, m_b) = (rng.gen_range(4..=20), rng.gen_range(1..=5));
        let (nodes, st) = random_stencil(&mut rng, m_i, m_b);
        let normals: Vec<Point> = st.boundary.iter().map(|&b| *nodes.normal(b)).collect();
        let det_m = full_matrix(&st, &nodes, &kernel, &basis, &normals).determinant();
        let data = schur_data(&st, &nodes, &kernel).unwrap();
        let det_b = det_from_blocks(&data, &normals).unwrap();
        worst = worst.max(rel(det_b, det_m));
    }
    outcome(worst <= 1e-8, format!("max relative gap {worst:.2e} (limit 1e-8)"))
}

fn check_single_node_law() -> Outcome {
    let mut rng = StdRng::seed_from_u64(202);
    let kernel = KernelSpec::mq(0.5).unwrap();
    let basis = PolyBasis::none(2);
    let (mut law, mut flip) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 100 {
        let m_i = rng.gen_range(4..=20);
        let (nodes, st) = random_stencil(&mut rng, m_i, 1);
        let data = schur_data(&st, &nodes, &kernel).unwrap();
        let Ok(v) = single_node_v(&data) else { continue };
        let vhat = v.v.normalize();
        let det = |n: Point| full_matrix(&st, &nodes, &kernel, &basis, &[n]).determinant();
        let det_v = det(vhat);
        for _ in 0..8 {
            let n = random_unit(&mut rng);
            let d = det(n);
            law = law.max((d - vhat.dot(&n) * det_v).abs() / det_v.abs());
            flip = flip.max((det(-n) + d).abs() / d.abs());
        }
        done += 1;
    }
    outcome(
        law <= 1e-8 && flip <= 1e-12,
        format!("dot-product law {law:.2e} (limit 1e-8), reversal {flip:.2e} (limit 1e-12)"),
    )
}

/// max_i (1 - |grad_i . n_i| / |grad_i|) with grad_i the determinant gradient in
/// n_i, taken from the d-matrix partials rather than the solver's own vectors.
fn stationarity(g: &DMat, n: &[Point]) -> f64 {
    let v = normals_dmat(n);
    (0..n.len())
        .map(|i| {
            let grad = Point::new(g.det_h_partial(&v, i, 0).unwrap(), g.det_h_partial(&v, i, 1).unwrap());
            1.0 - grad.dot(&n[i]).abs() / grad.norm()
        })
        .fold(0.0, f64::max)
}

fn check_optimal_directions() -> Outcome {
    let mut rng = StdRng::seed_from_u64(303);
    let mut stat = 0.0f64;
    let mut unconverged = 0;
    for _ in 0..50 {
        let mb = rng.gen_range(2..=5);
        let g = random_dmat(&mut rng, mb, mb);
        let start = (0..mb).map(|i| Point::from_column_slice(g.get(i, i)).normalize()).collect();
        let r = iterate_g(&g, start, DEFAULT_TOL, 2000).unwrap();
        if r.residual >= DEFAULT_TOL {
            unconverged += 1;
            continue;
        }
        stat = stat.max(stationarity(&g, &r.directions));
    }

    let (mut ang, mut val) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let g = random_dmat(&mut rng, 2, 2);
        let gm: Matrix2<f64> = two_node_matrix(&g).unwrap();
        let (c1, c2, smax) = two_node_closed_form(&gm).unwrap();
        let start = vec![random_unit(&mut rng), random_unit(&mut rng)];
        let r = iterate_g(&g, start, 1e-14, DEFAULT_MAX_ITER * 10).unwrap();
        ang = ang.max(angle_mod_sign(&r.directions[0], &c1)).max(angle_mod_sign(&r.directions[1], &c2));
        val = val.max(rel(r.det_value.abs(), smax));
    }

    let three = symmetric_three_node_case().unwrap();
    let (a0, d0) = three.from_zero;
    let (a1, d1) = three.from_half_pi;
    let near = |a: f64, t: f64| {
        let d = (a - t).rem_euclid(PI);
        d.min(PI - d)
    };
    let class0 = a0.iter().all(|&a| near(a, 0.0) < 1e-6);
    let class1 = a1.iter().all(|&a| near(a, 0.5 * PI) < 1e-6);
    let sym_ok = three.det_at_zero == -1.0 && class0 && class1 && (d0.abs() - 1.0).abs() < 1e-9;

    outcome(
        unconverged == 0 && stat <= 1e-10 && ang < 1e-5 && val <= 1e-8 && sym_ok,
        format!(
            "stationarity {stat:.2e} ({unconverged} unconverged), two-node angle {ang:.2e} value {val:.2e}, \
             det(0,0,0) = {}, classes {a0:.3?} / {a1:.3?} (det {d0:.3}, {d1:.3})",
            three.det_at_zero
        ),
    )
}

fn check_dmat_calculus() -> Outcome {
    let mut rng = StdRng::seed_from_u64(404);
    let (mut lin, mut mul, mut fd) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let (m, n, p) = (rng.gen_range(1..=5), rng.gen_range(1..=5), rng.gen_range(1..=5));
        let a = random_dmat(&mut rng, m, n);
        let b = random_dmat(&mut rng, m, n);
        let v = random_dmat(&mut rng, m, 1);
        let lhs = a.add(&b).unwrap().op_h(&v).unwrap();
        let rhs = a.op_h(&v).unwrap() + b.op_h(&v).unwrap();
        lin = lin.max((lhs - &rhs).abs().max() / rhs.abs().max().max(1e-300));

        let q = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let lhs = a.op_h(&v).unwrap() * &q;
        let rhs = a.matmul(&q).unwrap().op_h(&v).unwrap();
        mul = mul.max((lhs - &rhs).abs().max() / rhs.abs().max().max(1e-300));

        let sq = random_dmat(&mut rng, 3, 3);
        let vs = random_dmat(&mut rng, 3, 1);
        let (i, eta) = (rng.gen_range(0..3), rng.gen_range(0..2));
        let h = 1e-4;
        let det_at = |shift: f64| {
            let mut w = vs.clone();
            w.get_mut(i, 0)[eta] += shift;
            sq.op_h(&w).unwrap().determinant()
        };
        let fd_val = (det_at(h) - det_at(-h)) / (2.0 * h);
        let exact = sq.det_h_partial(&vs, i, eta).unwrap();
        fd = fd.max((exact - fd_val).abs() / exact.abs().max(1e-3));
    }
    outcome(
        lin <= 1e-13 && mul <= 1e-13 && fd <= 1e-6,
        format!("additivity {lin:.2e}, product rule {mul:.2e} (limit 1e-13), partial vs FD {fd:.2e} (limit 1e-6)"),
    )
}

fn max_by<F: Fn(&RefRow) -> f64>(rows: &[RefRow], f: F) -> f64 {
    rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Sweeps {
    plain: Vec<RefRow>,
    select: Vec<RefRow>,
    project: Vec<RefRow>,
}

fn sweeps() -> Sweeps {
    let cfg = RefSweepConfig::standard(1.0).unwrap();
    Sweeps {
        plain: ref_sweep(&cfg, RefMode::Plain),
        select: ref_sweep(&cfg, RefMode::Select),
        project: ref_sweep(&cfg, RefMode::Project),
    }
}

fn check_reference_stabilisation(s: &Sweeps) -> Outcome {
    let k_plain = max_by(&s.plain, |r| r.kappa);
    let k_sel = max_by(&s.select, |r| r.kappa);
    let odd = s.select.iter().filter(|r| r.n_rem % 2 != 0).count();
    let med = median(s.project.iter().map(|r| r.kappa).collect());
    let window: Vec<&RefRow> =
        s.project.iter().filter(|r| r.alpha >= -FRAC_PI_8 - 1e-12 && r.alpha <= FRAC_PI_3 + 1e-12).collect();
    let k_proj = window.iter().map(|r| r.kappa).fold(f64::NEG_INFINITY, f64::max);
    let pass = s.plain.len() == 721 && k_plain > 1e8 && k_sel * 1e3 <= k_plain && odd == 0 && k_proj < 1e4 * med;
    outcome(
        pass,
        format!(
            "plain max kappa {k_plain:.3e} (need > 1e8), selection max {k_sel:.3e} (ratio {:.2e}, need >= 1e3), \
             odd N_rem at {odd} samples, projection max/median {:.2e} (need < 1e4)",
            k_plain / k_sel,
            k_proj / med
        ),
    )
}

/// Indices of the `k` largest local maxima of `v`.
fn top_peaks(v: &[f64], k: usize) -> Vec<usize> {
    let n = v.len();
    let mut peaks: Vec<usize> =
        (0..n).filter(|&i| (i == 0 || v[i] >= v[i - 1]) && (i + 1 == n || v[i] > v[i + 1])).collect();
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    peaks.truncate(k);
    peaks
}

fn check_error_spikes(s: &Sweeps) -> Outcome {
    let err: Vec<f64> = s.plain.iter().map(|r| r.interp_err).collect();
    let kap: Vec<f64> = s.plain.iter().map(|r| r.kappa).collect();
    let pe = top_peaks(&err, 3);
    let pk = top_peaks(&kap, 3);
    let matched = pe.iter().all(|&i| pk.iter().any(|&j| i.abs_diff(j) <= 1));
    let e_plain = max_by(&s.plain, |r| r.interp_err);
    let e_sel = max_by(&s.select, |r| r.interp_err);
    outcome(
        matched && e_sel * 1e2 <= e_plain,
        format!(
            "error peaks at {pe:?}, kappa peaks at {pk:?}; plain/selection error max ratio {:.2e} (need >= 1e2)",
            e_plain / e_sel
        ),
    )
}

fn check_hhd() -> Outcome {
    let s = domain_spacing(3000);
    let plain = domain_nodes(s, false).unwrap();
    let projected = domain_nodes(s, true).unwrap();
    let growth = |nodes: &NodeSet, cfg: DomainRunConfig| match hhd_run(nodes, &cfg, 50) {
        Ok(r) => r.growth,
        Err(e) => {
            eprintln!("    HHD run failed: {e}");
            f64::INFINITY
        }
    };
    let sel = growth(&plain, DomainRunConfig::mq(0.5, 2, Some(0.7)));
    let mut detail = format!("N_I {}, selection d_min 0.7 growth {sel:.3e}", plain.n_interior());
    let mut pass = sel <= 10.0;
    let mut proj = Vec::new();
    for p in [2, 3] {
        for e in [0.2, 0.5, 0.9] {
            let g = growth(&projected, DomainRunConfig::mq(e, p, None));
            pass &= g <= 10.0;
            proj.push(format!("P{p}/{e}: {g:.2e}"));
        }
    }
    detail += &format!("; projected (N_I {}) {}", projected.n_interior(), proj.join(", "));
    let none = growth(&plain, DomainRunConfig::mq(0.5, 2, None));
    let low = growth(&plain, DomainRunConfig::mq(0.5, 2, Some(0.05)));
    detail += &format!("; reported only: unstabilised {none:.2e}, d_min 0.05 {low:.2e}");
    outcome(pass, detail)
}

fn check_poisson() -> Outcome {
    let s = domain_spacing(3000);
    let cfg = DomainRunConfig::mq(0.5, 3, Some(0.7));
    let refine = match poisson_refinement(s, &cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("refinement failed: {e}")),
    };
    let nodes = domain_nodes(s, false).unwrap();
    let grid: Vec<f64> = (1..=19).map(|k| 0.05 * k as f64).collect();
    let errs: Vec<f64> = grid
        .iter()
        .map(|&d| {
            let mut c = DomainRunConfig::mq(0.5, 3, Some(d));
            c.skip_singular = true;
            poisson_run(&nodes, &c).unwrap_or(f64::INFINITY)
        })
        .collect();
    let best = (0..grid.len()).min_by(|&a, &b| errs[a].total_cmp(&errs[b])).unwrap();
    let d_best = grid[best];
    let in_range = (0.4 - 1e-9..=0.8 + 1e-9).contains(&d_best);
    outcome(
        refine.nrmse < 1e-2 && refine.ratio() >= 2.0 && in_range,
        format!(
            "NRMSE {:.3e} at N_I {}, {:.3e} at N_I {} (ratio {:.2}, need >= 2); d_min sweep minimum {:.3e} at {d_best:.2}",
            refine.nrmse,
            refine.n_interior,
            refine.fine_nrmse,
            refine.fine_n_interior,
            refine.ratio(),
            errs[best]
        ),
    )
}

fn check_placement() -> Outcome {
    let cfg = RefSweepConfig::standard(1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [-PI / 12.0, 0.0, PI / 12.0] {
        let run = match placement_run(alpha, &cfg, 0.05, 100) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("alpha {alpha:.4}: {e}")),
        };
        let h = &run.result.cost_history;
        let monotone = h.windows(2).all(|w| w[1] <= w[0]);
        let decreased = h.last().unwrap() < h.first().unwrap();
        pass &= monotone && decreased;
        let mut part = format!("alpha {alpha:+.3}: F {:.4e} -> {:.4e}, monotone {monotone}", h[0], h[h.len() - 1]);
        if alpha == 0.0 {
            let pts = run.final_positions();
            let asym = pts
                .iter()
                .map(|p| pts.iter().map(|q| (Point::new(-p.x, p.y) - q).norm()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            pass &= asym <= 1e-3;
            part += &format!(", mirror gap {asym:.2e}");
        }
        parts.push(part);
    }
    outcome(pass, parts.join("; "))
}

/// `setup` is shared preparation time charged to the check.
fn report(name: &str, budget: Duration, setup: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let el = t.elapsed() + setup;
    let pass = o.pass && el <= budget;
    println!(
        "{} {name}: {} [{:.2} s, budget {} s]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        el.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= report("1 block determinant", secs(5), Duration::ZERO, check_block_determinant);
    ok &= report("2 single-node law", secs(5), Duration::ZERO, check_single_node_law);
    ok &= report("3 optimal directions", secs(10), Duration::ZERO, check_optimal_directions);
    ok &= report("4 d-matrix calculus", secs(2), Duration::ZERO, check_dmat_calculus);

    let t = Instant::now();
    let sw = sweeps();
    let sweep_time = t.elapsed();
    ok &= report("5 reference stabilisation", secs(120), sweep_time, || check_reference_stabilisation(&sw));
    ok &= report("6 error spikes", secs(60), sweep_time, || check_error_spikes(&sw));

    ok &= report("7 HHD stability", secs(600), Duration::ZERO, check_hhd);
    ok &= report("8 Poisson accuracy", secs(600), Duration::ZERO, check_poisson);
    ok &= report("9 boundary placement", secs(120), Duration::ZERO, check_placement);
    if !ok {
        std::process::exit(1);
    }
}
