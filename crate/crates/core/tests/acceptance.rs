//! End-to-end acceptance suite. Runs both benchmark presets (full-order
//! runs are cached under the cargo target tmpdir) and prints one line per
//! criterion.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use qgrom::bench::{offline, online, run_bench_from, BenchCase, BenchReport, Offline};
use qgrom::dense::DenseMatrix;
use qgrom::diagnostics::{kinetic_energy, munk_scale, EnergyTrace};
use qgrom::fom::{run_fom_with, FomConfig, FomRun, FomSolver, FomState};
use qgrom::fv::{apply_convection, boundary_values, negative_laplacian_matrix, CellExchange, ConvectionScheme};
use qgrom::io::{load_store, save_store};
use qgrom::linsolve::{solve_spd, SolverOptions};
use qgrom::pod::{correlation_matrix, eigendecompose, pod, SnapshotSet, Variable};
use qgrom::rom::{step_bv_alpha, step_qge_qge, ReducedOperators, RomConfig, RomModel, RomState};
use qgrom::{Bounds, Field, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value >= target / factor && value <= target * factor
}

fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

/// The preset's full-order run, reused across invocations while its
/// configuration is unchanged.
fn cached_fom(case: &BenchCase) -> FomRun {
    let cfg = &case.fom;
    assert_eq!(cfg.t_start, cfg.t0, "the cache stores no spin-up state");
    let dir = cache_dir();
    let key_path = dir.join(format!("{}.key", case.label));
    let q_path = dir.join(format!("{}_q.store", case.label));
    let psi_path = dir.join(format!("{}_psi.store", case.label));
    let key = format!("{cfg:?}");
    if fs::read_to_string(&key_path).ok().as_deref().and_then(|s| s.split_once('\n')).map(|(k, _)| k) == Some(&key) {
        let seconds: f64 = fs::read_to_string(&key_path).unwrap().lines().nth(1).unwrap().parse().unwrap();
        if let (Ok(q), Ok(psi)) = (load_store(&q_path, cfg.bounds), load_store(&psi_path, cfg.bounds)) {
            let mut energy = EnergyTrace::new();
            for (t, f) in psi.times().iter().zip(psi.fields()) {
                energy.push(*t, kinetic_energy(&f)).unwrap();
            }
            let initial = FomState::initial(Arc::clone(q.mesh()), cfg.t0);
            return FomRun { q, psi, energy, initial, wall_seconds: seconds };
        }
    }
    eprintln!("{}: running the full-order model", case.label);
    let mut last = 0;
    let run = run_fom_with(cfg, |step, total| {
        let pct = 100 * step / total;
        if pct >= last + 10 {
            eprintln!("{}: {pct}%", case.label);
            last = pct;
        }
    })
    .expect("full-order run");
    fs::create_dir_all(&dir).unwrap();
    save_store(&q_path, &run.q).unwrap();
    save_store(&psi_path, &run.psi).unwrap();
    fs::write(&key_path, format!("{key}\n{}\n", run.wall_seconds)).unwrap();
    run
}

struct CaseData {
    fom: FomRun,
    report: BenchReport,
    /// Online seconds at `(N_q, N_ψ) = (10, 10)` for the plain and the
    /// filtered model.
    matched: (f64, f64),
}

fn case_data(case: BenchCase) -> CaseData {
    let fom = cached_fom(&case);
    eprintln!("{}: reduced-order protocol", case.label);
    let report = run_bench_from(&case, &fom).expect("benchmark protocol");

    let mesh = Arc::clone(fom.q.mesh());
    let forcing = case.fom.forcing_field(Arc::clone(&mesh));
    let base = offline(&fom.q, &fom.psi, case.eps_psi, 10, &forcing, case.fom.scheme).unwrap();
    let basis_psi = pod(&fom.psi, 10).unwrap();
    let ops = ReducedOperators::assemble(&base.basis_q, &basis_psi, &forcing, case.fom.scheme).unwrap();
    let off = Offline { basis_psi, n_psi: 10, ops, ..base };
    let alpha = report
        .calibrations
        .iter()
        .find(|(n, _)| *n == 10)
        .map(|(_, c)| c.alpha)
        .unwrap();
    let initial = (&fom.initial.q, &fom.initial.psi);
    let plain = online(&case, &off, initial, RomModel::QgeQge, 10).unwrap().0;
    let filtered = online(&case, &off, initial, RomModel::BvAlpha(alpha), 10).unwrap().0;
    CaseData { fom, report, matched: (plain.online_seconds, filtered.online_seconds) }
}

fn spectrum(data: &CaseData, expected_npsi: Option<usize>, targets: [f64; 3]) -> Verdict {
    let r = &data.report;
    let mut ok = true;
    let mut parts = vec![format!("{} snapshots", data.fom.q.len())];
    ok &= data.fom.q.len() == 700;
    if let Some(n) = expected_npsi {
        ok &= r.n_psi.abs_diff(n) <= 2;
    }
    parts.push(format!("N_psi {}", r.n_psi));
    for (n, target) in [10, 20, 30].into_iter().zip(targets) {
        let f = r.q_fractions.iter().find(|(m, _)| *m == n).unwrap().1;
        ok &= within(f, target, 0.05);
        parts.push(format!("N_q {n}: {:.1}% (target {:.0}%)", 100.0 * f, 100.0 * target));
    }
    check(ok, parts.join(", "))
}

fn errors(data: &[(&CaseData, [f64; 3], [f64; 3])]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, qge, bv) in data {
        for (i, n) in [10, 20, 30].into_iter().enumerate() {
            let p = d.report.outcome("qge-qge", n).unwrap().epsilon;
            let f = d.report.outcome("bv-alpha", n).unwrap().epsilon;
            let row_ok = within_factor(p, qge[i], 2.0) && within_factor(f, bv[i], 2.0) && f < p;
            ok &= row_ok;
            parts.push(format!(
                "{} N_q {n}: qge {p:.2e} (ref {:.1e}), bv {f:.2e} (ref {:.1e}){}",
                d.report.case.label,
                qge[i],
                bv[i],
                if row_ok { "" } else { " FAIL" }
            ));
        }
    }
    let c1 = data[0].0;
    let ratio = c1.report.outcome("qge-qge", 10).unwrap().epsilon / c1.report.outcome("bv-alpha", 10).unwrap().epsilon;
    ok &= ratio >= 5.0;
    parts.push(format!("case1 N_q 10 ratio {ratio:.1}"));
    check(ok, parts.join("; "))
}

fn patterns(d: &CaseData) -> Verdict {
    let g = |m: &str, n| d.report.outcome(m, n).unwrap().gyres;
    let (bv10, q40, q10, q20) = (g("bv-alpha", 10), g("qge-qge", 40), g("qge-qge", 10), g("qge-qge", 20));
    check(
        bv10 == 4 && q40 == 4 && q10 < 4 && q20 < 4,
        format!("bv N_q 10: {bv10} gyres, qge N_q 40: {q40}, qge N_q 10: {q10}, qge N_q 20: {q20}"),
    )
}

fn monotone(d: &CaseData) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for m in ["qge-qge", "bv-alpha"] {
        let e: Vec<f64> = [10, 20, 30].iter().map(|&n| d.report.outcome(m, n).unwrap().epsilon).collect();
        ok &= e[2] <= e[1] && e[1] <= e[0];
        parts.push(format!("{m}: {:.3e} / {:.3e} / {:.3e}", e[0], e[1], e[2]));
    }
    check(ok, parts.join(", "))
}

fn speedups(c1: &CaseData, c2: &CaseData) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [c1, c2] {
        let r = &d.report;
        let slowest = r.outcomes.iter().map(|o| o.online_seconds).fold(0.0, f64::max);
        ok &= slowest < r.fom_seconds;
        parts.push(format!("{}: fom {:.0} s, slowest online {slowest:.1} s", r.case.label, r.fom_seconds));
        for n in [10, 20, 30] {
            let p = r.outcome("qge-qge", n).unwrap().online_seconds;
            let f = r.outcome("bv-alpha", n).unwrap().online_seconds;
            ok &= f <= 2.0 * p;
            parts.push(format!("N_q {n} bv/qge time {:.2}", f / p));
        }
    }
    let s1 = (c1.report.fom_seconds / c1.matched.0, c1.report.fom_seconds / c1.matched.1);
    let s2 = (c2.report.fom_seconds / c2.matched.0, c2.report.fom_seconds / c2.matched.1);
    ok &= s2.0 > s1.0 && s2.1 > s1.1;
    parts.push(format!(
        "speed-up at (10, 10): case1 {:.1}/{:.1}, case2 {:.1}/{:.1}",
        s1.0, s1.1, s2.0, s2.1
    ));
    check(ok, parts.join("; "))
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_gram(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DenseMatrix {
    let r = random_matrix(rng, n, n);
    let mut g = r.transpose().matmul(&r);
    g.add_scaled(shift, &DenseMatrix::identity(n));
    g
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn alpha_zero_degeneracy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_601);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let nq = rng.gen_range(1..=8);
        let np = rng.gen_range(1..=6);
        let mut a = random_gram(&mut rng, nq, 0.0);
        a.scale(-1.0);
        let mut b = random_gram(&mut rng, np, 1.0);
        b.scale(-1.0);
        let ops = ReducedOperators {
            m: random_gram(&mut rng, nq, 1.0),
            mt: random_matrix(&mut rng, np, nq),
            a,
            b,
            g: (0..np).map(|_| random_matrix(&mut rng, nq, nq)).collect(),
            y: random_vec(&mut rng, np),
            h: random_vec(&mut rng, nq),
            gl: random_matrix(&mut rng, nq, np),
            al: random_vec(&mut rng, nq),
            aw: random_vec(&mut rng, nq),
            ml: random_vec(&mut rng, np),
            k: random_gram(&mut rng, np, 0.0),
        };
        let state = RomState {
            beta: random_vec(&mut rng, nq),
            beta_bar: random_vec(&mut rng, nq),
            gamma: random_vec(&mut rng, np),
            time: 10.0,
        };
        let mut cfg = RomConfig::new(RomModel::QgeQge, rng.gen_range(1e-3..1e-1), rng.gen_range(10.0..1000.0), nq, np);
        cfg.ro = rng.gen_range(1e-3..1e-1);
        let plain = step_qge_qge(&state, &ops, &cfg).map_err(|e| e.to_string())?;
        let filtered = step_bv_alpha(&state, &ops, &cfg, 0.0).map_err(|e| e.to_string())?;
        for (x, y) in plain
            .beta
            .iter()
            .chain(&plain.beta_bar)
            .chain(&plain.gamma)
            .zip(filtered.beta.iter().chain(&filtered.beta_bar).chain(&filtered.gamma))
        {
            worst = worst.max((x - y).abs());
        }
    }
    check(worst <= 1e-12, format!("100 instances, largest difference {worst:.1e}"))
}

fn weighted(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

fn pod_invariants() -> Verdict {
    let mesh = Arc::new(Mesh::new(6, 6, Bounds::basin()).unwrap());
    let w = mesh.cell_volumes().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut ortho, mut trace, mut optimal) = (0.0f64, 0.0f64, 0.0f64);
    let mut beaten = 0;
    for _ in 0..50 {
        let mut set = SnapshotSet::new(Arc::clone(&mesh), Variable::Q);
        let rank = rng.gen_range(3..=20);
        let gen: Vec<Vec<f64>> = (0..rank).map(|_| random_vec(&mut rng, 36)).collect();
        for t in 0..20 {
            let c = random_vec(&mut rng, rank);
            let v = (0..36).map(|i| gen.iter().zip(&c).map(|(g, c)| g[i] * c).sum()).collect();
            set.push(t as f64, v).unwrap();
        }
        let lambdas = eigendecompose(&correlation_matrix(&set)).unwrap().values;
        let total: f64 = set.fields().map(|f| weighted(&w, f.values(), f.values())).sum();
        trace = trace.max((lambdas.iter().sum::<f64>() - total).abs() / total);

        let n = rng.gen_range(1..rank.min(20));
        let basis = pod(&set, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let ip = weighted(&w, basis.mode(i).values(), basis.mode(j).values());
                ortho = ortho.max((ip - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        let residual = |modes: &[Vec<f64>]| -> f64 {
            set.fields()
                .map(|f| {
                    let mut r = f.values().to_vec();
                    for m in modes {
                        let c = weighted(&w, f.values(), m);
                        for (ri, mi) in r.iter_mut().zip(m) {
                            *ri -= c * mi;
                        }
                    }
                    weighted(&w, &r, &r)
                })
                .sum()
        };
        let modes: Vec<Vec<f64>> = basis.modes().iter().map(|m| m.values().to_vec()).collect();
        let tail: f64 = lambdas[n..].iter().map(|l| l.max(0.0)).sum();
        optimal = optimal.max((residual(&modes) - tail).abs() / total);

        let mut other: Vec<Vec<f64>> = Vec::new();
        while other.len() < n {
            let mut v = random_vec(&mut rng, 36);
            for o in &other {
                let c = weighted(&w, &v, o);
                v.iter_mut().zip(o).for_each(|(vi, oi)| *vi -= c * oi);
            }
            let norm = weighted(&w, &v, &v).sqrt();
            v.iter_mut().for_each(|vi| *vi /= norm);
            other.push(v);
        }
        if residual(&other) < residual(&modes) * (1.0 - 1e-12) {
            beaten += 1;
        }
    }
    check(
        ortho <= 1e-8 && trace <= 1e-10 && optimal <= 1e-10 && beaten == 0,
        format!(
            "50 sets: orthonormality {ortho:.1e}, trace {trace:.1e}, optimality {optimal:.1e}, random subspaces better {beaten}"
        ),
    )
}

fn fv_invariants() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;

    let mut closure = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (nx, ny) in [(2, 2), (3, 7), (16, 32), (32, 64)] {
        let mesh = Mesh::new(nx, ny, Bounds::basin()).unwrap();
        for (c, faces) in mesh.cell_faces().iter().enumerate() {
            let mut s = [0.0; 2];
            for &f in faces {
                let a = mesh.outward_area(f, c);
                s[0] += a[0];
                s[1] += a[1];
            }
            closure = closure.max(s[0].abs().max(s[1].abs()));
        }
    }
    ok &= closure <= 1e-12;
    parts.push(format!("surface closure {closure:.1e}"));

    let (mut div, mut cons) = (0.0f64, 0.0f64);
    for (nx, ny) in [(2, 2), (5, 3), (16, 32)] {
        let mesh = Mesh::new(nx, ny, Bounds::basin()).unwrap();
        let walls = boundary_values(&mesh, |_, y| y);
        for scheme in [ConvectionScheme::Arakawa, ConvectionScheme::Linear, ConvectionScheme::Upwind, ConvectionScheme::VanLeer] {
            for _ in 0..10 {
                let psi = random_vec(&mut rng, mesh.n_cells());
                let q = random_vec(&mut rng, mesh.n_cells());
                let ex = CellExchange::from_psi(&mesh, &psi, scheme);
                div = div.max(ex.divergence(&mesh).iter().fold(0.0, |m, d| m.max(d.abs())));
                for boundary in [None, Some(walls.as_slice())] {
                    let c = apply_convection(&mesh, &ex, &q, boundary, scheme);
                    cons = cons.max(weighted(mesh.cell_volumes(), &c, &vec![1.0; c.len()]).abs());
                }
            }
        }
    }
    ok &= div <= 1e-10 && cons <= 1e-10;
    parts.push(format!("flux divergence {div:.1e}, global convection {cons:.1e}"));

    let mut cfg = FomConfig::new(0.0036, 450.0, 16, 32);
    cfg.forcing = 0.0;
    let mesh = cfg.build_mesh().unwrap();
    let mut solver = FomSolver::new(&cfg, Arc::clone(&mesh)).unwrap();
    let mut state = FomState::initial(Arc::clone(&mesh), cfg.t0);
    let rest = state.clone();
    for _ in 0..1000 {
        solver.step(&mut state).unwrap();
    }
    let drift = state.q.sub(&rest.q).unwrap().max_abs().max(state.psi.max_abs());
    ok &= drift <= 1e-8;
    parts.push(format!("rest-state drift {drift:.1e}"));

    let ro = 0.0036;
    let err = |nx: usize, ny: usize| {
        let mesh = Arc::new(Mesh::new(nx, ny, Bounds::basin()).unwrap());
        let exact = Field::from_fn(Arc::clone(&mesh), |x, y| (PI * x).sin() * (0.5 * PI * y).cos());
        let rhs: Vec<f64> = exact.values().iter().map(|v| 1.25 * PI * PI * ro * v).collect();
        let opts = SolverOptions { tol: 1e-13, max_iter: 20_000 };
        let (psi, _) = solve_spd(&negative_laplacian_matrix(&mesh, ro), &rhs, opts).unwrap();
        Field::new(mesh, psi).unwrap().sub(&exact).unwrap().norm()
    };
    let order = (err(16, 32) / err(32, 64)).log2();
    ok &= order >= 1.9;
    parts.push(format!("psi-solve order {order:.2}"));
    check(ok, parts.join(", "))
}

fn munk() -> Verdict {
    let d: Vec<f64> = [BenchCase::case1(), BenchCase::case2()]
        .iter()
        .map(|c| munk_scale(c.fom.ro, c.fom.re, c.fom.bounds.width()).unwrap())
        .collect();
    check(
        d.iter().all(|v| (v - 0.02).abs() <= 1e-15),
        format!("case1 {:.17}, case2 {:.17}", d[0], d[1]),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut results: Vec<(usize, &str, Verdict, f64)> = Vec::new();
    let mut run = |id, name, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        let line = match &v {
            Ok(d) => format!("PASS {id} ({name}, {secs:.1} s): {d}"),
            Err(d) => format!("FAIL {id} ({name}, {secs:.1} s): {d}"),
        };
        println!("{line}");
        results.push((id, name, v, secs));
    };

    run(6, "alpha = 0 degeneracy", &mut alpha_zero_degeneracy);
    run(7, "POD invariants", &mut pod_invariants);
    run(8, "FV invariants", &mut fv_invariants);
    run(9, "Munk scale", &mut munk);

    let c1 = case_data(BenchCase::case1());
    let c2 = case_data(BenchCase::case2());
    run(1, "POD spectrum, case 1", &mut || spectrum(&c1, Some(10), [0.54, 0.65, 0.70]));
    run(2, "POD spectrum, case 2", &mut || spectrum(&c2, None, [0.59, 0.71, 0.76]));
    run(3, "error tables", &mut || {
        errors(&[
            (&c1, [12.0, 1.7, 0.92], [0.81, 0.77, 0.61]),
            (&c2, [5.0, 1.0, 0.64], [0.74, 0.53, 0.37]),
        ])
    });
    run(4, "pattern recovery", &mut || patterns(&c1));
    run(5, "speed-up", &mut || speedups(&c1, &c2));
    run(10, "error decreases with N_q, case 1", &mut || monotone(&c1));

    results.sort_by_key(|r| r.0);
    println!();
    for (id, name, v, _) in &results {
        let label = if *id <= 9 { format!("criterion {id}") } else { "invariant".to_string() };
        println!("{label}: {} ({name})", if v.is_ok() { "pass" } else { "FAIL" });
    }
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("{} of {} checks passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
