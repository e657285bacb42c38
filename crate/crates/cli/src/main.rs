use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use qgrom::bench::{offline, run_bench, BenchCase, ConfigMap};
use qgrom::diagnostics::{gyre_count, relative_error};
use qgrom::field::coordinate_field_y;
use qgrom::fom::run_fom_with;
use qgrom::io::{
    basis_to_store, load_store, read_eigenvalues_csv, read_field_dump, save_store, store_to_basis,
    write_coefficients_csv, write_eigenvalues_csv, write_energy_csv, write_field_dump, write_report_csv,
};
use qgrom::pod::{energy_fraction, spectrum_table, Variable};
use qgrom::rom::{project_initial, run_rom, ReducedOperators, RomModel};
use qgrom::{Bounds, Error, Field};

#[derive(Debug, Parser)]
#[command(name = "qgrom", version, about = "Quasi-geostrophic FV solver and POD-Galerkin reduced-order models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full-order model and write snapshot stores and the energy trace.
    Fom {
        #[command(flatten)]
        setup: Setup,
    },
    /// Lift and decompose q and ψ snapshot stores.
    Pod {
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        psi: PathBuf,
        #[arg(long, default_value_t = 0.98)]
        eps_psi: f64,
        /// Vorticity dimensions to report; the largest is stored.
        #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40])]
        nq: Vec<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Assemble the reduced operators from a `pod` directory and run the online phase.
    Rom {
        #[command(flatten)]
        setup: Setup,
        /// Directory written by `pod`.
        #[arg(long)]
        pod_dir: PathBuf,
        /// `qge` or `bv-alpha`.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        nq: Option<usize>,
        /// Defaults to every stored stream-function mode.
        #[arg(long)]
        npsi: Option<usize>,
        /// Initial vorticity field dump; `q = y` if absent.
        #[arg(long)]
        initial_q: Option<PathBuf>,
        /// Initial stream-function field dump; zero if absent.
        #[arg(long)]
        initial_psi: Option<PathBuf>,
        /// Full-order mean stream function to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Run the whole benchmark protocol and write report.csv.
    Bench {
        #[command(flatten)]
        setup: Setup,
    },
    /// Compare two mean stream-function dumps.
    Diag {
        #[arg(long)]
        psi_mean_a: PathBuf,
        #[arg(long)]
        psi_mean_b: PathBuf,
    },
}

#[derive(Debug, Args)]
struct Setup {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark preset, `1` or `2`.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Run(Error::InvalidArgument(_)) => 1,
            Failure::Run(Error::Io(_) | Error::Format(_)) => 3,
            Failure::Run(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Loaded {
    map: ConfigMap,
    case: BenchCase,
    out_dir: PathBuf,
}

impl Setup {
    fn load(&self) -> std::result::Result<Loaded, Failure> {
        let mut map = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    Failure::Run(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
                })?;
                ConfigMap::parse(&text)?
            }
            None => ConfigMap::default(),
        };
        if let Some(c) = &self.case {
            if map.get("case").is_some_and(|v| v != c) {
                return Err(Failure::Usage("--case disagrees with the config file".into()));
            }
            let mut text = format!("case = {c}\n");
            for key in qgrom::bench::CONFIG_KEYS {
                if let Some(v) = map.get(key).filter(|_| key != "case") {
                    text.push_str(&format!("{key} = {v}\n"));
                }
            }
            map = ConfigMap::parse(&text)?;
        }
        let case = map.apply()?;
        let out_dir = self
            .out_dir
            .clone()
            .or_else(|| map.get("out_dir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&out_dir).map_err(Error::Io)?;
        Ok(Loaded { map, case, out_dir })
    }
}

fn progress(label: &'static str) -> impl FnMut(usize, usize) {
    let mut last = 0;
    move |step, total| {
        let pct = 100 * step / total.max(1);
        if pct >= last + 10 || step == total {
            eprintln!("{label}: {pct}%");
            last = pct;
        }
    }
}

fn fom(setup: &Setup) -> Outcome {
    let Loaded { case, out_dir, .. } = setup.load()?;
    let run = run_fom_with(&case.fom, progress("fom"))?;
    save_store(out_dir.join("q.store"), &run.q)?;
    save_store(out_dir.join("psi.store"), &run.psi)?;
    write_energy_csv(&run.energy, out_dir.join("energy.csv"))?;
    write_field_dump(&run.initial.q, out_dir.join("q_initial.csv"))?;
    write_field_dump(&run.initial.psi, out_dir.join("psi_initial.csv"))?;
    write_field_dump(&run.psi.mean()?, out_dir.join("psi_mean.csv"))?;
    println!(
        "snapshots {}  mean energy {:.6e}  wall {:.2} s",
        run.q.len(),
        run.energy.mean(),
        run.wall_seconds
    );
    Ok(())
}

fn pod(q: &Path, psi: &Path, eps_psi: f64, nq: &[usize], out_dir: Option<&Path>) -> Outcome {
    let out_dir = out_dir.unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir).map_err(Error::Io)?;
    let bounds = Bounds::basin();
    let q = load_store(q, bounds)?;
    let psi = load_store(psi, bounds)?;
    if q.variable() != Variable::Q || psi.variable() != Variable::Psi {
        return Err(Failure::Usage("--q and --psi must hold vorticity and stream-function snapshots".into()));
    }
    let max_nq = nq.iter().copied().max().unwrap_or(0);
    let forcing = Field::zeros(Arc::clone(q.mesh()));
    let off = offline(&q, &psi, eps_psi, max_nq, &forcing, Default::default())?;
    save_store(out_dir.join("q_modes.store"), &basis_to_store(&off.basis_q)?)?;
    save_store(out_dir.join("psi_modes.store"), &basis_to_store(&off.basis_psi)?)?;
    write_eigenvalues_csv(&spectrum_table(off.q_spectrum()), out_dir.join("eigenvalues_q.csv"))?;
    write_eigenvalues_csv(&spectrum_table(off.psi_spectrum()), out_dir.join("eigenvalues_psi.csv"))?;
    println!("n_psi {}", off.n_psi);
    for &n in nq {
        println!("n_q {n}  energy fraction {:.4}", energy_fraction(off.q_spectrum(), n));
    }
    Ok(())
}

struct RomArgs<'a> {
    pod_dir: &'a Path,
    model: Option<&'a str>,
    alpha: Option<f64>,
    nq: Option<usize>,
    npsi: Option<usize>,
    initial_q: Option<&'a Path>,
    initial_psi: Option<&'a Path>,
    reference: Option<&'a Path>,
}

fn rom(setup: &Setup, a: RomArgs<'_>) -> Outcome {
    let Loaded { map, case, out_dir } = setup.load()?;
    let alpha = match a.alpha {
        Some(v) => Some(v),
        None => map.list::<f64>("alpha")?.and_then(|l| l.first().copied()),
    };
    let model = match a.model.or(map.get("model")) {
        None | Some("qge" | "qge-qge") => RomModel::QgeQge,
        Some("bv-alpha" | "bv") => RomModel::BvAlpha(
            alpha.ok_or_else(|| Failure::Usage("the bv-alpha model needs --alpha".into()))?,
        ),
        Some(other) => return Err(Failure::Usage(format!("unknown model '{other}'"))),
    };

    let bounds = Bounds::basin();
    let q_modes = load_store(a.pod_dir.join("q_modes.store"), bounds)?;
    let psi_modes = load_store(a.pod_dir.join("psi_modes.store"), bounds)?;
    let bq = store_to_basis(&q_modes, read_eigenvalues_csv(a.pod_dir.join("eigenvalues_q.csv"))?, Variable::Q)?;
    let bp = store_to_basis(&psi_modes, read_eigenvalues_csv(a.pod_dir.join("eigenvalues_psi.csv"))?, Variable::Psi)?;
    let n_q = a.nq.or(map.list::<usize>("nq")?.and_then(|l| l.first().copied())).unwrap_or(bq.retained());
    let n_psi = match a.npsi {
        Some(n) => n,
        None => map.number("npsi")?.unwrap_or(bp.retained()),
    };
    let bq = bq.truncated(n_q)?;
    let bp = bp.truncated(n_psi)?;

    let mesh = Arc::clone(bq.mesh());
    let forcing = case.fom.forcing_field(Arc::clone(&mesh));
    let ops = ReducedOperators::assemble(&bq, &bp, &forcing, case.fom.scheme)?;
    let q0 = match a.initial_q {
        Some(p) => read_field_dump(p)?,
        None => coordinate_field_y(Arc::clone(&mesh)),
    };
    let psi0 = match a.initial_psi {
        Some(p) => read_field_dump(p)?,
        None => Field::zeros(Arc::clone(&mesh)),
    };
    let init = project_initial(&q0, &psi0, &bq, &bp, case.fom.t0)?;
    let run = run_rom(&init, &ops, &case.rom_config(model, n_q, n_psi))?;
    let mean = run.mean_stream_function(&bp)?;

    write_coefficients_csv(&run.times, &run.beta, &run.gamma, out_dir.join("coefficients.csv"))?;
    write_energy_csv(&run.energy, out_dir.join("rom_energy.csv"))?;
    write_field_dump(&mean, out_dir.join("psi_mean.csv"))?;
    print!(
        "{} n_q {n_q} n_psi {n_psi} alpha {}  gyres {}  online {:.3} s",
        model.name(),
        model.alpha(),
        gyre_count(&mean),
        run.wall_seconds
    );
    if let Some(p) = a.reference {
        print!("  epsilon {:.4e}", relative_error(&read_field_dump(p)?, &mean)?);
    }
    println!();
    Ok(())
}

fn bench(setup: &Setup) -> Outcome {
    let Loaded { case, out_dir, .. } = setup.load()?;
    let (fom, report) = run_bench(&case, progress("fom"))?;
    write_energy_csv(&fom.energy, out_dir.join("energy.csv"))?;
    write_field_dump(&fom.psi.mean()?, out_dir.join("psi_mean.csv"))?;
    let rows = report.rows();
    write_report_csv(&rows, out_dir.join("report.csv"))?;
    println!(
        "{}: fom {:.1} s  mean energy {:.4e}  gyres {}  n_psi {}",
        case.label, report.fom_seconds, report.fom_mean_energy, report.fom_gyres, report.n_psi
    );
    for (n, f) in &report.q_fractions {
        println!("  n_q {n:>3}  energy fraction {f:.4}");
    }
    for r in &rows {
        println!(
            "  {:<8} n_q {:>3}  alpha {:<6}  epsilon {:.3e}  gyres {}  online {:.2} s  speedup {:.1}",
            r.model, r.n_q, r.alpha, r.epsilon, r.gyre_count, r.online_seconds, r.speedup
        );
    }
    Ok(())
}

fn diag(a: &Path, b: &Path) -> Outcome {
    let fa = read_field_dump(a)?;
    let fb = read_field_dump(b)?;
    println!("epsilon {:.6e}", relative_error(&fa, &fb)?);
    println!("gyres_a {}", gyre_count(&fa));
    println!("gyres_b {}", gyre_count(&fb));
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Fom { setup } => fom(setup),
        Command::Pod { q, psi, eps_psi, nq, out_dir } => pod(q, psi, *eps_psi, nq, out_dir.as_deref()),
        Command::Rom {
            setup,
            pod_dir,
            model,
            alpha,
            nq,
            npsi,
            initial_q,
            initial_psi,
            reference,
        } => rom(
            setup,
            RomArgs {
                pod_dir,
                model: model.as_deref(),
                alpha: *alpha,
                nq: *nq,
                npsi: *npsi,
                initial_q: initial_q.as_deref(),
                initial_psi: initial_psi.as_deref(),
                reference: reference.as_deref(),
            },
        ),
        Command::Bench { setup } => bench(setup),
        Command::Diag { psi_mean_a, psi_mean_b } => diag(psi_mean_a, psi_mean_b),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qgrom: {f}");
            ExitCode::from(f.code())
        }
    }
}
