//! `hhg`: run pipeline stages, full runs and figure scenarios from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hhg_core::io::save;
use hhg_core::pipeline::{
    reproduce_figure, run::write_manifest, run_pipeline, FigureOptions, Pipeline, Protocol, Quantity, RunConfig, RunOptions,
    StageCache, StageRecord,
};
use hhg_core::twa::Family;
use hhg_core::{Error, Result};

/// Quantum-optical high-harmonic generation from correlated emitters.
///
/// Settings come from the TOML file given with --config, then HHG_<BLOCK>_<KEY> environment
/// overrides (for example HHG_PREPARATION_N=1000), then command-line flags.
#[derive(Parser, Debug)]
#[command(name = "hhg", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "HHG_CONFIG")]
    config: Option<PathBuf>,
    /// Stage cache directory.
    #[arg(long, global = true, env = "HHG_CACHE_DIR", default_value = ".hhg-cache")]
    cache_dir: PathBuf,
    /// Output directory.
    #[arg(long, short, global = true, env = "HHG_OUT", default_value = "hhg-out")]
    out: PathBuf,
    /// Seed for phase-space sampling.
    #[arg(long, global = true, env = "HHG_SEED")]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "HHG_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonalize the model atom; writes the level table and the binary spectrum cache.
    Atom(AtomArgs),
    /// Propagate in the drive; writes the d(t) series cache and the emission spectrum.
    Propagate(PulseArgs),
    /// Prepare the collective state; writes its amplitudes and any decay profile or Bloch grid.
    Prepare(PrepareArgs),
    /// Build the harmonic mode matrices.
    Modes(ModesArgs),
    /// Moments, Wigner functions, photon statistics and joint tables.
    Stats(StatsArgs),
    /// Truncated-Wigner sampling of the same observables.
    Twa(TwaArgs),
    /// Every stage, with a manifest.
    Run,
    /// Panel data for one figure scenario.
    Figure {
        /// fig2, fig3, fig4, fig5, figS4, figS5, figS6 or figS8.
        tag: String,
    },
}

#[derive(Args, Debug, Default)]
struct AtomArgs {
    /// Softening length.
    #[arg(long)]
    a: Option<f64>,
    /// Half-box length.
    #[arg(long = "L", alias = "l")]
    l: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    /// Absorber strength.
    #[arg(long)]
    cab: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct PulseArgs {
    #[command(flatten)]
    atom: AtomArgs,
    /// Peak field, e.g. "60 GV/m" or a bare a.u. value.
    #[arg(long = "E0", alias = "e0")]
    e0: Option<Quantity>,
    /// Drive photon energy, e.g. "1.55 eV".
    #[arg(long)]
    omega_d: Option<Quantity>,
    #[arg(long)]
    n_cycles: Option<u32>,
    #[arg(long)]
    steps_per_cycle: Option<u32>,
    /// Also write a log-scale SVG of the spectrum.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug, Default)]
struct PrepareArgs {
    /// ground, excited, pi2, half-dicke, dicke, coherent, twisting or superradiance.
    #[arg(long)]
    protocol: Option<String>,
    /// Atom count.
    #[arg(long = "N", alias = "n")]
    atoms: Option<usize>,
    /// Hold time, e.g. "10 fs" or a bare a.u. value.
    #[arg(long)]
    t_h: Option<Quantity>,
    #[arg(long)]
    omega0: Option<Quantity>,
    #[arg(long)]
    omega_j: Option<Quantity>,
    /// Collective decay rate γN (a.u.).
    #[arg(long)]
    gamma_n: Option<f64>,
    /// Excitations of a Dicke state.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ModesArgs {
    /// Comma-separated harmonic orders.
    #[arg(long, value_delimiter = ',')]
    harmonics: Option<Vec<u32>>,
}

#[derive(Args, Debug, Default)]
struct StatsArgs {
    #[command(flatten)]
    modes: ModesArgs,
    #[command(flatten)]
    prepare: PrepareArgs,
    /// Highest truncation order tried.
    #[arg(long)]
    m_max: Option<usize>,
    /// Phase-space grid points per axis.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Harmonic pairs for joint statistics, e.g. 15:21,21:55.
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<String>>,
    /// Also write SVG heatmaps.
    #[arg(long)]
    svg: bool,
}

#[derive(Args, Debug, Default)]
struct TwaArgs {
    #[command(flatten)]
    modes: ModesArgs,
    /// up, half or down.
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "N", alias = "n")]
    atoms: Option<usize>,
    /// Trajectories.
    #[arg(long = "R", alias = "r")]
    trajectories: Option<usize>,
}

fn apply_atom(c: &mut RunConfig, a: &AtomArgs) {
    let b = &mut c.atom;
    b.a = a.a.unwrap_or(b.a);
    b.l = a.l.unwrap_or(b.l);
    b.dx = a.dx.unwrap_or(b.dx);
    b.cab = a.cab.unwrap_or(b.cab);
}

fn apply_pulse(c: &mut RunConfig, p: &PulseArgs) {
    apply_atom(c, &p.atom);
    let b = &mut c.pulse;
    if let Some(e) = &p.e0 {
        b.e0 = e.clone();
    }
    if let Some(w) = &p.omega_d {
        b.omega_d = w.clone();
    }
    b.n_cycles = p.n_cycles.unwrap_or(b.n_cycles);
    b.steps_per_cycle = p.steps_per_cycle.unwrap_or(b.steps_per_cycle);
    c.statistics.svg |= p.svg;
}

fn apply_prepare(c: &mut RunConfig, p: &PrepareArgs) -> Result<()> {
    let b = &mut c.preparation;
    if let Some(s) = &p.protocol {
        b.protocol = s.parse::<Protocol>()?;
    }
    b.atoms = p.atoms.unwrap_or(b.atoms);
    for (dst, src) in [(&mut b.t_h, &p.t_h), (&mut b.omega0, &p.omega0), (&mut b.omega_j, &p.omega_j)] {
        if let Some(q) = src {
            *dst = q.clone();
        }
    }
    if p.gamma_n.is_some() {
        b.gamma_n = p.gamma_n;
        b.gamma = None;
    }
    b.k = p.k.or(b.k);
    Ok(())
}

fn apply_modes(c: &mut RunConfig, m: &ModesArgs) {
    if let Some(h) = &m.harmonics {
        c.detection.harmonics = h.clone();
    }
}

fn parse_pairs(v: &[String]) -> Result<Vec<[u32; 2]>> {
    v.iter()
        .map(|s| {
            let bad = || Error::Config(format!("pair `{s}` is not of the form a:b"));
            let (a, b) = s.split_once(':').ok_or_else(bad)?;
            Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
        })
        .collect()
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut c = RunConfig::from_toml_with_env(&text, std::env::vars())?;
    if let Some(s) = cli.seed {
        c.twa.seed = s;
    }
    Ok(c)
}

fn report(records: &[StageRecord]) {
    for r in records {
        let how = if r.cache_hit { "cached" } else { "computed" };
        eprintln!("{:<16} {:<9} {:>9.3} s  {}", r.stage, how, r.seconds, &r.key[..12]);
    }
}

/// Runs one stage's outputs through `f`, then writes the manifest whether or not it succeeded.
fn with_pipeline(cli: &Cli, cfg: &RunConfig, f: impl FnOnce(&mut Pipeline, &Path) -> Result<()>) -> Result<()> {
    let mut p = Pipeline::new(cfg, StageCache::new(&cli.cache_dir)?)?;
    std::fs::create_dir_all(&cli.out)?;
    let result = f(&mut p, &cli.out);
    report(p.records());
    let m = p.manifest(&cli.out, result.as_ref().err())?;
    write_manifest(&m, &cli.out)?;
    result
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Atom(a) => {
            apply_atom(&mut cfg, a);
            with_pipeline(cli, &cfg, |p, out| {
                p.write_atom(out)?;
                save(p.atom()?, &out.join("atom.bin"))
            })
        }
        Command::Propagate(a) => {
            apply_pulse(&mut cfg, a);
            with_pipeline(cli, &cfg, |p, out| {
                save(p.propagate()?, &out.join("dipole_series.bin"))?;
                p.spectrum()?.write_to(out)?;
                Ok(())
            })
        }
        Command::Prepare(a) => {
            apply_prepare(&mut cfg, a)?;
            with_pipeline(cli, &cfg, |p, out| p.write_prepare(out))
        }
        Command::Modes(a) => {
            apply_modes(&mut cfg, a);
            with_pipeline(cli, &cfg, |p, out| {
                p.write_modes(out)?;
                save(&p.modes()?.to_vec(), &out.join("modes.bin"))
            })
        }
        Command::Stats(a) => {
            apply_modes(&mut cfg, &a.modes);
            apply_prepare(&mut cfg, &a.prepare)?;
            if let Some(m) = a.m_max {
                cfg.statistics.m_cap = m;
                cfg.statistics.m_start = cfg.statistics.m_start.min(m);
            }
            cfg.statistics.grid_points = a.grid_points.unwrap_or(cfg.statistics.grid_points);
            if let Some(p) = &a.pairs {
                cfg.detection.pairs = parse_pairs(p)?;
            }
            cfg.statistics.svg |= a.svg;
            with_pipeline(cli, &cfg, |p, out| {
                p.stats()?.write_to(out)?;
                Ok(())
            })
        }
        Command::Twa(a) => {
            apply_modes(&mut cfg, &a.modes);
            if let Some(f) = &a.family {
                cfg.preparation.protocol = match f.parse::<Family>()? {
                    Family::Up => Protocol::Excited,
                    Family::Half => Protocol::HalfDicke,
                    Family::Down => Protocol::Ground,
                };
            }
            cfg.preparation.atoms = a.atoms.unwrap_or(cfg.preparation.atoms);
            cfg.twa.trajectories = a.trajectories.unwrap_or(cfg.twa.trajectories);
            cfg.twa.enabled = true;
            with_pipeline(cli, &cfg, |p, out| {
                p.twa()?.expect("enabled above").write_to(out)?;
                Ok(())
            })
        }
        Command::Run => {
            let m = run_pipeline(&cfg, &RunOptions { cache_dir: cli.cache_dir.clone(), out_dir: cli.out.clone() });
            if let Ok(m) = &m {
                report(&m.stages);
            }
            m.map(|_| ())
        }
        Command::Figure { tag } => {
            let opts = FigureOptions { cache_dir: cli.cache_dir.clone(), out_dir: cli.out.clone(), base: cfg };
            let r = reproduce_figure(tag, &opts)?;
            for n in &r.notes {
                eprintln!("note: {n}");
            }
            println!("{} files in {}", r.files.len(), r.dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
