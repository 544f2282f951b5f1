use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use aggdiff::catalog::{catalog_for, BifurcationPoint};
use aggdiff::config::{load_config, preset, RunConfig, PRESETS};
use aggdiff::dynamics::{simulate, Diagnostics};
use aggdiff::emit::{self, format_real, CsvRecord, Field, Format, RunMeta};
use aggdiff::kernels::kernel_summary;
use aggdiff::operator::probe_suite;
use aggdiff::stability::{region_boundary, spectrum};
use aggdiff::stationary::trace_branch;
use aggdiff::{GridState, ParamKind, System};

#[derive(Parser)]
#[command(name = "aggdiff", version, about = "Periodic aggregation-diffusion toolkit")]
struct Cli {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use a built-in preset instead of (or underneath) --config.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Seed for randomized initial perturbations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Alpha1,
    Gamma,
    AlphaScalar,
}

impl From<ParamArg> for ParamKind {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Alpha1 => ParamKind::Alpha1,
            ParamArg::Gamma => ParamKind::Gamma,
            ParamArg::AlphaScalar => ParamKind::ScalarAlpha,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the linearization for k = 1..=K_max.
    Spectrum {
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Boundary of the linear stability region in the (chi1 a1, chi2 a2) plane.
    StabilityRegion {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Bifurcation points for one parameter.
    Bifurcate {
        #[arg(long, value_enum)]
        param: ParamArg,
    },
    /// Follow a bifurcating branch by natural continuation.
    Continue {
        #[arg(long, value_enum)]
        param: ParamArg,
        /// Index into the sorted bifurcation list.
        #[arg(long, default_value_t = 0)]
        from: usize,
        /// start:end:steps
        #[arg(long)]
        range: String,
    },
    /// Time-step the PDE from a perturbed homogeneous state.
    Simulate {
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        /// Comma-separated snapshot times.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        /// Amplitude of the random initial perturbation.
        #[arg(long, default_value_t = 1e-2)]
        amplitude: f64,
    },
    /// Finite-difference checks of the fixed-point map at a bifurcation point.
    FrechetCheck {
        #[arg(long, value_enum)]
        param: Option<ParamArg>,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    format: Option<Format>,
}

impl Ctx {
    fn path(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| self.cfg.output.dir.join(default))
    }

    fn format(&self, default: Format) -> Format {
        self.format.or(self.cfg.output.format).unwrap_or(default)
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => load_config(path)?,
        (None, Some(name)) => preset(name)?,
        (Some(path), Some(name)) => {
            let mut cfg = load_config(path)?;
            if cfg.preset.as_deref() != Some(name) {
                bail!("--preset {name} conflicts with the preset named in {}", path.display());
            }
            cfg.preset = Some(name.clone());
            cfg
        }
        (None, None) => bail!("--config or --preset is required"),
    };
    Ok(cfg)
}

fn write_records<T: CsvRecord + Serialize>(records: &[T], format: Format, path: &Path) -> Result<()> {
    emit::emit(records, format, path).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    emit::write_atomic(path, emit::to_json(value)?.as_bytes())?;
    Ok(())
}

fn default_param(system: &System) -> ParamKind {
    match system {
        System::Scalar(_) => ParamKind::ScalarAlpha,
        System::TwoSpecies(_) => ParamKind::Alpha1,
    }
}

fn pick_point(cfg: &RunConfig, kind: ParamKind, index: usize) -> Result<BifurcationPoint> {
    let catalog = catalog_for(kind, &cfg.system()?, &cfg.spectral()?)?;
    let n = catalog.points.len();
    catalog
        .points
        .into_iter()
        .nth(index)
        .ok_or_else(|| anyhow!("bifurcation index {index} out of range ({n} points)"))
}

fn parse_range(s: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("--range expects start:end:steps, got {s}");
    }
    Ok((parts[0].parse()?, parts[1].parse()?, parts[2].parse()?))
}

struct StateRow<'a> {
    x: f64,
    state: &'a GridState,
    j: usize,
}

impl CsvRecord for StateRow<'_> {
    fn header() -> Vec<&'static str> {
        vec!["x", "u1", "u2"]
    }

    fn fields(&self) -> Vec<Field> {
        let u2 = self.state.u2().map_or(f64::NAN, |u| u[self.j]);
        vec![Field::Num(self.x), Field::Num(self.state.u1()[self.j]), Field::Num(u2)]
    }
}

impl Serialize for StateRow<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("StateRow", 3)?;
        st.serialize_field("x", &self.x)?;
        st.serialize_field("u1", &self.state.u1()[self.j])?;
        st.serialize_field("u2", &self.state.u2().map(|u| u[self.j]))?;
        st.end()
    }
}

fn state_rows(state: &GridState) -> Vec<StateRow<'_>> {
    state
        .grid
        .nodes()
        .into_iter()
        .enumerate()
        .map(|(j, x)| StateRow { x, state, j })
        .collect()
}

/// Homogeneous state plus a seeded random combination of modes 1..=4.
fn random_start(cfg: &RunConfig, seed: u64, amplitude: f64) -> Result<GridState> {
    let grid = cfg.grid()?;
    let species = cfg.system()?.species();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = GridState::homogeneous(grid, species);
    for u in &mut state.components {
        for k in 1..=4 {
            let a = amplitude * rng.gen_range(-1.0..1.0);
            for (v, w) in u.iter_mut().zip(grid.mode(k)) {
                *v += a * w;
            }
        }
    }
    if state.min() <= 0.0 {
        bail!("perturbation amplitude {amplitude} makes the initial density non-positive");
    }
    Ok(state)
}

fn run(cli: &Cli) -> Result<Option<(PathBuf, RunConfig)>> {
    if let Command::Presets { action: PresetAction::List } = cli.command {
        for (name, about) in PRESETS {
            println!("{name:<20} {about}");
        }
        return Ok(None);
    }
    let mut ctx = Ctx {
        cfg: load(cli)?,
        out: cli.out.clone(),
        format: cli.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
    };

    let out = match &cli.command {
        Command::Spectrum { k_max } => {
            let spectral = ctx.cfg.spectral()?;
            let rows = spectrum(&ctx.cfg.system()?, &spectral, k_max.unwrap_or(spectral.k_max));
            let path = ctx.path("spectrum.csv");
            write_records(&rows, ctx.format(Format::Csv), &path)?;
            path
        }
        Command::StabilityRegion { gamma, samples } => {
            let summary = kernel_summary(&ctx.cfg.spectral()?, ctx.cfg.model.sigma)?;
            let g = gamma.or(ctx.cfg.params.gamma).unwrap_or(0.0);
            let rows = region_boundary(&summary, g, *samples)?;
            if rows.is_empty() {
                log::warn!("gamma = {g} exceeds the region; writing an empty boundary");
            }
            let path = ctx.path("region.csv");
            write_records(&rows, ctx.format(Format::Csv), &path)?;
            path
        }
        Command::Bifurcate { param } => {
            let catalog = catalog_for((*param).into(), &ctx.cfg.system()?, &ctx.cfg.spectral()?)?;
            for s in &catalog.skipped {
                log::info!("k = {} skipped: {:?}", s.k, s.reason);
            }
            let path = ctx.path("points.json");
            write_records(&catalog.points, ctx.format(Format::Json), &path)?;
            path
        }
        Command::Continue { param, from, range } => {
            let kind = ParamKind::from(*param);
            let (start, end, steps) = parse_range(range)?;
            let bp = pick_point(&ctx.cfg, kind, *from)?;
            let trace = trace_branch(
                &ctx.cfg.system()?,
                kind,
                &ctx.cfg.discrete()?,
                &bp,
                (start, end),
                steps,
                &ctx.cfg.solver_options(),
            )?;
            if let Some(d) = &trace.diagnostic {
                log::warn!("{d}");
            }
            let path = ctx.path("branch.csv");
            write_records(&trace.entries, ctx.format(Format::Csv), &path)?;
            path
        }
        Command::Simulate {
            t_end,
            dt,
            n,
            snapshots,
            amplitude,
        } => {
            if let Some(n) = n {
                ctx.cfg.model.n = *n;
                if ctx.cfg.model.k_max.is_some_and(|k| k >= n / 2) {
                    ctx.cfg.model.k_max = None;
                }
            }
            if let Some(t) = t_end {
                ctx.cfg.solver.t_end = *t;
            }
            if let Some(d) = dt {
                ctx.cfg.solver.dt = *d;
                ctx.cfg.solver.sample_dt = ctx.cfg.solver.sample_dt.max(*d);
            }
            ctx.cfg.validate()?;
            let mut opts = ctx.cfg.stepper_options();
            opts.snapshots = snapshots.clone();
            let u0 = random_start(&ctx.cfg, cli.seed, *amplitude)?;
            let traj = simulate(&u0, &ctx.cfg.system()?, &ctx.cfg.discrete()?, &opts)?;
            log::info!("outcome {:?} after {} substeps", traj.outcome, traj.substeps);
            let path = ctx.path("traj.csv");
            let format = ctx.format(Format::Csv);
            write_records::<Diagnostics>(&traj.samples, format, &path)?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            let ext = match format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            for (t, state) in &traj.snapshots {
                let p = dir.join(format!("state_t{}.{ext}", format_time(*t)));
                write_records(&state_rows(state), format, &p)?;
            }
            path
        }
        Command::FrechetCheck { param, point } => {
            let system = ctx.cfg.system()?;
            let kind = param.map(ParamKind::from).unwrap_or_else(|| default_param(&system));
            let bp = pick_point(&ctx.cfg, kind, *point)?;
            let probes = probe_suite(&bp, &system, &ctx.cfg.discrete()?)?;
            for p in &probes {
                log::info!("{}: rel error {:.3e}{}", p.label, p.rel_error, if p.flagged { " (flagged)" } else { "" });
            }
            let path = ctx.path("probes.json");
            write_json(&probes, &path)?;
            path
        }
        Command::Presets { .. } => unreachable!(),
    };
    Ok(Some((out, ctx.cfg)))
}

fn format_time(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}", t as i64)
    } else {
        format_real(t)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum { .. } => "spectrum",
        Command::StabilityRegion { .. } => "stability-region",
        Command::Bifurcate { .. } => "bifurcate",
        Command::Continue { .. } => "continue",
        Command::Simulate { .. } => "simulate",
        Command::FrechetCheck { .. } => "frechet-check",
        Command::Presets { .. } => "presets",
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let started = Instant::now();
    if let Some((out, cfg)) = run(&cli)? {
        let text = cfg.to_json()?;
        let meta = RunMeta {
            version: env!("CARGO_PKG_VERSION"),
            command: command_name(&cli.command).into(),
            config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        emit::write_meta(&out, &meta)?;
        println!("{}", out.display());
    }
    Ok(())
}
