use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use grf_core::chebyshev::{fit, select_order, DEFAULT_ORDER_CAP, DEFAULT_RATIO_TOL};
use grf_core::cholesky::Ordering;
use grf_core::experiments::{
    parse_config, run_cheb_error_study, run_hyperboloid_covariance_study, run_sphere_covariance_study,
    run_truncation_study, ChebErrorConfig, ConvergenceReport, HyperCovConfig, SphereCovConfig, TruncationConfig,
};
use grf_core::fem::{assemble_mass, assemble_stiffness, lumped_mass};
use grf_core::mesh::{hyperboloid, icosphere, load_obj, load_off, save_off, TriangleMesh};
use grf_core::sampler::{sample_batch, write_sample_csv, write_samples_binary, BatchMetadata, RNG_DESCRIPTION};
use grf_core::sphere::{covariance_series, required_lmax, truncation_error_exact, COVARIANCE_TAIL_TOL};
use grf_core::{GalerkinOperator, MassMode, PowerSpectralDensity};
use log::info;

#[derive(Parser)]
#[command(name = "grf", version, about = "Gaussian random fields on triangulated surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Draw field samples on a mesh.
    Sample(SampleArgs),
    /// Run a convergence study and write report.csv / report.json.
    Study(StudyArgs),
    /// Exact sphere oracles.
    #[command(subcommand)]
    Sphere(SphereCommand),
    /// Finite element matrices.
    #[command(subcommand)]
    Fem(FemCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Icosphere,
    Hyperboloid,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write an icosphere or hyperboloid as OFF.
    Gen {
        #[arg(long, value_enum)]
        shape: Shape,
        #[arg(long)]
        level: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print counts, area, validation and content hash.
    Info {
        #[arg(long)]
        mesh: PathBuf,
    },
}

#[derive(Args)]
struct PsdArgs {
    /// Matérn smoothness (with --range).
    #[arg(long, requires = "range", conflicts_with_all = ["kappa2", "beta"])]
    nu: Option<f64>,
    /// Matérn practical range.
    #[arg(long, requires = "nu")]
    range: Option<f64>,
    /// κ² (with --beta).
    #[arg(long, requires = "beta")]
    kappa2: Option<f64>,
    /// Exponent β of (κ² + λ)^{-β}.
    #[arg(long, requires = "kappa2")]
    beta: Option<f64>,
}

impl PsdArgs {
    fn build(&self) -> Result<PowerSpectralDensity> {
        Ok(match (self.nu, self.range, self.kappa2, self.beta) {
            (Some(nu), Some(range), None, None) => PowerSpectralDensity::matern_from_range(nu, range)?,
            (None, None, Some(k2), Some(beta)) => PowerSpectralDensity::matern_kappa2(k2, beta)?,
            _ => bail!("give either --nu and --range, or --kappa2 and --beta"),
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleFormat {
    Csv,
    Binary,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[command(flatten)]
    psd: PsdArgs,
    /// Use the lumped (diagonal) mass matrix.
    #[arg(long)]
    lumped: bool,
    /// Reverse Cuthill–McKee ordering for the Cholesky factor.
    #[arg(long)]
    rcm: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Fixed Chebyshev order.
    #[arg(long, conflicts_with = "cheb_tol")]
    cheb_order: Option<usize>,
    /// Coefficient-ratio criterion for the order.
    #[arg(long)]
    cheb_tol: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ORDER_CAP)]
    cheb_cap: usize,
    /// Output file (binary, or CSV with --count 1) or directory (CSV with several samples).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SampleFormat::Csv)]
    format: SampleFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    Trunc,
    Cheb,
    SphereCov,
    HyperCov,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(value_enum)]
    kind: StudyKind,
    /// JSON configuration; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SphereCommand {
    /// Exact covariance C(θ) at the angles listed in a file.
    Cov {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        range: f64,
        /// Angles in radians, separated by whitespace, commas or newlines.
        #[arg(long)]
        thetas: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact truncation error at the given mode counts.
    TruncError {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        range: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,50000,100000")]
        orders: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FemCommand {
    /// Write mass.mtx, stiffness.mtx and lumped_mass.mtx (MatrixMarket).
    Export {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let mesh = match ext.as_str() {
        "off" => load_off(path),
        "obj" => load_obj(path),
        _ => bail!("unsupported mesh extension `{ext}` (use .off or .obj)"),
    }
    .with_context(|| format!("loading {}", path.display()))?;
    Ok(mesh)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn mesh_command(cmd: MeshCommand) -> Result<()> {
    match cmd {
        MeshCommand::Gen { shape, level, out } => {
            let mesh = match shape {
                Shape::Icosphere => icosphere(level)?,
                Shape::Hyperboloid => hyperboloid(level)?,
            };
            save_off(&mesh, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{}: {} vertices, {} triangles",
                out.display(),
                mesh.vertex_count(),
                mesh.triangle_count()
            );
        }
        MeshCommand::Info { mesh } => {
            let m = load_mesh(&mesh)?;
            let report = m.validate();
            println!("vertices: {}", m.vertex_count());
            println!("triangles: {}", m.triangle_count());
            println!("surface area: {}", m.surface_area());
            println!("euler characteristic: {}", m.euler_characteristic());
            println!("closed: {}", report.is_closed());
            println!("valid: {}", report.is_valid());
            println!("hash: {}", m.content_hash());
        }
    }
    Ok(())
}

fn sample_command(args: SampleArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let psd = args.psd.build()?;
    let mode = if args.lumped { MassMode::Lumped } else { MassMode::Cholesky };
    let ordering = if args.rcm { Ordering::ReverseCuthillMcKee } else { Ordering::Natural };
    let op = GalerkinOperator::from_mesh(&mesh, mode, ordering)?;
    let order = match args.cheb_order {
        Some(k) => k,
        None => {
            let tol = args.cheb_tol.unwrap_or(DEFAULT_RATIO_TOL);
            select_order(&psd, op.lambda_max(), tol, args.cheb_cap)?.order
        }
    };
    info!("n = {}, λmax = {}, K = {order}", op.n(), op.lambda_max());
    let series = fit(&psd, op.lambda_max(), order)?;
    let samples = sample_batch(&op, &series, args.count, args.seed, args.workers)?;
    let hash = mesh.content_hash();
    let format = match args.format {
        SampleFormat::Csv => "csv",
        SampleFormat::Binary => "binary_f64_le_row_major",
    };
    let metadata = BatchMetadata {
        seed: args.seed,
        count: args.count,
        n: op.n(),
        order,
        lambda_max: op.lambda_max(),
        mass_mode: mode,
        psd: psd.params(),
        mesh_hash: hash,
        rng: RNG_DESCRIPTION,
        format: format.to_string(),
    };
    let json = serde_json::to_string_pretty(&metadata)? + "\n";
    match args.format {
        SampleFormat::Binary => {
            write_samples_binary(&samples, File::create(&args.out)?)?;
            fs::write(sidecar(&args.out), json)?;
        }
        SampleFormat::Csv if args.count == 1 => {
            write_sample_csv(&mesh, &samples[0], File::create(&args.out)?)?;
            fs::write(sidecar(&args.out), json)?;
        }
        SampleFormat::Csv => {
            fs::create_dir_all(&args.out)?;
            let width = (args.count - 1).to_string().len();
            for (i, s) in samples.iter().enumerate() {
                let path = args.out.join(format!("sample_{i:0width$}.csv"));
                write_sample_csv(&mesh, s, File::create(path)?)?;
            }
            fs::write(args.out.join("metadata.json"), json)?;
        }
    }
    println!("wrote {} sample(s) to {}", args.count, args.out.display());
    Ok(())
}

fn load_config<T>(path: Option<&Path>) -> Result<T>
where
    T: Default + serde::Serialize + serde::de::DeserializeOwned,
{
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(parse_config(&text)?)
        }
        None => Ok(T::default()),
    }
}

fn study_command(args: StudyArgs) -> Result<()> {
    let config = args.config.as_deref();
    let report: ConvergenceReport = match args.kind {
        StudyKind::Trunc => run_truncation_study(&load_config::<TruncationConfig>(config)?)?,
        StudyKind::Cheb => run_cheb_error_study(&load_config::<ChebErrorConfig>(config)?)?,
        StudyKind::SphereCov => run_sphere_covariance_study(&load_config::<SphereCovConfig>(config)?)?,
        StudyKind::HyperCov => run_hyperboloid_covariance_study(&load_config::<HyperCovConfig>(config)?)?,
    };
    report.save(&args.out)?;
    info!("wall clock {:.2} s (recorded in report.json only)", report.wall_clock_seconds);
    match report.fit {
        Some(f) => println!(
            "{}: slope {:.4} ± {:.4} (R² {:.4}), expected {}, {}",
            report.study,
            f.slope,
            f.std_error,
            f.r_squared,
            report
                .expected_slope
                .map(|s| format!("{s} ± {}", report.tolerance.unwrap_or(0.0)))
                .unwrap_or_else(|| "n/a".into()),
            if report.passed { "PASS" } else { "FAIL" }
        ),
        None => println!("{}: no fit ({})", report.study, report.notes.join("; ")),
    }
    Ok(())
}

fn parse_angles(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad angle `{t}`")))
        .collect()
}

fn sphere_command(cmd: SphereCommand) -> Result<()> {
    match cmd {
        SphereCommand::Cov { nu, range, thetas, out } => {
            let psd = PowerSpectralDensity::matern_from_range(nu, range)?;
            let angles = parse_angles(&fs::read_to_string(&thetas)?)?;
            if let Some(t) = angles.iter().find(|t| !(0.0..=std::f64::consts::PI).contains(*t)) {
                bail!("angle {t} outside [0, π]");
            }
            let l_max = required_lmax(&psd, COVARIANCE_TAIL_TOL);
            info!("Legendre series to degree {l_max}");
            let values = covariance_series(&angles, &psd, l_max)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "theta,covariance")?;
            for (t, c) in angles.iter().zip(values) {
                writeln!(w, "{t},{c:e}")?;
            }
            w.flush()?;
        }
        SphereCommand::TruncError { nu, range, orders, out } => {
            let psd = PowerSpectralDensity::matern_from_range(nu, range)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "n,error")?;
            for n in orders {
                writeln!(w, "{n},{:e}", truncation_error_exact(n, &psd))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn fem_command(cmd: FemCommand) -> Result<()> {
    let FemCommand::Export { mesh, out_dir } = cmd;
    let m = load_mesh(&mesh)?;
    fs::create_dir_all(&out_dir)?;
    for (name, matrix) in [
        ("mass.mtx", assemble_mass(&m)?),
        ("stiffness.mtx", assemble_stiffness(&m)?),
        ("lumped_mass.mtx", lumped_mass(&m)?),
    ] {
        matrix.write_matrix_market(File::create(out_dir.join(name))?)?;
    }
    println!("wrote mass.mtx, stiffness.mtx, lumped_mass.mtx to {}", out_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Mesh(cmd) => mesh_command(cmd),
        Command::Sample(args) => sample_command(args),
        Command::Study(args) => study_command(args),
        Command::Sphere(cmd) => sphere_command(cmd),
        Command::Fem(cmd) => fem_command(cmd),
    }
}
