//! `qrgrad`: verification campaigns and file-level QR/LQ forward and backward
//! passes.
//!
//! Exit status: 0 when everything passed, 1 on a numerical failure (a failing
//! check or a rank-deficient input), 2 on usage or file-format errors.

mod campaign;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrgrad::gradcheck::{backward, forward_residuals, Factors};
use qrgrad::{Error, LqAdjoints, Matrix, Mode, QrAdjoints, Shape};

use campaign::{CampaignConfig, Check, Format, ModeSelection, DEFAULT_SHAPES};

#[derive(Debug, Parser)]
#[command(
    name = "qrgrad",
    version,
    about = "QR/LQ factorization gradients and their numerical verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a verification campaign (the default when no command is given).
    Check(CheckArgs),
    /// Factorize a matrix file and write the factors.
    Factor(FactorArgs),
    /// Compute the gradient of A from adjoint files.
    Backward(BackwardArgs),
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeSelection,
    /// Comma-separated shapes such as `5x3,3x5`.
    #[arg(long = "shape", value_delimiter = ',', value_parser = parse_shape)]
    shapes: Vec<Shape>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = qrgrad::gradcheck::DEFAULT_TOL)]
    tol: f64,
    /// Comma-separated subset of grad,equiv,duality,forward.
    #[arg(long, value_enum, value_delimiter = ',')]
    checks: Vec<Check>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

impl Default for CheckArgs {
    fn default() -> Self {
        CheckArgs {
            mode: ModeSelection::Both,
            shapes: Vec::new(),
            trials: 20,
            seed: 0,
            tol: qrgrad::gradcheck::DEFAULT_TOL,
            checks: Vec::new(),
            output: None,
            format: Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Decomposition {
    Qr,
    Lq,
}

impl From<Decomposition> for Mode {
    fn from(d: Decomposition) -> Mode {
        match d {
            Decomposition::Qr => Mode::Qr,
            Decomposition::Lq => Mode::Lq,
        }
    }
}

#[derive(Debug, Args)]
struct FactorArgs {
    /// Matrix file to factorize.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "qr")]
    mode: Decomposition,
    /// Output prefix; writes `<prefix>.q` and `<prefix>.r` (or `.l`).
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BackwardArgs {
    /// Input matrix A.
    a: PathBuf,
    /// Adjoint of the orthogonal factor Q.
    q_bar: PathBuf,
    /// Adjoint of the triangular factor (R for QR, L for LQ).
    r_bar: PathBuf,
    #[arg(long, value_enum, default_value = "qr")]
    mode: Decomposition,
    /// File to write the gradient of A to.
    #[arg(long)]
    output: PathBuf,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse::<Shape>().map_err(|e| e.to_string())
}

/// A failure mapped onto the exit-status contract.
enum Failure {
    Numerical(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::ShapeMismatch { .. } | Error::InvalidDimension(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let command = cli.command.unwrap_or(Command::Check(CheckArgs::default()));
    let outcome = with_thread_pool(|| match command {
        Command::Check(args) => cmd_check(args),
        Command::Factor(args) => cmd_factor(args),
        Command::Backward(args) => cmd_backward(args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Runs `f` on a pool capped by `QRGRAD_THREADS` (0 or unset: rayon default).
fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var("QRGRAD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build thread pool ({e}), using the global pool");
            f()
        }
    }
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let shapes = if args.shapes.is_empty() {
        DEFAULT_SHAPES
            .iter()
            .map(|s| s.parse().expect("default shapes are valid"))
            .collect()
    } else {
        args.shapes
    };
    let checks = if args.checks.is_empty() {
        vec![Check::Grad, Check::Equiv, Check::Duality, Check::Forward]
    } else {
        args.checks
    };
    let config = CampaignConfig {
        mode: args.mode,
        shapes,
        trials: args.trials,
        seed: args.seed,
        tol: args.tol,
        checks,
        output: args.output,
        format: args.format,
    };
    config.validate().map_err(Failure::Usage)?;

    let report = campaign::run(&config).map_err(|e| Failure::Numerical(e.to_string()))?;
    let rendered = match config.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => report.render_text(),
    };
    match &config.output {
        Some(path) => fs::write(path, rendered)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(rendered.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Usage(format!("cannot write report: {e}")))?;
        }
    }

    if report.all_passed() {
        return Ok(());
    }
    for (family, reports) in report.families() {
        for r in reports.iter().filter(|r| !r.passed) {
            eprintln!(
                "FAILED {family} {} {} seed={} max_rel_error={:e} worst=({}, {}) analytic={:e} numeric={:e}",
                r.mode,
                r.shape,
                r.seed,
                r.max_rel_error,
                r.per_entry_worst.row,
                r.per_entry_worst.col,
                r.per_entry_worst.analytic,
                r.per_entry_worst.numeric
            );
        }
    }
    Err(Failure::Numerical("one or more checks failed".into()))
}

fn read_matrix(path: &Path) -> Result<Matrix, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Matrix::from_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_matrix(path: &Path, m: &Matrix) -> Result<(), Failure> {
    fs::write(path, m.to_text())
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn factorize(mode: Mode, a: &Matrix) -> Result<Factors, Failure> {
    Factors::compute(mode, a).map_err(|e| Failure::Numerical(e.to_string()))
}

fn cmd_factor(args: FactorArgs) -> Result<(), Failure> {
    let a = read_matrix(&args.input)?;
    let mode = Mode::from(args.mode);
    let f = factorize(mode, &a)?;
    let (recon, orth) = forward_residuals(&a, &f);
    match &f {
        Factors::Qr(f) => {
            write_matrix(&with_extension(&args.output, "q"), f.q())?;
            write_matrix(&with_extension(&args.output, "r"), f.r())?;
        }
        Factors::Lq(f) => {
            write_matrix(&with_extension(&args.output, "l"), f.l())?;
            write_matrix(&with_extension(&args.output, "q"), f.q())?;
        }
    }
    println!("reconstruction residual (relative): {recon:e}");
    println!("orthogonality residual: {orth:e}");
    Ok(())
}

fn expect_dims(what: &str, m: &Matrix, expected: (usize, usize)) -> Result<(), Failure> {
    if m.dims() == expected {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{what}: expected {}x{}, found {}x{}",
            expected.0,
            expected.1,
            m.rows(),
            m.cols()
        )))
    }
}

fn cmd_backward(args: BackwardArgs) -> Result<(), Failure> {
    let a = read_matrix(&args.a)?;
    let q_bar = read_matrix(&args.q_bar)?;
    let t_bar = read_matrix(&args.r_bar)?;
    let shape = Shape::new(a.rows(), a.cols())?;
    let (m, n, k) = (shape.m, shape.n, shape.k);
    let mode = Mode::from(args.mode);
    let g = match mode {
        Mode::Qr => {
            expect_dims("Q adjoint", &q_bar, (m, k))?;
            expect_dims("R adjoint", &t_bar, (k, n))?;
            qrgrad::gradcheck::Adjoints::Qr(QrAdjoints::new(q_bar, t_bar)?)
        }
        Mode::Lq => {
            expect_dims("Q adjoint", &q_bar, (k, n))?;
            expect_dims("L adjoint", &t_bar, (m, k))?;
            qrgrad::gradcheck::Adjoints::Lq(LqAdjoints::new(t_bar, q_bar)?)
        }
    };
    let f = factorize(mode, &a)?;
    let a_bar = backward(&a, &f, &g).map_err(|e| Failure::Numerical(e.to_string()))?;
    write_matrix(&args.output, &a_bar)?;
    println!("gradient Frobenius norm: {:e}", a_bar.frobenius_norm());
    Ok(())
}
