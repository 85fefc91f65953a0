use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shallow_shell::harness::diagnostics::q2_csv;
use shallow_shell::harness::{self, StudyConfig};
use shallow_shell::{Error, Result};

#[derive(Parser)]
#[command(name = "shallow-shell", version, about = "Shallow-shell elasticity studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// study configuration (key = value lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory, overrides study.output
    #[arg(long)]
    out: Option<PathBuf>,
    /// overrides study.seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// closed-form Q2 against the stretch minimization
    Q2Table(Common),
    /// recovery energies over the thickness sweep
    RecoveryStudy(Common),
    /// 3D minimizers over the thickness sweep
    FullGammaStudy(Common),
    /// minimize the loaded limit functional
    #[command(name = "minimize-2d")]
    Minimize2d(Common),
    /// nearest rotations, rigidity probe and residual maps
    Diagnostics(Common),
    /// validate a configuration and print its canonical form
    CheckConfig(Common),
}

fn load(c: &Common) -> Result<StudyConfig> {
    let mut cfg = match &c.config {
        Some(p) => StudyConfig::from_file(p)?,
        None => StudyConfig::default(),
    };
    if let Some(o) = &c.out {
        cfg.output = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: PathBuf, body: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| harness::report::io_err(dir, e))?;
    }
    std::fs::write(&path, body).map_err(|e| harness::report::io_err(&path, e))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Q2Table(c) => {
            let cfg = load(&c)?;
            let rows = harness::q2_table(cfg.samples, cfg.seed)?;
            let worst = rows
                .iter()
                .map(|r| (r.closed_form - r.minimized).abs())
                .fold(0.0, f64::max);
            write(cfg.output.join("q2_table.csv"), q2_csv(&rows))?;
            println!("{} samples, max |closed form - minimum| = {worst:e}", rows.len());
            if worst > 1e-10 {
                return Err(Error::Invariant(format!("Q2 mismatch {worst:e}")));
            }
        }
        Command::RecoveryStudy(c) => {
            let cfg = load(&c)?;
            let report = harness::run_recovery_study(&cfg, c.verbose)?;
            report.write(&cfg.output, "recovery")?;
            print!("{}", report.to_csv());
        }
        Command::FullGammaStudy(c) => {
            let cfg = load(&c)?;
            let study = harness::run_full_gamma_study(&cfg, c.verbose)?;
            study.write(&cfg.output)?;
            print!("{}", study.details_csv());
        }
        Command::Minimize2d(c) => {
            let cfg = load(&c)?;
            let (_, e) = harness::run_minimize_2d(&cfg, &cfg.output, c.verbose)?;
            println!("min J0 = {e:e}");
        }
        Command::Diagnostics(c) => {
            let cfg = load(&c)?;
            let probe = harness::run_diagnostics(&cfg, &cfg.output)?;
            match probe.constant {
                Some(k) => println!("empirical rigidity constant {k:e}"),
                None => println!("empirical rigidity constant n/a"),
            }
        }
        Command::CheckConfig(c) => {
            let cfg = load(&c)?;
            print!("{}", cfg.echo());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
