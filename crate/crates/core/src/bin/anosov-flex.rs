use std::path::PathBuf;
use std::process::ExitCode;

use anosov_flex::experiment::{parse_config_as, run, write_outputs, write_plot_dat, ExperimentError, Mode};
use clap::{ArgAction, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anosov-flex", version, about = "Shear perturbations of toral automorphisms: experiments")]
struct Cli {
    #[command(subcommand)]
    mode: Cmd,
    /// TOML file with [matrix], [params] and [run] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides [run] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the CSV tables.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    csv: bool,
    /// Also write a whitespace `.dat` table for gnuplot.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    Spectrum,
    Conditions,
    TheoremA,
    TheoremB,
    BoundLab,
    Partition,
    Continuity,
    Robustness,
}

impl From<Cmd> for Mode {
    fn from(c: Cmd) -> Mode {
        match c {
            Cmd::Spectrum => Mode::Spectrum,
            Cmd::Conditions => Mode::Conditions,
            Cmd::TheoremA => Mode::TheoremA,
            Cmd::TheoremB => Mode::TheoremB,
            Cmd::BoundLab => Mode::BoundLab,
            Cmd::Partition => Mode::Partition,
            Cmd::Continuity => Mode::Continuity,
            Cmd::Robustness => Mode::Robustness,
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, ExperimentError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ExperimentError::Validation("--config is required".into()))?;
    let mut cfg = parse_config_as(path, Some(cli.mode.into()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ExperimentError::Validation(format!("--threads: {e}")))?;
    }
    let report = run(&cfg)?;
    print!("{}", report.summary());
    if cli.csv {
        let files = write_outputs(&cli.out, &report, cli.plot)?;
        println!("wrote {} to {}", files.join(", "), cli.out.display());
    } else if cli.plot {
        std::fs::create_dir_all(&cli.out)?;
        let path = cli.out.join(format!("{}.dat", report.mode));
        write_plot_dat(std::fs::File::create(&path)?, &report)?;
        println!("wrote {}", path.display());
    }
    Ok(report.outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
