use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latticeflow::cli::{self, Job};
use latticeflow::funcspace::GridSpec;
use latticeflow::Error;

#[derive(Parser)]
#[command(
    name = "latticeflow",
    version,
    about = "Numerical checks for function lattices and positive operator semigroups"
)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a verification job and write report.json plus CSV tables.
    #[command(after_help = cli::csv_help())]
    Run {
        /// Job file (JSON object with a "prop" key and that check's inputs).
        #[arg(long)]
        job: Option<PathBuf>,
        /// Check id; overrides the job's "prop".
        #[arg(long)]
        prop: Option<String>,
        /// Grid override as "lo,hi,n".
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Tolerance schedule override as "e1,e2,...".
        #[arg(long)]
        eps: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List registered checks.
    ListProps,
}

fn build_job(
    job: Option<PathBuf>,
    prop: Option<String>,
    grid: Option<String>,
    eps: Option<String>,
) -> latticeflow::Result<Job> {
    let mut j = match job {
        Some(path) => Job::from_json(&std::fs::read_to_string(path)?)?,
        None => Job::for_prop(""),
    };
    if let Some(p) = prop {
        j.prop = Some(p);
    }
    if j.prop.as_deref().is_none_or(str::is_empty) {
        return Err(Error::Parse("no check given (use --job or --prop)".into()));
    }
    if let Some(g) = grid {
        j.grid = Some(g.parse::<GridSpec>()?);
    }
    if let Some(e) = eps {
        let list = e
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad eps value '{s}'"))))
            .collect::<latticeflow::Result<Vec<_>>>()?;
        j.eps = Some(list);
    }
    Ok(j)
}

fn init_threads() {
    if let Some(n) = std::env::var("LATTICEFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialisation only fails if something already built the pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.cmd {
        Cmd::ListProps => {
            print!("{}", cli::list_props());
            ExitCode::SUCCESS
        }
        Cmd::Run { job, prop, grid, eps, out } => {
            init_threads();
            let res = build_job(job, prop, grid, eps).and_then(|j| {
                let o = cli::run_job(&j)?;
                o.write(&out)?;
                Ok(o)
            });
            match res {
                Ok(o) => {
                    let verdict = if o.pass { "pass" } else { "fail" };
                    println!(
                        "{}: {verdict} ({})",
                        o.report["prop"].as_str().unwrap_or("?"),
                        out.join("report.json").display()
                    );
                    ExitCode::from(if o.pass { 0 } else { 1 })
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(cli::exit_code(&e) as u8)
                }
            }
        }
    }
}
