use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use saa_cli::run::{self, exit, CliError, SolveOptions};
use saa_cli::Format;
use saa_core::method::MethodKind;

#[derive(Parser)]
#[command(name = "saa", version, about = "Actuator selection for uncertain linear systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sdpr,
    Sdprn,
    Sca1,
    Sca2,
    Bigm,
    Brute,
}

impl From<Method> for MethodKind {
    fn from(m: Method) -> Self {
        match m {
            Method::Sdpr => MethodKind::Sdpr,
            Method::Sdprn => MethodKind::Sdprn,
            Method::Sca1 => MethodKind::Sca1,
            Method::Sca2 => MethodKind::Sca2,
            Method::Bigm => MethodKind::Bigm,
            Method::Brute => MethodKind::Brute,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Markdown,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a random dynamic-network benchmark as a JSON system file.
    Generate {
        /// Number of nodes (two states and one input each).
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        nodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// System file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one or more methods on one or more system files.
    Solve {
        /// System files.
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Comma-separated methods.
        #[arg(long, required = true, value_delimiter = ',')]
        method: Vec<Method>,
        /// Proximal weight (SCA).
        #[arg(long)]
        rho: Option<f64>,
        /// Stopping tolerance on subproblem values (SCA).
        #[arg(long)]
        tol: Option<f64>,
        /// Iteration cap (SCA).
        #[arg(long)]
        max_iter: Option<usize>,
        /// Big-M constant (bigm).
        #[arg(long)]
        big_m: Option<f64>,
        /// Node cap (bigm).
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Parallel (instance, method) jobs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Record file, or a directory when several jobs run.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate run records.
    Report {
        /// Run records.
        #[arg(long = "in", num_args = 0..)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        /// Full-precision values instead of three decimals.
        #[arg(long)]
        exact: bool,
        /// Output file (standard output when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::FAILURE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Generate { nodes, seed, out } => run::write(&out, &run::generate(nodes as usize, seed)?),
        Cmd::Solve {
            input,
            method,
            rho,
            tol,
            max_iter,
            big_m,
            max_nodes,
            jobs,
            out,
        } => {
            let opts = SolveOptions {
                rho,
                tol,
                max_iter,
                big_m,
                max_nodes,
                eps: None,
            }
            .with_env()?;
            let methods: Vec<MethodKind> = method.into_iter().map(Into::into).collect();
            let plan = run::plan(&input, &methods, &out);
            if plan.len() > 1 {
                std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
                    path: out.clone(),
                    source,
                })?;
            }
            let mut first_err = None;
            for (job, res) in plan.iter().zip(run::run_jobs(&plan, &opts, jobs)) {
                match res {
                    Ok(r) => eprintln!(
                        "{} {}: bound {:.6} ({:?}), f_final {:.6}, {} activated -> {}",
                        job.input.display(),
                        job.method,
                        r.bound.value,
                        r.bound.direction,
                        r.outcome.f_final,
                        r.outcome.activated,
                        job.output.display()
                    ),
                    Err(e) => {
                        eprintln!("{} {}: {e}", job.input.display(), job.method);
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Cmd::Report {
            input,
            format,
            exact,
            out,
        } => {
            let f = match format {
                TableFormat::Csv => Format::Csv,
                TableFormat::Markdown => Format::Markdown,
            };
            let text = run::report(&input, f, exact)?;
            match out {
                Some(p) => run::write(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}
