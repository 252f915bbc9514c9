//! `generate`, `solve` and `report` as library calls.

use std::path::{Path, PathBuf};
use std::time::Instant;

use saa_conic::SolverSettings;
use saa_core::bigm::{branch_and_bound, brute_force, BnbSettings};
use saa_core::method::{MethodKind, MethodResult};
use saa_core::sca::{run_sca, ScaSettings, ScaVariant};
use saa_core::sdpr::solve_relaxation;
use saa_core::slicing::{certify_selection, slice, SliceOptions};
use saa_core::{assemble_multiperiod, benchmark_spec, CoreError, SystemFile};

use crate::record::{content_id, RunRecord};
use crate::report::{render, Format};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Usage errors and solver failures.
    pub const FAILURE: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const RECOVERY_FAILED: i32 = 3;
    pub const IO: i32 = 4;
}

pub const EPS_VAR: &str = "SAA_SOLVER_EPS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => exit::IO,
            CliError::Usage(_) => exit::FAILURE,
            CliError::Core(e) => match e {
                CoreError::Infeasible(_) | CoreError::InfeasibleSpec(_) => exit::INFEASIBLE,
                CoreError::RecoveryFailed(_) => exit::RECOVERY_FAILED,
                _ => exit::FAILURE,
            },
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// JSON of the `n`-node benchmark for `seed`.
pub fn generate(n: usize, seed: u64) -> Result<String, CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!("--nodes must be at least 2, got {n}")));
    }
    let spec = benchmark_spec(n, seed)?;
    let mut text = SystemFile::from_spec(&spec, Some(seed)).to_json()?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub rho: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub big_m: Option<f64>,
    pub max_nodes: Option<usize>,
    /// Solver tolerance; `None` uses each method's default.
    pub eps: Option<f64>,
}

impl SolveOptions {
    pub fn none() -> Self {
        Self {
            rho: None,
            tol: None,
            max_iter: None,
            big_m: None,
            max_nodes: None,
            eps: None,
        }
    }

    /// Reads `SAA_SOLVER_EPS` into `eps` when it is not set already.
    pub fn with_env(mut self) -> Result<Self, CliError> {
        if self.eps.is_none() {
            if let Ok(v) = std::env::var(EPS_VAR) {
                let e: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{EPS_VAR}={v} is not a number")))?;
                if !(e > 0.0) {
                    return Err(CliError::Usage(format!("{EPS_VAR} must be positive")));
                }
                self.eps = Some(e);
            }
        }
        Ok(self)
    }

    fn solver(&self, default: f64) -> SolverSettings {
        SolverSettings::with_tolerance(self.eps.unwrap_or(default))
    }
}

/// Runs `method` on a parsed system file; `text` is the file as read, for
/// the instance id.
pub fn solve_text(text: &str, path: &Path, method: MethodKind, opts: &SolveOptions) -> Result<RunRecord, CliError> {
    let file = SystemFile::from_json(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let spec = file.to_spec()?;
    let prob = assemble_multiperiod(&spec)?;
    let slice_opts = SliceOptions {
        solver: opts.solver(1e-8),
        ..SliceOptions::default()
    };
    let t0 = Instant::now();
    let mut gap = None;
    let (result, outcome): (MethodResult, _) = match method {
        MethodKind::Sdpr | MethodKind::Sdprn => {
            let r: MethodResult = solve_relaxation(&prob, method == MethodKind::Sdprn, &opts.solver(1e-7))?.into();
            let o = slice(&prob, &r.point.pi, &slice_opts)?;
            (r, o)
        }
        MethodKind::Sca1 | MethodKind::Sca2 => {
            let d = ScaSettings::default();
            let s = ScaSettings {
                rho: opts.rho.unwrap_or(d.rho),
                tol: opts.tol.unwrap_or(d.tol),
                max_iter: opts.max_iter.unwrap_or(d.max_iter),
                solver: opts.solver(1e-9),
                ..d
            };
            let v = if method == MethodKind::Sca1 {
                ScaVariant::Sca1
            } else {
                ScaVariant::Sca2
            };
            let (r, _) = run_sca(v, &prob, &s)?;
            let o = slice(&prob, &r.point.pi, &slice_opts)?;
            (r, o)
        }
        MethodKind::Bigm => {
            let d = BnbSettings::default();
            let s = BnbSettings {
                big_m: opts.big_m.unwrap_or(d.big_m),
                max_nodes: opts.max_nodes.unwrap_or(d.max_nodes),
                solver: opts.solver(1e-8),
                ..d
            };
            let b = branch_and_bound(&prob, &s)?;
            gap = Some(100.0 * b.gap);
            let o = certify_selection(&prob, &b.pi, &slice_opts)?;
            ((&b).into(), o)
        }
        MethodKind::Brute => {
            let b = brute_force(&prob, &opts.solver(1e-8))?;
            let o = certify_selection(&prob, &b.pi, &slice_opts)?;
            ((&b).into(), o)
        }
    };
    let mut rec = RunRecord::new(
        content_id(text.as_bytes()),
        file.seed,
        spec.n_nodes(),
        spec.periods(),
        &result,
        &outcome,
        t0.elapsed().as_secs_f64(),
    );
    rec.gap_percent = gap;
    Ok(rec)
}

pub fn solve_file(path: &Path, method: MethodKind, opts: &SolveOptions) -> Result<RunRecord, CliError> {
    solve_text(&read(path)?, path, method, opts)
}

/// One `(instance, method)` job and where its record goes.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub input: PathBuf,
    pub method: MethodKind,
    pub output: PathBuf,
}

/// Lays out jobs: a single pair writes to `out`; several pairs write
/// `<stem>_<method>.json` inside the directory `out`.
pub fn plan(inputs: &[PathBuf], methods: &[MethodKind], out: &Path) -> Vec<Job> {
    let single = inputs.len() * methods.len() == 1;
    let mut jobs = Vec::new();
    for input in inputs {
        for &method in methods {
            let output = if single {
                out.to_path_buf()
            } else {
                let stem = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                out.join(format!("{stem}_{method}.json"))
            };
            jobs.push(Job {
                input: input.clone(),
                method,
                output,
            });
        }
    }
    jobs
}

/// Runs the jobs on up to `workers` threads; results are in job order.
pub fn run_jobs(jobs: &[Job], opts: &SolveOptions, workers: usize) -> Vec<Result<RunRecord, CliError>> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<RunRecord, CliError>>>> =
        jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|sc| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            sc.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let res = solve_file(&job.input, job.method, opts).and_then(|rec| {
                    let text = rec.to_json().map_err(CoreError::from)?;
                    write(&job.output, &(text + "\n"))?;
                    Ok(rec)
                });
                *slots[i].lock().unwrap() = Some(res);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect()
}

pub fn load_records(paths: &[PathBuf]) -> Result<Vec<RunRecord>, CliError> {
    paths
        .iter()
        .map(|p| RunRecord::from_json(&read(p)?).map_err(|msg| CliError::Parse { path: p.clone(), msg }))
        .collect()
}

pub fn report(paths: &[PathBuf], format: Format, exact: bool) -> Result<String, CliError> {
    Ok(render(&load_records(paths)?, format, exact))
}
