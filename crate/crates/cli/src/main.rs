mod args;

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use gbsb::bench::{read_grid_csv, Cell, GridCsvWriter, SweepRunner};
use gbsb::chaos::write_scan_csv;
use gbsb::manifest::{without_vectors, Environment, GridKind, RunManifest, SweepSummary, TOOL, VERSION};
use gbsb::prelude::*;
use serde::Serialize;

use args::{BenchArgs, ChaosArgs, Cli, Command, CyclesArgs, GenArgs, InstanceArgs, SolveArgs, SweepArgs, TargetArgs};

/// A failed command. Usage failures exit with 2, runtime failures with 1.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_)
            | Error::InvalidInstance(_)
            | Error::InvalidGraph(_)
            | Error::Parse { .. }
            | Error::TooLarge { .. }
            | Error::Divisibility(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_pool(cli.workers).and_then(|()| dispatch(cli.command, cli.workers));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_pool(workers: Option<usize>) -> Outcome {
    match workers {
        Some(0) => Err(Failure::Usage("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string())),
        None => Ok(()),
    }
}

fn dispatch(command: Command, workers: Option<usize>) -> Outcome {
    match command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => sweep_cmd(a, workers),
        Command::Chaos(a) => chaos(a),
        Command::Cycles(a) => cycles(a),
        Command::Gen(a) => gen(a),
    }
}

fn read_file(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_instance(args: &InstanceArgs) -> Outcome<IsingInstance> {
    let with_path = |path: &Path, e: Error| Failure::Usage(format!("{}: {e}", path.display()));
    if let Some(path) = &args.gset {
        let graph = parse_gset(&read_file(path)?).map_err(|e| with_path(path, e))?;
        return Ok(maxcut_to_ising(&graph)?.with_label(file_label(path)));
    }
    let spec = args.instance.as_deref().expect("clap requires an instance");
    if let Some(rest) = spec.strip_prefix("dense:") {
        let (n, seed) = rest
            .split_once(':')
            .and_then(|(n, s)| Some((n.parse().ok()?, s.parse().ok()?)))
            .ok_or_else(|| Failure::Usage(format!("expected dense:N:SEED, got {spec:?}")))?;
        return Ok(gen_random_dense(n, seed)?);
    }
    let path = PathBuf::from(spec);
    let text = read_file(&path)?;
    if text.trim_start().starts_with('{') {
        IsingInstance::from_json(&text).map_err(|e| with_path(&path, e))
    } else {
        let graph = parse_gset(&text).map_err(|e| with_path(&path, e))?;
        Ok(maxcut_to_ising(&graph)?.with_label(file_label(&path)))
    }
}

fn file_label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Writes to `path`, or to stdout when there is none.
fn output(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(f) as Box<dyn Write>)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    let mut out = output(path)?;
    writeln!(out, "{text}").map_err(|e| Failure::Runtime(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Outcome<String> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

/// Energy threshold of the success target, if one was given.
fn energy_target(inst: &IsingInstance, target: &TargetArgs) -> Outcome<Option<f64>> {
    match (target.target_energy, target.target_cut) {
        (Some(e), _) => Ok(Some(e)),
        (None, Some(cut)) => {
            let w = inst.cut_weight().ok_or_else(|| {
                Failure::Usage("--target-cut needs a MAX-CUT instance".into())
            })?;
            Ok(Some((w - 2 * cut) as f64))
        }
        (None, None) => Ok(None),
    }
}

fn rescore_all(cells: &mut [Vec<Cell>], target: f64) -> Outcome {
    for cell in cells.iter_mut().flatten() {
        cell.stats = cell.rescore(target)?;
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Outcome {
    let inst = load_instance(&args.instance)?;
    let tuning = tune(&inst, args.solver.tune.into(), args.solver.d_t)?;
    let cfg = args.solver.config();
    let result = if args.batch == 1 {
        run(&inst, &cfg, &tuning)?
    } else {
        batch_best_of(&inst, &cfg, &tuning, args.batch, cfg.seed)?
    };
    let manifest = RunManifest::new(&result, inst.label(), args.batch, args.rle);
    emit(args.out.as_deref(), &manifest.to_json()?)
}

#[derive(Serialize)]
struct BenchReport {
    tool: &'static str,
    version: &'static str,
    instance: Option<String>,
    master_seed: u64,
    config: SolverConfig,
    tuning: TuningResult,
    target_energy: f64,
    target_cut: Option<i64>,
    target_from_runs: bool,
    stats: SuccessStats,
    mean_energy: f64,
    best_energy: f64,
    /// Mean seconds per run.
    t_com: f64,
    /// `None` when no run reached the target.
    tts: Option<TtsResult>,
}

fn bench(args: BenchArgs) -> Outcome {
    let inst = load_instance(&args.instance)?;
    let tuning = tune(&inst, args.solver.tune.into(), args.solver.d_t)?;
    let cfg = args.solver.config();
    let given = energy_target(&inst, &args.target)?;
    let mut grid = sweep(&inst, &[cfg.steps], &[cfg.a], args.reps, &cfg, &tuning, given.unwrap_or(f64::NEG_INFINITY))?;
    let target = given.unwrap_or_else(|| grid.best_energy());
    rescore_all(&mut grid.cells, target)?;
    let cell = grid.cells.swap_remove(0).swap_remove(0);
    let tts = match time_to_solution(cell.mean_wall_time, &cell.stats) {
        Ok(t) => Some(t),
        Err(Error::ZeroSuccess) => None,
        Err(e) => return Err(e.into()),
    };
    let report = BenchReport {
        tool: TOOL,
        version: VERSION,
        instance: inst.label().map(str::to_owned),
        master_seed: cfg.seed,
        config: cfg,
        tuning: without_vectors(&tuning),
        target_energy: target,
        target_cut: inst.cut_from_energy(target),
        target_from_runs: given.is_none(),
        stats: cell.stats,
        mean_energy: cell.mean_energy,
        best_energy: cell.best_energy,
        t_com: cell.mean_wall_time,
        tts,
    };
    emit(args.out.as_deref(), &to_json(&report)?)
}

fn sweep_cmd(args: SweepArgs, workers: Option<usize>) -> Outcome {
    let inst = load_instance(&args.instance)?;
    let tuning = tune(&inst, args.solver.tune.into(), args.solver.d_t)?;
    let cfg = args.solver.config();
    let given = energy_target(&inst, &args.target)?;
    let dt_mode = !args.dt_grid.is_empty();
    if dt_mode && (!args.m_grid.is_empty() || args.a_grid.is_some()) {
        return Err(Failure::Usage("--Dt-grid/--tM-grid cannot be combined with --M-grid/--A-grid".into()));
    }
    if args.resume && (given.is_none() || dt_mode) {
        return Err(Failure::Usage("--resume needs an explicit target and an (M, A) grid".into()));
    }
    let m_grid = if args.m_grid.is_empty() { vec![cfg.steps] } else { args.m_grid.clone() };
    let a_grid = args.a_grid.clone().map_or_else(|| vec![cfg.a], |g| g.0);

    let mut done = Default::default();
    let mut header = true;
    if let (true, Some(path)) = (args.resume, &args.csv) {
        if path.exists() {
            let text = read_file(path)?;
            done = read_grid_csv(&text, &m_grid, &a_grid, given.unwrap(), cfg.dt.unwrap_or(tuning.dt))
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            header = text.trim().is_empty();
        }
    }
    // Cells stream to the CSV as they finish when the target is known up front.
    let mut stream = match (&args.csv, given) {
        (Some(path), Some(_)) => {
            let file = OpenOptions::new()
                .create(true)
                .append(args.resume)
                .write(true)
                .truncate(!args.resume)
                .open(path)
                .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            Some(GridCsvWriter::new(file, header)?)
        }
        _ => None,
    };
    let resumed: Vec<(usize, usize)> = done.keys().copied().collect();
    let mut write_err = None;
    let mut runner = SweepRunner::new().resume_from(done).on_cell(|i, j, cell| {
        if let Some(w) = stream.as_mut() {
            if !resumed.contains(&(i, j)) {
                if let Err(e) = w.write_cell(cell) {
                    write_err.get_or_insert(e);
                }
            }
        }
    });
    if let Some(w) = workers {
        runner = runner.with_workers(w);
    }
    let placeholder = given.unwrap_or(f64::NEG_INFINITY);
    let mut grid = if dt_mode {
        let g = runner.dt_sweep(&inst, &args.dt_grid, &args.tm_grid, cfg.a, args.reps, &cfg, &tuning, placeholder)?;
        GridKind::DtTm(g)
    } else {
        GridKind::MA(runner.sweep(&inst, &m_grid, &a_grid, args.reps, &cfg, &tuning, placeholder)?)
    };
    drop(runner);
    if let Some(e) = write_err {
        return Err(Failure::Runtime(e.to_string()));
    }

    let (cells, target) = match &mut grid {
        GridKind::MA(g) => {
            g.target = given.unwrap_or_else(|| g.best_energy());
            (&mut g.cells, g.target)
        }
        GridKind::DtTm(g) => {
            g.target = given.unwrap_or_else(|| g.cells.iter().flatten().map(|c| c.best_energy).fold(f64::INFINITY, f64::min));
            (&mut g.cells, g.target)
        }
    };
    if given.is_none() {
        rescore_all(cells, target)?;
        if let Some(path) = &args.csv {
            let file = File::create(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            let mut w = GridCsvWriter::new(file, true)?;
            for cell in cells.iter().flatten() {
                w.write_cell(cell)?;
            }
        }
    }

    let summary = SweepSummary::new(grid, args.reps, &tuning, Environment::capture(&cfg, workers));
    let json = summary.to_json()?;
    match (&args.json, &args.csv) {
        (Some(path), _) => emit(Some(path), &json),
        // With no file outputs the summary goes to stdout.
        (None, None) => emit(None, &json),
        (None, Some(_)) => Ok(()),
    }
}

fn chaos(args: ChaosArgs) -> Outcome {
    let inst = load_instance(&args.instance)?;
    let tuning = tune(&inst, args.solver.tune.into(), args.solver.d_t)?;
    let rows = chaos_scan(&inst, &args.a_grid.0, args.reps, &args.solver.config(), &tuning)?;
    let out = output(args.out.as_deref())?;
    write_scan_csv(&rows, out)?;
    Ok(())
}

fn cycles(args: CyclesArgs) -> Outcome {
    let mut model = cycle_count(args.n, args.pr, args.pc, args.pb, args.latency)?;
    println!("{}", model.n_cyc);
    if let Some(mhz) = args.clock_mhz {
        if !(mhz > 0.0) {
            return Err(Failure::Usage(format!("--clock-mhz must be positive, got {mhz}")));
        }
        model = model.with_clock(mhz * 1e6);
        println!("{:.6} us per step", model.step_time.unwrap_or(f64::NAN) * 1e6);
    }
    Ok(())
}

fn gen(args: GenArgs) -> Outcome {
    let inst = gen_random_dense(args.n, args.seed)?;
    emit(args.out.as_deref(), &inst.to_json())
}
