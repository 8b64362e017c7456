//! Command-line driver: align, plan, estimate, score, bench.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use wavealign_core::cost::{self, CostParams};
use wavealign_core::dp::{self, ScoreTensor};
use wavealign_core::executor::{self, ExecOptions, RunReport};
use wavealign_core::partition::{
    count_wave, enumerate_wave, Assignment, PartitionGrid, WaveSchedule,
};
use wavealign_core::sequences::{similarity_score, SchemeConfig};
use wavealign_core::{Alignment, Alphabet, IntScheme, Score, ScoringScheme, SequenceSet, Shape};

/// Environment variable overriding the default memory cap.
const MEMORY_CAP_ENV: &str = "WAVEALIGN_MEMORY_CAP";

#[derive(Parser)]
#[command(
    name = "wavealign",
    version,
    about = "Optimal multiple sequence alignment over a k-dimensional \
             dynamic-programming tensor, scored sequentially or by a \
             wavefront-partitioned worker pool"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align sequences and write the gapped FASTA result.
    Align(AlignArgs),
    /// Report the partition grid, per-wave widths and dependency edges.
    Plan(PlanArgs),
    /// Predict distributed execution time from the cost model.
    Estimate(EstimateArgs),
    /// Similarity-score an existing alignment.
    Score(ScoreArgs),
    /// Time the same instance across several worker counts.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sequential,
    Parallel,
}

#[derive(Parser)]
struct AlignArgs {
    /// Input FASTA file with at least two sequences.
    #[arg(long)]
    input: PathBuf,
    /// Residue alphabet: dna, protein or text.
    #[arg(long, default_value = "text")]
    alphabet: String,
    /// Scoring scheme config (key=value); defaults to match +1, mismatch 0,
    /// gap -1, gap/gap 0.
    #[arg(long)]
    scheme: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Sequential)]
    mode: Mode,
    /// Partition size S (parallel mode).
    #[arg(short = 'S', long)]
    partition_size: Option<usize>,
    /// Worker count V (parallel mode).
    #[arg(short = 'V', long)]
    workers: Option<usize>,
    /// Write the alignment as gapped FASTA here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the per-wave run report CSV here (parallel mode).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the protocol event log here (parallel mode).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Write the score tensor dump here.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Memory cap in bytes (K/M/G suffixes allowed); overrides the
    /// WAVEALIGN_MEMORY_CAP environment variable.
    #[arg(long)]
    memory_cap: Option<String>,
    /// Partition-to-worker assignment: block or round-robin.
    #[arg(long, default_value = "block")]
    assignment: String,
}

#[derive(Parser)]
struct PlanArgs {
    /// Tensor shape as comma-separated axis lengths, e.g. 9,9,9,9.
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    /// Derive the shape from a FASTA file instead.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    alphabet: String,
    /// Partition size S.
    #[arg(short = 'S', long)]
    partition_size: Option<usize>,
    /// Write the dependency edge list CSV here.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Emit the partitions-per-wave matrix over a dimensionality range
    /// instead of a grid summary.
    #[arg(long)]
    table1: bool,
    /// Dimensionality range for --table1, inclusive, e.g. 2..9.
    #[arg(long, default_value = "2..9")]
    k: String,
    /// Number of waves for --table1.
    #[arg(long, default_value_t = 9)]
    waves: usize,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Parser)]
struct EstimateArgs {
    /// Tensor shape as comma-separated axis lengths.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    #[arg(short = 'S', long)]
    partition_size: Option<usize>,
    #[arg(short = 'V', long, default_value_t = 1)]
    workers: usize,
    /// Time to compute one partition.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Time per communicated cell.
    #[arg(long, default_value_t = 0.01)]
    c: f64,
    /// Emit a CSV sweep over every candidate partition size.
    #[arg(long)]
    sweep: bool,
    /// Print the partition size minimising predicted time.
    #[arg(long)]
    recommend: bool,
    /// Per cell-neighbour compute cost used by --sweep/--recommend.
    #[arg(long, default_value_t = 1.0)]
    r_unit: f64,
    /// Per communicated cell cost used by --sweep/--recommend.
    #[arg(long, default_value_t = 1.0)]
    c_unit: f64,
    /// Micro-benchmark this machine for r/c units first.
    #[arg(long)]
    calibrate: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Parser)]
struct ScoreArgs {
    /// Aligned FASTA (equal-length gapped rows).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text")]
    alphabet: String,
    #[arg(long)]
    scheme: Option<PathBuf>,
}

#[derive(Parser)]
struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text")]
    alphabet: String,
    #[arg(long)]
    scheme: Option<PathBuf>,
    #[arg(short = 'S', long)]
    partition_size: usize,
    /// Worker counts to time, e.g. 1,2,4.
    #[arg(short = 'V', long, value_delimiter = ',')]
    workers: Vec<usize>,
    /// Timed runs per worker count; the median is reported.
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long)]
    memory_cap: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Align(args) => cmd_align(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Score(args) => cmd_score(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn parse_alphabet(name: &str) -> anyhow::Result<Alphabet> {
    Ok(name.parse::<Alphabet>()?)
}

fn read_sequences(path: &Path, alphabet: Alphabet) -> anyhow::Result<SequenceSet> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(SequenceSet::from_fasta_reader(
        BufReader::new(file),
        alphabet,
    )?)
}

fn parse_memory_cap(flag: Option<&str>) -> anyhow::Result<u64> {
    let text = match flag {
        Some(text) => text.to_string(),
        None => match std::env::var(MEMORY_CAP_ENV) {
            Ok(text) => text,
            Err(_) => return Ok(dp::DEFAULT_MEMORY_CAP),
        },
    };
    let text = text.trim();
    let (digits, factor) = match text.chars().last() {
        Some('K' | 'k') => (&text[..text.len() - 1], 1u64 << 10),
        Some('M' | 'm') => (&text[..text.len() - 1], 1u64 << 20),
        Some('G' | 'g') => (&text[..text.len() - 1], 1u64 << 30),
        _ => (text, 1),
    };
    let value: u64 = digits
        .trim()
        .parse()
        .map_err(|_| anyhow!("cannot parse memory cap {text:?}"))?;
    Ok(value * factor)
}

/// Loads the scheme config; `None` means the default unit scheme.
fn load_scheme_config(path: Option<&Path>) -> anyhow::Result<Option<SchemeConfig>> {
    match path {
        None => Ok(None),
        Some(path) => Ok(Some(SchemeConfig::from_file(path)?)),
    }
}

fn open_output(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn cmd_align(args: AlignArgs) -> anyhow::Result<()> {
    let alphabet = parse_alphabet(&args.alphabet)?;
    let seqs = read_sequences(&args.input, alphabet)?;
    let cap = parse_memory_cap(args.memory_cap.as_deref())?;
    match load_scheme_config(args.scheme.as_deref())? {
        None => align_with(&args, &seqs, IntScheme::unit(), cap),
        Some(config) if config.is_integral() => {
            align_with(&args, &seqs, config.build::<i64>()?, cap)
        }
        Some(config) => align_with(&args, &seqs, config.build::<f64>()?, cap),
    }
}

fn align_with<T: Score>(
    args: &AlignArgs,
    seqs: &SequenceSet,
    scheme: ScoringScheme<T>,
    memory_cap: u64,
) -> anyhow::Result<()> {
    let (tensor, alignment, report): (ScoreTensor<T>, Alignment, Option<RunReport<T>>) = match args
        .mode
    {
        Mode::Sequential => {
            let tensor = dp::score_sequential_with_cap(seqs, &scheme, memory_cap)?;
            let alignment = dp::traceback(&tensor, seqs)?;
            (tensor, alignment, None)
        }
        Mode::Parallel => {
            let partition_size = args
                .partition_size
                .ok_or_else(|| anyhow!("parallel mode requires --partition-size (-S)"))?;
            let workers = args
                .workers
                .ok_or_else(|| anyhow!("parallel mode requires --workers (-V)"))?;
            let opts = ExecOptions {
                assignment: args.assignment.parse::<Assignment>()?,
                memory_cap,
                record_events: args.events.is_some(),
            };
            let outcome = executor::run_parallel(seqs, &scheme, partition_size, workers, &opts)?;
            (outcome.tensor, outcome.alignment, Some(outcome.report))
        }
    };

    println!("terminal_score,{}", tensor.terminal_score());
    println!(
        "similarity_score,{}",
        similarity_score(&scheme, &alignment)?
    );

    if let Some(path) = &args.output {
        let ids: Vec<String> = seqs.ids().map(str::to_string).collect();
        std::fs::write(path, alignment.to_fasta(&ids))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.dump {
        let mut out = open_output(path)?;
        tensor.write_dump(&mut out, scheme.digest())?;
        out.flush()?;
    }
    if let Some(report) = &report {
        for warning in &report.warnings {
            eprintln!("warning: {warning}");
        }
        if let Some(path) = &args.report {
            let mut out = open_output(path)?;
            report.write_csv(&mut out)?;
            out.flush()?;
        }
        if let Some(path) = &args.events {
            let mut out = open_output(path)?;
            report.write_event_log(&mut out)?;
            out.flush()?;
        }
    } else if args.report.is_some() {
        bail!("--report requires --mode parallel");
    }
    Ok(())
}

fn plan_shape(args: &PlanArgs) -> anyhow::Result<Shape> {
    match (&args.shape, &args.input) {
        (Some(dims), _) => Ok(Shape::new(dims.clone())?),
        (None, Some(path)) => {
            let seqs = read_sequences(path, parse_alphabet(&args.alphabet)?)?;
            Ok(seqs.shape()?)
        }
        (None, None) => bail!("plan needs --shape or --input"),
    }
}

fn cmd_plan(args: PlanArgs) -> anyhow::Result<()> {
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(open_output(path)?),
        None => Box::new(std::io::stdout().lock()),
    };

    if args.table1 {
        let (k_lo, k_hi) = parse_range(&args.k)?;
        write!(out, "k")?;
        for wave in 0..args.waves {
            write!(out, ",w{wave}")?;
        }
        writeln!(out)?;
        for k in k_lo..=k_hi {
            write!(out, "{k}")?;
            for wave in 0..args.waves {
                write!(out, ",{}", count_wave(k, wave, None))?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        return Ok(());
    }

    let shape = plan_shape(&args)?;
    let partition_size = args
        .partition_size
        .ok_or_else(|| anyhow!("plan needs --partition-size (-S)"))?;
    let grid = PartitionGrid::new(shape, partition_size)?;
    writeln!(out, "P,{}", grid.total_partitions())?;
    writeln!(out, "t,{}", grid.wave_count())?;
    let widths: Vec<String> = (0..grid.wave_count())
        .map(|w| enumerate_wave(&grid, w).map(|ps| ps.len().to_string()))
        .collect::<Result<_, _>>()?;
    writeln!(out, "p_w,{}", widths.join(","))?;
    out.flush()?;

    if let Some(path) = &args.edges {
        let mut edges_out = open_output(path)?;
        writeln!(edges_out, "from,to,offset")?;
        for edge in grid.dependency_edges() {
            let fmt = |coords: &[usize]| {
                coords
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let offset: Vec<usize> = (0..grid.k()).map(|a| edge.offset.component(a)).collect();
            writeln!(
                edges_out,
                "{},{},{}",
                fmt(edge.from.grid_coords()),
                fmt(edge.to.grid_coords()),
                fmt(&offset)
            )?;
        }
        edges_out.flush()?;
    }
    Ok(())
}

fn parse_range(text: &str) -> anyhow::Result<(usize, usize)> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("range {text:?} must look like 2..9"))?;
    let lo: usize = lo.trim().parse().map_err(|_| anyhow!("bad range start"))?;
    let hi: usize = hi.trim().parse().map_err(|_| anyhow!("bad range end"))?;
    if lo < 2 || hi < lo {
        bail!("range {text:?} must satisfy 2 <= start <= end");
    }
    Ok((lo, hi))
}

fn cmd_estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let shape = Shape::new(args.shape.clone())?;
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(open_output(path)?),
        None => Box::new(std::io::stdout().lock()),
    };

    let (mut r_unit, mut c_unit) = (args.r_unit, args.c_unit);
    let mut plain_r = args.r;
    let mut plain_c = args.c;
    if args.calibrate {
        let units = cost::calibrate_units()?;
        r_unit = units.cell_op_seconds;
        c_unit = units.comm_cell_seconds;
        writeln!(out, "r_unit,{r_unit:e}")?;
        writeln!(out, "c_unit,{c_unit:e}")?;
        if let Some(partition_size) = args.partition_size {
            let k = shape.k() as i32;
            let s = partition_size as f64;
            plain_r = r_unit * s.powi(k) * (2f64.powi(k) - 1.0);
            plain_c = c_unit * (s.powi(k) - (s - 1.0).powi(k));
        }
    }

    if args.sweep {
        writeln!(out, "S,P,t,max_pm,dt_corrected,dt_printed")?;
        for point in cost::sweep_partition_sizes(&shape, args.workers, r_unit, c_unit)? {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                point.partition_size,
                point.total_partitions,
                point.wave_count,
                point.max_allocation,
                point.dt_corrected,
                point.dt_printed
            )?;
        }
    }
    if args.recommend {
        let best = cost::recommend_partition_size(&shape, args.workers, r_unit, c_unit)?;
        writeln!(out, "recommended_s,{best}")?;
    }
    if !args.sweep && !args.recommend {
        let partition_size = args.partition_size.ok_or_else(|| {
            anyhow!("estimate needs --partition-size (-S), --sweep or --recommend")
        })?;
        let grid = PartitionGrid::new(shape, partition_size)?;
        let schedule = WaveSchedule::new(grid, args.workers, Assignment::Block)?;
        let params = CostParams::new(plain_r, plain_c, &schedule);
        let report = cost::granularity(&params);
        let allocation = schedule.allocation();
        writeln!(out, "P,{}", schedule.grid().total_partitions())?;
        writeln!(out, "t,{}", schedule.grid().wave_count())?;
        writeln!(out, "max_pm,{}", allocation.iter().max().unwrap())?;
        writeln!(out, "dt_corrected,{}", cost::predict_dt(&params, true))?;
        writeln!(out, "dt_printed,{}", cost::predict_dt(&params, false))?;
        writeln!(out, "R,{}", report.compute_time)?;
        writeln!(out, "C,{}", report.comm_time)?;
        match report.ratio {
            Some(ratio) => writeln!(out, "granularity,{ratio}")?,
            None => writeln!(out, "granularity,undefined")?,
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> anyhow::Result<()> {
    let alphabet = parse_alphabet(&args.alphabet)?;
    let file =
        File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let alignment = Alignment::from_fasta_reader(BufReader::new(file), alphabet)?;
    match load_scheme_config(args.scheme.as_deref())? {
        None => println!(
            "similarity_score,{}",
            similarity_score(&IntScheme::unit(), &alignment)?
        ),
        Some(config) if config.is_integral() => println!(
            "similarity_score,{}",
            similarity_score(&config.build::<i64>()?, &alignment)?
        ),
        Some(config) => println!(
            "similarity_score,{}",
            similarity_score(&config.build::<f64>()?, &alignment)?
        ),
    }
    Ok(())
}

/// Instances below this cell count produce noisy timings.
const BENCH_SMALL_INSTANCE: u64 = 100_000;

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    if args.workers.is_empty() {
        bail!("bench needs at least one worker count, e.g. -V 1,2,4");
    }
    if args.runs == 0 {
        bail!("bench needs --runs >= 1");
    }
    let alphabet = parse_alphabet(&args.alphabet)?;
    let seqs = read_sequences(&args.input, alphabet)?;
    let cap = parse_memory_cap(args.memory_cap.as_deref())?;
    let config = load_scheme_config(args.scheme.as_deref())?;

    let shape = seqs.shape()?;
    if shape.cell_count() < BENCH_SMALL_INSTANCE {
        eprintln!(
            "warning: instance has only {} cells; timings will be noisy",
            shape.cell_count()
        );
    }

    let mut rows = Vec::new();
    for &workers in &args.workers {
        let opts = ExecOptions {
            memory_cap: cap,
            ..ExecOptions::default()
        };
        let mut elapsed = Vec::with_capacity(args.runs);
        let mut idle_workers = 0usize;
        for _ in 0..args.runs {
            let started = Instant::now();
            let per_worker_cells = match &config {
                None => {
                    let outcome = executor::run_parallel(
                        &seqs,
                        &IntScheme::unit(),
                        args.partition_size,
                        workers,
                        &opts,
                    )?;
                    outcome.report.per_worker_cells
                }
                Some(config) if config.is_integral() => {
                    let outcome = executor::run_parallel(
                        &seqs,
                        &config.build::<i64>()?,
                        args.partition_size,
                        workers,
                        &opts,
                    )?;
                    outcome.report.per_worker_cells
                }
                Some(config) => {
                    let outcome = executor::run_parallel(
                        &seqs,
                        &config.build::<f64>()?,
                        args.partition_size,
                        workers,
                        &opts,
                    )?;
                    outcome.report.per_worker_cells
                }
            };
            elapsed.push(started.elapsed().as_nanos());
            idle_workers = per_worker_cells.iter().filter(|&&c| c == 0).count();
        }
        elapsed.sort_unstable();
        let median = elapsed[elapsed.len() / 2];
        if idle_workers > 0 {
            eprintln!("note: {idle_workers} of {workers} workers computed no cells");
        }
        rows.push((workers, median));
    }

    let baseline = rows
        .iter()
        .find(|(v, _)| *v == 1)
        .map(|&(_, ns)| ns)
        .unwrap_or(rows[0].1);
    let mut out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(open_output(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "V,elapsed_ns,speedup")?;
    for (workers, ns) in rows {
        writeln!(out, "{},{},{}", workers, ns, baseline as f64 / ns as f64)?;
    }
    out.flush()?;
    Ok(())
}
