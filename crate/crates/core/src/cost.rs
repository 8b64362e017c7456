//! Analytical performance model: distributed execution time, per-worker
//! compute/communication totals, the R/C granularity ratio, and a
//! partition-size recommender.
//!
//! The predicted distributed time is
//! `dT = r * max(p_m) + (c/2) * (P^2 - sum(p_m^2))`: the longest worker's
//! compute time plus worst-case mesh communication, zero when one worker
//! holds everything. The published form omits the minus sign (reading as
//! `(c/2) * P^2 * sum(p_m^2)`, maximal communication for one worker); both
//! evaluations are exposed and the difference form is the default.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::index::Shape;
use crate::partition::{Assignment, PartitionGrid, WaveSchedule};

/// Inputs of the execution-time model.
#[derive(Debug, Clone)]
pub struct CostParams<'a> {
    /// `r`: time to compute one partition (hardware-calibrated or supplied).
    pub partition_cost: f64,
    /// `c`: time per communicated cell between distinct workers.
    pub comm_cost: f64,
    pub schedule: &'a WaveSchedule,
}

impl<'a> CostParams<'a> {
    pub fn new(partition_cost: f64, comm_cost: f64, schedule: &'a WaveSchedule) -> Self {
        CostParams {
            partition_cost,
            comm_cost,
            schedule,
        }
    }
}

/// Predicted distributed execution time for the schedule's allocation.
/// `corrected` selects the difference form; `false` evaluates the formula
/// verbatim as published.
pub fn predict_dt(params: &CostParams<'_>, corrected: bool) -> f64 {
    predict_dt_parts(
        params.partition_cost,
        params.comm_cost,
        params.schedule.grid().total_partitions(),
        &params.schedule.allocation(),
        corrected,
    )
}

/// Core of [`predict_dt`] over an explicit allocation `p_m`.
pub fn predict_dt_parts(
    partition_cost: f64,
    comm_cost: f64,
    total_partitions: u64,
    allocation: &[u64],
    corrected: bool,
) -> f64 {
    let max_pm = allocation.iter().copied().max().unwrap_or(0) as f64;
    let sum_sq: f64 = allocation.iter().map(|&p| (p as f64) * (p as f64)).sum();
    let total_sq = (total_partitions as f64) * (total_partitions as f64);
    let comm = if corrected {
        total_sq - sum_sq
    } else {
        total_sq * sum_sq
    };
    partition_cost * max_pm + (comm_cost / 2.0) * comm
}

/// Per-worker compute and communication totals and their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct GranularityReport {
    /// `R`: the busiest worker's total computation time, `max(r * p_m)`.
    pub compute_time: f64,
    /// `C`: the busiest worker's total communication time over cross-worker
    /// dependency edges.
    pub comm_time: f64,
    /// `R / C`; undefined when nothing is communicated.
    pub ratio: Option<f64>,
    pub predicted_dt: f64,
}

/// Computes the granularity report. Communication counts only dependency
/// edges whose endpoints live on different workers; each edge carries the
/// shared-face cell count between the two partitions.
pub fn granularity(params: &CostParams<'_>) -> GranularityReport {
    let schedule = params.schedule;
    let allocation = schedule.allocation();
    let compute_time = params.partition_cost * allocation.iter().copied().max().unwrap_or(0) as f64;
    let sent = cross_worker_comm_cells(schedule);
    let comm_time = params.comm_cost * sent.iter().copied().max().unwrap_or(0) as f64;
    let ratio = if comm_time > 0.0 {
        Some(compute_time / comm_time)
    } else {
        None
    };
    GranularityReport {
        compute_time,
        comm_time,
        ratio,
        predicted_dt: predict_dt(params, true),
    }
}

/// Cells each worker sends across worker boundaries, modelled from the
/// dependency edges: an edge with offset `d` carries the shared face of its
/// endpoints, one cell layer on moving axes times the common extent on the
/// others.
pub fn cross_worker_comm_cells(schedule: &WaveSchedule) -> Vec<u64> {
    let grid = schedule.grid();
    let mut sent = vec![0u64; schedule.workers()];
    for edge in grid.dependency_edges() {
        let from_worker = schedule.owner_of(&edge.from);
        if from_worker == schedule.owner_of(&edge.to) {
            continue;
        }
        let face: u64 = (0..grid.k())
            .map(|axis| {
                if edge.offset.component(axis) == 1 {
                    1
                } else {
                    grid.extent(&edge.from, axis) as u64
                }
            })
            .product();
        sent[from_worker] += face;
    }
    sent
}

/// Sweeps candidate partition sizes and returns the one minimising the
/// corrected predicted time, ties broken towards the smaller size.
///
/// Per-partition constants scale with the candidate: compute cost as
/// `r_unit * S^k * (2^k - 1)` (cells times neighbours checked) and
/// communication as `c_unit * (S^k - (S-1)^k)` (the boundary shell).
pub fn recommend_partition_size(
    shape: &Shape,
    workers: usize,
    r_unit: f64,
    c_unit: f64,
) -> Result<usize> {
    let sweep = sweep_partition_sizes(shape, workers, r_unit, c_unit)?;
    let best = sweep
        .iter()
        .min_by(|a, b| {
            a.dt_corrected
                .partial_cmp(&b.dt_corrected)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.partition_size.cmp(&b.partition_size))
        })
        .expect("candidate range checked non-empty");
    Ok(best.partition_size)
}

/// One row of a partition-size sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub partition_size: usize,
    pub total_partitions: u64,
    pub wave_count: usize,
    pub max_allocation: u64,
    pub dt_corrected: f64,
    pub dt_printed: f64,
}

/// Evaluates every candidate `S` in `[2, min rho_i]`.
pub fn sweep_partition_sizes(
    shape: &Shape,
    workers: usize,
    r_unit: f64,
    c_unit: f64,
) -> Result<Vec<SweepPoint>> {
    if workers < 1 {
        return Err(Error::Config(format!(
            "worker count {workers} must be at least 1"
        )));
    }
    let max_size = *shape.dims().iter().min().expect("shape has axes");
    if max_size < 2 {
        return Err(Error::Config("no candidate partition sizes".into()));
    }
    let k = shape.k() as i32;
    let mut out = Vec::with_capacity(max_size - 1);
    for partition_size in 2..=max_size {
        let grid = PartitionGrid::new(shape.clone(), partition_size)?;
        let schedule = WaveSchedule::new(grid, workers, Assignment::Block)?;
        let s = partition_size as f64;
        let r = r_unit * s.powi(k) * (2f64.powi(k) - 1.0);
        let c = c_unit * (s.powi(k) - (s - 1.0).powi(k));
        let params = CostParams::new(r, c, &schedule);
        let allocation = schedule.allocation();
        out.push(SweepPoint {
            partition_size,
            total_partitions: schedule.grid().total_partitions(),
            wave_count: schedule.grid().wave_count(),
            max_allocation: allocation.iter().copied().max().unwrap_or(0),
            dt_corrected: predict_dt(&params, true),
            dt_printed: predict_dt(&params, false),
        });
    }
    Ok(out)
}

/// Hardware-calibrated unit costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedUnits {
    /// Seconds per cell-neighbour operation in the scoring kernel.
    pub cell_op_seconds: f64,
    /// Seconds per cell moved through a worker mailbox.
    pub comm_cell_seconds: f64,
}

/// Micro-benchmarks the two unit costs on this machine: times a small
/// sequential scoring run per cell-neighbour operation, and mailbox
/// round-trips per payload cell.
pub fn calibrate_units() -> Result<CalibratedUnits> {
    use crate::sequences::{Alphabet, ScoringScheme, SequenceSet};

    let row = "ACGTACGTACGTACGTACGTACGTACGT";
    let seqs = SequenceSet::from_strs(&[row, row, row], Alphabet::Dna)?;
    let scheme = ScoringScheme::<i64>::unit();
    let shape = seqs.shape()?;
    let neighbor_ops = shape.cell_count() * ((1 << shape.k()) - 1) as u64;
    let started = Instant::now();
    let tensor = crate::dp::score_sequential(&seqs, &scheme)?;
    let cell_op_seconds = started.elapsed().as_secs_f64() / neighbor_ops as f64;
    std::hint::black_box(tensor.terminal_score());

    let (tx, rx) = std::sync::mpsc::channel::<crate::executor::DependencyMessage<i64>>();
    let rounds = 2_000u64;
    let payload = 64u64;
    let started = Instant::now();
    for wave in 0..rounds {
        let cells: Vec<(u64, i64, u32)> = (0..payload).map(|i| (i, i as i64, 1)).collect();
        tx.send(crate::executor::DependencyMessage {
            source: 1,
            destination: 0,
            wave: wave as usize,
            cells,
        })
        .expect("receiver alive");
        let message = rx.recv().expect("sender alive");
        std::hint::black_box(message.cells.len());
    }
    let comm_cell_seconds = started.elapsed().as_secs_f64() / (rounds * payload) as f64;
    Ok(CalibratedUnits {
        cell_op_seconds,
        comm_cell_seconds,
    })
}
