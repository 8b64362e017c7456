//! The peer-to-peer wavefront engine.
//!
//! `V` worker threads score their assigned partitions wave by wave. After
//! each wave the overlapping-cell scores crossing worker boundaries are
//! packed into one message per destination worker and exchanged in two
//! phases: clockwise (higher ranked workers send to lower ranked), a
//! synchronisation point, then anticlockwise. No two workers are ever in
//! two-way communication at the same time, which rules out exchange
//! deadlocks by construction.
//!
//! Received cells live in each worker's `OCin` store keyed by global flat
//! offset and are retained until the run ends: a successor partition can sit
//! up to `k` waves after the producer (one wave per differing grid axis).
//! Cells needed by a later partition on the *same* worker bypass messaging
//! through a local boundary store. Each global cell is computed by exactly
//! one owner partition; every other covering partition receives its value.
//!
//! Workers share no mutable score state; mailboxes (multi-producer
//! single-consumer channels) are the only communication, and a full-wave
//! barrier is the only global synchronisation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Barrier, Mutex};
use std::time::Instant;

use crate::dp::{self, ScoreTensor};
use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::partition::{Assignment, PartitionGrid, PartitionId, WaveSchedule};
use crate::scalar::Score;
use crate::sequences::{Alignment, ScoringScheme, SequenceSet};

/// Options for a parallel run.
#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub assignment: Assignment,
    pub memory_cap: u64,
    /// Record the protocol event log and message log in the report.
    pub record_events: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            assignment: Assignment::Block,
            memory_cap: dp::DEFAULT_MEMORY_CAP,
            record_events: false,
        }
    }
}

/// Scores of one partition's box. Low-face cells (local index 0 on an axis
/// with grid coordinate > 0) hold received values; all others are computed
/// locally.
#[derive(Debug, Clone)]
pub struct ScoreBlock<T: Score> {
    partition: PartitionId,
    origin: Vec<usize>,
    extents: Vec<usize>,
    cells: Vec<Option<(T, u32)>>,
}

impl<T: Score> ScoreBlock<T> {
    fn new(partition: PartitionId, origin: Vec<usize>, extents: Vec<usize>) -> Self {
        let len = extents.iter().product();
        ScoreBlock {
            partition,
            origin,
            extents,
            cells: vec![None; len],
        }
    }

    pub fn partition(&self) -> &PartitionId {
        &self.partition
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    /// True when the cell at `local` holds a received value.
    pub fn is_received(&self, local: &[usize]) -> bool {
        local
            .iter()
            .zip(self.partition.grid_coords())
            .any(|(&l, &g)| l == 0 && g > 0)
    }

    pub fn value(&self, local: &[usize]) -> Option<(T, u32)> {
        self.cells[self.local_flat(local)]
    }

    fn local_flat(&self, local: &[usize]) -> usize {
        let mut flat = 0usize;
        for (axis, &l) in local.iter().enumerate() {
            debug_assert!(l < self.extents[axis]);
            flat = flat * self.extents[axis] + l;
        }
        flat
    }

    #[cfg(test)]
    fn corrupt(&mut self, local: &[usize], value: T) {
        let flat = self.local_flat(local);
        let mv = self.cells[flat].map(|(_, m)| m).unwrap_or(0);
        self.cells[flat] = Some((value, mv));
    }
}

/// Overlapping-cell scores packed per (source worker, destination worker)
/// per wave: the outgoing/incoming dependency buffer contents.
#[derive(Debug, Clone)]
pub struct DependencyMessage<T: Score> {
    pub source: usize,
    pub destination: usize,
    pub wave: usize,
    /// `(global flat offset, score, move code)`, sorted by offset.
    pub cells: Vec<(u64, T, u32)>,
}

/// Exchange phase within one wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Higher ranked workers send to lower ranked.
    Clockwise,
    /// Lower ranked workers send to higher ranked.
    Anticlockwise,
}

impl Phase {
    fn label(&self) -> &'static str {
        match self {
            Phase::Clockwise => "cw",
            Phase::Anticlockwise => "acw",
        }
    }
}

/// One protocol event, recorded when [`ExecOptions::record_events`] is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub worker: usize,
    pub wave: usize,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    ComputeStart {
        partition: PartitionId,
    },
    ComputeEnd {
        partition: PartitionId,
        cells: u64,
    },
    Send {
        phase: Phase,
        destination: usize,
        cells: u64,
    },
    Deliver {
        phase: Phase,
        source: usize,
        cells: u64,
    },
    Consume {
        flat: u64,
        source: usize,
        produced_wave: usize,
    },
}

/// Aggregated statistics of one wave across all workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveStats {
    pub wave: usize,
    pub partitions: u64,
    pub messages: u64,
    pub payload_cells: u64,
    pub elapsed_ns: u128,
}

/// Outcome statistics of a parallel run.
#[derive(Debug, Clone)]
pub struct RunReport<T: Score> {
    pub terminal_score: T,
    pub partition_size: usize,
    pub workers: usize,
    /// Cells computed by each worker; sums to the tensor cell count.
    pub per_worker_cells: Vec<u64>,
    pub wave_stats: Vec<WaveStats>,
    /// Sum of all message payload sizes (distinct (cell, destination) pairs).
    pub payload_cells_total: u64,
    /// Distinct global cells that crossed a worker boundary.
    pub distinct_cells_communicated: u64,
    /// Diagnostics, e.g. received cells never consumed.
    pub warnings: Vec<String>,
    /// Protocol events, empty unless requested.
    pub events: Vec<Event>,
    /// Full message log, empty unless requested.
    pub message_log: Vec<DependencyMessage<T>>,
}

impl<T: Score> RunReport<T> {
    pub fn total_messages(&self) -> u64 {
        self.wave_stats.iter().map(|w| w.messages).sum()
    }

    /// Writes the per-wave report CSV.
    pub fn write_csv(&self, writer: &mut dyn Write) -> Result<()> {
        writeln!(writer, "wave,partitions,messages,payload_cells,elapsed_ns")?;
        for stats in &self.wave_stats {
            writeln!(
                writer,
                "{},{},{},{},{}",
                stats.wave, stats.partitions, stats.messages, stats.payload_cells, stats.elapsed_ns
            )?;
        }
        Ok(())
    }

    /// Writes the event log, one `worker,wave,event,partition` line each.
    pub fn write_event_log(&self, writer: &mut dyn Write) -> Result<()> {
        for event in &self.events {
            let (token, partition) = match &event.kind {
                EventKind::ComputeStart { partition } => {
                    ("compute_start".to_string(), partition.to_string())
                }
                EventKind::ComputeEnd { partition, cells } => {
                    (format!("compute_end:cells={cells}"), partition.to_string())
                }
                EventKind::Send {
                    phase,
                    destination,
                    cells,
                } => (
                    format!("send:{}:dst={destination}:cells={cells}", phase.label()),
                    "-".to_string(),
                ),
                EventKind::Deliver {
                    phase,
                    source,
                    cells,
                } => (
                    format!("deliver:{}:src={source}:cells={cells}", phase.label()),
                    "-".to_string(),
                ),
                EventKind::Consume {
                    flat,
                    source,
                    produced_wave,
                } => (
                    format!("consume:flat={flat}:src={source}:produced={produced_wave}"),
                    "-".to_string(),
                ),
            };
            writeln!(
                writer,
                "{},{},{},{}",
                event.worker, event.wave, token, partition
            )?;
        }
        Ok(())
    }
}

/// Result of a parallel run: the assembled tensor, the traceback alignment
/// and the run report.
#[derive(Debug, Clone)]
pub struct ParallelOutcome<T: Score> {
    pub tensor: ScoreTensor<T>,
    pub alignment: Alignment,
    pub report: RunReport<T>,
}

/// Scores the full tensor over `workers` message-passing workers and checks
/// the assembled result for consistency. The outcome is cell-for-cell
/// identical to [`dp::score_sequential`], including move provenance.
pub fn run_parallel<T: Score>(
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
    partition_size: usize,
    workers: usize,
    opts: &ExecOptions,
) -> Result<ParallelOutcome<T>> {
    scheme.supports(seqs)?;
    let shape = seqs.shape()?;
    let grid = PartitionGrid::new(shape, partition_size)?;
    let schedule = WaveSchedule::new(grid, workers, opts.assignment)?;
    let raw = execute(&schedule, seqs, scheme, opts)?;
    let tensor = assemble_global(&schedule, &raw.blocks, opts.memory_cap)?;
    let alignment = dp::traceback(&tensor, seqs)?;
    let report = RunReport {
        terminal_score: tensor.terminal_score(),
        partition_size,
        workers,
        per_worker_cells: raw.per_worker_cells,
        wave_stats: raw.wave_stats,
        payload_cells_total: raw.payload_cells_total,
        distinct_cells_communicated: raw.distinct_cells_communicated,
        warnings: raw.warnings,
        events: raw.events,
        message_log: raw.message_log,
    };
    Ok(ParallelOutcome {
        tensor,
        alignment,
        report,
    })
}

/// Raw outputs of the worker pool, before assembly.
pub(crate) struct RawRun<T: Score> {
    pub blocks: Vec<ScoreBlock<T>>,
    pub per_worker_cells: Vec<u64>,
    pub wave_stats: Vec<WaveStats>,
    pub payload_cells_total: u64,
    pub distinct_cells_communicated: u64,
    pub warnings: Vec<String>,
    pub events: Vec<Event>,
    pub message_log: Vec<DependencyMessage<T>>,
}

struct WorkerOutput<T: Score> {
    worker: usize,
    blocks: Vec<ScoreBlock<T>>,
    computed_cells: u64,
    wave_stats: Vec<WorkerWaveStats>,
    distinct_sent: u64,
    events: Vec<Event>,
    warnings: Vec<String>,
    message_log: Vec<DependencyMessage<T>>,
}

#[derive(Debug, Clone, Copy, Default)]
struct WorkerWaveStats {
    partitions: u64,
    messages: u64,
    payload_cells: u64,
    elapsed_ns: u128,
}

pub(crate) fn execute<T: Score>(
    schedule: &WaveSchedule,
    seqs: &SequenceSet,
    scheme: &ScoringScheme<T>,
    opts: &ExecOptions,
) -> Result<RawRun<T>> {
    let workers = schedule.workers();
    check_memory::<T>(schedule.grid(), opts.memory_cap)?;

    let mut senders: Vec<Sender<DependencyMessage<T>>> = Vec::with_capacity(workers);
    let mut receivers: Vec<Option<Receiver<DependencyMessage<T>>>> = Vec::with_capacity(workers);
    for _ in 0..workers {
        let (tx, rx) = std::sync::mpsc::channel();
        senders.push(tx);
        receivers.push(Some(rx));
    }
    let barrier = Barrier::new(workers);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    let outputs: Vec<WorkerOutput<T>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for me in 0..workers {
            let receiver = receivers[me].take().expect("receiver taken once");
            let senders = senders.clone();
            let barrier = &barrier;
            let abort = &abort;
            let failure = &failure;
            let opts = opts.clone();
            handles.push(scope.spawn(move || {
                let mut worker = Worker::new(me, schedule, seqs, scheme, opts.record_events);
                worker.run(receiver, &senders, barrier, abort, failure);
                worker.finish()
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panics are caught inside the loop"))
            .collect()
    });

    if abort.load(Ordering::SeqCst) {
        let error =
            failure.lock().unwrap().take().unwrap_or_else(|| {
                Error::Consistency("run aborted without a recorded error".into())
            });
        return Err(error);
    }

    let waves = schedule.grid().wave_count();
    let mut wave_stats: Vec<WaveStats> = (0..waves)
        .map(|wave| WaveStats {
            wave,
            partitions: 0,
            messages: 0,
            payload_cells: 0,
            elapsed_ns: 0,
        })
        .collect();
    let mut per_worker_cells = vec![0u64; workers];
    let mut blocks = Vec::new();
    let mut warnings = Vec::new();
    let mut events = Vec::new();
    let mut message_log = Vec::new();
    let mut payload_total = 0u64;
    let mut distinct_total = 0u64;
    for output in outputs {
        per_worker_cells[output.worker] = output.computed_cells;
        for (wave, stats) in output.wave_stats.iter().enumerate() {
            wave_stats[wave].partitions += stats.partitions;
            wave_stats[wave].messages += stats.messages;
            wave_stats[wave].payload_cells += stats.payload_cells;
            wave_stats[wave].elapsed_ns = wave_stats[wave].elapsed_ns.max(stats.elapsed_ns);
        }
        payload_total += output
            .wave_stats
            .iter()
            .map(|s| s.payload_cells)
            .sum::<u64>();
        // Each cell is sent only by its owner's worker, so per-worker
        // distinct counts sum to the global distinct count.
        distinct_total += output.distinct_sent;
        blocks.extend(output.blocks);
        warnings.extend(output.warnings);
        events.extend(output.events);
        message_log.extend(output.message_log);
    }
    message_log.sort_by_key(|m| (m.wave, m.source, m.destination));
    Ok(RawRun {
        blocks,
        per_worker_cells,
        wave_stats,
        payload_cells_total: payload_total,
        distinct_cells_communicated: distinct_total,
        warnings,
        events,
        message_log,
    })
}

/// Refuses runs whose tensor plus partition blocks would exceed the cap.
fn check_memory<T: Score>(grid: &PartitionGrid, cap: u64) -> Result<()> {
    let shape = grid.shape();
    let tensor_bytes = shape.cell_count().saturating_mul(dp::bytes_per_cell::<T>());
    // Block cells per axis sum to rho_i + p_i - 1 (each boundary counted
    // twice), so the boxes hold prod(rho_i + p_i - 1) cells in total.
    let mut block_cells = 1u64;
    for axis in 0..shape.k() {
        block_cells =
            block_cells.saturating_mul((shape.dim(axis) + grid.counts()[axis] - 1) as u64);
    }
    let block_bytes = block_cells.saturating_mul(std::mem::size_of::<Option<(T, u32)>>() as u64);
    let required = tensor_bytes.saturating_add(block_bytes);
    if required > cap {
        return Err(Error::MemoryCap {
            cells: shape.cell_count(),
            required,
            cap,
        });
    }
    Ok(())
}

struct Received<T: Score> {
    value: T,
    move_code: u32,
    source: usize,
    produced_wave: usize,
    consumed: bool,
}

struct Worker<'a, T: Score> {
    me: usize,
    schedule: &'a WaveSchedule,
    seqs: &'a SequenceSet,
    scheme: &'a ScoringScheme<T>,
    record_events: bool,
    ocin: HashMap<u64, Received<T>>,
    boundary: HashMap<u64, (T, u32)>,
    outbox: BTreeMap<usize, BTreeMap<u64, (T, u32)>>,
    blocks: Vec<ScoreBlock<T>>,
    computed_cells: u64,
    distinct_sent: HashSet<u64>,
    wave_stats: Vec<WorkerWaveStats>,
    events: Vec<Event>,
    message_log: Vec<DependencyMessage<T>>,
}

impl<'a, T: Score> Worker<'a, T> {
    fn new(
        me: usize,
        schedule: &'a WaveSchedule,
        seqs: &'a SequenceSet,
        scheme: &'a ScoringScheme<T>,
        record_events: bool,
    ) -> Self {
        Worker {
            me,
            schedule,
            seqs,
            scheme,
            record_events,
            ocin: HashMap::new(),
            boundary: HashMap::new(),
            outbox: BTreeMap::new(),
            blocks: Vec::new(),
            computed_cells: 0,
            distinct_sent: HashSet::new(),
            wave_stats: vec![WorkerWaveStats::default(); schedule.grid().wave_count()],
            events: Vec::new(),
            message_log: Vec::new(),
        }
    }

    /// The wave loop. Barrier participation is unconditional so an aborting
    /// worker never strands the others; failed workers idle through the
    /// remaining synchronisation points.
    fn run(
        &mut self,
        receiver: Receiver<DependencyMessage<T>>,
        senders: &[Sender<DependencyMessage<T>>],
        barrier: &Barrier,
        abort: &AtomicBool,
        failure: &Mutex<Option<Error>>,
    ) {
        let waves = self.schedule.grid().wave_count();
        for wave in 0..waves {
            let started = Instant::now();
            if !abort.load(Ordering::SeqCst) {
                let compute = catch_unwind(AssertUnwindSafe(|| self.compute_wave(wave)));
                match compute {
                    Ok(Ok(())) => {}
                    Ok(Err(error)) => fail(abort, failure, error),
                    Err(panic) => fail(
                        abort,
                        failure,
                        Error::Worker {
                            worker: self.me,
                            wave,
                            partition: "(unwound)".into(),
                            message: panic_message(panic),
                        },
                    ),
                }
            }
            barrier.wait();
            for phase in [Phase::Clockwise, Phase::Anticlockwise] {
                if !abort.load(Ordering::SeqCst) {
                    if let Err(error) = self.send_phase(wave, phase, senders) {
                        fail(abort, failure, error);
                    }
                }
                barrier.wait();
                if let Err(error) = self.drain(wave, phase, &receiver) {
                    fail(abort, failure, error);
                }
                barrier.wait();
            }
            self.wave_stats[wave].elapsed_ns = started.elapsed().as_nanos();
        }
    }

    fn compute_wave(&mut self, wave: usize) -> Result<()> {
        let partitions: Vec<PartitionId> = self
            .schedule
            .partitions_in_wave(wave)
            .iter()
            .filter(|p| self.schedule.owner_of(p) == self.me)
            .cloned()
            .collect();
        for partition in partitions {
            self.event(
                wave,
                EventKind::ComputeStart {
                    partition: partition.clone(),
                },
            );
            let computed =
                self.compute_partition(&partition, wave)
                    .map_err(|error| match error {
                        e @ (Error::Dependency { .. } | Error::Consistency(_)) => e,
                        other => Error::Worker {
                            worker: self.me,
                            wave,
                            partition: partition.to_string(),
                            message: other.to_string(),
                        },
                    })?;
            self.event(
                wave,
                EventKind::ComputeEnd {
                    partition: partition.clone(),
                    cells: computed,
                },
            );
            self.wave_stats[wave].partitions += 1;
            self.computed_cells += computed;
        }
        Ok(())
    }

    /// Scores one partition box in ascending local flat order. Low-face
    /// cells are filled from the boundary store or OCin; owned cells run the
    /// recurrence against the block itself, and every computed boundary cell
    /// goes through dependency analysis to find remote consumers.
    fn compute_partition(&mut self, partition: &PartitionId, wave: usize) -> Result<u64> {
        let grid = self.schedule.grid();
        let shape = grid.shape();
        let k = grid.k();
        let origin: Vec<usize> = (0..k)
            .map(|axis| grid.first_cell_coord(partition, axis))
            .collect();
        let extents: Vec<usize> = (0..k).map(|axis| grid.extent(partition, axis)).collect();
        let mut local_strides = vec![1usize; k];
        for axis in (0..k - 1).rev() {
            local_strides[axis] = local_strides[axis + 1] * extents[axis + 1];
        }
        let mut block = ScoreBlock::new(partition.clone(), origin.clone(), extents.clone());
        let my_flat = grid.flat_of(partition);
        let mut computed = 0u64;

        let mut local = vec![0usize; k];
        let mut global = origin.clone();
        let mut local_flat = 0usize;
        loop {
            let received = local
                .iter()
                .zip(partition.grid_coords())
                .any(|(&l, &g)| l == 0 && g > 0);
            if received {
                let flat = shape.flatten_unchecked(&global);
                block.cells[local_flat] = Some(self.fetch_received(flat, &global, wave, grid)?);
            } else if global.iter().all(|&c| c == 0) {
                block.cells[local_flat] = Some((T::zero(), 0));
                computed += 1;
            } else {
                let (value, code) =
                    dp::score_cell_coords(&global, self.seqs, self.scheme, |move_code| {
                        let mut delta = 0usize;
                        let mut bits = move_code;
                        while bits != 0 {
                            let axis = k - 1 - bits.trailing_zeros() as usize;
                            delta += local_strides[axis];
                            bits &= bits - 1;
                        }
                        block.cells[local_flat - delta]
                            .map(|(v, _)| v)
                            .ok_or_else(|| self.missing_dependency(&global, move_code, grid))
                    })?;
                block.cells[local_flat] = Some((value, code));
                computed += 1;
                self.analyze_dependencies(&global, value, code, partition, my_flat, grid);
            }
            if !dp::advance_odometer(&mut local, &extents) {
                break;
            }
            for axis in 0..k {
                global[axis] = origin[axis] + local[axis];
            }
            local_flat += 1;
        }
        self.blocks.push(block);
        Ok(computed)
    }

    fn fetch_received(
        &mut self,
        flat: u64,
        global: &[usize],
        wave: usize,
        grid: &PartitionGrid,
    ) -> Result<(T, u32)> {
        if let Some(&cell) = self.boundary.get(&flat) {
            return Ok(cell);
        }
        if let Some(received) = self.ocin.get_mut(&flat) {
            received.consumed = true;
            let (value, move_code, source, produced) = (
                received.value,
                received.move_code,
                received.source,
                received.produced_wave,
            );
            self.event(
                wave,
                EventKind::Consume {
                    flat,
                    source,
                    produced_wave: produced,
                },
            );
            return Ok((value, move_code));
        }
        Err(self.missing_cell(flat, global, grid))
    }

    fn missing_cell(&self, flat: u64, global: &[usize], grid: &PartitionGrid) -> Error {
        let owner = grid
            .owner_of_cell(&MultiIndex::new(global.to_vec()))
            .expect("cell in bounds");
        let source_worker = self.schedule.owner_of(&owner);
        Error::Dependency {
            cell: MultiIndex::new(global.to_vec()).to_string(),
            flat,
            source_partition: owner.to_string(),
            source_worker,
        }
    }

    fn missing_dependency(&self, global: &[usize], move_code: u64, grid: &PartitionGrid) -> Error {
        let k = global.len();
        let mut neighbor = global.to_vec();
        for axis in 0..k {
            if (move_code >> (k - 1 - axis)) & 1 == 1 {
                neighbor[axis] -= 1;
            }
        }
        let flat = grid.shape().flatten_unchecked(&neighbor);
        self.missing_cell(flat, &neighbor, grid)
    }

    /// Routes a computed cell to every partition that will read it: remote
    /// workers get it queued in the outgoing buffer, later partitions on
    /// this worker get it through the boundary store.
    fn analyze_dependencies(
        &mut self,
        global: &[usize],
        value: T,
        move_code: u32,
        partition: &PartitionId,
        my_partition_flat: u64,
        grid: &PartitionGrid,
    ) {
        let k = grid.k();
        let step = grid.partition_size() - 1;
        // Only cells on a shared boundary face can have consumers outside
        // their own partition.
        let on_shared_face = (0..k).any(|axis| {
            let g = partition.grid_coords()[axis];
            g + 1 < grid.counts()[axis] && global[axis] == (g + 1) * step
        });
        if !on_shared_face {
            return;
        }
        let shape = grid.shape();
        let flat = shape.flatten_unchecked(global);
        let mut neighbor = vec![0usize; k];
        for code in 1..(1u64 << k) {
            let mut in_bounds = true;
            for axis in 0..k {
                neighbor[axis] = global[axis] + ((code >> (k - 1 - axis)) & 1) as usize;
                if neighbor[axis] >= shape.dim(axis) {
                    in_bounds = false;
                    break;
                }
            }
            if !in_bounds {
                continue;
            }
            let mut owner_flat = 0u64;
            for (axis, &coord) in neighbor.iter().enumerate() {
                owner_flat =
                    owner_flat * grid.counts()[axis] as u64 + grid.owner_coord(coord) as u64;
            }
            if owner_flat == my_partition_flat {
                continue;
            }
            let owner_worker = self.schedule.owner_of_flat(owner_flat);
            if owner_worker == self.me {
                self.boundary.insert(flat, (value, move_code));
            } else {
                self.outbox
                    .entry(owner_worker)
                    .or_default()
                    .insert(flat, (value, move_code));
                self.distinct_sent.insert(flat);
            }
        }
    }

    fn send_phase(
        &mut self,
        wave: usize,
        phase: Phase,
        senders: &[Sender<DependencyMessage<T>>],
    ) -> Result<()> {
        let destinations: Vec<usize> = self
            .outbox
            .keys()
            .copied()
            .filter(|&dst| match phase {
                Phase::Clockwise => dst < self.me,
                Phase::Anticlockwise => dst > self.me,
            })
            .collect();
        for destination in destinations {
            if destination == self.me {
                return Err(Error::Contract(format!(
                    "worker {} queued a message to itself",
                    self.me
                )));
            }
            let cells: Vec<(u64, T, u32)> = self
                .outbox
                .remove(&destination)
                .expect("destination key present")
                .into_iter()
                .map(|(flat, (value, move_code))| (flat, value, move_code))
                .collect();
            let message = DependencyMessage {
                source: self.me,
                destination,
                wave,
                cells,
            };
            self.wave_stats[wave].messages += 1;
            self.wave_stats[wave].payload_cells += message.cells.len() as u64;
            self.event(
                wave,
                EventKind::Send {
                    phase,
                    destination,
                    cells: message.cells.len() as u64,
                },
            );
            if self.record_events {
                self.message_log.push(message.clone());
            }
            senders[destination]
                .send(message)
                .map_err(|_| Error::Worker {
                    worker: self.me,
                    wave,
                    partition: "-".into(),
                    message: format!("mailbox of worker {destination} closed"),
                })?;
        }
        // Anything left for this phase's direction would be a protocol bug;
        // remaining entries belong to the other phase.
        Ok(())
    }

    fn drain(
        &mut self,
        wave: usize,
        phase: Phase,
        receiver: &Receiver<DependencyMessage<T>>,
    ) -> Result<()> {
        while let Ok(message) = receiver.try_recv() {
            if message.destination != self.me {
                return Err(Error::Consistency(format!(
                    "worker {} received a message addressed to {}",
                    self.me, message.destination
                )));
            }
            self.event(
                wave,
                EventKind::Deliver {
                    phase,
                    source: message.source,
                    cells: message.cells.len() as u64,
                },
            );
            for (flat, value, move_code) in message.cells {
                let previous = self.ocin.insert(
                    flat,
                    Received {
                        value,
                        move_code,
                        source: message.source,
                        produced_wave: message.wave,
                        consumed: false,
                    },
                );
                if previous.is_some() {
                    return Err(Error::Consistency(format!(
                        "cell flat {flat} delivered twice to worker {}",
                        self.me
                    )));
                }
            }
        }
        Ok(())
    }

    fn event(&mut self, wave: usize, kind: EventKind) {
        if self.record_events {
            self.events.push(Event {
                worker: self.me,
                wave,
                kind,
            });
        }
    }

    fn finish(self) -> WorkerOutput<T> {
        let mut unconsumed: Vec<u64> = self
            .ocin
            .iter()
            .filter(|(_, r)| !r.consumed)
            .map(|(&flat, _)| flat)
            .collect();
        unconsumed.sort_unstable();
        let mut warnings = Vec::new();
        if !unconsumed.is_empty() {
            warnings.push(format!(
                "worker {}: {} received cells never consumed (first flats {:?})",
                self.me,
                unconsumed.len(),
                &unconsumed[..unconsumed.len().min(4)]
            ));
        }
        WorkerOutput {
            worker: self.me,
            blocks: self.blocks,
            computed_cells: self.computed_cells,
            wave_stats: self.wave_stats,
            distinct_sent: self.distinct_sent.len() as u64,
            events: self.events,
            warnings,
            message_log: self.message_log,
        }
    }
}

fn fail(abort: &AtomicBool, failure: &Mutex<Option<Error>>, error: Error) {
    let mut slot = failure.lock().unwrap();
    if slot.is_none() {
        *slot = Some(error);
    }
    abort.store(true, Ordering::SeqCst);
}

fn panic_message(panic: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "worker panicked".to_string()
    }
}

/// Builds the global tensor from all partition blocks: every cell comes from
/// its owner partition, and each received copy is cross-checked against the
/// owner's value.
pub(crate) fn assemble_global<T: Score>(
    schedule: &WaveSchedule,
    blocks: &[ScoreBlock<T>],
    memory_cap: u64,
) -> Result<ScoreTensor<T>> {
    let grid = schedule.grid();
    let shape = grid.shape().clone();
    let mut tensor = ScoreTensor::alloc(shape, memory_cap)?;
    let shape = tensor.shape().clone();
    let mut owned_written = 0u64;

    for block in blocks {
        let k = block.extents.len();
        let mut local = vec![0usize; k];
        let mut local_flat = 0usize;
        loop {
            if !block.is_received(&local) {
                let (value, move_code) = block.cells[local_flat].ok_or_else(|| {
                    Error::Consistency(format!(
                        "partition {} left an owned cell unscored",
                        block.partition
                    ))
                })?;
                let mut global = vec![0usize; k];
                for axis in 0..k {
                    global[axis] = block.origin[axis] + local[axis];
                }
                tensor.set_cell(shape.flatten_unchecked(&global), value, move_code);
                owned_written += 1;
            }
            if !dp::advance_odometer(&mut local, &block.extents) {
                break;
            }
            local_flat += 1;
        }
    }
    if owned_written != shape.cell_count() {
        return Err(Error::Consistency(format!(
            "owner partitions wrote {owned_written} cells, expected {}",
            shape.cell_count()
        )));
    }

    for block in blocks {
        let k = block.extents.len();
        let mut local = vec![0usize; k];
        let mut local_flat = 0usize;
        loop {
            if block.is_received(&local) {
                if let Some((value, move_code)) = block.cells[local_flat] {
                    let mut global = vec![0usize; k];
                    for axis in 0..k {
                        global[axis] = block.origin[axis] + local[axis];
                    }
                    let flat = shape.flatten_unchecked(&global);
                    if tensor.value_at_flat(flat) != value
                        || tensor.move_code_at_flat(flat) != move_code
                    {
                        return Err(Error::Consistency(format!(
                            "cell {} disagrees between its owner and the copy held by {}",
                            MultiIndex::new(global),
                            block.partition
                        )));
                    }
                }
            }
            if !dp::advance_odometer(&mut local, &block.extents) {
                break;
            }
            local_flat += 1;
        }
    }
    Ok(tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::Alphabet;

    fn seqs(strs: &[&str]) -> SequenceSet {
        SequenceSet::from_strs(strs, Alphabet::Text).unwrap()
    }

    fn unit() -> ScoringScheme<i64> {
        ScoringScheme::unit()
    }

    fn record_opts() -> ExecOptions {
        ExecOptions {
            record_events: true,
            ..ExecOptions::default()
        }
    }

    fn tensors_equal<T: Score>(a: &ScoreTensor<T>, b: &ScoreTensor<T>) -> bool {
        a.shape() == b.shape()
            && (0..a.shape().cell_count()).all(|flat| {
                a.value_at_flat(flat) == b.value_at_flat(flat)
                    && a.move_code_at_flat(flat) == b.move_code_at_flat(flat)
            })
    }

    #[test]
    fn parallel_matches_sequential_4x8mers() {
        let set = seqs(&["ACGTACGT", "ACGTACGT", "ACGTACGT", "ACGTACGT"]);
        let scheme = unit();
        let sequential = dp::score_sequential(&set, &scheme).unwrap();
        let outcome = run_parallel(&set, &scheme, 3, 4, &ExecOptions::default()).unwrap();
        assert!(tensors_equal(&outcome.tensor, &sequential));
        assert_eq!(outcome.alignment, dp::traceback(&sequential, &set).unwrap());
        assert_eq!(
            outcome.report.per_worker_cells.iter().sum::<u64>(),
            sequential.shape().cell_count()
        );
    }

    #[test]
    fn single_worker_equals_sequential_with_zero_messages() {
        let set = seqs(&["GATTACA", "GCATGCT"]);
        let scheme = unit();
        let sequential = dp::score_sequential(&set, &scheme).unwrap();
        let outcome = run_parallel(&set, &scheme, 3, 1, &ExecOptions::default()).unwrap();
        assert!(tensors_equal(&outcome.tensor, &sequential));
        assert_eq!(outcome.report.total_messages(), 0);
        assert_eq!(outcome.report.payload_cells_total, 0);
        assert_eq!(outcome.report.distinct_cells_communicated, 0);
    }

    #[test]
    fn two_worker_terminal_score_from_brute_force() {
        let set = seqs(&["AC", "AC"]);
        let scheme = unit();
        let outcome = run_parallel(&set, &scheme, 2, 2, &ExecOptions::default()).unwrap();
        let (brute, _) = dp::brute_force_best(&set, &scheme).unwrap();
        assert_eq!(outcome.report.terminal_score, 2);
        assert_eq!(brute, 2);
    }

    #[test]
    fn workers_exceeding_partitions_still_correct() {
        let set = seqs(&["ACG", "AGG"]);
        let scheme = unit();
        let sequential = dp::score_sequential(&set, &scheme).unwrap();
        let outcome = run_parallel(&set, &scheme, 2, 8, &ExecOptions::default()).unwrap();
        assert!(tensors_equal(&outcome.tensor, &sequential));
        assert!(outcome.report.per_worker_cells.contains(&0));
    }

    #[test]
    fn payload_cells_lie_on_shared_boundaries() {
        let set = seqs(&["ACGTACGT", "TACGTACG"]);
        let scheme = unit();
        let outcome = run_parallel(&set, &scheme, 3, 3, &record_opts()).unwrap();
        let grid = PartitionGrid::new(set.shape().unwrap(), 3).unwrap();
        let shape = grid.shape().clone();
        let boundary: Vec<Vec<usize>> = (0..grid.k()).map(|a| grid.boundary_coords(a)).collect();
        assert!(outcome.report.total_messages() > 0);
        for message in &outcome.report.message_log {
            assert_ne!(message.source, message.destination);
            for &(flat, _, _) in &message.cells {
                let cell = shape.unflatten(flat).unwrap();
                let shared = (0..grid.k()).any(|a| boundary[a].contains(&cell[a]));
                assert!(shared, "cell {cell} communicated but not on a boundary");
            }
        }
    }

    #[test]
    fn consumes_message_from_k_waves_back() {
        // 3D with S=2: the origin partition's high corner feeds the (1,1,1)
        // grid diagonal three waves later. Round-robin puts them on
        // different workers.
        let set = seqs(&["AAA", "CCC", "GGG"]);
        let scheme = unit();
        let opts = ExecOptions {
            assignment: Assignment::RoundRobin,
            record_events: true,
            ..ExecOptions::default()
        };
        let outcome = run_parallel(&set, &scheme, 2, 2, &opts).unwrap();
        let gap = outcome
            .report
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Consume { produced_wave, .. } => Some(e.wave - produced_wave),
                _ => None,
            })
            .max()
            .expect("some dependency crossed workers");
        assert_eq!(gap, 3, "expected a k-wave retention case");
        let sequential = dp::score_sequential(&set, &scheme).unwrap();
        assert!(tensors_equal(&outcome.tensor, &sequential));
    }

    #[test]
    fn exchange_phases_respect_rank_order() {
        let set = seqs(&["ACGTAC", "GTACGT", "CATCAT"]);
        let scheme = unit();
        let outcome = run_parallel(&set, &scheme, 3, 3, &record_opts()).unwrap();
        let mut saw_both = (false, false);
        for event in &outcome.report.events {
            if let EventKind::Send {
                phase, destination, ..
            } = event.kind
            {
                match phase {
                    Phase::Clockwise => {
                        assert!(destination < event.worker);
                        saw_both.0 = true;
                    }
                    Phase::Anticlockwise => {
                        assert!(destination > event.worker);
                        saw_both.1 = true;
                    }
                }
            }
        }
        assert!(saw_both.0 && saw_both.1, "expected traffic in both phases");
    }

    #[test]
    fn deliveries_precede_consumption() {
        let set = seqs(&["ACGTA", "TGCAT", "GGACT"]);
        let scheme = unit();
        let outcome = run_parallel(&set, &scheme, 2, 3, &record_opts()).unwrap();
        let mut delivered: HashSet<(usize, usize, usize)> = HashSet::new();
        for event in &outcome.report.events {
            if let EventKind::Deliver { source, .. } = event.kind {
                delivered.insert((event.worker, source, event.wave));
            }
        }
        let mut consumes = 0;
        for event in &outcome.report.events {
            if let EventKind::Consume {
                source,
                produced_wave,
                ..
            } = event.kind
            {
                consumes += 1;
                assert!(
                    event.wave > produced_wave,
                    "consumed in wave {} but produced in wave {produced_wave}",
                    event.wave
                );
                assert!(
                    delivered.contains(&(event.worker, source, produced_wave)),
                    "consumption without a recorded delivery"
                );
            }
        }
        assert!(consumes > 0);
    }

    #[test]
    fn partitions_computed_only_in_their_own_wave_in_order() {
        let set = seqs(&["ACGTAC", "TTACGG", "CATCAT"]);
        let outcome = run_parallel(&set, &unit(), 2, 3, &record_opts()).unwrap();
        let mut last_wave_per_worker: HashMap<usize, usize> = HashMap::new();
        let mut compute_events = 0;
        for event in &outcome.report.events {
            if let EventKind::ComputeStart { partition } = &event.kind {
                compute_events += 1;
                assert_eq!(
                    partition.wave(),
                    event.wave,
                    "{partition} computed outside its wave"
                );
                let last = last_wave_per_worker.entry(event.worker).or_insert(0);
                assert!(event.wave >= *last, "worker went back a wave");
                *last = event.wave;
            }
        }
        let grid = PartitionGrid::new(set.shape().unwrap(), 2).unwrap();
        assert_eq!(compute_events, grid.total_partitions());
    }

    #[test]
    fn report_is_deterministic_across_runs() {
        let set = seqs(&["ACGTACG", "GTACGTA", "CCATGGA"]);
        let scheme = unit();
        let a = run_parallel(&set, &scheme, 3, 3, &ExecOptions::default()).unwrap();
        let b = run_parallel(&set, &scheme, 3, 3, &ExecOptions::default()).unwrap();
        assert_eq!(a.report.per_worker_cells, b.report.per_worker_cells);
        assert_eq!(a.report.payload_cells_total, b.report.payload_cells_total);
        assert_eq!(a.alignment, b.alignment);
        for (wa, wb) in a.report.wave_stats.iter().zip(&b.report.wave_stats) {
            assert_eq!(wa.partitions, wb.partitions);
            assert_eq!(wa.messages, wb.messages);
            assert_eq!(wa.payload_cells, wb.payload_cells);
        }
    }

    #[test]
    fn message_volume_bounded_by_overlap_oracle() {
        let set = seqs(&["ACGTAC", "GTACGT", "TTGGCC"]);
        let scheme = unit();
        let grid = PartitionGrid::new(set.shape().unwrap(), 2).unwrap();
        let bound =
            crate::partition::overlap_cells_oracle(&grid).unwrap() * ((1u64 << grid.k()) - 1);
        for workers in [1, 2, 3, 4] {
            let outcome = run_parallel(&set, &scheme, 2, workers, &ExecOptions::default()).unwrap();
            assert!(outcome.report.payload_cells_total <= bound);
            if workers == 1 {
                assert_eq!(outcome.report.payload_cells_total, 0);
            }
        }
    }

    #[test]
    fn no_unconsumed_warnings_on_clean_runs() {
        let set = seqs(&["ACGTACGT", "TACGTACG", "GGATCCAT"]);
        let outcome = run_parallel(&set, &unit(), 3, 4, &ExecOptions::default()).unwrap();
        assert!(
            outcome.report.warnings.is_empty(),
            "{:?}",
            outcome.report.warnings
        );
    }

    #[test]
    fn memory_cap_enforced_before_run() {
        let set = seqs(&["ACGTACGT", "TACGTACG"]);
        let opts = ExecOptions {
            memory_cap: 64,
            ..ExecOptions::default()
        };
        assert!(matches!(
            run_parallel(&set, &unit(), 3, 2, &opts),
            Err(Error::MemoryCap { .. })
        ));
    }

    #[test]
    fn shared_cells_appear_in_multiple_blocks_with_equal_values() {
        let set = seqs(&["ACGTACGT", "TACGTACG"]);
        let scheme = unit();
        let grid = PartitionGrid::new(set.shape().unwrap(), 3).unwrap();
        let schedule = WaveSchedule::new(grid, 4, Assignment::Block).unwrap();
        let raw = execute(&schedule, &set, &scheme, &ExecOptions::default()).unwrap();
        // Global cell (2, 4): boundary coordinate on both axes' sets.
        let shape = set.shape().unwrap();
        let target = shape.flatten(&MultiIndex::new(vec![2, 4])).unwrap();
        let mut copies = Vec::new();
        for block in &raw.blocks {
            let k = block.extents().len();
            let mut local = vec![0usize; k];
            loop {
                let global: Vec<usize> = (0..k).map(|a| block.origin()[a] + local[a]).collect();
                if shape.flatten_unchecked(&global) == target {
                    copies.push(block.value(&local).unwrap());
                }
                if !dp::advance_odometer(&mut local, block.extents()) {
                    break;
                }
            }
        }
        assert!(copies.len() >= 2, "cell (2,4) should be covered twice");
        assert!(copies.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn assemble_detects_disagreeing_copies() {
        let set = seqs(&["ACGT", "TACG"]);
        let scheme = unit();
        let grid = PartitionGrid::new(set.shape().unwrap(), 3).unwrap();
        let schedule = WaveSchedule::new(grid, 2, Assignment::Block).unwrap();
        let mut raw = execute(&schedule, &set, &scheme, &ExecOptions::default()).unwrap();
        // Corrupt a received copy: partition [1 0] holds cell (2, 0) on its
        // low face.
        let victim = raw
            .blocks
            .iter_mut()
            .find(|b| b.partition().grid_coords() == [1, 0])
            .unwrap();
        victim.corrupt(&[0, 0], 999);
        let err = assemble_global(&schedule, &raw.blocks, dp::DEFAULT_MEMORY_CAP).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)), "{err}");
    }

    #[test]
    fn origin_partition_alone_has_no_outgoing_with_one_worker() {
        let set = seqs(&["AC", "AC"]);
        let scheme = unit();
        let grid = PartitionGrid::new(set.shape().unwrap(), 3).unwrap();
        let schedule = WaveSchedule::new(grid, 1, Assignment::Block).unwrap();
        let raw = execute(&schedule, &set, &scheme, &ExecOptions::default()).unwrap();
        assert_eq!(raw.blocks.len(), 1);
        assert_eq!(raw.per_worker_cells[0], 9);
        assert_eq!(raw.payload_cells_total, 0);
    }

    #[test]
    fn real_valued_mode_matches_sequential_exactly() {
        let set = seqs(&["ACGT", "AGT", "CGTA"]);
        let scheme = ScoringScheme::<f64>::new(1.25, -0.5, -0.75, 0.0);
        let sequential = dp::score_sequential(&set, &scheme).unwrap();
        let outcome = run_parallel(&set, &scheme, 2, 3, &ExecOptions::default()).unwrap();
        // Same arithmetic in the same order: bitwise equality even for f64.
        assert!(tensors_equal(&outcome.tensor, &sequential));
    }

    #[test]
    fn event_log_renders_one_line_per_event() {
        let set = seqs(&["ACG", "CGA"]);
        let outcome = run_parallel(&set, &unit(), 2, 2, &record_opts()).unwrap();
        let mut text = Vec::new();
        outcome.report.write_event_log(&mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        assert_eq!(text.lines().count(), outcome.report.events.len());
        assert!(text.lines().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn report_csv_has_header_and_wave_rows() {
        let set = seqs(&["ACG", "CGA"]);
        let outcome = run_parallel(&set, &unit(), 2, 2, &ExecOptions::default()).unwrap();
        let mut csv = Vec::new();
        outcome.report.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "wave,partitions,messages,payload_cells,elapsed_ns"
        );
        assert_eq!(lines.count(), outcome.report.wave_stats.len());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use crate::sequences::Alphabet;
    use proptest::prelude::*;

    fn random_seqs() -> impl Strategy<Value = SequenceSet> {
        proptest::collection::vec(
            proptest::collection::vec(
                prop_oneof![Just(b'A'), Just(b'C'), Just(b'G'), Just(b'T')],
                1..=5,
            ),
            2..4,
        )
        .prop_map(|rows| {
            let strs: Vec<String> = rows
                .into_iter()
                .map(|r| String::from_utf8(r).unwrap())
                .collect();
            let refs: Vec<&str> = strs.iter().map(|s| s.as_str()).collect();
            SequenceSet::from_strs(&refs, Alphabet::Dna).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn parallel_equals_sequential(
            seqs in random_seqs(),
            s in 2usize..4,
            v in 1usize..5,
            m in 1i64..4,
            g in -3i64..0,
        ) {
            let shape = seqs.shape().unwrap();
            let s = s.min(*shape.dims().iter().min().unwrap());
            prop_assume!(s >= 2);
            let scheme = ScoringScheme::new(m, 0, g, 0);
            let sequential = dp::score_sequential(&seqs, &scheme).unwrap();
            let outcome = run_parallel(&seqs, &scheme, s, v, &ExecOptions::default()).unwrap();
            for flat in 0..shape.cell_count() {
                prop_assert_eq!(outcome.tensor.value_at_flat(flat), sequential.value_at_flat(flat));
                prop_assert_eq!(outcome.tensor.move_code_at_flat(flat), sequential.move_code_at_flat(flat));
            }
            prop_assert_eq!(&outcome.alignment, &dp::traceback(&sequential, &seqs).unwrap());
        }
    }
}
