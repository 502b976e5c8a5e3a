//! Concurrent ingestion: producer threads parse trace sources and push
//! execution sequences into a bounded queue, a single consumer folds them
//! into the model. Checking runs after the queue has drained.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::formula::Formula;
use crate::kripke::{close_deadlocks, KripkeStructure, StateId, DEFAULT_VAR};
use crate::mc::{check_with, CheckOptions, Engine, McError, VerificationResult};
use crate::tracemodel::{
    override_initial, BuilderError, Diagnostic, ExecutionSequence, ModelBuilder, Severity, TraceOptions, TraceParser,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("queue is closed")]
pub struct QueueClosed;

enum Control {
    Snapshot(mpsc::Sender<KripkeStructure>),
}

struct QueueState {
    items: VecDeque<ExecutionSequence>,
    control: VecDeque<Control>,
    closed: bool,
    retired: bool,
}

/// Bounded FIFO of execution sequences with an unbounded control lane that
/// only the consumer reads.
pub struct SequenceQueue {
    state: Mutex<QueueState>,
    readable: Condvar,
    writable: Condvar,
    capacity: usize,
}

impl SequenceQueue {
    /// A capacity of 0 is treated as 1.
    pub fn new(capacity: usize) -> Self {
        SequenceQueue {
            state: Mutex::new(QueueState {
                items: VecDeque::new(),
                control: VecDeque::new(),
                closed: false,
                retired: false,
            }),
            readable: Condvar::new(),
            writable: Condvar::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().unwrap().closed
    }

    /// Blocks while the queue is full. Fails once the queue is closed.
    pub fn push(&self, seq: ExecutionSequence) -> Result<(), QueueClosed> {
        let mut st = self.state.lock().unwrap();
        while !st.closed && st.items.len() >= self.capacity {
            st = self.writable.wait(st).unwrap();
        }
        if st.closed {
            return Err(QueueClosed);
        }
        st.items.push_back(seq);
        self.readable.notify_one();
        Ok(())
    }

    /// Blocks until an item is available. Returns `None` once the queue is
    /// closed and drained.
    pub fn pop(&self) -> Option<ExecutionSequence> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(seq) = st.items.pop_front() {
                self.writable.notify_one();
                return Some(seq);
            }
            if st.closed {
                return None;
            }
            st = self.readable.wait(st).unwrap();
        }
    }

    pub fn close(&self) {
        let mut st = self.state.lock().unwrap();
        st.closed = true;
        self.readable.notify_all();
        self.writable.notify_all();
    }

    fn pop_message(&self) -> Option<Result<ExecutionSequence, Control>> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(c) = st.control.pop_front() {
                return Some(Err(c));
            }
            if let Some(seq) = st.items.pop_front() {
                self.writable.notify_one();
                return Some(Ok(seq));
            }
            if st.closed {
                return None;
            }
            st = self.readable.wait(st).unwrap();
        }
    }

    fn push_control(&self, c: Control) -> Result<(), Control> {
        let mut st = self.state.lock().unwrap();
        if st.retired {
            return Err(c);
        }
        st.control.push_back(c);
        self.readable.notify_all();
        Ok(())
    }

    /// Consumer is gone: refuse further control messages, hand back pending ones.
    fn retire(&self) -> Vec<Control> {
        let mut st = self.state.lock().unwrap();
        st.retired = true;
        st.control.drain(..).collect()
    }
}

pub enum TraceSource {
    File(PathBuf),
    Stdin,
    /// Shell command line whose standard output is a trace.
    Command(String),
    Inline { name: String, text: String },
    Reader { name: String, reader: Box<dyn Read + Send> },
}

impl TraceSource {
    pub fn name(&self) -> String {
        match self {
            TraceSource::File(p) => p.display().to_string(),
            TraceSource::Stdin => "-".to_string(),
            TraceSource::Command(c) => format!("`{c}`"),
            TraceSource::Inline { name, .. } | TraceSource::Reader { name, .. } => name.clone(),
        }
    }
}

impl std::fmt::Debug for TraceSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TraceSource({})", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceStatus {
    Ok,
    OpenFailed(String),
    ReadFailed(String),
    /// Child exited unsuccessfully; `None` when killed by a signal.
    NonZeroExit(Option<i32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestStats {
    pub source: String,
    pub sequences: usize,
    pub transitions: usize,
    pub warnings: usize,
    pub errors: usize,
    pub diagnostics: Vec<Diagnostic>,
    pub status: SourceStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WallTimes {
    pub ingest_ms: u128,
    pub build_ms: u128,
    pub check_ms: u128,
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub capacity: usize,
    /// Producer threads; 0 means one per source up to the available parallelism.
    pub jobs: usize,
    pub var: String,
    pub trace: TraceOptions,
    pub close_deadlocks: bool,
    pub initial: Option<StateId>,
    /// Keep going when some (not all) sources cannot be opened or read.
    pub allow_partial: bool,
    pub engine: Engine,
    pub want_witness: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            capacity: 1024,
            jobs: 0,
            var: DEFAULT_VAR.to_string(),
            trace: TraceOptions::default(),
            close_deadlocks: false,
            initial: None,
            allow_partial: false,
            engine: Engine::Auto,
            want_witness: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub model: KripkeStructure,
    pub results: Vec<VerificationResult>,
    pub ingest_stats: Vec<IngestStats>,
    pub wall_times: WallTimes,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no trace sources given")]
    NoSources,
    #[error("{source_name}: {message}")]
    Source { source_name: String, message: String },
    #[error(transparent)]
    Initial(#[from] BuilderError),
    #[error("{formula}: {error}")]
    Check { formula: String, error: McError },
}

/// Point-in-time view of the model under construction.
#[derive(Clone)]
pub struct SnapshotHandle {
    queue: Arc<SequenceQueue>,
    finished: Arc<Mutex<Option<KripkeStructure>>>,
}

impl SnapshotHandle {
    /// Asks the consumer for a copy; after the consumer has finished this is
    /// the final model.
    pub fn snapshot(&self) -> KripkeStructure {
        let (tx, rx) = mpsc::channel();
        if self.queue.push_control(Control::Snapshot(tx)).is_ok() {
            if let Ok(model) = rx.recv() {
                return model;
            }
        }
        self.finished.lock().unwrap().clone().expect("retired consumer leaves its model")
    }
}

/// A started pipeline: producers and consumer are running.
pub struct Pipeline {
    queue: Arc<SequenceQueue>,
    finished: Arc<Mutex<Option<KripkeStructure>>>,
    producers: Vec<thread::JoinHandle<()>>,
    consumer: Option<thread::JoinHandle<Duration>>,
    stats: Arc<Mutex<Vec<Option<IngestStats>>>>,
    options: PipelineOptions,
    started: Instant,
}

impl Pipeline {
    pub fn start(sources: Vec<TraceSource>, options: PipelineOptions) -> Result<Pipeline, PipelineError> {
        if sources.is_empty() {
            return Err(PipelineError::NoSources);
        }
        let started = Instant::now();
        let queue = Arc::new(SequenceQueue::new(options.capacity));
        let finished = Arc::new(Mutex::new(None));

        let consumer = {
            let queue = Arc::clone(&queue);
            let finished = Arc::clone(&finished);
            let var = options.var.clone();
            thread::spawn(move || consume(&queue, &finished, var))
        };

        let count = sources.len();
        let jobs = match options.jobs {
            0 => thread::available_parallelism().map_or(1, |n| n.get()).min(count),
            n => n.min(count),
        };
        let work: Arc<Vec<Mutex<Option<TraceSource>>>> =
            Arc::new(sources.into_iter().map(|s| Mutex::new(Some(s))).collect());
        let next = Arc::new(AtomicUsize::new(0));
        let stats = Arc::new(Mutex::new(vec![None; count]));
        let producers = (0..jobs)
            .map(|_| {
                let (work, next, stats, queue) = (Arc::clone(&work), Arc::clone(&next), Arc::clone(&stats), Arc::clone(&queue));
                let trace = options.trace;
                thread::spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= work.len() {
                        break;
                    }
                    let source = work[i].lock().unwrap().take().expect("each source is taken once");
                    let s = ingest(source, trace, &queue);
                    stats.lock().unwrap()[i] = Some(s);
                })
            })
            .collect();

        Ok(Pipeline {
            queue,
            finished,
            producers,
            consumer: Some(consumer),
            stats,
            options,
            started,
        })
    }

    pub fn snapshot_handle(&self) -> SnapshotHandle {
        SnapshotHandle {
            queue: Arc::clone(&self.queue),
            finished: Arc::clone(&self.finished),
        }
    }

    /// Waits for ingestion to finish, then checks `formulas`.
    pub fn finish(mut self, formulas: &[Formula]) -> Result<PipelineReport, PipelineError> {
        for p in self.producers.drain(..) {
            p.join().expect("producer thread panicked");
        }
        let ingest_ms = self.started.elapsed().as_millis();
        self.queue.close();
        let build_time = self.consumer.take().unwrap().join().expect("consumer thread panicked");
        let mut model = self.finished.lock().unwrap().clone().expect("consumer stores its model");

        let ingest_stats: Vec<IngestStats> = std::mem::take(&mut *self.stats.lock().unwrap())
            .into_iter()
            .map(|s| s.expect("every source was ingested"))
            .collect();
        let failed: Vec<&IngestStats> = ingest_stats
            .iter()
            .filter(|s| matches!(s.status, SourceStatus::OpenFailed(_) | SourceStatus::ReadFailed(_)))
            .collect();
        if let Some(first) = failed.first() {
            if !self.options.allow_partial || failed.len() == ingest_stats.len() {
                let message = match &first.status {
                    SourceStatus::OpenFailed(m) | SourceStatus::ReadFailed(m) => m.clone(),
                    _ => unreachable!(),
                };
                return Err(PipelineError::Source {
                    source_name: first.source.clone(),
                    message,
                });
            }
        }

        if self.options.close_deadlocks {
            model = close_deadlocks(&model);
        }
        if let Some(init) = &self.options.initial {
            model = override_initial(&model, init)?;
        }

        let check_start = Instant::now();
        let check_options = CheckOptions {
            engine: self.options.engine,
            want_witness: self.options.want_witness,
        };
        let results = formulas
            .iter()
            .map(|f| {
                check_with(&model, f, check_options).map_err(|error| PipelineError::Check {
                    formula: f.to_string(),
                    error,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(PipelineReport {
            model,
            results,
            ingest_stats,
            wall_times: WallTimes {
                ingest_ms,
                build_ms: build_time.as_millis(),
                check_ms: check_start.elapsed().as_millis(),
            },
        })
    }
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        // Unblock threads if the pipeline is abandoned without `finish`.
        self.queue.close();
    }
}

pub fn run_pipeline(
    sources: Vec<TraceSource>,
    formulas: &[Formula],
    options: PipelineOptions,
) -> Result<PipelineReport, PipelineError> {
    Pipeline::start(sources, options)?.finish(formulas)
}

fn consume(queue: &SequenceQueue, finished: &Mutex<Option<KripkeStructure>>, var: String) -> Duration {
    let mut builder = ModelBuilder::new(var);
    let mut busy = Duration::ZERO;
    while let Some(message) = queue.pop_message() {
        match message {
            Ok(seq) => {
                let t = Instant::now();
                builder.add_sequence(&seq).expect("builder stays open while consuming");
                busy += t.elapsed();
            }
            Err(Control::Snapshot(reply)) => {
                let _ = reply.send(builder.snapshot());
            }
        }
    }
    let model = builder.finalize();
    *finished.lock().unwrap() = Some(model.clone());
    for Control::Snapshot(reply) in queue.retire() {
        let _ = reply.send(model.clone());
    }
    busy
}

fn ingest(source: TraceSource, options: TraceOptions, queue: &SequenceQueue) -> IngestStats {
    let mut stats = IngestStats {
        source: source.name(),
        sequences: 0,
        transitions: 0,
        warnings: 0,
        errors: 0,
        diagnostics: Vec::new(),
        status: SourceStatus::Ok,
    };
    let mut child = None;
    let reader: Box<dyn BufRead> = match source {
        TraceSource::File(path) => match File::open(&path) {
            Ok(f) => Box::new(BufReader::new(f)),
            Err(e) => {
                stats.status = SourceStatus::OpenFailed(e.to_string());
                return stats;
            }
        },
        TraceSource::Stdin => Box::new(BufReader::new(io::stdin())),
        TraceSource::Command(cmd) => {
            match Command::new("sh").arg("-c").arg(&cmd).stdout(Stdio::piped()).stdin(Stdio::null()).spawn() {
                Ok(mut c) => {
                    let out = c.stdout.take().expect("stdout is piped");
                    child = Some(c);
                    Box::new(BufReader::new(out))
                }
                Err(e) => {
                    stats.status = SourceStatus::OpenFailed(format!("cannot spawn: {e}"));
                    return stats;
                }
            }
        }
        TraceSource::Inline { text, .. } => Box::new(io::Cursor::new(text.into_bytes())),
        TraceSource::Reader { reader, .. } => Box::new(BufReader::new(reader)),
    };

    let mut parser = TraceParser::new(options);
    let push = |seq: ExecutionSequence, stats: &mut IngestStats| {
        stats.sequences += 1;
        stats.transitions += seq.transitions.len();
        // The queue only closes after every producer has returned.
        queue.push(seq).expect("queue open while producers run");
    };
    for line in reader.lines() {
        match line {
            Ok(line) => {
                if let Some(seq) = parser.feed_line(&line) {
                    push(seq, &mut stats);
                }
            }
            Err(e) => {
                stats.status = SourceStatus::ReadFailed(e.to_string());
                break;
            }
        }
    }
    let (last, diagnostics) = parser.finish();
    if let Some(seq) = last {
        push(seq, &mut stats);
    }
    stats.errors = diagnostics.iter().filter(|d| d.severity() == Severity::Error).count();
    stats.warnings = diagnostics.len() - stats.errors;
    stats.diagnostics = diagnostics;

    if let Some(mut c) = child {
        match c.wait() {
            Ok(status) if !status.success() && stats.status == SourceStatus::Ok => {
                stats.status = SourceStatus::NonZeroExit(status.code());
            }
            Ok(_) => {}
            Err(e) if stats.status == SourceStatus::Ok => stats.status = SourceStatus::ReadFailed(e.to_string()),
            Err(_) => {}
        }
    }
    stats
}
