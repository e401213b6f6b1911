use std::io::Write;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::buffer::{BufferPool, IoStats};
use crate::db::Database;
use crate::engine::plan::{Operation, PhysicalPlan, PlanStep};
use crate::error::{Error, Result};
use crate::operators::{
    materialize, project_hash, project_sort_fused, project_sort_naive, project_via_index,
    OperatorReport, ProjectionSpec,
};
use crate::sort::{external_sort, SortKey};
use crate::storage::{HeapFile, Schema, Tuple, Value};
use crate::stream::TupleStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecConfig {
    /// M, unless a step overrides it.
    pub buffers: usize,
    pub readahead: u64,
    /// Used by `project_hash` steps without their own seed.
    pub seed: u64,
}

impl ExecConfig {
    pub fn for_db(db: &Database) -> Self {
        ExecConfig {
            buffers: db.options().buffers,
            readahead: db.options().readahead_window(),
            seed: 0,
        }
    }
}

/// Receives the rows of the `output` step.
pub trait RowSink {
    fn begin(&mut self, schema: &Schema) -> Result<()>;
    fn row(&mut self, tuple: &Tuple) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Header line, then one CSV record per row.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        CsvSink {
            writer: csv::Writer::from_writer(out),
        }
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

impl<W: Write> RowSink for CsvSink<W> {
    fn begin(&mut self, schema: &Schema) -> Result<()> {
        self.writer
            .write_record(schema.attributes().iter().map(|a| a.name.as_str()))?;
        Ok(())
    }

    fn row(&mut self, tuple: &Tuple) -> Result<()> {
        let fields = tuple.values().iter().map(|v| match v {
            Value::Int(i) => i.to_string(),
            Value::Str(s) => s.clone(),
        });
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct CollectSink {
    pub schema: Option<Schema>,
    pub rows: Vec<Tuple>,
}

impl RowSink for CollectSink {
    fn begin(&mut self, schema: &Schema) -> Result<()> {
        self.schema = Some(schema.clone());
        Ok(())
    }

    fn row(&mut self, tuple: &Tuple) -> Result<()> {
        self.rows.push(tuple.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub name: String,
    pub op: String,
    pub buffers: usize,
    pub stats: IoStats,
    /// Pages of the step's result; `None` for `seq_scan` and `output`,
    /// which produce no file.
    pub pages: Option<u64>,
    pub runs_created: usize,
    pub merge_passes: usize,
    pub partitions: Option<usize>,
    pub repartitions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionReport {
    pub steps: Vec<StepReport>,
    pub total: IoStats,
    pub output_rows: u64,
    pub runs_created: usize,
    pub merge_passes: usize,
    pub peak_pinned: usize,
    /// Wall time; left out of both renderings so they stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ExecutionReport {
    /// `key=value` lines: totals first, then `step.<name>.<key>` lines.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.total.pairs() {
            out.push_str(&format!("{k}={v}\n"));
        }
        out.push_str(&format!("output_rows={}\n", self.output_rows));
        out.push_str(&format!("runs_created={}\n", self.runs_created));
        out.push_str(&format!("merge_passes={}\n", self.merge_passes));
        out.push_str(&format!("peak_pinned={}\n", self.peak_pinned));
        for s in &self.steps {
            out.push_str(&format!("step.{}.op={}\n", s.name, s.op));
            out.push_str(&format!("step.{}.buffers={}\n", s.name, s.buffers));
            for (k, v) in s.stats.pairs() {
                out.push_str(&format!("step.{}.{k}={v}\n", s.name));
            }
            if let Some(p) = s.pages {
                out.push_str(&format!("step.{}.pages={p}\n", s.name));
            }
            if s.runs_created > 0 {
                out.push_str(&format!("step.{}.runs_created={}\n", s.name, s.runs_created));
                out.push_str(&format!("step.{}.merge_passes={}\n", s.name, s.merge_passes));
            }
            if let Some(p) = s.partitions {
                out.push_str(&format!("step.{}.partitions={p}\n", s.name));
                out.push_str(&format!("step.{}.repartitions={}\n", s.name, s.repartitions));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// What a finished step hands to its consumer.
struct Binding {
    file: HeapFile,
    temp: bool,
}

impl Binding {
    fn release(self, pool: &mut BufferPool) -> Result<()> {
        if self.temp {
            self.file.delete(pool)
        } else {
            Ok(())
        }
    }
}

/// Runs `plan` against `db` and streams the output rows into `sink`.
///
/// The cache is dropped and the counters reset first, so the report
/// depends only on the database, the plan and `config`. Each temporary is
/// deleted once its consumer finishes; on error every temporary is
/// removed before the error is returned.
pub fn execute(
    db: &mut Database,
    plan: &PhysicalPlan,
    config: &ExecConfig,
    sink: &mut dyn RowSink,
) -> Result<ExecutionReport> {
    let bound = plan.bind(db.catalog())?;
    let started = Instant::now();
    {
        let pool = db.pool_mut();
        pool.set_capacity(config.buffers)?;
        pool.set_readahead_window(config.readahead);
        pool.reset_stats();
        pool.reset_peak_pinned();
    }

    let mut report = ExecutionReport {
        steps: Vec::new(),
        total: IoStats::default(),
        output_rows: 0,
        runs_created: 0,
        merge_passes: 0,
        peak_pinned: 0,
        elapsed: Duration::ZERO,
    };
    let mut input: Option<Binding> = None;
    let mut failure = None;
    for &i in &bound.order {
        let step = &plan.steps[i];
        let buffers = step.op.buffers().unwrap_or(config.buffers);
        let before = db.pool().stats();
        let outcome = db
            .pool_mut()
            .set_capacity(buffers)
            .and_then(|()| run_step(db, step, input.take(), buffers, config, sink));
        match outcome {
            Ok((binding, op_report, rows)) => {
                let stats = db.pool().stats() - before;
                let pages = match &binding {
                    Some(b) if !matches!(step.op, Operation::SeqScan) => Some(b.file.page_count(db.pool())?),
                    _ => None,
                };
                report.output_rows += rows;
                report.runs_created += op_report.runs_created;
                report.merge_passes += op_report.merge_passes;
                report.steps.push(StepReport {
                    step: i + 1,
                    name: step.name.clone(),
                    op: step.op.name().to_string(),
                    buffers,
                    stats,
                    pages,
                    runs_created: op_report.runs_created,
                    merge_passes: op_report.merge_passes,
                    partitions: op_report.partitions,
                    repartitions: op_report.repartitions,
                });
                input = binding;
            }
            Err(e) => {
                failure = Some(Error::Step {
                    step: i + 1,
                    name: step.name.clone(),
                    source: Box::new(e),
                });
                break;
            }
        }
    }

    if let Some(e) = failure {
        cleanup(db.pool_mut());
        let _ = db.pool_mut().set_capacity(config.buffers);
        return Err(e);
    }
    if let Some(b) = input {
        b.release(db.pool_mut())?;
    }
    let pool = db.pool_mut();
    pool.set_capacity(config.buffers)?;
    report.total = pool.stats();
    report.peak_pinned = pool.peak_pinned();
    report.elapsed = started.elapsed();
    Ok(report)
}

/// Drops every pin and deletes every temporary still on disk.
fn cleanup(pool: &mut BufferPool) {
    pool.release_all();
    for id in pool.disk().open_temp_files() {
        let _ = pool.delete_file(id);
    }
}

type StepOutcome = (Option<Binding>, OperatorReport, u64);

fn run_step(
    db: &mut Database,
    step: &PlanStep,
    input: Option<Binding>,
    m: usize,
    config: &ExecConfig,
    sink: &mut dyn RowSink,
) -> Result<StepOutcome> {
    let temp = |file: HeapFile| Some(Binding { file, temp: true });
    match &step.op {
        Operation::SeqScan => {
            let file = db.relation(&step.input)?;
            Ok((Some(Binding { file, temp: false }), OperatorReport::default(), 0))
        }
        Operation::ProjectViaIndex { key, prefix } => {
            let index = db.index(&step.input, key)?;
            let (file, report) = project_via_index(db.pool_mut(), &index, prefix.unwrap_or(key.len()))?;
            Ok((temp(file), report, 0))
        }
        op => {
            let input = input.expect("bound plans give every step an input");
            let pool = db.pool_mut();
            let result = apply(pool, op, &input.file, m, config, sink);
            input.release(pool)?;
            let (file, report, rows) = result?;
            Ok((file.and_then(temp), report, rows))
        }
    }
}

fn apply(
    pool: &mut BufferPool,
    op: &Operation,
    input: &HeapFile,
    m: usize,
    config: &ExecConfig,
    sink: &mut dyn RowSink,
) -> Result<(Option<HeapFile>, OperatorReport, u64)> {
    let spec = |attrs: &[String]| ProjectionSpec::new(input.schema(), attrs);
    let (file, report) = match op {
        Operation::Materialize => (materialize(pool, &mut input.scan())?, OperatorReport::default()),
        Operation::ExternalSort { key, .. } => {
            let sorted = external_sort(pool, input, &SortKey::new(input.schema(), key)?, m)?;
            let report = OperatorReport {
                runs_created: sorted.runs_created,
                merge_passes: sorted.merge_passes,
                ..OperatorReport::default()
            };
            (sorted.file, report)
        }
        Operation::ProjectSortNaive { attrs, .. } => project_sort_naive(pool, input, &spec(attrs)?, m)?,
        Operation::ProjectSortFused { attrs, .. } => project_sort_fused(pool, input, &spec(attrs)?, m)?,
        Operation::ProjectHash { attrs, seed, .. } => {
            project_hash(pool, input, &spec(attrs)?, m, seed.unwrap_or(config.seed))?
        }
        Operation::Output => {
            let rows = emit(pool, input, sink)?;
            return Ok((None, OperatorReport::default(), rows));
        }
        Operation::SeqScan | Operation::ProjectViaIndex { .. } => unreachable!("relation readers"),
    };
    Ok((Some(file), report, 0))
}

fn emit(pool: &mut BufferPool, input: &HeapFile, sink: &mut dyn RowSink) -> Result<u64> {
    let mut scan = input.scan();
    let mut rows = 0;
    let sent = (|| -> Result<()> {
        sink.begin(input.schema())?;
        while let Some(t) = scan.next_tuple(pool)? {
            sink.row(&t)?;
            rows += 1;
        }
        sink.finish()
    })();
    scan.close(pool)?;
    sent.map(|()| rows)
}
