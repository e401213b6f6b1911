//! The `qeval` command line.
//!
//! ```text
//! qeval --db DIR create [--page-size N] [--extent L]
//! qeval --db DIR ingest R data.csv --schema "id:int,name:str20"
//! qeval --db DIR index R a,b
//! qeval --db DIR run plan.txt [--buffers M] [--readahead W] [--seed S] [--stats-json] [--plan-json]
//! ```
//!
//! `run` writes rows to stdout as CSV and the statistics to stderr.
//! Exit codes: 0 success, 1 other errors, 2 invalid plan, 3 I/O failure,
//! 4 pathological data.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::db::{Database, DbOptions, DEFAULT_BUFFERS};
use crate::engine::{execute, CsvSink, ExecConfig, PhysicalPlan};
use crate::error::{Error, Result};
use crate::storage::disk::DEFAULT_EXTENT_LENGTH;
use crate::storage::page::DEFAULT_PAGE_SIZE;
use crate::storage::Schema;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PLAN: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PATHOLOGICAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "qeval", version, about = "Buffer-bounded query evaluation over paged heap files")]
pub struct Cli {
    /// Database directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub db: Option<PathBuf>,

    /// Buffer frames (M).
    #[arg(long, global = true, value_name = "M", default_value_t = DEFAULT_BUFFERS)]
    pub buffers: usize,

    /// Page size in bytes; fixed when the database is created.
    #[arg(long, global = true, value_name = "BYTES")]
    pub page_size: Option<usize>,

    /// Pages per extent; fixed when the database is created.
    #[arg(long, global = true, value_name = "PAGES")]
    pub extent: Option<u64>,

    /// Read-ahead window in pages [default: extent length - 1].
    #[arg(long, global = true, value_name = "PAGES")]
    pub readahead: Option<u64>,

    /// Seed for hash projections without their own.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Print statistics and reports as JSON.
    #[arg(long, global = true)]
    pub stats_json: bool,

    /// Read the plan file as JSON.
    #[arg(long, global = true)]
    pub plan_json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty database.
    Create,
    /// Load a CSV file (with header) into a new relation.
    Ingest {
        relation: String,
        csv: PathBuf,
        /// e.g. "id:int,name:str20"
        #[arg(long)]
        schema: String,
    },
    /// Build a dense index on comma-separated attributes.
    Index { relation: String, attrs: String },
    /// Execute a plan file.
    Run { plan: PathBuf },
}

/// Settings shared by every command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliConfig {
    pub db: PathBuf,
    pub buffers: usize,
    pub page_size: Option<usize>,
    pub extent_length: Option<u64>,
    pub readahead: Option<u64>,
    pub seed: u64,
    pub stats_json: bool,
}

impl CliConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let db = cli
            .db
            .clone()
            .ok_or_else(|| Error::usage("--db is required"))?;
        let config = CliConfig {
            db,
            buffers: cli.buffers,
            page_size: cli.page_size,
            extent_length: cli.extent,
            readahead: cli.readahead,
            seed: cli.seed,
            stats_json: cli.stats_json,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.options().validate()
    }

    fn options(&self) -> DbOptions {
        DbOptions {
            page_size: self.page_size.unwrap_or(DEFAULT_PAGE_SIZE),
            extent_length: self.extent_length.unwrap_or(DEFAULT_EXTENT_LENGTH),
            buffers: self.buffers,
            readahead: self.readahead,
        }
    }

    fn open(&self) -> Result<Database> {
        let db = Database::open(&self.db, self.options())?;
        let stored = db.options();
        if self.page_size.is_some_and(|p| p != stored.page_size) {
            return Err(Error::usage(format!(
                "the database uses {}-byte pages",
                stored.page_size
            )));
        }
        if self.extent_length.is_some_and(|e| e != stored.extent_length) {
            return Err(Error::usage(format!(
                "the database uses {}-page extents",
                stored.extent_length
            )));
        }
        Ok(db)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::PlanValidation { .. } => EXIT_PLAN,
        Error::Io(_) => EXIT_IO,
        Error::PathologicalData(_) => EXIT_PATHOLOGICAL,
        _ => EXIT_OTHER,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let shown = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{shown}");
                EXIT_OTHER
            } else {
                let _ = write!(stdout, "{shown}");
                EXIT_OK
            };
        }
    };
    match dispatch(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let config = CliConfig::from_cli(cli)?;
    match &cli.command {
        Command::Create => {
            let db = Database::create(&config.db, config.options())?;
            let o = db.options();
            writeln!(
                stdout,
                "created {} (page_size={}, extent_length={})",
                db.dir().display(),
                o.page_size,
                o.extent_length
            )?;
        }
        Command::Ingest {
            relation,
            csv,
            schema,
        } => {
            let mut db = config.open()?;
            let report = db.ingest_csv(relation, csv, Schema::parse(schema)?)?;
            if config.stats_json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(stdout, "relation={}", report.relation)?;
                writeln!(stdout, "page_count={}", report.page_count)?;
                writeln!(stdout, "tuple_count={}", report.tuple_count)?;
                writeln!(stdout, "tuples_per_page={}", report.tuples_per_page)?;
            }
        }
        Command::Index { relation, attrs } => {
            let mut db = config.open()?;
            let attrs: Vec<String> = attrs.split(',').map(|a| a.trim().to_string()).collect();
            let report = db.build_index(relation, &attrs)?;
            if config.stats_json {
                writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(stdout, "relation={}", report.relation)?;
                writeln!(stdout, "key={}", report.key_attrs.join(","))?;
                writeln!(stdout, "entry_count={}", report.entry_count)?;
                writeln!(stdout, "page_count={}", report.page_count)?;
            }
        }
        Command::Run { plan } => {
            let mut db = config.open()?;
            let text = fs::read_to_string(plan)?;
            let plan = if cli.plan_json {
                PhysicalPlan::from_json(&text)?
            } else {
                PhysicalPlan::parse(&text)?
            };
            let exec = ExecConfig {
                buffers: config.buffers,
                readahead: db.options().readahead_window(),
                seed: config.seed,
            };
            let mut sink = CsvSink::new(&mut *stdout);
            let report = execute(&mut db, &plan, &exec, &mut sink)?;
            drop(sink);
            if config.stats_json {
                writeln!(stderr, "{}", report.to_json())?;
            } else {
                write!(stderr, "{}", report.to_kv())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qeval").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_may_follow_the_subcommand() {
        let cli = parse(&["run", "p.txt", "--db", "d", "--buffers", "4", "--readahead", "0"]);
        let c = CliConfig::from_cli(&cli).unwrap();
        assert_eq!((c.buffers, c.readahead), (4, Some(0)));
        assert!(matches!(cli.command, Command::Run { .. }));
    }

    #[test]
    fn config_validation() {
        for args in [
            &["--db", "d", "--buffers", "2", "create"][..],
            &["--db", "d", "--page-size", "1000", "create"],
            &["--db", "d", "--page-size", "256", "create"],
            &["--db", "d", "--extent", "0", "create"],
            &["create"],
        ] {
            assert!(CliConfig::from_cli(&parse(args)).is_err(), "{args:?}");
        }
        assert!(CliConfig::from_cli(&parse(&["--db", "d", "--page-size", "512", "create"])).is_ok());
        assert_eq!(crate::storage::page::MIN_PAGE_SIZE, 512);
    }

    #[test]
    fn exit_codes_are_disjoint() {
        let io = Error::Io(std::io::Error::other("disk"));
        let plan = Error::PlanValidation {
            step: 1,
            message: String::new(),
        };
        let wrapped = Error::Step {
            step: 2,
            name: "p".into(),
            source: Box::new(Error::PathologicalData(String::new())),
        };
        assert_eq!(exit_code(&io), EXIT_IO);
        assert_eq!(exit_code(&plan), EXIT_PLAN);
        assert_eq!(exit_code(&wrapped), EXIT_PATHOLOGICAL);
        assert_eq!(exit_code(&Error::usage("x")), EXIT_OTHER);
    }
}
