//! Parse a textual physical plan, execute it and print the rows and the
//! per-step statistics.

use qeval::engine::{execute, CsvSink, ExecConfig, PhysicalPlan};
use qeval::storage::Schema;
use qeval::{tuple, Database, DbOptions};

const PLAN: &str = "
# distinct (dept, city) pairs, then sorted by city
scan   = seq_scan() <- E
pairs  = project_hash(attrs:[dept, city], seed:3) <- scan
keep   = materialize() <- pairs
bycity = external_sort(key:[city, dept], M:3) <- keep
out    = output() <- bycity
";

fn main() -> qeval::Result<()> {
    let dir = tempfile::tempdir()?;
    let options = DbOptions {
        page_size: 512,
        buffers: 5,
        ..DbOptions::default()
    };
    let mut db = Database::create(dir.path().join("db"), options)?;
    let schema = Schema::parse("id:int,dept:str8,city:str8")?;
    let rows = (0..1000i64).map(|i| Ok(tuple![i, format!("d{}", i % 3), format!("c{}", i % 4)]));
    db.ingest_rows("E", schema, rows)?;

    let plan = PhysicalPlan::parse(PLAN)?;
    for step in &plan.steps {
        println!("{step}");
    }
    println!("{}", plan.to_json());

    let config = ExecConfig::for_db(&db);
    let mut sink = CsvSink::new(std::io::stdout());
    let report = execute(&mut db, &plan, &config, &mut sink)?;
    drop(sink);
    print!("{}", report.to_kv());
    Ok(())
}
