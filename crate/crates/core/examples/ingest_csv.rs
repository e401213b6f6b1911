//! Load a CSV file into a paged relation and build an index on it.
//!
//! cargo run --example ingest_csv

use qeval::storage::Schema;
use qeval::{Database, DbOptions};

fn main() -> qeval::Result<()> {
    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("people.csv");
    let mut body = String::from("id,name,city\n");
    for i in 0..500 {
        body.push_str(&format!("{i},person{i},city{}\n", i % 9));
    }
    std::fs::write(&csv, body)?;

    let mut db = Database::create(dir.path().join("db"), DbOptions::default())?;
    let schema = Schema::parse("id:int,name:str16,city:str8")?;
    let report = db.ingest_csv("people", &csv, schema)?;
    println!(
        "{}: {} tuples, {} per page, {} pages",
        report.relation, report.tuple_count, report.tuples_per_page, report.page_count
    );

    let index = db.build_index("people", &["city".into(), "id".into()])?;
    println!(
        "index on ({}): {} entries in {} pages",
        index.key_attrs.join(", "),
        index.entry_count,
        index.page_count
    );

    let people = db.relation("people")?;
    let rows = people.read_all(db.pool_mut())?;
    println!("first row: {:?}", rows[0]);
    Ok(())
}
