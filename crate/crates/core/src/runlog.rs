//! CSV run logs: `run_id,pair,t1,t2,outcome1,outcome2,product`, LF line
//! endings, outcomes as `1`/`-1`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::RunRecord;

pub const HEADER: [&str; 7] = [
    "run_id", "pair", "t1", "t2", "outcome1", "outcome2", "product",
];

pub fn write_run_log<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if records.is_empty() {
        w.write_record(HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a log, rejecting rows whose product disagrees with the outcomes.
pub fn read_run_log<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(Error::Parse(format!(
            "unexpected run log header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut records = Vec::new();
    for row in rdr.deserialize() {
        let r: RunRecord = row?;
        if r.product != r.outcome1 * r.outcome2 {
            return Err(Error::Parse(format!(
                "run {}: product does not match outcomes",
                r.run_id
            )));
        }
        records.push(r);
    }
    Ok(records)
}
