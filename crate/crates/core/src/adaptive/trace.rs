use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: u64,
    pub e: f64,
    pub y: f64,
    pub excess_err: Option<f64>,
}

/// Per-iteration record of a single filter run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorTrace {
    pub records: Vec<TraceRecord>,
}

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_f64(field: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {field:?}")))
}

impl ErrorTrace {
    /// CSV with header `iter,e,y,excess_err`; a missing excess error is an
    /// empty field.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["iter", "e", "y", "excess_err"])?;
        for r in &self.records {
            wtr.write_record([
                r.iter.to_string(),
                fmt_f64(r.e),
                fmt_f64(r.y),
                r.excess_err.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.iter().map(str::trim).collect::<Vec<_>>() != ["iter", "e", "y", "excess_err"] {
            return Err(Error::Parse(format!("unexpected trace header {header:?}")));
        }
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let iter = row[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad iteration {:?}", &row[0])))?;
            let excess_err = match row[3].trim() {
                "" => None,
                s => Some(parse_f64(s)?),
            };
            records.push(TraceRecord {
                iter,
                e: parse_f64(&row[1])?,
                y: parse_f64(&row[2])?,
                excess_err,
            });
        }
        Ok(ErrorTrace { records })
    }
}
