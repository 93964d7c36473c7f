use std::path::Path;

use super::aggregate::{AggregateRow, Band};
use crate::error::{Error, Result};
use crate::trace::{ConvergenceTrace, TraceRecord};

const TRACE_HEADER: [&str; 4] = ["eval", "f", "htot", "jtot"];
const AGG_HEADER: [&str; 10] = [
    "eval",
    "f_median",
    "f_lo95",
    "f_hi95",
    "htot_median",
    "htot_lo95",
    "htot_hi95",
    "jtot_median",
    "jtot_lo95",
    "jtot_hi95",
];

// Display for f64 prints the shortest string that parses back to the same value.
fn num(v: f64) -> String {
    v.to_string()
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}")))
}

fn check_header(rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected header {}",
            expected.join(",")
        )));
    }
    Ok(())
}

pub fn write_trace(path: &Path, trace: &ConvergenceTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in trace.records() {
        w.write_record([r.eval.to_string(), num(r.f), num(r.htot), num(r.jtot)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<ConvergenceTrace> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(&mut rdr, &TRACE_HEADER)?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        records.push(TraceRecord {
            eval: parse(row.get(0), "eval")?,
            f: parse(row.get(1), "f")?,
            htot: parse(row.get(2), "htot")?,
            jtot: parse(row.get(3), "jtot")?,
        });
    }
    ConvergenceTrace::from_records(records)
}

pub fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for (k, v) in entries {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<Vec<(String, String)>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("meta line without '=': {l}")))
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGG_HEADER)?;
    for r in rows {
        let mut rec = vec![r.eval.to_string()];
        for b in [r.f, r.htot, r.jtot] {
            rec.extend([num(b.median), num(b.lo95), num(b.hi95)]);
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(&mut rdr, &AGG_HEADER)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let band = |k: usize| -> Result<Band> {
            Ok(Band {
                median: parse(row.get(k), AGG_HEADER[k])?,
                lo95: parse(row.get(k + 1), AGG_HEADER[k + 1])?,
                hi95: parse(row.get(k + 2), AGG_HEADER[k + 2])?,
            })
        };
        rows.push(AggregateRow {
            eval: parse(row.get(0), "eval")?,
            f: band(1)?,
            htot: band(4)?,
            jtot: band(7)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let t = ConvergenceTrace::from_records(vec![
            TraceRecord {
                eval: 6,
                f: 0.1 + 0.2,
                htot: 1e-300,
                jtot: 123456.789e10,
            },
            TraceRecord {
                eval: 10,
                f: -2.0 / 3.0,
                htot: 0.0,
                jtot: f64::MIN_POSITIVE,
            },
        ])
        .unwrap();
        write_trace(&p, &t).unwrap();
        assert_eq!(read_trace(&p).unwrap(), t);
        assert!(std::fs::read_to_string(&p)
            .unwrap()
            .starts_with("eval,f,htot,jtot\n"));
    }

    #[test]
    fn malformed_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "eval,f,h,j\n1,2,3,4\n").unwrap();
        assert!(matches!(read_trace(&p), Err(Error::Parse(_))));
        std::fs::write(&p, "eval,f,htot,jtot\n1,x,3,4\n").unwrap();
        assert!(matches!(read_trace(&p), Err(Error::Parse(_))));
        std::fs::write(&p, "eval,f,htot,jtot\n5,1,0,0\n5,1,0,0\n").unwrap();
        assert!(read_trace(&p).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.meta");
        let m = vec![
            ("a".to_string(), "1".to_string()),
            ("eps".to_string(), "0.001".to_string()),
        ];
        write_meta(&p, &m).unwrap();
        assert_eq!(read_meta(&p).unwrap(), m);
    }
}
