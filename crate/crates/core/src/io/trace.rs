//! Trace CSV with columns `t,P,D,gap,seconds`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::Checkpoint;

use super::write_atomic;

pub const TRACE_HEADER: &str = "t,P,D,gap,seconds";

pub fn trace_csv(checkpoints: &[Checkpoint]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for cp in checkpoints {
        writeln!(out, "{},{},{},{},{}", cp.t, cp.primal, cp.dual, cp.gap, cp.seconds)
            .expect("writing to a string");
    }
    out
}

pub fn write_trace(path: &Path, checkpoints: &[Checkpoint]) -> Result<()> {
    write_atomic(path, trace_csv(checkpoints).as_bytes())
}

pub fn read_trace(path: &Path) -> Result<Vec<Checkpoint>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRACE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {TRACE_HEADER:?}"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, line)| {
            let bad = |message: String| Error::Parse { line: k + 1, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(format!("expected 5 fields, got {}", fields.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            Ok(Checkpoint {
                t: fields[0].trim().parse().map_err(|_| bad(format!("bad iteration {:?}", fields[0])))?,
                primal: num(fields[1])?,
                dual: num(fields[2])?,
                gap: num(fields[3])?,
                seconds: num(fields[4])?,
            })
        })
        .collect()
}
