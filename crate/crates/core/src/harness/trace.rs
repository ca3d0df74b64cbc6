//! CSV trace files. Floats are written with 17 significant digits, which
//! parse back to the identical `f64`.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use crate::engine::{CertRecord, RoundRecord};
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "round,FA,HA,gap,consensus_violation,active_nodes,cert_all_pass,elapsed_ms";
pub const CERTS_HEADER: &str =
    "round,variant,node,local_gap,local_threshold,deviation,consensus_threshold,cond14,cond15,gap";

/// One parsed trace line.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub fa: f64,
    pub ha: f64,
    pub gap: f64,
    pub consensus_violation: f64,
    pub active_nodes: usize,
    pub cert_all_pass: Option<bool>,
    pub elapsed_ms: f64,
}

impl From<&RoundRecord> for TraceRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            round: r.round,
            fa: r.fa,
            ha: r.ha,
            gap: r.gap,
            consensus_violation: r.consensus_violation,
            active_nodes: r.active_nodes,
            cert_all_pass: r.cert_all_pass,
            elapsed_ms: r.elapsed_ms,
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_trace<W: Write>(records: &[RoundRecord], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.round,
            fmt_f64(r.fa),
            fmt_f64(r.ha),
            fmt_f64(r.gap),
            fmt_f64(r.consensus_violation),
            r.active_nodes,
            r.cert_all_pass.map_or("", flag),
            fmt_f64(r.elapsed_ms),
        )?;
    }
    Ok(())
}

pub fn emit_trace(records: &[RoundRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_trace(records, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRow>> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?;
    if header.as_deref() != Some(TRACE_HEADER) {
        return Err(Error::Parse { line: 1, msg: "missing trace header".into() });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let err = |msg: &str| Error::Parse { line: lineno, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(err("expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err("invalid number"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| err("invalid integer"));
        rows.push(TraceRow {
            round: int(f[0])?,
            fa: num(f[1])?,
            ha: num(f[2])?,
            gap: num(f[3])?,
            consensus_violation: num(f[4])?,
            active_nodes: int(f[5])?,
            cert_all_pass: match f[6] {
                "" => None,
                "1" => Some(true),
                "0" => Some(false),
                _ => return Err(err("invalid certificate flag")),
            },
            elapsed_ms: num(f[7])?,
        });
    }
    Ok(rows)
}

pub fn write_certs<W: Write>(certs: &[CertRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CERTS_HEADER}")?;
    for c in certs {
        let r = &c.report;
        for (k, node) in r.nodes.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.round,
                c.variant.name(),
                k,
                fmt_f64(node.local_gap),
                fmt_f64(r.local_threshold),
                fmt_f64(node.deviation),
                fmt_f64(r.consensus_threshold),
                flag(node.cond14),
                flag(node.cond15),
                fmt_f64(r.gap),
            )?;
        }
    }
    Ok(())
}

pub fn emit_certs(certs: &[CertRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_certs(certs, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))
}
