//! Activity-trace export: one record per line, tab-separated
//! `device_id  kind  start_ns  end_ns  label`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{GigaError, Result};
use crate::runtime::{ActivityTrace, TraceRecord};

pub fn write_trace_to<W: Write>(mut writer: W, trace: &ActivityTrace) -> Result<()> {
    for r in trace.records() {
        if r.label.contains('\t') || r.label.contains('\n') {
            return Err(GigaError::Format {
                line: None,
                message: format!("label `{}` may not contain tabs or newlines", r.label),
            });
        }
        writeln!(
            writer,
            "{}\t{}\t{}\t{}\t{}",
            r.device_id, r.kind, r.start_ns, r.end_ns, r.label
        )?;
    }
    Ok(())
}

pub fn write_trace<P: AsRef<Path>>(path: P, trace: &ActivityTrace) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_trace_to(&mut writer, trace)?;
    writer.flush()?;
    Ok(())
}

pub fn read_trace_from<R: Read>(reader: R) -> Result<ActivityTrace> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(GigaError::Format {
                line: Some(line_no),
                message: format!("expected 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let parse_u64 = |s: &str, what: &str| -> Result<u64> {
            s.parse().map_err(|_| GigaError::Format {
                line: Some(line_no),
                message: format!("bad {what} `{s}`"),
            })
        };
        let device_id = parse_u64(fields[0], "device id")? as usize;
        let kind = fields[1].parse().map_err(|e| GigaError::Format {
            line: Some(line_no),
            message: e,
        })?;
        let start_ns = parse_u64(fields[2], "start_ns")?;
        let end_ns = parse_u64(fields[3], "end_ns")?;
        if start_ns > end_ns {
            return Err(GigaError::Format {
                line: Some(line_no),
                message: format!("start_ns {start_ns} exceeds end_ns {end_ns}"),
            });
        }
        records.push(TraceRecord {
            device_id,
            kind,
            start_ns,
            end_ns,
            label: fields[4].to_string(),
        });
    }
    Ok(ActivityTrace::new(records))
}

pub fn read_trace<P: AsRef<Path>>(path: P) -> Result<ActivityTrace> {
    read_trace_from(File::open(path)?)
}
