//! Benchmark log codec: `op,impl,size,elapsed_ms,status` CSV rows.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{GigaError, Result};

pub const BENCH_CSV_HEADER: &str = "op,impl,size,elapsed_ms,status";

/// Which implementation produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchImpl {
    Single,
    Multi,
}

impl fmt::Display for BenchImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchImpl::Single => "single",
            BenchImpl::Multi => "multi",
        })
    }
}

impl FromStr for BenchImpl {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "single" => Ok(BenchImpl::Single),
            "multi" => Ok(BenchImpl::Multi),
            other => Err(format!("unknown impl `{other}`")),
        }
    }
}

/// Row outcome: completed, or hit device memory limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchStatus {
    Ok,
    Oom,
}

impl fmt::Display for BenchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchStatus::Ok => "ok",
            BenchStatus::Oom => "oom",
        })
    }
}

impl FromStr for BenchStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ok" => Ok(BenchStatus::Ok),
            "oom" => Ok(BenchStatus::Oom),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub op: String,
    pub impl_kind: BenchImpl,
    /// Sweep parameter: a scale, a matrix edge, a vector length, or a signal kind.
    pub size: String,
    pub elapsed_ms: f64,
    pub status: BenchStatus,
}

impl BenchRecord {
    pub fn ok(op: &str, impl_kind: BenchImpl, size: impl ToString, elapsed_ms: f64) -> Self {
        Self {
            op: op.to_string(),
            impl_kind,
            size: size.to_string(),
            elapsed_ms,
            status: BenchStatus::Ok,
        }
    }

    pub fn oom(op: &str, impl_kind: BenchImpl, size: impl ToString) -> Self {
        Self {
            op: op.to_string(),
            impl_kind,
            size: size.to_string(),
            elapsed_ms: 0.0,
            status: BenchStatus::Oom,
        }
    }
}

fn check_field(value: &str, what: &str) -> Result<()> {
    if value.contains(',') || value.contains('\n') {
        return Err(GigaError::Format {
            line: None,
            message: format!("{what} `{value}` may not contain commas or newlines"),
        });
    }
    Ok(())
}

pub fn write_bench_csv_to<W: Write>(mut writer: W, records: &[BenchRecord]) -> Result<()> {
    writeln!(writer, "{BENCH_CSV_HEADER}")?;
    for r in records {
        check_field(&r.op, "op")?;
        check_field(&r.size, "size")?;
        writeln!(
            writer,
            "{},{},{},{},{}",
            r.op, r.impl_kind, r.size, r.elapsed_ms, r.status
        )?;
    }
    Ok(())
}

pub fn write_bench_csv<P: AsRef<Path>>(path: P, records: &[BenchRecord]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_bench_csv_to(&mut writer, records)?;
    writer.flush()?;
    Ok(())
}

pub fn read_bench_csv_from<R: Read>(reader: R) -> Result<Vec<BenchRecord>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| GigaError::Format {
            line: Some(1),
            message: "missing header".into(),
        })?;
    if header != BENCH_CSV_HEADER {
        return Err(GigaError::Format {
            line: Some(1),
            message: format!("bad header `{header}`, expected `{BENCH_CSV_HEADER}`"),
        });
    }

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(GigaError::Format {
                line: Some(line_no),
                message: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let impl_kind = fields[1].parse().map_err(|e| GigaError::Format {
            line: Some(line_no),
            message: e,
        })?;
        let elapsed_ms: f64 = fields[3].parse().map_err(|_| GigaError::Format {
            line: Some(line_no),
            message: format!("bad elapsed_ms `{}`", fields[3]),
        })?;
        if !elapsed_ms.is_finite() || elapsed_ms < 0.0 {
            return Err(GigaError::Format {
                line: Some(line_no),
                message: format!("elapsed_ms must be non-negative, got {elapsed_ms}"),
            });
        }
        let status = fields[4].parse().map_err(|e| GigaError::Format {
            line: Some(line_no),
            message: e,
        })?;
        records.push(BenchRecord {
            op: fields[0].to_string(),
            impl_kind,
            size: fields[2].to_string(),
            elapsed_ms,
            status,
        });
    }
    Ok(records)
}

pub fn read_bench_csv<P: AsRef<Path>>(path: P) -> Result<Vec<BenchRecord>> {
    read_bench_csv_from(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_record_list_is_a_header_only_file() {
        let mut out = Vec::new();
        write_bench_csv_to(&mut out, &[]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "op,impl,size,elapsed_ms,status\n");
    }

    #[test]
    fn round_trip_three_records() {
        let records = vec![
            BenchRecord::ok("matmul", BenchImpl::Single, 64, 1.25),
            BenchRecord::ok("matmul", BenchImpl::Multi, 64, 0.875),
            BenchRecord::oom("upsample", BenchImpl::Single, 24),
        ];
        let mut out = Vec::new();
        write_bench_csv_to(&mut out, &records).unwrap();
        let back = read_bench_csv_from(&out[..]).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn negative_elapsed_is_a_parse_error_with_line_number() {
        let text = "op,impl,size,elapsed_ms,status\nmatmul,single,2,-1.0,ok\n";
        match read_bench_csv_from(text.as_bytes()) {
            Err(GigaError::Format { line: Some(2), .. }) => {}
            other => panic!("expected a line-2 format error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let text = "op,impl,size,elapsed_ms,status\nok,single,2,1.0,ok\nbad row\n";
        match read_bench_csv_from(text.as_bytes()) {
            Err(GigaError::Format { line: Some(3), .. }) => {}
            other => panic!("expected a line-3 format error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_bench_csv_from("nope\n".as_bytes()).is_err());
    }

    #[test]
    fn elapsed_survives_round_trip_exactly() {
        let records = vec![BenchRecord::ok("dot", BenchImpl::Multi, 1024, 0.123456789012345)];
        let mut out = Vec::new();
        write_bench_csv_to(&mut out, &records).unwrap();
        let back = read_bench_csv_from(&out[..]).unwrap();
        assert_eq!(back[0].elapsed_ms.to_bits(), records[0].elapsed_ms.to_bits());
    }
}
