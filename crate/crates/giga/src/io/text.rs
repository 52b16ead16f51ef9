//! Plain-text signal files: one sample per line, decimal.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{GigaError, Result};

pub fn write_samples_to<W: Write>(mut writer: W, samples: &[f32]) -> Result<()> {
    for s in samples {
        writeln!(writer, "{s}")?;
    }
    Ok(())
}

pub fn write_samples<P: AsRef<Path>>(path: P, samples: &[f32]) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_samples_to(&mut writer, samples)?;
    writer.flush()?;
    Ok(())
}

pub fn read_samples_from<R: Read>(reader: R) -> Result<Vec<f32>> {
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let value: f32 = line.trim().parse().map_err(|_| GigaError::Format {
            line: Some(i + 1),
            message: format!("bad sample `{line}`"),
        })?;
        samples.push(value);
    }
    Ok(samples)
}

pub fn read_samples<P: AsRef<Path>>(path: P) -> Result<Vec<f32>> {
    read_samples_from(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn round_trip_preserves_values() {
        let mut rng = SplitMix64::new(2);
        let samples = rng.fill_uniform_f32(500, -10.0, 10.0);
        let mut out = Vec::new();
        write_samples_to(&mut out, &samples).unwrap();
        let back = read_samples_from(&out[..]).unwrap();
        assert_eq!(samples, back);
    }

    #[test]
    fn bad_line_is_reported() {
        assert!(matches!(
            read_samples_from("1.0\nxyz\n".as_bytes()),
            Err(GigaError::Format { line: Some(2), .. })
        ));
    }
}
