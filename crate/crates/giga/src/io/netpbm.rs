//! Binary PPM (P6) and PGM (P5) codecs, maxval 255.
//!
//! Writers emit exactly `P6\n<w> <h>\n255\n` (or `P5`) followed by the raw
//! payload, so identical images produce identical files. Readers accept
//! standard netpbm headers with `#` comments and arbitrary whitespace between
//! tokens, and reject anything that is not an 8-bit binary image.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{GigaError, Result};
use crate::image::{ImageGray8, ImageRgb8};

fn format_err(message: impl Into<String>) -> GigaError {
    GigaError::Format {
        line: None,
        message: message.into(),
    }
}

/// Header parser over raw bytes: magic, then three tokens (width, height,
/// maxval) separated by whitespace or comments, then one whitespace byte.
struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderParser<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn expect_magic(&mut self, magic: &[u8; 2]) -> Result<()> {
        if self.bytes.len() < 2 {
            return Err(format_err("file too short for a netpbm header"));
        }
        let got = &self.bytes[..2];
        if got != magic {
            return Err(format_err(format!(
                "expected magic `{}`, found `{}`",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(got)
            )));
        }
        self.pos = 2;
        Ok(())
    }

    fn skip_separators(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(format_err("truncated netpbm header")),
            }
        }
    }

    fn read_number(&mut self) -> Result<usize> {
        self.skip_separators()?;
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(format_err("expected a decimal value in the header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err("header value out of range"))
    }

    /// Single whitespace byte between maxval and payload, then the rest.
    fn payload(mut self) -> Result<&'a [u8]> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => self.pos += 1,
            _ => return Err(format_err("missing whitespace before the payload")),
        }
        Ok(&self.bytes[self.pos..])
    }
}

fn parse_header<'a>(bytes: &'a [u8], magic: &[u8; 2]) -> Result<(usize, usize, &'a [u8])> {
    let mut parser = HeaderParser::new(bytes);
    parser.expect_magic(magic)?;
    let width = parser.read_number()?;
    let height = parser.read_number()?;
    let maxval = parser.read_number()?;
    if maxval != 255 {
        return Err(format_err(format!("only maxval 255 is supported, got {maxval}")));
    }
    let payload = parser.payload()?;
    Ok((width, height, payload))
}

fn payload_size(width: usize, height: usize, channels: usize) -> Result<usize> {
    width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| format_err(format!("image dimensions {width}x{height} overflow")))
}

pub fn read_ppm_bytes(bytes: &[u8]) -> Result<ImageRgb8> {
    let (width, height, payload) = parse_header(bytes, b"P6")?;
    let expected = payload_size(width, height, 3)?;
    if payload.len() != expected {
        return Err(format_err(format!(
            "payload holds {} bytes, expected {expected}",
            payload.len()
        )));
    }
    ImageRgb8::new(width, height, payload.to_vec())
}

pub fn read_ppm<P: AsRef<Path>>(path: P) -> Result<ImageRgb8> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_ppm_bytes(&bytes)
}

pub fn write_ppm_to<W: Write>(mut writer: W, img: &ImageRgb8) -> Result<()> {
    write!(writer, "P6\n{} {}\n255\n", img.width(), img.height())?;
    writer.write_all(img.data())?;
    Ok(())
}

pub fn write_ppm<P: AsRef<Path>>(path: P, img: &ImageRgb8) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_ppm_to(&mut writer, img)?;
    writer.flush()?;
    Ok(())
}

pub fn read_pgm_bytes(bytes: &[u8]) -> Result<ImageGray8> {
    let (width, height, payload) = parse_header(bytes, b"P5")?;
    let expected = payload_size(width, height, 1)?;
    if payload.len() != expected {
        return Err(format_err(format!(
            "payload holds {} bytes, expected {expected}",
            payload.len()
        )));
    }
    ImageGray8::new(width, height, payload.to_vec())
}

pub fn read_pgm<P: AsRef<Path>>(path: P) -> Result<ImageGray8> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_pgm_bytes(&bytes)
}

pub fn write_pgm_to<W: Write>(mut writer: W, img: &ImageGray8) -> Result<()> {
    write!(writer, "P5\n{} {}\n255\n", img.width(), img.height())?;
    writer.write_all(img.data())?;
    Ok(())
}

pub fn write_pgm<P: AsRef<Path>>(path: P, img: &ImageGray8) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_pgm_to(&mut writer, img)?;
    writer.flush()?;
    Ok(())
}

/// Default output path for grayscale conversion: `cat.ppm` → `cat_grayscale.pgm`.
pub fn grayscale_output_path(input: &Path) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    input.with_file_name(format!("{stem}_grayscale.pgm"))
}
