//! Bit-exact file codecs: PPM/PGM images, benchmark CSV logs, activity-trace
//! exports and text signal files. Every writer is deterministic and every
//! codec is the identity under read-after-write on its valid domain.

mod csv;
mod netpbm;
mod text;
mod trace_file;

pub use csv::{
    read_bench_csv, read_bench_csv_from, write_bench_csv, write_bench_csv_to, BenchImpl,
    BenchRecord, BenchStatus, BENCH_CSV_HEADER,
};
pub use netpbm::{
    grayscale_output_path, read_pgm, read_pgm_bytes, read_ppm, read_ppm_bytes, write_pgm,
    write_pgm_to, write_ppm, write_ppm_to,
};
pub use text::{read_samples, read_samples_from, write_samples, write_samples_to};
pub use trace_file::{read_trace, read_trace_from, write_trace, write_trace_to};
