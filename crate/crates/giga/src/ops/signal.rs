//! Test-signal generation: sine, sawtooth, square and linear chirp.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{GigaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Sine,
    Sawtooth,
    Square,
    Chirp,
}

impl SignalKind {
    pub const ALL: [SignalKind; 4] = [
        SignalKind::Sine,
        SignalKind::Sawtooth,
        SignalKind::Square,
        SignalKind::Chirp,
    ];
}

impl fmt::Display for SignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SignalKind::Sine => "sine",
            SignalKind::Sawtooth => "sawtooth",
            SignalKind::Square => "square",
            SignalKind::Chirp => "chirp",
        };
        f.write_str(s)
    }
}

impl FromStr for SignalKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sine" => Ok(SignalKind::Sine),
            "sawtooth" => Ok(SignalKind::Sawtooth),
            "square" => Ok(SignalKind::Square),
            "chirp" => Ok(SignalKind::Chirp),
            other => Err(format!("unknown signal kind `{other}`")),
        }
    }
}

/// A sampled real signal and the parameters that produced it.
#[derive(Debug, Clone)]
pub struct Signal {
    pub samples: Vec<f32>,
    pub sample_rate: f64,
    pub kind: SignalKind,
    pub frequency: f64,
    pub duration: f64,
}

/// Sample a signal of the given kind.
///
/// Sample `i` is taken at `t = i / sample_rate`:
/// - sine:     `sin(2π f t)`
/// - sawtooth: `2 (f t − floor(f t + 1/2))`
/// - square:   `+1` where `sin(2π f t) >= 0`, else `−1`
/// - chirp:    linear sweep from `f` to `8 f` over the duration,
///   `sin(2π (f t + (k/2) t²))` with `k = 7 f / duration`
pub fn generate_signal(
    kind: SignalKind,
    frequency: f64,
    sample_rate: f64,
    duration: f64,
) -> Result<Signal> {
    for (name, v) in [
        ("frequency", frequency),
        ("sample_rate", sample_rate),
        ("duration", duration),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(GigaError::Config(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    let n = (sample_rate * duration).round() as usize;
    let chirp_rate = 7.0 * frequency / duration;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            let v = match kind {
                SignalKind::Sine => (2.0 * PI * frequency * t).sin(),
                SignalKind::Sawtooth => {
                    let ft = frequency * t;
                    2.0 * (ft - (ft + 0.5).floor())
                }
                SignalKind::Square => {
                    if (2.0 * PI * frequency * t).sin() >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                SignalKind::Chirp => {
                    (2.0 * PI * (frequency * t + 0.5 * chirp_rate * t * t)).sin()
                }
            };
            v as f32
        })
        .collect();
    Ok(Signal {
        samples,
        sample_rate,
        kind,
        frequency,
        duration,
    })
}
