//! Output envelope, CSV tables and significant-digit rounding.

use std::io::{self, Write};

use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Wrapper around every JSON result.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, I: Serialize, P: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: &'a I,
    /// Root seed for simulation commands, `null` otherwise.
    pub seed: Option<u64>,
    pub payload: &'a P,
}

/// A result that can be printed as a CSV table.
pub trait Table {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub fn emit<I, P>(
    format: Format,
    command: &'static str,
    input: &I,
    seed: Option<u64>,
    payload: &P,
) -> io::Result<()>
where
    I: Serialize,
    P: Serialize + Table,
{
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match format {
        Format::Json => {
            let env = Envelope {
                tool: env!("CARGO_BIN_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command,
                input,
                seed,
                payload,
            };
            serde_json::to_writer_pretty(&mut out, &env)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(payload.header())?;
            for row in payload.rows() {
                w.write_record(row)?;
            }
            w.flush()?;
        }
    }
    out.flush()
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1) as usize, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest round-trip text of a float, as in the JSON output.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
