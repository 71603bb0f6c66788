//! BSM-cadence trajectory records and their CSV form.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "run_id,time_s,vehicle_id,lane,position_ft,speed_ftps";

/// One observation of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub run_id: u64,
    pub time_s: f64,
    pub vehicle_id: u64,
    pub lane: u8,
    pub position_ft: f64,
    pub speed_ftps: f64,
}

/// Writes samples (expected sorted by time, then vehicle id). Time is
/// printed with one decimal; positions and speeds use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(samples: &[TrajectorySample], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{:.1},{},{},{},{}",
            s.run_id, s.time_s, s.vehicle_id, s.lane, s.position_ft, s.speed_ftps
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_csv(samples: &[TrajectorySample], path: &Path) -> Result<()> {
    let file = fs::File::create(path)?;
    write_csv(samples, std::io::BufWriter::new(file))
}

pub fn load_csv(path: &Path) -> Result<Vec<TrajectorySample>> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let n = k + 1;
        if k == 0 {
            if line.trim() != CSV_HEADER {
                return Err(err(n, format!("expected header `{CSV_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(n, format!("expected 6 fields, found {}", f.len())));
        }
        let parse_f = |i: usize| f[i].trim().parse::<f64>().map_err(|e| err(n, format!("field {}: {e}", i + 1)));
        let parse_u = |i: usize| f[i].trim().parse::<u64>().map_err(|e| err(n, format!("field {}: {e}", i + 1)));
        let lane = f[3].trim().parse::<u8>().map_err(|e| err(n, format!("field 4: {e}")))?;
        out.push(TrajectorySample {
            run_id: parse_u(0)?,
            time_s: parse_f(1)?,
            vehicle_id: parse_u(2)?,
            lane,
            position_ft: parse_f(4)?,
            speed_ftps: parse_f(5)?,
        });
    }
    Ok(out)
}
