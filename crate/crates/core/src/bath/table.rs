//! Plain-text mode table.
//!
//! ```text
//! # s=0.5 kappa=6.3661977236758138e-3 omega_c=50 omega_ph=1 beta=5 K=24 residual=7.1e-4
//! <d_re> <d_im> <omega> <gamma>
//! ...
//! ```
//! Numbers are written with 17 significant digits so that a save/load cycle
//! reproduces every f64 bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::modes::{BathModes, Mode};
use super::spec::BathSpec;
use crate::error::{HeomError, Result};

/// Mode set together with the reservoir it was fitted for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTable {
    pub spec: BathSpec,
    pub modes: BathModes,
    pub residual: f64,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_modes(table: &ModeTable) -> String {
    let sp = &table.spec;
    let mut out = format!(
        "# s={} kappa={} omega_c={} omega_ph={} beta={} K={} residual={}\n",
        num(sp.s),
        num(sp.kappa),
        num(sp.omega_c),
        num(sp.omega_ph),
        num(sp.beta),
        table.modes.len(),
        num(table.residual)
    );
    for m in &table.modes.modes {
        let _ = writeln!(out, "{} {} {} {}", num(m.d_re), num(m.d_im), num(m.omega), num(m.gamma));
    }
    out
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|e| HeomError::Parse {
        line,
        message: format!("bad {what} `{field}`: {e}"),
    })
}

pub fn read_modes(text: &str) -> Result<ModeTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(HeomError::Parse {
        line: 1,
        message: "empty mode table".into(),
    })?;
    let header = header.trim().strip_prefix('#').ok_or(HeomError::Parse {
        line: 1,
        message: "header must start with `#`".into(),
    })?;
    let mut fields = std::collections::HashMap::new();
    for item in header.split_whitespace() {
        let (k, v) = item.split_once('=').ok_or(HeomError::Parse {
            line: 1,
            message: format!("expected key=value, got `{item}`"),
        })?;
        fields.insert(k, v);
    }
    let get = |key: &str| -> Result<f64> {
        let v = fields.get(key).ok_or(HeomError::Parse {
            line: 1,
            message: format!("missing header field `{key}`"),
        })?;
        parse_f64(v, 1, key)
    };
    let spec = BathSpec {
        s: get("s")?,
        kappa: get("kappa")?,
        omega_c: get("omega_c")?,
        omega_ph: get("omega_ph")?,
        beta: get("beta")?,
    };
    let k_declared = get("K")?;
    let residual = get("residual")?;

    let mut modes = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(HeomError::Parse {
                line: lineno,
                message: format!("expected 4 fields, found {}", cols.len()),
            });
        }
        let mode = Mode {
            d_re: parse_f64(cols[0], lineno, "d_re")?,
            d_im: parse_f64(cols[1], lineno, "d_im")?,
            omega: parse_f64(cols[2], lineno, "omega")?,
            gamma: parse_f64(cols[3], lineno, "gamma")?,
        };
        if !(mode.gamma > 0.0) {
            return Err(HeomError::Parse {
                line: lineno,
                message: format!("gamma must be positive, got {}", mode.gamma),
            });
        }
        modes.push(mode);
    }
    if modes.is_empty() {
        return Err(HeomError::Parse {
            line: 2,
            message: "mode table lists no modes (K >= 1 required)".into(),
        });
    }
    if k_declared != modes.len() as f64 {
        return Err(HeomError::Parse {
            line: 1,
            message: format!("header declares K={k_declared} but {} modes follow", modes.len()),
        });
    }
    Ok(ModeTable { spec, modes: BathModes { modes }, residual })
}

pub fn save_modes(table: &ModeTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_modes(table))?;
    Ok(())
}

pub fn load_modes(path: impl AsRef<Path>) -> Result<ModeTable> {
    read_modes(&fs::read_to_string(path)?)
}
