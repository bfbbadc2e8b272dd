//! Plain-text instance files.
//!
//! ```text
//! N beta epsilon
//! x_1 y_1
//! ...
//! x_N y_N
//! ```
//!
//! Fields are whitespace separated. Blank lines and lines starting with `#`
//! are ignored. Numbers are written with Rust's shortest round-trip formatting,
//! so a write/read cycle reproduces every coordinate bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{PackingInstance, PathLossModel, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub positions: Vec<Point>,
    pub beta: f64,
    pub epsilon: f64,
}

impl InstanceFile {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.positions.len(), self.beta, self.epsilon);
        for p in &self.positions {
            // Writing into a String cannot fail.
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        out
    }

    pub fn instance(&self) -> Result<PackingInstance> {
        PackingInstance::from_positions(&self.positions, PathLossModel::new(self.beta)?, self.epsilon)
    }
}

fn parse_f64(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what}: cannot parse {token:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{what}: {token:?} is not finite"),
        });
    }
    Ok(v)
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header `N beta epsilon`".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line: hline,
            message: format!("header needs 3 fields, found {}", fields.len()),
        });
    }
    let n: usize = fields[0].parse().map_err(|_| Error::Parse {
        line: hline,
        message: format!("node count {:?} is not a non-negative integer", fields[0]),
    })?;
    let beta = parse_f64(fields[1], hline, "beta")?;
    let epsilon = parse_f64(fields[2], hline, "epsilon")?;

    let mut positions = Vec::new();
    for (lineno, line) in lines {
        if positions.len() == n {
            return Err(Error::Parse {
                line: lineno,
                message: format!("more than the declared {n} coordinate lines"),
            });
        }
        let coords: Vec<&str> = line.split_whitespace().collect();
        if coords.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("coordinate line needs 2 fields, found {}", coords.len()),
            });
        }
        positions.push(Point::new(
            parse_f64(coords[0], lineno, "x")?,
            parse_f64(coords[1], lineno, "y")?,
        ));
    }
    if positions.len() != n {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: format!("declared {n} nodes but found {}", positions.len()),
        });
    }
    Ok(InstanceFile {
        positions,
        beta,
        epsilon,
    })
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<InstanceFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text)
}

pub fn write_instance(file: &InstanceFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_text()).map_err(|e| Error::io(path, e))
}
