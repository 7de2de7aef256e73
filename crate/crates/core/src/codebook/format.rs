//! Text codebook file format.
//!
//! ```text
//! RISCB v1 kind=<kind> M=<int> N=<int> states=<continuous|k-bit>
//! <index>,<theta_deg>,<phi_deg>,<payload>
//! ```
//!
//! Angles are printed with six decimals. The payload is either comma-separated
//! phases in radians within `[0, 2π)` (nine decimals, row-major by `(m, n)`) or, for `k-bit`
//! files, the hex-packed state indices of the canonical uniform k-bit state
//! set (see [`crate::packing`]). DFT codebooks carry their bin pair `(k_z, k_y)`
//! in the two angle columns. Lines end with LF.
//!
//! The header does not record spacing or wavelength, so imported codebooks
//! carry a nominal half-wavelength geometry with unit wavelength; use
//! [`Codebook::with_geometry`] to rebind them.

use std::fmt::Write as _;

use crate::codebook::{Codebook, CodebookKind, Codeword, CodewordLabel};
use crate::error::{Error, Result};
use crate::geometry::{phase_of, PhaseStateSet, RisGeometry};
use crate::packing::{from_row_major, pack_hex, to_row_major, unpack_hex};
use crate::scalar::{cis, RisFloat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookFormat {
    /// Phases in radians.
    Continuous,
    /// Hex-packed indices into the uniform `bits`-bit state set.
    Discrete { bits: u32 },
}

impl<T: RisFloat> Codebook<T> {
    /// Rebinds the codebook to a geometry with the same element counts.
    pub fn with_geometry(mut self, geometry: RisGeometry<T>) -> Result<Self> {
        if (geometry.rows_z, geometry.cols_y) != (self.geometry.rows_z, self.geometry.cols_y) {
            return Err(Error::InvalidGeometry(format!(
                "codebook is {}x{}, geometry is {}x{}",
                self.geometry.rows_z, self.geometry.cols_y, geometry.rows_z, geometry.cols_y
            )));
        }
        self.geometry = geometry;
        Ok(self)
    }
}

fn fmt_fixed<T: RisFloat>(x: T, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, x.as_f64());
    // "-0.000…" and "0.000…" are the same value; keep one spelling.
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn row_major_entries<T: RisFloat>(cb: &Codebook<T>, cw: &Codeword<T>) -> Vec<num_complex::Complex<T>> {
    if cb.kind().is_full_surface() {
        to_row_major(&cw.entries, cb.geometry().rows_z, cb.geometry().cols_y)
    } else {
        cw.entries.clone()
    }
}

pub fn export_codebook<T: RisFloat>(cb: &Codebook<T>, format: CodebookFormat) -> Result<String> {
    let geom = cb.geometry();
    let states_tag = match format {
        CodebookFormat::Continuous => "continuous".to_string(),
        CodebookFormat::Discrete { bits } if (1..=8).contains(&bits) => format!("{bits}-bit"),
        CodebookFormat::Discrete { bits } => {
            return Err(Error::InvalidStates(format!("{bits}-bit packing not supported")));
        }
    };
    let mut out = String::new();
    writeln!(
        out,
        "RISCB v1 kind={} M={} N={} states={}",
        cb.kind(),
        geom.rows_z,
        geom.cols_y,
        states_tag
    )
    .unwrap();
    for (i, cw) in cb.codewords().iter().enumerate() {
        let (a, b) = match cw.label {
            CodewordLabel::Angle { theta, phi } => (fmt_fixed(theta.deg(), 6), fmt_fixed(phi.deg(), 6)),
            CodewordLabel::Zenith { theta } => (fmt_fixed(theta.deg(), 6), fmt_fixed(T::zero(), 6)),
            CodewordLabel::Dft { kz, ky } => (format!("{kz}.000000"), format!("{ky}.000000")),
        };
        let entries = row_major_entries(cb, cw);
        let payload = match format {
            CodebookFormat::Continuous => entries
                .iter()
                .map(|&c| fmt_fixed(phase_of(c), 9))
                .collect::<Vec<_>>()
                .join(","),
            CodebookFormat::Discrete { bits } => {
                let states = PhaseStateSet::<T>::k_bit(bits);
                let idx = entries
                    .iter()
                    .map(|&c| states.nearest_state(c))
                    .collect::<Result<Vec<_>>>()?;
                pack_hex(&idx, bits)
            }
        };
        writeln!(out, "{i},{a},{b},{payload}").unwrap();
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn header_field<'a>(tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    tok.and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| parse_err(1, format!("header: expected {key}=<value>")))
}

pub fn import_codebook<T: RisFloat>(text: &str) -> Result<Codebook<T>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(parse_err(1, "empty input"));
    }
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or_default();
    let mut toks = header.split(' ');
    if toks.next() != Some("RISCB") || toks.next() != Some("v1") {
        return Err(parse_err(1, "header must start with 'RISCB v1'"));
    }
    let kind_s = header_field(toks.next(), "kind")?;
    let kind = CodebookKind::parse(kind_s).ok_or_else(|| parse_err(1, format!("unknown kind '{kind_s}'")))?;
    let rows: usize = header_field(toks.next(), "M")?
        .parse()
        .map_err(|_| parse_err(1, "M is not an integer"))?;
    let cols: usize = header_field(toks.next(), "N")?
        .parse()
        .map_err(|_| parse_err(1, "N is not an integer"))?;
    let states_s = header_field(toks.next(), "states")?;
    if toks.next().is_some() {
        return Err(parse_err(1, "trailing header fields"));
    }
    let format = if states_s == "continuous" {
        CodebookFormat::Continuous
    } else {
        let bits = states_s
            .strip_suffix("-bit")
            .and_then(|b| b.parse::<u32>().ok())
            .filter(|b| (1..=8).contains(b))
            .ok_or_else(|| parse_err(1, format!("bad states '{states_s}'")))?;
        CodebookFormat::Discrete { bits }
    };
    let geometry = RisGeometry::half_wavelength(rows, cols, T::one()).map_err(|e| parse_err(1, e.to_string()))?;
    let len = kind.codeword_len(&geometry);

    let mut codewords = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let mut parts = line.splitn(4, ',');
        let index: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(lineno, "bad record index"))?;
        if index != i {
            return Err(parse_err(lineno, format!("record index {index}, expected {i}")));
        }
        let mut angle = |what: &str| -> Result<f64> {
            parts
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("bad {what}")))
        };
        let a = angle("theta")?;
        let b = angle("phi")?;
        let payload = parts.next().ok_or_else(|| parse_err(lineno, "missing payload"))?;
        let label = match kind {
            CodebookKind::Dft => {
                let as_bin = |v: f64| -> Result<usize> {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(parse_err(lineno, "DFT bins must be non-negative integers"))
                    }
                };
                CodewordLabel::Dft {
                    kz: as_bin(a)?,
                    ky: as_bin(b)?,
                }
            }
            CodebookKind::ZStage => CodewordLabel::Zenith {
                theta: T::of(a.to_radians()),
            },
            _ => CodewordLabel::Angle {
                theta: T::of(a.to_radians()),
                phi: T::of(b.to_radians()),
            },
        };
        let entries = match format {
            CodebookFormat::Continuous => {
                let phases = payload
                    .split(',')
                    .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| parse_err(lineno, "bad phase value"))?;
                if phases.len() != len {
                    return Err(parse_err(lineno, format!("{} phases, expected {len}", phases.len())));
                }
                phases.into_iter().map(|p| cis(T::of(p))).collect::<Vec<_>>()
            }
            CodebookFormat::Discrete { bits } => {
                let states = PhaseStateSet::<T>::k_bit(bits);
                let idx = unpack_hex(payload, len, bits, 1 << bits).map_err(|e| parse_err(lineno, e.to_string()))?;
                idx.into_iter().map(|k| states.states()[k].coefficient()).collect()
            }
        };
        let entries = if kind.is_full_surface() {
            from_row_major(&entries, rows, cols)
        } else {
            entries
        };
        codewords.push(Codeword { label, entries });
    }
    if codewords.is_empty() {
        return Err(parse_err(2, "codebook has no codewords"));
    }
    Codebook::new(kind, geometry, codewords)
}
