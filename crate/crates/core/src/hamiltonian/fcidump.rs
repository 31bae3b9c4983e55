//! FCIDUMP reading and writing.
//!
//! The header is a Fortran namelist (`&FCI NORB=..,NELEC=..,MS2=..` closed by
//! `&END` or `/`). Each following line is `value i j k l` with 1-based
//! spatial indices: `i j 0 0` is a one-electron integral, `0 0 0 0` the core
//! energy and anything else the chemist-notation integral `(ij|kl)`. Lines
//! `value i 0 0 0` (orbital energies) are skipped, and so is ORBSYM.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use super::IntegralSet;
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_float(token: &str, line: usize) -> Result<f64> {
    token
        .replace(['D', 'd'], "E")
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("malformed number {token:?}")))
}

/// Parses FCIDUMP text.
pub fn parse_fcidump(text: &str) -> Result<IntegralSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut header = String::new();
    let mut header_end = 0;
    let mut closed = false;
    for (no, line) in lines.by_ref() {
        header_end = no;
        let trimmed = line.trim();
        let upper = trimmed.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END") {
            header.push_str(&trimmed[..pos]);
            closed = true;
            break;
        }
        if trimmed == "/" || trimmed.ends_with('/') {
            header.push_str(trimmed.trim_end_matches('/'));
            closed = true;
            break;
        }
        header.push_str(trimmed);
        header.push(',');
    }
    if !closed {
        return Err(parse_err(header_end, "namelist header is not terminated by &END or /"));
    }

    let fields = parse_namelist(&header);
    let get = |key: &str| -> Result<Option<i64>> {
        match fields.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<i64>()
                .map(Some)
                .map_err(|_| parse_err(header_end, format!("{key} is not an integer: {v:?}"))),
        }
    };
    let norb = get("NORB")?.ok_or_else(|| parse_err(header_end, "header is missing NORB"))?;
    let nelec = get("NELEC")?.ok_or_else(|| parse_err(header_end, "header is missing NELEC"))?;
    let ms2 = get("MS2")?.unwrap_or(0);
    if norb <= 0 || nelec < 0 {
        return Err(parse_err(header_end, format!("invalid NORB={norb} or NELEC={nelec}")));
    }
    let norb = norb as usize;
    let mut ints = IntegralSet::zeros(norb, nelec as usize, ms2 as i32);

    for (no, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 5 {
            return Err(parse_err(no, format!("expected `value i j k l`, got {} fields", tokens.len())));
        }
        let value = parse_float(tokens[0], no)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&tokens[1..]) {
            let v: usize = tok.parse().map_err(|_| parse_err(no, format!("malformed index {tok:?}")))?;
            if v > norb {
                return Err(parse_err(no, format!("index {v} out of range for NORB={norb}")));
            }
            *slot = v;
        }
        match idx {
            [0, 0, 0, 0] => ints.core_energy = value,
            [i, 0, 0, 0] if i > 0 => {}
            [i, j, 0, 0] if i > 0 && j > 0 => ints.set_h(i - 1, j - 1, value),
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                ints.set_eri(i - 1, j - 1, k - 1, l - 1, value)
            }
            _ => return Err(parse_err(no, format!("invalid index pattern {idx:?}"))),
        }
    }
    Ok(ints)
}

/// Splits `&FCI NORB=4,NELEC=4,ORBSYM=1,1,1,1,` into upper-cased key/value
/// pairs. Continuation values of list-valued keys are dropped.
fn parse_namelist(header: &str) -> HashMap<String, String> {
    let body = header.trim_start();
    let body = match body.get(..4) {
        Some(p) if p.eq_ignore_ascii_case("&FCI") => &body[4..],
        _ => body,
    };
    // Glue `KEY = value` together, then split on commas and whitespace.
    let mut glued = String::with_capacity(body.len());
    let mut after_eq = false;
    for ch in body.chars() {
        if ch == '=' {
            glued.truncate(glued.trim_end().len());
            glued.push('=');
            after_eq = true;
        } else if !(after_eq && ch.is_whitespace()) {
            glued.push(ch);
            after_eq = false;
        }
    }
    let mut out = HashMap::new();
    for item in glued.split(|c: char| c == ',' || c.is_whitespace()) {
        if let Some((k, v)) = item.split_once('=') {
            out.insert(k.trim().to_ascii_uppercase(), v.trim().to_string());
        }
    }
    out
}

pub fn read_fcidump(path: impl AsRef<Path>) -> Result<IntegralSet> {
    let mut text = String::new();
    std::fs::File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_fcidump(&text)
}

fn fmt_value(v: f64) -> String {
    format!("{v:.14e}")
}

/// Serializes in canonical order: two-electron integrals with `i >= j`,
/// `k >= l`, `ij >= kl`, then one-electron integrals with `i >= j`, then the
/// core energy. Exact zeros are omitted.
pub fn write_fcidump(ints: &IntegralSet) -> String {
    let n = ints.norb;
    let mut out = String::new();
    let _ = writeln!(out, "&FCI NORB={},NELEC={},MS2={},", n, ints.n_electrons, ints.ms2);
    let _ = writeln!(out, " ORBSYM={}", "1,".repeat(n));
    let _ = writeln!(out, " ISYM=1,");
    let _ = writeln!(out, "&END");
    for i in 0..n {
        for j in 0..=i {
            let ij = i * (i + 1) / 2 + j;
            for k in 0..n {
                for l in 0..=k {
                    if k * (k + 1) / 2 + l > ij {
                        continue;
                    }
                    let v = ints.eri(i, j, k, l);
                    if v != 0.0 {
                        let _ = writeln!(out, "{} {} {} {} {}", fmt_value(v), i + 1, j + 1, k + 1, l + 1);
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = ints.h[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{} {} {} 0 0", fmt_value(v), i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(out, "{} 0 0 0 0", fmt_value(ints.core_energy));
    out
}
