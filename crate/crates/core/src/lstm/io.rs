//! Plain-text model file. Values use Rust's shortest round-trip float
//! formatting, so a write/read cycle is exact.
//!
//! ```text
//! factorcast-lstm v1
//! input_size 6
//! hidden_size 16
//! scaler_mean <d values>
//! scaler_std <d values>
//! params <n>
//! <n lines, one value each, in LstmParams::to_flat order>
//! ```

use std::fmt::Write as _;

use super::cell::LstmParams;
use super::data::Standardizer;
use super::train::LstmModel;
use super::LstmError;

pub const FORMAT_TAG: &str = "factorcast-lstm v1";

pub fn write_model(model: &LstmModel) -> String {
    let p = &model.params;
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    let mut out = String::new();
    writeln!(out, "{FORMAT_TAG}").unwrap();
    writeln!(out, "input_size {}", p.input_size()).unwrap();
    writeln!(out, "hidden_size {}", p.hidden_size()).unwrap();
    writeln!(out, "scaler_mean {}", join(&model.scaler.mean)).unwrap();
    writeln!(out, "scaler_std {}", join(&model.scaler.std)).unwrap();
    let flat = p.to_flat();
    writeln!(out, "params {}", flat.len()).unwrap();
    for v in flat {
        writeln!(out, "{v:?}").unwrap();
    }
    out
}

fn fmt_err(msg: impl Into<String>) -> LstmError {
    LstmError::Format(msg.into())
}

fn keyed<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str, LstmError> {
    let line = line.ok_or_else(|| fmt_err(format!("missing `{key}` line")))?;
    match line.split_once(' ') {
        Some((k, rest)) if k == key => Ok(rest.trim()),
        _ if line.trim() == key => Ok(""),
        _ => Err(fmt_err(format!("expected `{key}`, found `{line}`"))),
    }
}

fn parse_f64(s: &str) -> Result<f64, LstmError> {
    let v: f64 = s.trim().parse().map_err(|_| fmt_err(format!("bad number `{s}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fmt_err(format!("non-finite value `{s}`")))
    }
}

fn parse_usize(s: &str) -> Result<usize, LstmError> {
    s.parse().map_err(|_| fmt_err(format!("bad integer `{s}`")))
}

pub fn read_model(text: &str) -> Result<LstmModel, LstmError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(tag) if tag.trim() == FORMAT_TAG => {}
        Some(tag) => return Err(fmt_err(format!("unsupported format tag `{tag}`"))),
        None => return Err(fmt_err("empty file")),
    }
    let d = parse_usize(keyed(lines.next(), "input_size")?)?;
    let h = parse_usize(keyed(lines.next(), "hidden_size")?)?;
    let vector = |s: &str| s.split_whitespace().map(parse_f64).collect::<Result<Vec<_>, _>>();
    let mean = vector(keyed(lines.next(), "scaler_mean")?)?;
    let std = vector(keyed(lines.next(), "scaler_std")?)?;
    if mean.len() != d || std.len() != d {
        return Err(fmt_err("scaler length differs from input_size"));
    }
    let n = parse_usize(keyed(lines.next(), "params")?)?;
    let mut params = LstmParams::zeros(d, h);
    if n != params.n_params() {
        return Err(fmt_err(format!(
            "{n} parameters declared, {} expected for input {d} hidden {h}",
            params.n_params()
        )));
    }
    let flat = lines
        .by_ref()
        .take(n)
        .map(parse_f64)
        .collect::<Result<Vec<_>, _>>()?;
    if flat.len() != n {
        return Err(fmt_err(format!("{} of {n} parameter values present", flat.len())));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(fmt_err("trailing content after parameters"));
    }
    params.set_flat(&flat);
    Ok(LstmModel {
        params,
        scaler: Standardizer { mean, std },
    })
}
