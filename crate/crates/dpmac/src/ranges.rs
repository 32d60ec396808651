//! Parameter lists: `v`, `v1,v2,...`, or inclusive ranges `start..end[:step]`.

use std::fmt::Display;
use std::str::FromStr;

/// Parses an integer list or range; the default step is 1.
pub fn parse_int_list(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        match part.split_once("..") {
            Some((start, rest)) => {
                let (end, step) = split_step(rest);
                let start: u64 = parse(start)?;
                let end: u64 = parse(end)?;
                let step: u64 = step.map(parse).transpose()?.unwrap_or(1);
                if step == 0 {
                    return Err(format!("zero step in `{part}`"));
                }
                if end < start {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend((start..=end).step_by(step as usize));
            }
            None => out.push(parse(part)?),
        }
    }
    Ok(out)
}

/// Parses a real list or range; ranges need an explicit step.
pub fn parse_real_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        match part.split_once("..") {
            Some((start, rest)) => {
                let (end, step) = split_step(rest);
                let start: f64 = parse(start)?;
                let end: f64 = parse(end)?;
                let step: f64 = match step {
                    Some(st) => parse(st)?,
                    None => return Err(format!("real range `{part}` needs a step, e.g. `{start}..{end}:0.01`")),
                };
                if !(step > 0.0) || end < start {
                    return Err(format!("empty range `{part}`"));
                }
                let count = ((end - start) / step + 1e-9).floor() as u64;
                out.extend((0..=count).map(|i| start + i as f64 * step));
            }
            None => out.push(parse(part)?),
        }
    }
    Ok(out)
}

fn split_step(rest: &str) -> (&str, Option<&str>) {
    match rest.split_once(':') {
        Some((end, step)) => (end, Some(step)),
        None => (rest, None),
    }
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.trim().parse().map_err(|e| format!("`{s}`: {e}"))
}
