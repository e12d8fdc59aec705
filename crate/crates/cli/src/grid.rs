//! Grid syntax shared by every list-valued option.
//!
//! - `a,b,c` — an explicit list;
//! - `start:stop:xF` — `start, start·F, start·F², …` up to `stop`;
//! - `start:stop:nK` — `K` geometrically spaced points including both ends.

use crate::error::{CliError, Result};

/// Relative slack when deciding whether the last multiple reaches `stop`.
const END_SLACK: f64 = 1e-9;

pub fn parse_real_grid(key: &str, text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let bad = |msg: String| CliError::invalid(key, msg);
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad(format!(
                "expected start:stop:xFactor or start:stop:nCount, got `{text}`"
            )));
        }
        let start: f64 = parts[0]
            .parse()
            .map_err(|_| bad(format!("bad start `{}`", parts[0])))?;
        let stop: f64 = parts[1]
            .parse()
            .map_err(|_| bad(format!("bad stop `{}`", parts[1])))?;
        if !(start > 0.0 && stop >= start && stop.is_finite()) {
            return Err(bad(format!("need 0 < start <= stop, got {start}:{stop}")));
        }
        if let Some(f) = parts[2].strip_prefix('x') {
            let factor: f64 = f.parse().map_err(|_| bad(format!("bad factor `{f}`")))?;
            if !(factor > 1.0 && factor.is_finite()) {
                return Err(bad(format!("factor must exceed 1, got {factor}")));
            }
            let mut out = Vec::new();
            let mut j = 0;
            loop {
                let v = start * factor.powi(j);
                if v > stop * (1.0 + END_SLACK) {
                    break;
                }
                out.push(v.min(stop));
                j += 1;
            }
            out
        } else if let Some(c) = parts[2].strip_prefix('n') {
            let count: usize = c.parse().map_err(|_| bad(format!("bad count `{c}`")))?;
            match count {
                0 => return Err(bad("count must be positive".into())),
                1 => vec![start],
                _ => {
                    let ratio = (stop / start).powf(1.0 / (count - 1) as f64);
                    let mut out: Vec<f64> = (0..count - 1).map(|j| start * ratio.powi(j as i32)).collect();
                    out.push(stop);
                    out
                }
            }
        } else {
            return Err(bad(format!("step must be xFactor or nCount, got `{}`", parts[2])));
        }
    } else {
        text.split(',')
            .map(|p| {
                let p = p.trim();
                p.parse::<f64>()
                    .map_err(|_| bad(format!("`{p}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty grid".into()));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
        return Err(bad(format!("non-finite grid value {v}")));
    }
    Ok(grid)
}

/// Integer grid; geometric steps are rounded to the nearest integer and
/// deduplicated.
pub fn parse_int_grid(key: &str, text: &str) -> Result<Vec<usize>> {
    let reals = parse_real_grid(key, text)?;
    let mut out: Vec<usize> = Vec::with_capacity(reals.len());
    for v in reals {
        if v < 0.0 {
            return Err(CliError::invalid(key, format!("negative value {v}")));
        }
        let r = v.round() as usize;
        if !text.contains(':') && (v - r as f64).abs() > 0.0 {
            return Err(CliError::invalid(key, format!("{v} is not an integer")));
        }
        if out.last() != Some(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Whether consecutive ratios agree to within 1%.
pub fn is_geometric(values: &[f64]) -> bool {
    if values.len() < 3 || values.iter().any(|v| *v <= 0.0) {
        return values.len() < 3;
    }
    let r0 = values[1] / values[0];
    values.windows(2).all(|w| ((w[1] / w[0]) / r0 - 1.0).abs() < 0.01)
}
