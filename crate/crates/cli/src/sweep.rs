//! Parameter sweeps: one command evaluated over a 1D grid, in parallel.

use rayon::prelude::*;

use crate::commands::{self, columns, COMMANDS};
use crate::params::{GridSpec, Params};
use crate::{CliError, UsageError};

pub struct SweepReport {
    pub csv: String,
    pub rows: usize,
    pub failed: usize,
}

/// Fold trailing `--key value` pairs (or bare `--flag`) into `params`.
pub fn pass_through(params: &mut Params, rest: &[String]) -> Result<(), UsageError> {
    let mut it = rest.iter().peekable();
    while let Some(tok) = it.next() {
        let key = tok.strip_prefix("--").ok_or_else(|| UsageError(format!("unexpected sweep argument {tok:?}")))?;
        if let Some((k, v)) = key.split_once('=') {
            params.set(k, v);
            continue;
        }
        match it.peek() {
            Some(v) if !v.starts_with("--") => {
                params.set(key, v);
                it.next();
            }
            _ => params.set(key, true),
        }
    }
    Ok(())
}

fn cell(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

pub fn run(spec: &GridSpec, cmd: &str, base: &Params, jobs: Option<usize>) -> Result<SweepReport, CliError> {
    if !COMMANDS.contains(&cmd) {
        return Err(CliError::Usage(format!("cannot sweep {cmd:?}; expected one of {}", COMMANDS.join(", "))));
    }
    let cols = columns(cmd);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let lines: Vec<(bool, String)> = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&v| {
                let mut p = base.clone();
                p.set(&spec.name, v);
                let value = conelab_core::ode_engine::fmt17(v);
                match commands::run(cmd, &p) {
                    Ok(out) => {
                        let mut fields = vec![value, "ok".to_string()];
                        fields.extend(out.row.iter().map(|s| cell(s)));
                        (true, fields.join(","))
                    }
                    Err(e) => {
                        let mut fields = vec![value, cell(&format!("error: {e}"))];
                        fields.extend(std::iter::repeat_n(String::new(), cols.len()));
                        (false, fields.join(","))
                    }
                }
            })
            .collect()
    });
    let mut csv = format!("{},status", spec.name);
    for c in cols {
        csv.push(',');
        csv.push_str(c);
    }
    csv.push('\n');
    for (_, line) in &lines {
        csv.push_str(line);
        csv.push('\n');
    }
    let failed = lines.iter().filter(|(ok, _)| !ok).count();
    Ok(SweepReport { csv, rows: lines.len(), failed })
}
