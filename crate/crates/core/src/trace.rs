//! Line-delimited episode traces.
//!
//! ```text
//! {"kind":"header","format":"sct-trace","version":1,"episode_id":"object:clean/0","seed":0}
//! {"kind":"step","step":0,"observation":"9f2c...","pose":{...},"proposed":[...],"executed":[...],...}
//! {"kind":"outcome","outcome":"success","steps":31}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::control::{EpisodeTrace, Outcome, StepRecord};
use crate::error::{Error, Result};

pub const TRACE_FORMAT: &str = "sct-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Header {
        format: String,
        version: u32,
        episode_id: String,
        seed: u64,
    },
    Step(StepRecord),
    Outcome {
        outcome: Outcome,
        steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

fn json(line: &Line) -> Result<String> {
    serde_json::to_string(line).map_err(|e| Error::Numeric(e.to_string()))
}

pub fn write_trace(out: &mut impl Write, trace: &EpisodeTrace) -> Result<()> {
    let header = Line::Header {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        episode_id: trace.episode_id.clone(),
        seed: trace.seed,
    };
    writeln!(out, "{}", json(&header)?)?;
    for s in &trace.steps {
        writeln!(out, "{}", json(&Line::Step(s.clone()))?)?;
    }
    let end = Line::Outcome {
        outcome: trace.outcome,
        steps: trace.steps.len(),
        error: trace.error.clone(),
    };
    writeln!(out, "{}", json(&end)?)?;
    Ok(())
}

pub fn trace_to_string(trace: &EpisodeTrace) -> Result<String> {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace)?;
    Ok(String::from_utf8(buf).expect("json is utf-8"))
}

/// Reads every trace in a stream; several traces may be concatenated.
pub fn read_traces(input: impl BufRead) -> Result<Vec<EpisodeTrace>> {
    let mut traces = Vec::new();
    let mut open: Option<EpisodeTrace> = None;
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        match parsed {
            Line::Header {
                format,
                version,
                episode_id,
                seed,
            } => {
                if format != TRACE_FORMAT || version != TRACE_VERSION {
                    return Err(Error::parse(lineno, format!("unsupported trace format {format} v{version}")));
                }
                if open.is_some() {
                    return Err(Error::parse(lineno, "header before the previous trace ended"));
                }
                open = Some(EpisodeTrace {
                    episode_id,
                    seed,
                    steps: Vec::new(),
                    outcome: Outcome::Timeout,
                    error: None,
                });
            }
            Line::Step(step) => match open.as_mut() {
                Some(t) => t.steps.push(step),
                None => return Err(Error::parse(lineno, "step record outside a trace")),
            },
            Line::Outcome { outcome, steps, error } => {
                let mut t = open.take().ok_or_else(|| Error::parse(lineno, "outcome outside a trace"))?;
                if t.steps.len() != steps {
                    return Err(Error::parse(
                        lineno,
                        format!("outcome claims {steps} steps, trace holds {}", t.steps.len()),
                    ));
                }
                t.outcome = outcome;
                t.error = error;
                traces.push(t);
            }
        }
    }
    if open.is_some() {
        return Err(Error::parse(0, "trace ended without an outcome record"));
    }
    Ok(traces)
}
