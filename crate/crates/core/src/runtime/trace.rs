use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::runtime::{RoundTrace, RunSummary};

pub const TRACE_HEADER: &str = "round,gap,kkt_grad,kkt_cons,kkt_dual,Q,down_vecs,up_vecs,wall_ns";

/// Writes the per-round metrics as CSV. The `Q` field is left empty when the
/// Lyapunov value was not computed for that round.
pub fn write_trace_csv(path: &Path, traces: &[RoundTrace]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRACE_HEADER}")?;
    for t in traces {
        let q = t.q.map(|q| q.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.round,
            t.gap,
            t.kkt.grad,
            t.kkt.consensus,
            t.kkt.dual_sum,
            q,
            t.down_vecs,
            t.up_vecs,
            t.wall_ns
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the run summary (embedding the resolved config) as pretty JSON.
pub fn write_summary_json(path: &Path, summary: &RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}
