use super::csvio::{SummaryRow, TraceRow};
use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// Per-checkpoint order statistics across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSummary {
    pub passes: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at position `(len - 1) q`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 >= sorted.len() {
        return sorted[lo];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    if a == b {
        a
    } else if b.is_infinite() {
        b
    } else {
        a + frac * (b - a)
    }
}

/// Median and 10%/90% quantiles of the checkpoint objectives. Every trace
/// must carry the same pass grid.
pub fn summarize_quantiles(traces: &[RunTrace]) -> Result<QuantileSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidParameter("no traces to summarize".into()))?;
    let passes: Vec<f64> = first.checkpoints.iter().map(|c| c.pass).collect();
    for t in traces {
        let same = t.checkpoints.len() == passes.len() && t.checkpoints.iter().zip(&passes).all(|(c, p)| c.pass == *p);
        if !same {
            return Err(Error::Misaligned(format!(
                "trace {} (seed {}) has {} checkpoints, expected {}",
                t.method,
                t.seed,
                t.checkpoints.len(),
                passes.len()
            )));
        }
    }
    let mut out = QuantileSummary {
        passes: passes.clone(),
        median: Vec::with_capacity(passes.len()),
        q10: Vec::with_capacity(passes.len()),
        q90: Vec::with_capacity(passes.len()),
    };
    let mut column = Vec::with_capacity(traces.len());
    for j in 0..passes.len() {
        column.clear();
        column.extend(traces.iter().map(|t| t.checkpoints[j].objective));
        column.sort_by(f64::total_cmp);
        out.median.push(quantile(&column, 0.5));
        out.q10.push(quantile(&column, 0.1));
        out.q90.push(quantile(&column, 0.9));
    }
    Ok(out)
}

/// Smallest objective recorded by any trace; the stand-in for `f(x*)`.
pub fn gap_reference(traces: &[RunTrace]) -> Result<f64> {
    traces
        .iter()
        .filter_map(RunTrace::best_objective)
        .reduce(f64::min)
        .ok_or_else(|| Error::InvalidParameter("no finite objective to use as gap reference".into()))
}

/// Copy of `trace` with objectives replaced by gaps to `reference`, padded
/// with `+inf` up to `passes` when the run was cut short.
pub(crate) fn gap_trace(trace: &RunTrace, reference: f64, passes: &[f64]) -> RunTrace {
    let mut out = trace.clone();
    for c in &mut out.checkpoints {
        c.objective -= reference;
    }
    for &p in passes.iter().skip(out.checkpoints.len()) {
        out.checkpoints.push(crate::trace::Checkpoint {
            pass: p,
            objective: f64::INFINITY,
            grad_map_norm: f64::NAN,
        });
    }
    out
}

/// Quantile rows for each `(experiment_id, method)` group of trace rows, in
/// order of first appearance. Replications are padded to the group's longest
/// pass grid with `+inf` gaps.
pub fn summarize_rows(rows: &[TraceRow]) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<((&str, &str), Vec<RunTrace>)> = Vec::new();
    for r in rows {
        let key = (r.experiment_id.as_str(), r.method.as_str());
        let pos = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let traces = &mut groups[pos].1;
        let idx = match traces.iter().position(|t| t.seed == r.rep as u64) {
            Some(i) => i,
            None => {
                traces.push(RunTrace::new(r.method.clone(), r.alpha0, r.beta, r.rep as u64));
                traces.len() - 1
            }
        };
        let t = &mut traces[idx];
        if t.checkpoints.last().is_some_and(|c| c.pass >= r.pass) {
            return Err(Error::Misaligned(format!(
                "{} rep {} has non-increasing pass {}",
                r.method, r.rep, r.pass
            )));
        }
        t.push(r.pass, r.gap, r.grad_map_norm);
    }

    let mut out = Vec::new();
    for ((id, method), traces) in groups {
        let grid: Vec<f64> = traces
            .iter()
            .max_by_key(|t| t.checkpoints.len())
            .map(|t| t.checkpoints.iter().map(|c| c.pass).collect())
            .unwrap_or_default();
        let padded: Vec<RunTrace> = traces.iter().map(|t| gap_trace(t, 0.0, &grid)).collect();
        let s = summarize_quantiles(&padded)?;
        for j in 0..s.passes.len() {
            out.push(SummaryRow {
                experiment_id: id.to_string(),
                method: method.to_string(),
                pass: s.passes[j],
                median_gap: s.median[j],
                q10_gap: s.q10[j],
                q90_gap: s.q90[j],
            });
        }
    }
    Ok(out)
}
