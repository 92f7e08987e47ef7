//! JSONL dataset files and CSV effect reports.
//!
//! One record per line: `{"z":0,"s":[...],"a":[...],"r":0.0,"s2":[...],"t":0}`.
//! Effect CSVs use the header `kind,step,value,stderr,n`; vector effects write
//! one row per component with the component index appended to the kind.

use std::io::{BufRead, Write};

use super::{
    CausalError, DecompositionReport, EffectEstimate, EffectKind, TransitionRecord,
    TrajectoryDataset,
};

pub fn write_jsonl<W: Write>(data: &TrajectoryDataset, mut out: W) -> Result<(), CausalError> {
    for rec in &data.records {
        let line = serde_json::to_string(rec).expect("records serialize");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a JSONL dataset, inferring dimensions from the first record.
pub fn read_jsonl<R: BufRead>(input: R, discount: f64) -> Result<TrajectoryDataset, CausalError> {
    let mut records: Vec<TransitionRecord> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TransitionRecord =
            serde_json::from_str(&line).map_err(|e| CausalError::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(rec);
    }
    let (state_dim, action_dim) = match records.first() {
        Some(r) => (r.state.len(), r.action.len()),
        None => return Err(CausalError::EmptyDataset),
    };
    TrajectoryDataset::new(records, state_dim, action_dim, discount)
}

pub const EFFECT_CSV_HEADER: &str = "kind,step,value,stderr,n";

fn effect_rows(est: &EffectEstimate, step: Option<usize>, out: &mut String) {
    let step_str = step.map(|s| s.to_string()).unwrap_or_default();
    if est.value.len() == 1 {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            est.kind.as_str(),
            step_str,
            est.value[0],
            est.stderr[0],
            est.n_effective
        ));
    } else {
        for (d, (v, se)) in est.value.iter().zip(&est.stderr).enumerate() {
            out.push_str(&format!(
                "{}_{},{},{},{},{}\n",
                est.kind.as_str(),
                d,
                step_str,
                v,
                se,
                est.n_effective
            ));
        }
    }
}

pub fn write_effects_csv(estimates: &[(Option<usize>, EffectEstimate)]) -> String {
    let mut out = String::from(EFFECT_CSV_HEADER);
    out.push('\n');
    for (step, est) in estimates {
        effect_rows(est, *step, &mut out);
    }
    out
}

pub fn write_report_csv(report: &DecompositionReport) -> String {
    let mut rows = Vec::new();
    for step in &report.per_step {
        for (kind, value) in [
            (EffectKind::TeR, step.te_r),
            (EffectKind::NdeR, step.nde_r),
            (EffectKind::NieR, step.nie_r),
        ] {
            rows.push((
                Some(step.step),
                EffectEstimate {
                    kind,
                    value: vec![value],
                    stderr: vec![0.0],
                    n_effective: step.n_records,
                },
            ));
        }
    }
    let total: usize = report.per_step.iter().map(|s| s.n_records).sum();
    rows.push((
        None,
        EffectEstimate {
            kind: EffectKind::TeG,
            value: vec![report.te_g],
            stderr: vec![0.0],
            n_effective: total,
        },
    ));
    write_effects_csv(&rows)
}
