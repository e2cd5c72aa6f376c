//! CSV and JSON writers with fixed column order.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

use super::{ConcatOutput, Curve, ScalingOutput, SweepRecord};

fn alpha_header(dim: usize) -> impl Iterator<Item = String> {
    (1..=dim).map(|i| format!("alpha_{i}"))
}

fn num(x: f64) -> String {
    x.to_string()
}

/// One row per record; wall time is left out so that the file is reproducible.
pub fn write_records_csv<W: Write>(records: &[SweepRecord], alpha_dim: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["run_id".to_string()];
    header.extend(alpha_header(alpha_dim));
    header.extend(
        ["delta_choice", "eps1", "eps2", "fidelity", "distance", "max_norm_drift", "degraded"].map(String::from),
    );
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![r.run_id.to_string()];
        row.extend(r.alpha.iter().copied().map(num));
        row.push(r.delta_choice.clone());
        row.extend([r.eps1, r.eps2, r.fidelity, r.distance, r.max_norm_drift].map(num));
        row.push(r.degraded.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// `run_id, alpha_1.., eps1, eps2, s, fid, log10_one_minus_fid, distance, norm_drift`.
pub fn write_curves_csv<W: Write>(curves: &[Curve], alpha_dim: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["run_id".to_string()];
    header.extend(alpha_header(alpha_dim));
    header.extend(["eps1", "eps2", "s", "fid", "log10_one_minus_fid", "distance", "norm_drift"].map(String::from));
    out.write_record(&header)?;
    for c in curves {
        for i in 0..c.s.len() {
            let mut row = vec![c.run_id.to_string()];
            row.extend(c.alpha.iter().copied().map(num));
            let gap = (1.0 - c.fid[i]).max(f64::MIN_POSITIVE).log10();
            row.extend([c.eps1, c.eps2, c.s[i], c.fid[i], gap, c.distance[i], c.norm_drift[i]].map(num));
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `s, segment, pop_1, .., pop_n`; `segment` is 1-based.
pub fn write_populations_csv<W: Write>(c: &ConcatOutput, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let n = c.populations.first().map_or(0, Vec::len);
    let mut header = vec!["s".to_string(), "segment".to_string()];
    header.extend((1..=n).map(|j| format!("pop_{j}")));
    out.write_record(&header)?;
    for (s, pops) in c.s.iter().zip(&c.populations) {
        let segment = 1 + c.breakpoints.iter().filter(|&&b| *s > b).count();
        let mut row = vec![num(*s), segment.to_string()];
        row.extend(pops.iter().copied().map(num));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Records followed by no fit; the fit goes to JSON or the terminal.
pub fn write_scaling_csv<W: Write>(s: &ScalingOutput, alpha_dim: usize, w: W) -> Result<()> {
    write_records_csv(&s.records, alpha_dim, w)
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
