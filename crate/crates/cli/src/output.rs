//! CSV artifacts of simulation runs.
//!
//! Layouts (one header row, then data):
//! - `trajectory.csv`: `t,x,p` for every recorded snapshot and grid node
//! - `norms.csv`: `t,l2,Ek,Ep,u` for every step
//! - `control.csv`: `t,u` for every step
//! - `diagnostics.csv`: `t,l2_p,l2_v,V1,V2,V,envelope,Ek,Ep` for every recorded snapshot;
//!   `l2_p` is empty for target runs and `envelope` is empty where the decay rate is not positive

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use ptstring::diagnostics::DiagnosticSample;
use ptstring::simulator::Trajectory;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_trajectory(dir: &Path, traj: &Trajectory<f64>) -> Result<()> {
    let mut w = writer(&dir.join("trajectory.csv"))?;
    w.write_record(["t", "x", "p"])?;
    for rec in &traj.records {
        let dx = rec.state.dx();
        for (i, p) in rec.state.values.iter().enumerate() {
            w.write_record([num(rec.state.t), num(dx * i as f64), num(*p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_norms(dir: &Path, traj: &Trajectory<f64>) -> Result<()> {
    let mut w = writer(&dir.join("norms.csv"))?;
    w.write_record(["t", "l2", "Ek", "Ep", "u"])?;
    for n in &traj.norms {
        w.write_record([num(n.t), num(n.l2), num(n.ek), num(n.ep), num(n.u)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_control(dir: &Path, traj: &Trajectory<f64>) -> Result<()> {
    let mut w = writer(&dir.join("control.csv"))?;
    w.write_record(["t", "u"])?;
    for c in &traj.controls {
        w.write_record([num(c.t), num(c.u)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics(dir: &Path, samples: &[DiagnosticSample<f64>]) -> Result<()> {
    let mut w = writer(&dir.join("diagnostics.csv"))?;
    w.write_record(["t", "l2_p", "l2_v", "V1", "V2", "V", "envelope", "Ek", "Ep"])?;
    for s in samples {
        let l = &s.lyapunov;
        w.write_record([
            num(s.t),
            opt(s.l2_p),
            num(s.l2_v),
            num(l.v1),
            num(l.v2),
            num(l.v),
            opt(s.envelope),
            num(s.ek),
            num(s.ep),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `header` then one row per entry of `rows`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| num(*v)))?;
    }
    w.flush()?;
    Ok(())
}
