use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::run::{RunMetrics, RunOutput};
use super::SimError;
use crate::posegraph::serialize_graph;

fn to_csv<T: Serialize + Default>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        // headers come from the first record; write a blank one and keep
        // only its header line
        w.serialize(T::default()).expect("rows are flat records");
    }
    for r in rows {
        w.serialize(r).expect("rows are flat records");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8");
    if rows.is_empty() {
        return text.lines().next().map(|h| format!("{h}\n")).unwrap_or_default();
    }
    text
}

/// One row per robot per epoch.
pub fn epochs_csv(m: &RunMetrics) -> String {
    to_csv(&m.rows)
}

pub fn broadcasts_csv(m: &RunMetrics) -> String {
    to_csv(&m.broadcasts)
}

pub fn summary_text(m: &RunMetrics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario {} seed {} strategy {:?}", m.scenario, m.seed, m.strategy);
    let _ = writeln!(s, "epochs {} broadcasts {}", m.rows.iter().map(|r| r.epoch).max().map_or(0, |e| e + 1), m.broadcasts.len());
    let _ = writeln!(s, "server rmse {:.4} m", m.server_rmse);
    for r in &m.robots {
        let _ = writeln!(
            s,
            "robot {}: nodes {} rmse {:.4} -> {:.4} m, corrections {} (added {}, updated {}, skipped {}), up {} B, down {} B",
            r.robot,
            r.nodes,
            r.rmse_uncorrected,
            r.rmse_corrected,
            r.correction_factors,
            r.added,
            r.updated,
            r.skipped,
            r.bytes_up,
            r.bytes_down
        );
    }
    let t = &m.timings;
    let _ = writeln!(
        s,
        "time {:.0} ms (server {:.0}, broadcast {:.0}, discrepancy {:.0}, optimize {:.0})",
        t.total_ms, t.server_ms, t.broadcast_ms, t.discrepancy_ms, t.optimize_ms
    );
    s
}

/// Writes `epochs.csv`, `broadcasts.csv`, `summary.txt`, `audit.jsonl`,
/// `server.posegraph` and one `robot_<id>.posegraph` per robot into `dir`.
pub fn write_report(out: &RunOutput, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("epochs.csv"), epochs_csv(&out.metrics))?;
    fs::write(dir.join("broadcasts.csv"), broadcasts_csv(&out.metrics))?;
    fs::write(dir.join("summary.txt"), summary_text(&out.metrics))?;
    fs::write(dir.join("audit.jsonl"), out.audit.to_text())?;
    fs::write(dir.join("server.posegraph"), serialize_graph(&out.server))?;
    for (r, g) in out.metrics.robots.iter().zip(&out.onboard) {
        fs::write(dir.join(format!("robot_{}.posegraph", r.robot)), serialize_graph(g))?;
    }
    Ok(())
}
