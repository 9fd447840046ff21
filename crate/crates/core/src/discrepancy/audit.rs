use serde::Serialize;

use super::{Band, DiscrepancyVerdict, PerBand, UpsertReport};
use crate::posegraph::{NodeId, RelativeConstraint};

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum AuditRecord {
    Verdict {
        epoch: u64,
        robot: u32,
        server_index: usize,
        robot_node: NodeId,
        bands: Vec<Band>,
        stats: PerBand<f64>,
    },
    Constraint {
        epoch: u64,
        robot: u32,
        from: NodeId,
        to: NodeId,
        kind: String,
    },
    Upsert {
        epoch: u64,
        robot: u32,
        #[serde(flatten)]
        report: UpsertReport,
    },
}

/// Line-delimited JSON audit records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditLog {
    lines: Vec<String>,
}

impl AuditLog {
    pub fn push(&mut self, r: &AuditRecord) {
        self.lines.push(serde_json::to_string(r).expect("audit records serialize"));
    }

    pub fn verdict(&mut self, epoch: u64, robot: u32, robot_node: NodeId, v: &DiscrepancyVerdict) {
        self.push(&AuditRecord::Verdict {
            epoch,
            robot,
            server_index: v.server_index,
            robot_node,
            bands: v.bands.iter().collect(),
            stats: v.stats,
        });
    }

    pub fn constraint(&mut self, epoch: u64, robot: u32, c: &RelativeConstraint) {
        self.push(&AuditRecord::Constraint {
            epoch,
            robot,
            from: c.from_id,
            to: c.to_id,
            kind: c.kind.as_str().to_string(),
        });
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(l);
            s.push('\n');
        }
        s
    }
}
