use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::Serialize;

use super::{Band, DiscrepancyConfig, DiscrepancyError, DiscrepancyVerdict};
use crate::monitor::{BroadcastPayload, Correspondence};
use crate::posegraph::{ConstraintKind, Information, NodeId, PoseGraph, RelativeConstraint};

/// Translation change above which an existing constraint is replaced, meters.
pub const DEFAULT_UPDATE_TRANSLATION: f64 = 0.05;
/// Rotation change above which an existing constraint is replaced, radians.
pub const DEFAULT_UPDATE_ROTATION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct UpsertReport {
    pub added: usize,
    pub updated: usize,
    pub skipped: usize,
}

impl std::ops::AddAssign for UpsertReport {
    fn add_assign(&mut self, o: Self) {
        self.added += o.added;
        self.updated += o.updated;
        self.skipped += o.skipped;
    }
}

fn check_auxiliary(payload: &BroadcastPayload) -> Result<(), DiscrepancyError> {
    let ok = payload.orientations.len() == payload.proxy.len()
        && payload.orientations.iter().all(|q| {
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            (n - 1.0).abs() < 1e-6
        });
    if ok {
        Ok(())
    } else {
        Err(DiscrepancyError::MissingAuxiliary)
    }
}

struct Context<'a> {
    payload: &'a BroadcastPayload,
    corr: &'a Correspondence,
    node_ids: Vec<NodeId>,
    /// Robot nodes already anchoring a submap correction.
    anchored: BTreeSet<NodeId>,
    information: Information,
}

impl Context<'_> {
    fn new<'a>(
        payload: &'a BroadcastPayload,
        robot_graph: &PoseGraph,
        robot_id: u32,
        corr: &'a Correspondence,
        information: Information,
    ) -> Result<Context<'a>, DiscrepancyError> {
        check_auxiliary(payload)?;
        let node_ids: Vec<NodeId> = robot_graph.robot_nodes(robot_id).map(|n| n.node_id).collect();
        if let Some(&(_, r)) = corr.pairs.iter().find(|&&(_, r)| r >= node_ids.len()) {
            return Err(DiscrepancyError::DimensionMismatch {
                expected: node_ids.len(),
                got: r + 1,
            });
        }
        let anchored = robot_graph
            .edges()
            .iter()
            .filter(|e| e.kind == ConstraintKind::CorrectionSubmap)
            .flat_map(|e| [e.from_id, e.to_id])
            .collect();
        Ok(Context {
            payload,
            corr,
            node_ids,
            anchored,
            information,
        })
    }

    fn submap(&self, k: usize) -> u32 {
        self.payload.proxy.node(self.corr.pairs[k].0).submap_id
    }

    fn position(&self, k: usize) -> Vector3<f64> {
        self.payload.proxy.node(self.corr.pairs[k].0).position
    }

    /// Constraint between matched pairs `a < b`, measured on the server.
    fn between(&self, a: usize, b: usize, kind: ConstraintKind) -> RelativeConstraint {
        let (sa, ra) = self.corr.pairs[a];
        let (sb, rb) = self.corr.pairs[b];
        let z = self.payload.pose(sa).relative_to(&self.payload.pose(sb));
        RelativeConstraint::new(self.node_ids[ra], self.node_ids[rb], z, self.information, kind)
            .expect("distinct matched nodes")
    }
}

/// Corrective constraints for the triggered bands of every verdict.
///
/// Pair indices refer to `corr`, whose pairs are chronological, so every
/// constraint points forward in time. Duplicates are emitted once.
pub fn generate_constraints(
    verdicts: &[DiscrepancyVerdict],
    robot_graph: &PoseGraph,
    robot_id: u32,
    payload: &BroadcastPayload,
    corr: &Correspondence,
    config: &DiscrepancyConfig,
) -> Result<Vec<RelativeConstraint>, DiscrepancyError> {
    if verdicts.is_empty() {
        return Ok(Vec::new());
    }
    let ctx = Context::new(payload, robot_graph, robot_id, corr, config.information)?;
    let m = corr.len();
    let submaps = SubmapIndex::new(&ctx);

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |a: usize, b: usize, kind: ConstraintKind| {
        if a != b && seen.insert((a.min(b), a.max(b), kind)) {
            out.push(ctx.between(a.min(b), a.max(b), kind));
        }
    };
    for band in [Band::Small, Band::Mid, Band::Large] {
        for k in triggered(verdicts, band, config.peak_per_submap, &ctx) {
            match band {
                Band::Small => {
                    if m >= 2 {
                        let a = k.saturating_sub(1);
                        let b = (k + 1).min(m - 1);
                        push(a, b, ConstraintKind::CorrectionAdjacent);
                    }
                }
                Band::Mid => {
                    let a = k.saturating_sub(config.mid_hops);
                    let b = (k + config.mid_hops).min(m - 1);
                    push(a, b, ConstraintKind::CorrectionMidscale);
                }
                Band::Large => {
                    let own = ctx.submap(k);
                    let anchor = submaps.anchor(own);
                    for other in submaps.nearest(own, config.submap_neighbors) {
                        push(anchor, submaps.anchor(other), ConstraintKind::CorrectionSubmap);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Pair indices triggering `band`, optionally thinned to the strongest per
/// submap.
fn triggered(verdicts: &[DiscrepancyVerdict], band: Band, peak_per_submap: bool, ctx: &Context) -> Vec<usize> {
    let hits = verdicts.iter().filter(|v| v.bands.get(band));
    if !peak_per_submap {
        return hits.map(|v| v.pair).collect();
    }
    let mut best: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
    for v in hits {
        let s = v.stats.get(band);
        let e = best.entry(ctx.submap(v.pair)).or_insert((s, v.pair));
        if s > e.0 {
            *e = (s, v.pair);
        }
    }
    let mut out: Vec<usize> = best.values().map(|&(_, k)| k).collect();
    out.sort_unstable();
    out
}

/// Matched pairs grouped by submap, with server-frame centroids.
struct SubmapIndex {
    ids: Vec<u32>,
    centroids: Vec<Vector3<f64>>,
    anchors: Vec<usize>,
}

impl SubmapIndex {
    fn new(ctx: &Context) -> Self {
        let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for k in 0..ctx.corr.len() {
            groups.entry(ctx.submap(k)).or_default().push(k);
        }
        let mut ids = Vec::new();
        let mut centroids = Vec::new();
        let mut anchors = Vec::new();
        for (id, members) in groups {
            let c = members.iter().map(|&k| ctx.position(k)).sum::<Vector3<f64>>() / members.len() as f64;
            // the member nearest the centroid stands for the submap, unless
            // an earlier correction already picked one that is still matched
            let reused: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&k| ctx.anchored.contains(&ctx.node_ids[ctx.corr.pairs[k].1]))
                .collect();
            let pool = if reused.is_empty() { &members } else { &reused };
            let anchor = pool
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    (ctx.position(a) - c)
                        .norm()
                        .total_cmp(&(ctx.position(b) - c).norm())
                        .then(a.cmp(&b))
                })
                .expect("nonempty group");
            ids.push(id);
            centroids.push(c);
            anchors.push(anchor);
        }
        Self { ids, centroids, anchors }
    }

    fn slot(&self, id: u32) -> usize {
        self.ids.binary_search(&id).expect("known submap")
    }

    fn anchor(&self, id: u32) -> usize {
        self.anchors[self.slot(id)]
    }

    /// The `k` other submaps with the nearest centroids, nearest first.
    fn nearest(&self, id: u32, k: usize) -> Vec<u32> {
        let c = self.centroids[self.slot(id)];
        let mut others: Vec<(f64, u32)> = self
            .ids
            .iter()
            .zip(&self.centroids)
            .filter(|(&o, _)| o != id)
            .map(|(&o, oc)| ((oc - c).norm(), o))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        others.into_iter().take(k).map(|(_, o)| o).collect()
    }
}

/// The per-node comparator: one adjacent constraint for every matched node
/// after the first, regardless of any discrepancy.
pub fn baseline_constraints(
    robot_graph: &PoseGraph,
    robot_id: u32,
    payload: &BroadcastPayload,
    corr: &Correspondence,
    information: Information,
) -> Result<Vec<RelativeConstraint>, DiscrepancyError> {
    let ctx = Context::new(payload, robot_graph, robot_id, corr, information)?;
    Ok((1..corr.len())
        .map(|k| ctx.between(k - 1, k, ConstraintKind::CorrectionAdjacent))
        .collect())
}

/// Merges `new` into `existing`.
///
/// A constraint matching an existing `(from, to, kind)` replaces it only
/// when its measurement moved by more than `dt_trans` meters or `dt_rot`
/// radians; otherwise it is skipped. Unmatched constraints are appended.
pub fn upsert_constraints(
    existing: &[RelativeConstraint],
    new: &[RelativeConstraint],
    dt_trans: f64,
    dt_rot: f64,
) -> (Vec<RelativeConstraint>, UpsertReport) {
    let mut merged = existing.to_vec();
    let mut index: BTreeMap<(NodeId, NodeId, ConstraintKind), usize> = merged
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.from_id, c.to_id, c.kind), i))
        .collect();
    let mut report = UpsertReport::default();
    for c in new {
        let key = (c.from_id, c.to_id, c.kind);
        match index.get(&key) {
            Some(&i) => {
                let old = &merged[i].measurement;
                let dt = (c.measurement.translation - old.translation).norm();
                let dr = old.rotation.angle_to(&c.measurement.rotation);
                if dt > dt_trans || dr > dt_rot {
                    merged[i] = *c;
                    report.updated += 1;
                } else {
                    report.skipped += 1;
                }
            }
            None => {
                index.insert(key, merged.len());
                merged.push(*c);
                report.added += 1;
            }
        }
    }
    (merged, report)
}
