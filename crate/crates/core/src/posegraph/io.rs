//! Line-oriented `.posegraph` text format.
//!
//! ```text
//! # posegraph v1
//! # FRAME world
//! VERTEX_SE3:QUAT id x y z qx qy qz qw
//! # NODE_META id robot_id submap_id timestamp_ns
//! EDGE_SE3:QUAT from to x y z qx qy qz qw <21 upper-triangular information entries>
//! # EDGE_KIND from to kind
//! ```
//!
//! Vertex and edge records follow the common g2o layout, so files load in
//! other tools; the `#`-prefixed sidecar records carry the extra fields and
//! are ignored there. Floats use the shortest representation that parses back
//! to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::graph::{ConstraintKind, Information, NodeId, PoseGraph, PoseNode, RelativeConstraint};
use super::pose::Pose;

const HEADER: &str = "# posegraph v1";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ParseError::Malformed {
            line,
            message: message.into(),
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Malformed { line, .. } => Some(*line),
            ParseError::Io(_) => None,
        }
    }
}

pub fn serialize_graph(g: &PoseGraph) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "# FRAME {}", g.frame_id());
    for n in g.nodes() {
        let t = &n.pose.translation;
        let [qw, qx, qy, qz] = n.pose.quaternion_wxyz();
        let _ = writeln!(
            out,
            "VERTEX_SE3:QUAT {} {} {} {} {} {} {} {}",
            n.node_id, t.x, t.y, t.z, qx, qy, qz, qw
        );
        let _ = writeln!(
            out,
            "# NODE_META {} {} {} {}",
            n.node_id, n.robot_id, n.submap_id, n.timestamp
        );
    }
    for e in g.edges() {
        write_edge(&mut out, e);
    }
    out
}

/// Appends one edge record plus its kind sidecar.
pub(crate) fn write_edge(out: &mut String, e: &RelativeConstraint) {
    let t = &e.measurement.translation;
    let [qw, qx, qy, qz] = e.measurement.quaternion_wxyz();
    let _ = write!(
        out,
        "EDGE_SE3:QUAT {} {} {} {} {} {} {} {} {}",
        e.from_id, e.to_id, t.x, t.y, t.z, qx, qy, qz, qw
    );
    for v in e.information.upper_triangle() {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
    let _ = writeln!(out, "# EDGE_KIND {} {} {}", e.from_id, e.to_id, e.kind);
}

struct PendingEdge {
    line: usize,
    edge: RelativeConstraint,
}

pub fn parse_graph(text: &str) -> Result<PoseGraph, ParseError> {
    let mut frame = String::from("world");
    let mut vertices: Vec<(usize, NodeId, Pose)> = Vec::new();
    let mut meta: std::collections::HashMap<NodeId, (u32, u32, i64)> = Default::default();
    let mut edges: Vec<PendingEdge> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut tok = comment.split_whitespace();
            match tok.next() {
                Some("FRAME") => {
                    frame = tok.collect::<Vec<_>>().join(" ");
                }
                Some("NODE_META") => {
                    let f: Vec<&str> = tok.collect();
                    if f.len() != 4 {
                        return Err(ParseError::at(line_no, "NODE_META expects 4 fields"));
                    }
                    let id = parse_num::<NodeId>(f[0], line_no)?;
                    meta.insert(
                        id,
                        (
                            parse_num(f[1], line_no)?,
                            parse_num(f[2], line_no)?,
                            parse_num(f[3], line_no)?,
                        ),
                    );
                }
                Some("EDGE_KIND") => {
                    let f: Vec<&str> = tok.collect();
                    if f.len() != 3 {
                        return Err(ParseError::at(line_no, "EDGE_KIND expects 3 fields"));
                    }
                    let from = parse_num::<NodeId>(f[0], line_no)?;
                    let to = parse_num::<NodeId>(f[1], line_no)?;
                    let kind: ConstraintKind =
                        f[2].parse().map_err(|m: String| ParseError::at(line_no, m))?;
                    match edges.last_mut() {
                        Some(p) if p.edge.from_id == from && p.edge.to_id == to => {
                            p.edge.kind = kind
                        }
                        _ => {
                            return Err(ParseError::at(
                                line_no,
                                "EDGE_KIND does not follow its edge record",
                            ))
                        }
                    }
                }
                _ => {}
            }
            continue;
        }
        let mut tok = line.split_whitespace();
        let tag = tok.next().unwrap_or_default();
        let f: Vec<&str> = tok.collect();
        match tag {
            "VERTEX_SE3:QUAT" => {
                if f.len() != 8 {
                    return Err(ParseError::at(line_no, "VERTEX_SE3:QUAT expects 8 fields"));
                }
                let id = parse_num::<NodeId>(f[0], line_no)?;
                let v = parse_floats::<7>(&f[1..], line_no)?;
                vertices.push((line_no, id, pose_from_wire(&v, line_no)?));
            }
            "EDGE_SE3:QUAT" => {
                if f.len() != 30 {
                    return Err(ParseError::at(line_no, "EDGE_SE3:QUAT expects 30 fields"));
                }
                let from = parse_num::<NodeId>(f[0], line_no)?;
                let to = parse_num::<NodeId>(f[1], line_no)?;
                let v = parse_floats::<7>(&f[2..9], line_no)?;
                let info = parse_floats::<21>(&f[9..], line_no)?;
                let information = Information::from_upper_triangle(&info)
                    .map_err(|e| ParseError::at(line_no, e.to_string()))?;
                let edge = RelativeConstraint::new(
                    from,
                    to,
                    pose_from_wire(&v, line_no)?,
                    information,
                    ConstraintKind::Odometry,
                )
                .map_err(|e| ParseError::at(line_no, e.to_string()))?;
                edges.push(PendingEdge {
                    line: line_no,
                    edge,
                });
            }
            other => {
                return Err(ParseError::at(line_no, format!("unknown record `{other}`")));
            }
        }
    }

    let mut g = PoseGraph::new(frame);
    for (k, (line_no, id, pose)) in vertices.into_iter().enumerate() {
        let (robot_id, submap_id, timestamp) = meta.get(&id).copied().unwrap_or((0, 0, k as i64));
        g.add_node(PoseNode {
            node_id: id,
            robot_id,
            submap_id,
            timestamp,
            pose,
        })
        .map_err(|e| ParseError::at(line_no, e.to_string()))?;
    }
    for p in edges {
        g.add_edge(p.edge)
            .map_err(|e| ParseError::at(p.line, e.to_string()))?;
    }
    Ok(g)
}

fn pose_from_wire(v: &[f64; 7], line: usize) -> Result<Pose, ParseError> {
    let [x, y, z, qx, qy, qz, qw] = *v;
    let norm = (qw * qw + qx * qx + qy * qy + qz * qz).sqrt();
    if !(norm > 1e-6) {
        return Err(ParseError::at(line, "degenerate quaternion"));
    }
    // skip renormalization when already unit so written values survive bit-exact
    if (norm - 1.0).abs() <= 1e-15 {
        Ok(Pose::new(
            nalgebra::Vector3::new(x, y, z),
            nalgebra::UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(qw, qx, qy, qz)),
        ))
    } else {
        Ok(Pose::from_parts([x, y, z], [qw, qx, qy, qz]))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, ParseError> {
    s.parse()
        .map_err(|_| ParseError::at(line, format!("invalid number `{s}`")))
}

fn parse_floats<const N: usize>(f: &[&str], line: usize) -> Result<[f64; N], ParseError> {
    let mut out = [0.0; N];
    for (o, s) in out.iter_mut().zip(f) {
        let v: f64 = parse_num(s, line)?;
        if !v.is_finite() {
            return Err(ParseError::at(line, format!("non-finite value `{s}`")));
        }
        *o = v;
    }
    Ok(out)
}

pub fn write_graph(g: &PoseGraph, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, serialize_graph(g))
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<PoseGraph, ParseError> {
    parse_graph(&std::fs::read_to_string(path)?)
}
