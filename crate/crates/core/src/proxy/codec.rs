//! Compact little-endian encoding of a proxy graph.
//!
//! ```text
//! u32 node_count, f64 radius, f64 sigma
//! node_count × { f64 x, f64 y, f64 z, i64 timestamp, u64 source_node_id, u32 robot_id, u32 submap_id }
//! u32 nnz
//! (node_count + 1) × u32 row_ptr      upper triangle (j > i) in CSR form
//! nnz × u32 col_idx
//! nnz × f64 weight
//! ```

use std::fmt::Write as _;

use faer::Mat;
use nalgebra::Vector3;

use super::{ProxyGraph, ProxyNode};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at byte {0}")]
    Truncated(usize),
    #[error("corrupt record: {0}")]
    Corrupt(&'static str),
}

pub const NODE_RECORD_BYTES: usize = 3 * 8 + 8 + 8 + 4 + 4;

pub fn encode_proxy(g: &ProxyGraph) -> Vec<u8> {
    let mut out = Vec::new();
    encode_proxy_into(g, &mut out);
    out
}

pub(crate) fn encode_proxy_into(g: &ProxyGraph, out: &mut Vec<u8>) {
    let n = g.len();
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&g.radius().to_le_bytes());
    out.extend_from_slice(&g.sigma().to_le_bytes());
    for node in g.nodes() {
        for v in node.position.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&node.timestamp.to_le_bytes());
        out.extend_from_slice(&node.source_node_id.to_le_bytes());
        out.extend_from_slice(&node.robot_id.to_le_bytes());
        out.extend_from_slice(&node.submap_id.to_le_bytes());
    }
    let a = g.adjacency();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0u32);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = a[(i, j)];
            if w != 0.0 {
                cols.push(j as u32);
                vals.push(w);
            }
        }
        row_ptr.push(cols.len() as u32);
    }
    out.extend_from_slice(&(cols.len() as u32).to_le_bytes());
    for r in row_ptr {
        out.extend_from_slice(&r.to_le_bytes());
    }
    for c in cols {
        out.extend_from_slice(&c.to_le_bytes());
    }
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or(DecodeError::Truncated(self.pos))?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub(crate) fn i64(&mut self) -> Result<i64, DecodeError> {
        Ok(i64::from_le_bytes(self.take()?))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, DecodeError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode_proxy(bytes: &[u8]) -> Result<ProxyGraph, DecodeError> {
    let mut r = Reader::new(bytes);
    let g = decode_proxy_from(&mut r)?;
    if r.position() != bytes.len() {
        return Err(DecodeError::Corrupt("trailing bytes"));
    }
    Ok(g)
}

pub(crate) fn decode_proxy_from(r: &mut Reader<'_>) -> Result<ProxyGraph, DecodeError> {
    let n = r.u32()? as usize;
    let radius = r.f64()?;
    let sigma = r.f64()?;
    let mut nodes = Vec::with_capacity(n.min(1 << 20));
    for index in 0..n {
        let position = Vector3::new(r.f64()?, r.f64()?, r.f64()?);
        let timestamp = r.i64()?;
        let source_node_id = r.u64()?;
        let robot_id = r.u32()?;
        let submap_id = r.u32()?;
        nodes.push(ProxyNode {
            index,
            position,
            source_node_id,
            timestamp,
            submap_id,
            robot_id,
        });
    }
    let nnz = r.u32()? as usize;
    let mut row_ptr = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        row_ptr.push(r.u32()? as usize);
    }
    if row_ptr[0] != 0 || row_ptr[n] != nnz || row_ptr.windows(2).any(|w| w[0] > w[1]) {
        return Err(DecodeError::Corrupt("row pointers"));
    }
    let mut cols = Vec::with_capacity(nnz.min(1 << 24));
    for _ in 0..nnz {
        cols.push(r.u32()? as usize);
    }
    let mut adjacency = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
            if j <= i || j >= n {
                return Err(DecodeError::Corrupt("column index"));
            }
            let w = r.f64()?;
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    Ok(ProxyGraph::from_parts(nodes, adjacency, radius, sigma))
}

/// Human-readable dump: one `node` line per node, one `edge` line per
/// undirected edge.
pub fn proxy_to_text(g: &ProxyGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# proxy nodes={} edges={} radius={} sigma={}",
        g.len(),
        g.edge_count(),
        g.radius(),
        g.sigma()
    );
    for n in g.nodes() {
        let _ = writeln!(
            out,
            "node {} {} {} {} robot={} submap={} t={} src={}",
            n.index, n.position.x, n.position.y, n.position.z, n.robot_id, n.submap_id, n.timestamp, n.source_node_id
        );
    }
    let a = g.adjacency();
    for i in 0..g.len() {
        for j in (i + 1)..g.len() {
            if a[(i, j)] != 0.0 {
                let _ = writeln!(out, "edge {i} {j} {}", a[(i, j)]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Exec;
    use crate::proxy::{build_from_proxy_nodes, ProxyParams};

    fn sample() -> ProxyGraph {
        let nodes = (0..12)
            .map(|i| ProxyNode {
                index: i,
                position: Vector3::new(i as f64 * 1.3, (i as f64).sin(), 0.1 * i as f64),
                source_node_id: 1000 + i as u64,
                timestamp: 1_000_000 * i as i64,
                submap_id: (i / 4) as u32,
                robot_id: (i / 6) as u32,
            })
            .collect();
        build_from_proxy_nodes(nodes, &ProxyParams::default(), Exec::Sequential).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let g = sample();
        let bytes = encode_proxy(&g);
        assert_eq!(decode_proxy(&bytes).unwrap(), g);
        let header = 4 + 8 + 8;
        let csr = 4 + 4 * (g.len() + 1) + 12 * g.edge_count();
        assert_eq!(bytes.len(), header + NODE_RECORD_BYTES * g.len() + csr);
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = encode_proxy(&sample());
        assert!(matches!(
            decode_proxy(&bytes[..bytes.len() - 3]),
            Err(DecodeError::Truncated(_))
        ));
    }

    #[test]
    fn text_dump_lists_every_edge() {
        let g = sample();
        let text = proxy_to_text(&g);
        assert_eq!(text.lines().filter(|l| l.starts_with("edge ")).count(), g.edge_count());
    }
}
