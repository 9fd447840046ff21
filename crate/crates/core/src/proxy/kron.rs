use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use super::{laplacian, Laplacian, ProxyError, ProxyGraph};
use crate::spectral::eigendecompose;

/// Fill-in weights below this are dropped after reduction.
pub const FILL_IN_CLIP: f64 = 1e-12;

/// Top eigenvalues closer than this are treated as a repeated eigenvalue.
const DEGENERACY_TOL: f64 = 1e-9;

/// Eigenvector entries this small are ignored when fixing the sign.
const SIGN_TOL: f64 = 1e-12;

/// Nodes whose entry in the eigenvector of the largest Laplacian eigenvalue
/// is nonnegative.
///
/// The eigenvector sign is fixed so that its first clearly nonzero entry (in
/// trajectory order) is positive, so the oldest node is always kept.
pub fn kron_select(l: &Laplacian) -> Result<Vec<usize>, ProxyError> {
    let n = l.len();
    if n < 2 {
        return Err(ProxyError::TooFewNodes(n));
    }
    let basis = eigendecompose(l).map_err(|e| ProxyError::Spectral(e.to_string()))?;
    let lam = basis.eigenvalues();
    if lam[n - 1] - lam[n - 2] <= DEGENERACY_TOL {
        return Err(ProxyError::DegenerateSpectrum);
    }
    let u = basis.eigenvectors().col(n - 1);
    let sign = (0..n)
        .map(|i| u[i])
        .find(|v| v.abs() > SIGN_TOL)
        .map_or(1.0, |v| v.signum());
    Ok((0..n).filter(|&i| sign * u[i] >= 0.0).collect())
}

/// Every other node in trajectory order, starting with the first.
pub fn alternate_selection(n: usize) -> Vec<usize> {
    (0..n).step_by(2).collect()
}

/// [`kron_select`], falling back to [`alternate_selection`] when the top
/// eigenvalue is repeated.
pub fn kron_select_or_alternate(l: &Laplacian) -> Result<Vec<usize>, ProxyError> {
    match kron_select(l) {
        Err(ProxyError::DegenerateSpectrum) => Ok(alternate_selection(l.len())),
        other => other,
    }
}

/// Schur-complement (Kron) reduction of `p` onto the `keep` nodes.
///
/// The reduced Laplacian is `L[K,K] - L[K,E]·L[E,E]⁻¹·L[E,K]`; its negated
/// off-diagonal becomes the new adjacency, with weights below
/// [`FILL_IN_CLIP`] dropped. Kept nodes retain their metadata and are
/// reindexed in their original order.
pub fn kron_reduce(p: &ProxyGraph, keep: &[usize]) -> Result<ProxyGraph, ProxyError> {
    let n = p.len();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() {
        return Err(ProxyError::EmptyKeepSet);
    }
    if let Some(&bad) = keep.iter().find(|&&i| i >= n) {
        return Err(ProxyError::IndexOutOfRange(bad));
    }
    if keep.len() == n {
        return Ok(p.clone());
    }
    let mut is_kept = vec![false; n];
    for &i in &keep {
        is_kept[i] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).collect();
    let lap = laplacian(p);
    let l = lap.matrix();
    let (k, e) = (keep.len(), elim.len());

    let l_ee = Mat::from_fn(e, e, |a, b| l[(elim[a], elim[b])]);
    let l_ek = Mat::from_fn(e, k, |a, b| l[(elim[a], keep[b])]);
    let l_kk = Mat::from_fn(k, k, |a, b| l[(keep[a], keep[b])]);

    let chol = l_ee
        .llt(Side::Lower)
        .map_err(|_| ProxyError::SingularElimination)?;
    let factor = chol.L();
    if (0..e).any(|i| factor[(i, i)] * factor[(i, i)] <= 1e-10) {
        return Err(ProxyError::SingularElimination);
    }
    let x = chol.solve(&l_ek);
    let reduced = &l_kk - l_ek.transpose() * &x;

    let adjacency = Mat::from_fn(k, k, |a, b| {
        if a == b {
            return 0.0;
        }
        let w = -0.5 * (reduced[(a, b)] + reduced[(b, a)]);
        if w < FILL_IN_CLIP {
            0.0
        } else {
            w
        }
    });
    let nodes = keep
        .iter()
        .enumerate()
        .map(|(new, &old)| {
            let mut node = *p.node(old);
            node.index = new;
            node
        })
        .collect();
    Ok(ProxyGraph::from_parts(nodes, adjacency, p.radius(), p.sigma()))
}

/// Drops reduced edges between nodes farther apart than the graph radius,
/// except between consecutive nodes of one robot. This restores the radius
/// support of a proxy graph after Kron fill-in.
pub fn prune_to_radius(p: &ProxyGraph) -> ProxyGraph {
    let n = p.len();
    let nodes = p.nodes();
    let adjacency = Mat::from_fn(n, n, |i, j| {
        let w = p.weight(i, j);
        if w == 0.0 {
            return 0.0;
        }
        let chain = i.abs_diff(j) == 1 && nodes[i].robot_id == nodes[j].robot_id;
        if chain || (nodes[i].position - nodes[j].position).norm() <= p.radius() {
            w
        } else {
            0.0
        }
    });
    ProxyGraph::from_parts(nodes.to_vec(), adjacency, p.radius(), p.sigma())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proxy::ProxyNode;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn graph_from(a: Mat<f64>) -> ProxyGraph {
        let n = a.nrows();
        let nodes = (0..n)
            .map(|i| ProxyNode {
                index: i,
                position: Vector3::new(i as f64, 0.0, 0.0),
                source_node_id: 100 + i as u64,
                timestamp: i as i64,
                submap_id: 0,
                robot_id: 0,
            })
            .collect();
        ProxyGraph::from_parts(nodes, a, 7.0, 1.0)
    }

    fn path(n: usize) -> ProxyGraph {
        graph_from(Mat::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 }))
    }

    #[test]
    fn two_node_selection_keeps_first() {
        let g = path(2);
        assert_eq!(kron_select(&laplacian(&g)).unwrap(), vec![0]);
    }

    #[test]
    fn path3_selection_keeps_ends() {
        let g = path(3);
        assert_eq!(kron_select(&laplacian(&g)).unwrap(), vec![0, 2]);
    }

    #[test]
    fn eliminating_middle_of_path_halves_conductance() {
        let r = kron_reduce(&path(3), &[0, 2]).unwrap();
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r.weight(0, 1), 0.5, epsilon = 1e-12);
        assert_eq!(r.node(1).source_node_id, 102);
        assert_eq!(r.node(1).index, 1);
    }

    #[test]
    fn keeping_everything_is_identity() {
        let g = path(5);
        assert_eq!(kron_reduce(&g, &[4, 3, 2, 1, 0]).unwrap(), g);
    }

    #[test]
    fn complete_graph_is_degenerate() {
        let g = graph_from(Mat::from_fn(4, 4, |i, j| if i != j { 1.0 } else { 0.0 }));
        assert_eq!(kron_select(&laplacian(&g)), Err(ProxyError::DegenerateSpectrum));
        assert_eq!(kron_select_or_alternate(&laplacian(&g)).unwrap(), vec![0, 2]);
    }

    #[test]
    fn eliminating_isolated_component_fails() {
        // nodes 0-1 connected, node 2 isolated
        let g = graph_from(Mat::from_fn(3, 3, |i, j| if i + j == 1 { 1.0 } else { 0.0 }));
        assert_eq!(kron_reduce(&g, &[0, 1]).unwrap_err(), ProxyError::SingularElimination);
    }

    #[test]
    fn bad_keep_sets() {
        let g = path(3);
        assert_eq!(kron_reduce(&g, &[]).unwrap_err(), ProxyError::EmptyKeepSet);
        assert_eq!(kron_reduce(&g, &[5]).unwrap_err(), ProxyError::IndexOutOfRange(5));
    }
}
