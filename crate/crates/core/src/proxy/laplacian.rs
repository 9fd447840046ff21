use faer::Mat;

use super::ProxyGraph;

/// Combinatorial graph Laplacian `D - A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian(Mat<f64>);

impl Laplacian {
    /// Wraps a matrix that is assumed to be a symmetric Laplacian.
    pub fn from_matrix(m: Mat<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

pub fn laplacian(p: &ProxyGraph) -> Laplacian {
    let n = p.len();
    let a = p.adjacency();
    let d = p.degree();
    Laplacian(Mat::from_fn(n, n, |i, j| {
        if i == j {
            d[i] - a[(i, i)]
        } else {
            -a[(i, j)]
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proxy::ProxyNode;
    use crate::spectral::eigendecompose;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    pub(crate) fn path3() -> ProxyGraph {
        let nodes = (0..3)
            .map(|i| ProxyNode {
                index: i,
                position: Vector3::new(i as f64, 0.0, 0.0),
                source_node_id: i as u64,
                timestamp: i as i64,
                submap_id: 0,
                robot_id: 0,
            })
            .collect();
        let a = Mat::from_fn(3, 3, |i, j| if i.abs_diff(j) == 1 { 1.0 } else { 0.0 });
        ProxyGraph::from_parts(nodes, a, 7.0, 1.0)
    }

    #[test]
    fn single_node_is_zero() {
        let g = ProxyGraph::from_parts(
            vec![ProxyNode {
                index: 0,
                position: Vector3::zeros(),
                source_node_id: 0,
                timestamp: 0,
                submap_id: 0,
                robot_id: 0,
            }],
            Mat::zeros(1, 1),
            7.0,
            1.0,
        );
        assert_eq!(laplacian(&g).matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn path3_spectrum() {
        let l = laplacian(&path3());
        assert!(l.max_row_sum() < 1e-15);
        let b = eigendecompose(&l).unwrap();
        for (got, want) in b.eigenvalues().iter().zip([0.0, 1.0, 3.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }
}
