//! Directed leader/follower topology, Laplacian blocks, and the reachability,
//! M-matrix and small-gain certificates that go with them.
//!
//! Agents are indexed followers first: `0..m` are followers, `m..n` leaders.
//! Weight `a[i][j] > 0` means agent `i` receives from agent `j`.

use std::collections::VecDeque;

use thiserror::Error;

use crate::linalg::{eigenvalues, solve_linear, spectral_radius, LinalgError, Mat};
use crate::scalar::Scalar;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("adjacency must be {n}x{n}, found {found:?}")]
    Shape { n: usize, found: (usize, usize) },
    #[error("follower count {m} must satisfy 0 < m < n = {n}")]
    FollowerCount { m: usize, n: usize },
    #[error("adjacency entry ({i}, {j}) = {value} is invalid (self-loops and negative weights are not allowed)")]
    BadWeight { i: usize, j: usize, value: f64 },
    #[error("leader {leader} has an incoming edge")]
    LeaderHasInEdge { leader: usize },
    #[error("follower {follower} has zero in-degree")]
    ZeroInDegree { follower: usize },
    #[error("follower Laplacian block is singular")]
    Singular,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology<T> {
    n: usize,
    m: usize,
    adjacency: Mat<T>,
}

impl<T: Scalar> Topology<T> {
    /// Checks shape, `0 < m < n`, zero diagonal and nonnegative weights.
    /// Leader rows are validated later by [`build_laplacian`].
    pub fn new(m: usize, adjacency: Mat<T>) -> Result<Self, GraphError> {
        let n = adjacency.rows();
        if !adjacency.is_square() {
            return Err(GraphError::Shape { n, found: adjacency.shape() });
        }
        if m == 0 || m >= n {
            return Err(GraphError::FollowerCount { m, n });
        }
        for i in 0..n {
            for j in 0..n {
                let v = adjacency[(i, j)];
                if !v.is_finite() || v < T::zero() || (i == j && v != T::zero()) {
                    return Err(GraphError::BadWeight { i, j, value: v.as_f64() });
                }
            }
        }
        Ok(Self { n, m, adjacency })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn adjacency(&self) -> &Mat<T> {
        &self.adjacency
    }

    pub fn is_leader(&self, i: usize) -> bool {
        i >= self.m
    }

    /// Edges `(j, i, a_ij)`: `j` sends to `i`, in row-major order of `i`.
    pub fn edges(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let w = self.adjacency[(i, j)];
                if w > T::zero() {
                    out.push((j, i, w));
                }
            }
        }
        out
    }

    /// In-degree weight `κ_i = Σ_j a_ij`.
    pub fn in_weight(&self, i: usize) -> T {
        self.adjacency.row_slice(i).iter().fold(T::zero(), |s, v| s + *v)
    }

    /// Followers with no directed path from any leader.
    pub fn unreachable_followers(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut queue: VecDeque<usize> = (self.m..self.n).collect();
        for &l in &queue {
            seen[l] = true;
        }
        while let Some(j) = queue.pop_front() {
            for (i, s) in seen.iter_mut().enumerate() {
                if !*s && self.adjacency[(i, j)] > T::zero() {
                    *s = true;
                    queue.push_back(i);
                }
            }
        }
        (0..self.m).filter(|&i| !seen[i]).collect()
    }

    pub fn leaders_with_in_edges(&self) -> Vec<usize> {
        (self.m..self.n)
            .filter(|&l| self.adjacency.row_slice(l).iter().any(|v| *v > T::zero()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBlocks<T> {
    pub l: Mat<T>,
    /// Follower-follower block, `m × m`.
    pub l1: Mat<T>,
    /// Follower-leader block, `m × (n − m)`.
    pub l2: Mat<T>,
    /// `diag(κ_1, …, κ_m)`.
    pub d: Mat<T>,
}

pub fn build_laplacian<T: Scalar>(t: &Topology<T>) -> Result<LaplacianBlocks<T>, GraphError> {
    if let Some(&leader) = t.leaders_with_in_edges().first() {
        return Err(GraphError::LeaderHasInEdge { leader });
    }
    let (n, m) = (t.n, t.m);
    let l = Mat::from_fn(n, n, |i, j| if i == j { t.in_weight(i) } else { -t.adjacency[(i, j)] });
    let d = Mat::diag(&(0..m).map(|i| t.in_weight(i)).collect::<Vec<_>>());
    Ok(LaplacianBlocks {
        l1: l.block(0, 0, m, m),
        l2: l.block(0, m, m, n - m),
        l,
        d,
    })
}

/// Every follower is reachable from some leader and no leader listens.
pub fn check_assumption4<T: Scalar>(t: &Topology<T>) -> bool {
    t.leaders_with_in_edges().is_empty() && t.unreachable_followers().is_empty()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report<T> {
    /// Off-diagonal entries of `L₁` are all nonpositive.
    pub z_matrix: bool,
    /// Smallest real part over the spectrum of `L₁`.
    pub min_real_eigenvalue: f64,
    /// `−L₁⁻¹L₂`.
    pub leader_weights: Mat<T>,
    pub min_weight: f64,
    /// Largest `|row sum − 1|` of `−L₁⁻¹L₂`.
    pub max_row_sum_error: f64,
    pub nonnegative: bool,
    pub rows_sum_to_one: bool,
}

impl<T> Lemma1Report<T> {
    pub fn m_matrix(&self) -> bool {
        self.z_matrix && self.min_real_eigenvalue > 0.0
    }

    pub fn passed(&self) -> bool {
        self.m_matrix() && self.nonnegative && self.rows_sum_to_one
    }
}

/// Z-matrix with spectrum in the open right half-plane.
pub fn is_nonsingular_m_matrix<T: Scalar>(l1: &Mat<T>) -> Result<bool, GraphError> {
    Ok(z_matrix(l1) && min_real_eigenvalue(l1)? > 0.0)
}

fn z_matrix<T: Scalar>(l1: &Mat<T>) -> bool {
    (0..l1.rows()).all(|i| (0..l1.cols()).all(|j| i == j || l1[(i, j)] <= T::zero()))
}

fn min_real_eigenvalue<T: Scalar>(l1: &Mat<T>) -> Result<f64, GraphError> {
    Ok(eigenvalues(l1)?
        .iter()
        .fold(f64::INFINITY, |m, l| m.min(l.re.as_f64())))
}

/// Checks that `L₁` is a nonsingular M-matrix and that `−L₁⁻¹L₂` is
/// row-stochastic.
pub fn check_lemma1<T: Scalar>(b: &LaplacianBlocks<T>, tol: &Tolerances) -> Result<Lemma1Report<T>, GraphError> {
    let z = z_matrix(&b.l1);
    let min_re = min_real_eigenvalue(&b.l1)?;
    let w = match solve_linear(&b.l1, &-&b.l2) {
        Ok(w) => w,
        Err(LinalgError::Singular { .. }) => return Err(GraphError::Singular),
        Err(e) => return Err(e.into()),
    };
    let min_weight = w.as_slice().iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let max_row_sum_error = (0..w.rows())
        .map(|i| (w.row_slice(i).iter().fold(0.0, |s, v| s + v.as_f64()) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(Lemma1Report {
        z_matrix: z,
        min_real_eigenvalue: min_re,
        nonnegative: min_weight >= -tol.stochastic_entry,
        rows_sum_to_one: max_row_sum_error <= tol.stochastic_row_sum,
        leader_weights: w,
        min_weight,
        max_row_sum_error,
    })
}

/// `Γ = I − D⁻¹L₁`: entry `(i, j)` is `a_ij / κ_i` for followers `j ≠ i`.
pub fn small_gain_matrix<T: Scalar>(b: &LaplacianBlocks<T>) -> Result<Mat<T>, GraphError> {
    let m = b.l1.rows();
    if let Some(follower) = (0..m).find(|&i| b.d[(i, i)] <= T::zero()) {
        return Err(GraphError::ZeroInDegree { follower });
    }
    Ok(Mat::from_fn(m, m, |i, j| {
        let scaled = b.l1[(i, j)] / b.d[(i, i)];
        if i == j {
            T::one() - scaled
        } else {
            -scaled
        }
    }))
}

/// `ρ(I − D⁻¹L₁)`.
pub fn small_gain_radius<T: Scalar>(b: &LaplacianBlocks<T>) -> Result<T, GraphError> {
    Ok(spectral_radius(&small_gain_matrix(b)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Mat<f64> {
        Mat::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Six agents, followers 0..4, leaders 4 and 5.
    fn example() -> Topology<f64> {
        let mut a = Mat::zeros(6, 6);
        a[(0, 3)] = 1.0;
        a[(0, 4)] = 1.0;
        a[(1, 0)] = 1.0;
        a[(2, 0)] = 1.0;
        a[(2, 3)] = 1.0;
        a[(3, 1)] = 1.0;
        a[(3, 5)] = 1.0;
        Topology::new(4, a).unwrap()
    }

    #[test]
    fn example_blocks_match_printed_values() {
        let b = build_laplacian(&example()).unwrap();
        assert_eq!(
            b.l1,
            m(&[&[2.0, 0.0, 0.0, -1.0], &[-1.0, 1.0, 0.0, 0.0], &[-1.0, 0.0, 2.0, -1.0], &[0.0, -1.0, 0.0, 2.0]])
        );
        assert_eq!(b.l2, m(&[&[-1.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], &[0.0, -1.0]]));
        assert_eq!(b.d, Mat::diag(&[2.0, 1.0, 2.0, 2.0]));
        assert_eq!(b.l.block(4, 0, 2, 6), Mat::zeros(2, 6));
        for i in 0..6 {
            assert_eq!(b.l.row_slice(i).iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn single_pair() {
        let t = Topology::new(1, m(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap();
        let b = build_laplacian(&t).unwrap();
        assert_eq!(b.l1, m(&[&[1.0]]));
        assert_eq!(b.l2, m(&[&[-1.0]]));
        let report = check_lemma1(&b, &Tolerances::default()).unwrap();
        assert_eq!(report.leader_weights, m(&[&[1.0]]));
        assert_eq!(small_gain_matrix(&b).unwrap(), m(&[&[0.0]]));
    }

    #[test]
    fn assumption4_examples() {
        assert!(check_assumption4(&example()));

        let mut a = example().adjacency().clone();
        a[(1, 0)] = 0.0;
        let t = Topology::new(4, a).unwrap();
        assert!(!check_assumption4(&t));
        assert!(t.unreachable_followers().contains(&1));

        // Followers 0 and 1 listen only to each other.
        let mut a = Mat::zeros(3, 3);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let t = Topology::new(2, a).unwrap();
        assert!(!check_assumption4(&t));
        assert_eq!(t.unreachable_followers(), vec![0, 1]);
    }

    #[test]
    fn leader_in_edge_rejected() {
        let mut a = example().adjacency().clone();
        a[(4, 0)] = 1.0;
        let t = Topology::new(4, a).unwrap();
        assert!(!check_assumption4(&t));
        assert_eq!(build_laplacian(&t).unwrap_err(), GraphError::LeaderHasInEdge { leader: 4 });
    }

    #[test]
    fn empty_graph_builds_but_fails_reachability() {
        let t = Topology::new(2, Mat::<f64>::zeros(3, 3)).unwrap();
        let b = build_laplacian(&t).unwrap();
        assert!(!check_assumption4(&t));
        assert!(!is_nonsingular_m_matrix(&b.l1).unwrap());
        assert_eq!(check_lemma1(&b, &Tolerances::default()).unwrap_err(), GraphError::Singular);
        assert_eq!(small_gain_matrix(&b).unwrap_err(), GraphError::ZeroInDegree { follower: 0 });
    }

    #[test]
    fn example_lemma1_and_small_gain() {
        let b = build_laplacian(&example()).unwrap();
        let report = check_lemma1(&b, &Tolerances::default()).unwrap();
        assert!(report.passed(), "{report:?}");
        let g = small_gain_matrix(&b).unwrap();
        assert_eq!(
            g,
            m(&[&[0.0, 0.0, 0.0, 0.5], &[1.0, 0.0, 0.0, 0.0], &[0.5, 0.0, 0.0, 0.5], &[0.0, 0.5, 0.0, 0.0]])
        );
        // The only cycle 0→3→1→0 carries weight 1/4, so ρ = 4^{-1/3}.
        let rho = small_gain_radius(&b).unwrap();
        assert!((rho - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-10, "rho = {rho}");
    }

    #[test]
    fn invalid_topologies() {
        assert!(matches!(Topology::new(0, Mat::<f64>::zeros(2, 2)), Err(GraphError::FollowerCount { .. })));
        assert!(matches!(Topology::new(2, Mat::<f64>::zeros(2, 2)), Err(GraphError::FollowerCount { .. })));
        assert!(matches!(Topology::new(1, m(&[&[1.0, 0.0], &[0.0, 0.0]])), Err(GraphError::BadWeight { .. })));
        assert!(matches!(Topology::new(1, m(&[&[0.0, -1.0], &[0.0, 0.0]])), Err(GraphError::BadWeight { .. })));
    }
}
