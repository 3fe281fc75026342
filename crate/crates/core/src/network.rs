//! Binary undirected networks: ingestion, edge vectors, hop distances and
//! classical MDS coordinates.

use std::collections::VecDeque;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg::sym_eigen_desc;
use crate::{lit, Error, Real, Result};

/// Input layouts understood by [`load_network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkFormat {
    /// `p` rows of `p` comma-separated 0/1 entries, no header.
    AdjacencyCsv,
    /// One 1-indexed `k,l` pair per line; the node count is supplied separately.
    EdgeListCsv { nodes: usize },
}

/// Symmetric 0/1 adjacency matrix with an empty diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryNetwork {
    p: usize,
    adj: Vec<u8>,
    node_labels: Option<Vec<String>>,
}

/// Strict upper triangle of an adjacency matrix, row-major:
/// `(1,2), (1,3), …, (1,p), (2,3), …, (p−1,p)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    p: usize,
    e: Vec<u8>,
}

/// All-pairs hop distances. Pairs in different components get distance `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    p: usize,
    d: Vec<usize>,
}

/// Number of unordered node pairs, `p(p−1)/2`.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Iterates `(k, l)` with `k < l` (0-indexed) in edge-vector order.
pub fn upper_pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |k| (k + 1..p).map(move |l| (k, l)))
}

/// Position of pair `(k, l)` (0-indexed, any order, `k != l`) in the edge vector.
pub fn pair_index(p: usize, k: usize, l: usize) -> usize {
    let (k, l) = if k < l { (k, l) } else { (l, k) };
    k * (2 * p - k - 1) / 2 + (l - k - 1)
}

impl BinaryNetwork {
    /// Validates a dense row-major `p×p` adjacency.
    pub fn from_dense(p: usize, adj: Vec<u8>) -> Result<Self> {
        if adj.len() != p * p {
            return Err(Error::InvalidNetwork(format!(
                "expected {} entries for p = {}, got {}",
                p * p,
                p,
                adj.len()
            )));
        }
        for k in 0..p {
            if adj[k * p + k] != 0 {
                return Err(Error::InvalidNetwork(format!(
                    "self-edge at node {}",
                    k + 1
                )));
            }
            for l in 0..p {
                let v = adj[k * p + l];
                if v > 1 {
                    return Err(Error::InvalidNetwork(format!(
                        "non-binary entry {} at ({}, {})",
                        v,
                        k + 1,
                        l + 1
                    )));
                }
                if v != adj[l * p + k] {
                    return Err(Error::InvalidNetwork(format!(
                        "adjacency is not symmetric at ({}, {})",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(Self {
            p,
            adj,
            node_labels: None,
        })
    }

    /// Builds a network from 0-indexed undirected edges.
    pub fn from_edge_list(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![0u8; p * p];
        for &(k, l) in edges {
            if k >= p || l >= p {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) out of range for p = {}",
                    k + 1,
                    l + 1,
                    p
                )));
            }
            if k == l {
                return Err(Error::InvalidNetwork(format!(
                    "self-loop at node {}",
                    k + 1
                )));
            }
            adj[k * p + l] = 1;
            adj[l * p + k] = 1;
        }
        Ok(Self {
            p,
            adj,
            node_labels: None,
        })
    }

    /// Inverse of [`BinaryNetwork::edge_vector`].
    pub fn from_edge_set(edges: &EdgeSet) -> Self {
        let p = edges.p;
        let mut adj = vec![0u8; p * p];
        for ((k, l), &v) in upper_pairs(p).zip(&edges.e) {
            adj[k * p + l] = v;
            adj[l * p + k] = v;
        }
        Self {
            p,
            adj,
            node_labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p {
            return Err(Error::InvalidNetwork(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.p
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn nodes(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    pub fn has_edge(&self, k: usize, l: usize) -> bool {
        self.adj[k * self.p + l] == 1
    }

    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&l| self.adj[k * self.p + l] == 1)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|&v| v as usize).sum::<usize>() / 2
    }

    /// Row-major upper-triangle edge indicators.
    pub fn edge_vector(&self) -> EdgeSet {
        EdgeSet {
            p: self.p,
            e: upper_pairs(self.p)
                .map(|(k, l)| self.adj[k * self.p + l])
                .collect(),
        }
    }

    /// Breadth-first hop distances from every node.
    pub fn shortest_path_distances(&self) -> DistanceMatrix {
        let p = self.p;
        let mut d = vec![p; p * p];
        let mut queue = VecDeque::with_capacity(p);
        for src in 0..p {
            let row = &mut d[src * p..(src + 1) * p];
            row[src] = 0;
            queue.clear();
            queue.push_back(src);
            while let Some(k) = queue.pop_front() {
                let next = row[k] + 1;
                let adj = &self.adj[k * p..(k + 1) * p];
                for (l, (dist, &edge)) in row.iter_mut().zip(adj).enumerate() {
                    if edge == 1 && *dist == p && l != src {
                        *dist = next;
                        queue.push_back(l);
                    }
                }
            }
        }
        DistanceMatrix { p, d }
    }

    /// Writes the adjacency as `p` comma-separated 0/1 rows.
    pub fn to_adjacency_csv(&self) -> String {
        let mut out = String::with_capacity(self.p * self.p * 2);
        for k in 0..self.p {
            for l in 0..self.p {
                if l > 0 {
                    out.push(',');
                }
                out.push(if self.adj[k * self.p + l] == 1 {
                    '1'
                } else {
                    '0'
                });
            }
            out.push('\n');
        }
        out
    }
}

impl EdgeSet {
    pub fn new(p: usize, e: Vec<u8>) -> Result<Self> {
        if e.len() != pair_count(p) {
            return Err(Error::InvalidNetwork(format!(
                "edge vector of length {} does not match p = {} (expected {})",
                e.len(),
                p,
                pair_count(p)
            )));
        }
        if let Some(v) = e.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidNetwork(format!(
                "non-binary edge indicator {v}"
            )));
        }
        Ok(Self { p, e })
    }

    pub fn nodes(&self) -> usize {
        self.p
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.e
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn density(&self) -> f64 {
        if self.e.is_empty() {
            return 0.0;
        }
        self.e.iter().map(|&v| v as f64).sum::<f64>() / self.e.len() as f64
    }
}

impl DistanceMatrix {
    pub fn nodes(&self) -> usize {
        self.p
    }

    pub fn get(&self, k: usize, l: usize) -> usize {
        self.d[k * self.p + l]
    }

    pub fn to_matrix<T: Real>(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.p, self.p, |k, l| lit(self.get(k, l) as f64))
    }
}

/// Reads a network from `path` in the given layout.
pub fn load_network(path: impl AsRef<Path>, format: NetworkFormat) -> Result<BinaryNetwork> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_network(&text, format)
}

/// Parses network text in the given layout.
pub fn parse_network(text: &str, format: NetworkFormat) -> Result<BinaryNetwork> {
    match format {
        NetworkFormat::AdjacencyCsv => parse_adjacency(text),
        NetworkFormat::EdgeListCsv { nodes } => parse_edge_list(text, nodes),
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_adjacency(text: &str) -> Result<BinaryNetwork> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (line_no, line) in data_lines(text) {
        let row = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                match tok {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => match other.parse::<f64>() {
                        Ok(v) => Err(Error::InvalidNetwork(format!(
                            "non-binary entry {v} on line {line_no}"
                        ))),
                        Err(_) => Err(Error::Parse(format!(
                            "cannot parse '{other}' on line {line_no}"
                        ))),
                    },
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let p = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(Error::Parse(format!(
            "row {} has {} entries, expected {}",
            i + 1,
            r.len(),
            p
        )));
    }
    BinaryNetwork::from_dense(p, rows.concat())
}

fn parse_edge_list(text: &str, nodes: usize) -> Result<BinaryNetwork> {
    let mut edges = Vec::new();
    for (line_no, line) in data_lines(text) {
        let mut parts = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("expected 'k,l' on line {line_no}")));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad node index '{s}' on line {line_no}")))
        };
        let (k, l) = (parse(a)?, parse(b)?);
        if k == 0 || l == 0 {
            return Err(Error::Parse(format!(
                "node indices are 1-based (line {line_no})"
            )));
        }
        edges.push((k - 1, l - 1));
    }
    BinaryNetwork::from_edge_list(nodes, &edges)
}

/// Classical (Torgerson) multidimensional scaling of a hop-distance matrix.
///
/// Returns a `p×dim` matrix whose columns are the leading eigenvectors of
/// `B = −½ J D⁽²⁾ J`, scaled by the square root of their eigenvalues and
/// ordered by decreasing eigenvalue. Negative eigenvalues are clamped to
/// zero; columns with no strictly positive eigenvalue are filled with
/// centered `N(0, 0.01²)` noise drawn from `rng`.
pub fn classical_mds<T: Real, R: Rng + ?Sized>(
    dist: &DistanceMatrix,
    dim: usize,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let p = dist.nodes();
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "MDS dimension must be at least 1".into(),
        ));
    }
    if dim > p {
        return Err(Error::InvalidArgument(format!(
            "MDS dimension {dim} exceeds node count {p}"
        )));
    }
    let b = double_center(dist);
    let (values, vectors) = sym_eigen_desc(&b);
    let largest = values.iter().fold(T::zero(), |m: T, v: &T| m.max(v.abs()));
    let cutoff = largest * lit(1e-9);
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let mut coords = DMatrix::<T>::zeros(p, dim);
    for c in 0..dim {
        let lambda = values[c];
        if lambda > cutoff {
            let s = lambda.sqrt();
            for k in 0..p {
                coords[(k, c)] = vectors[(k, c)] * s;
            }
        } else {
            let draws: Vec<f64> = (0..p).map(|_| noise.sample(rng)).collect();
            let mean = draws.iter().sum::<f64>() / p as f64;
            for k in 0..p {
                coords[(k, c)] = lit(draws[k] - mean);
            }
        }
    }
    Ok(coords)
}

/// `−½ J D⁽²⁾ J` with `J = I − 11ᵀ/p`.
pub fn double_center<T: Real>(dist: &DistanceMatrix) -> DMatrix<T> {
    let p = dist.nodes();
    let sq = DMatrix::<T>::from_fn(p, p, |k, l| {
        let v: T = lit(dist.get(k, l) as f64);
        v * v
    });
    let inv_p: T = lit(1.0 / p as f64);
    let row_means: Vec<T> = (0..p).map(|k| sq.row(k).sum() * inv_p).collect();
    let grand = row_means.iter().fold(T::zero(), |a, &b| a + b) * inv_p;
    let half: T = lit(-0.5);
    DMatrix::from_fn(p, p, |k, l| {
        half * (sq[(k, l)] - row_means[k] - row_means[l] + grand)
    })
}
