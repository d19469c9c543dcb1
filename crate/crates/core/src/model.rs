//! Problem representation: Ising instances, MAX-CUT graphs and spin vectors.
//!
//! An [`IsingInstance`] stores its coupling matrix densely in row-major order.
//! The energy of a spin configuration `s` is
//!
//! ```text
//! E(s) = -1/2 * sum_i sum_j J[i][j] * s_i * s_j
//! ```
//!
//! A [`CutGraph`] with integer edge weights maps onto an instance with
//! `J[i][j] = -w(i, j)`, under which `2 * cut(s) + E(s) = W` for the total edge
//! weight `W`. Minimizing the energy therefore maximizes the cut.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Largest instance accepted by [`brute_force_ground_state`].
pub const BRUTE_FORCE_MAX_N: usize = 24;

/// A symmetric, zero-diagonal coupling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingInstance {
    n: usize,
    couplings: Vec<f64>,
    label: Option<String>,
    /// Total edge weight of the graph this instance was built from, if any.
    cut_weight: Option<i64>,
}

impl IsingInstance {
    /// Builds an instance from a row-major `n * n` matrix, checking symmetry
    /// and the zero diagonal exactly.
    pub fn new(n: usize, couplings: Vec<f64>, label: Option<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInstance("n must be at least 1".into()));
        }
        if couplings.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: couplings.len(),
            });
        }
        for i in 0..n {
            if couplings[i * n + i] != 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "diagonal entry J[{i}][{i}] is {}",
                    couplings[i * n + i]
                )));
            }
            for j in (i + 1)..n {
                let (a, b) = (couplings[i * n + j], couplings[j * n + i]);
                if !a.is_finite() {
                    return Err(Error::InvalidInstance(format!("J[{i}][{j}] is not finite")));
                }
                if a != b {
                    return Err(Error::InvalidInstance(format!(
                        "J[{i}][{j}] = {a} but J[{j}][{i}] = {b}"
                    )));
                }
            }
        }
        Ok(IsingInstance {
            n,
            couplings,
            label,
            cut_weight: None,
        })
    }

    /// Builds an instance from upper- or lower-triangle entries `(i, j, J_ij)`.
    /// Each unordered pair may appear at most once.
    pub fn from_pairs<I>(n: usize, pairs: I, label: Option<String>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::InvalidInstance("n must be at least 1".into()));
        }
        let mut couplings = vec![0.0; n * n];
        let mut seen = HashSet::new();
        for (i, j, w) in pairs {
            if i >= n || j >= n {
                return Err(Error::InvalidInstance(format!(
                    "pair ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidInstance(format!("self coupling at {i}")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidInstance(format!("duplicate pair ({i}, {j})")));
            }
            couplings[i * n + j] = w;
            couplings[j * n + i] = w;
        }
        IsingInstance::new(n, couplings, label)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.couplings[i * self.n..(i + 1) * self.n]
    }

    /// Row-major view of the whole matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.couplings
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Total edge weight `W` when the instance came from a MAX-CUT graph.
    pub fn cut_weight(&self) -> Option<i64> {
        self.cut_weight
    }

    /// Cut value implied by an energy, `(W - E) / 2`, for graph-derived instances.
    pub fn cut_from_energy(&self, energy: f64) -> Option<i64> {
        self.cut_weight
            .map(|w| ((w as f64 - energy) / 2.0).round() as i64)
    }

    /// True when every coupling is an integer.
    pub fn is_integral(&self) -> bool {
        self.couplings.iter().all(|v| v.fract() == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.couplings.iter().all(|&v| v == 0.0)
    }

    /// Number of nonzero entries in the strict upper triangle.
    pub fn nonzero_pairs(&self) -> usize {
        self.pairs().count()
    }

    /// Nonzero upper-triangle entries `(i, j, J_ij)` with `i < j`, row-major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let v = self.get(i, j);
                (v != 0.0).then_some((i, j, v))
            })
        })
    }

    /// Sparse adjacency-list view: for every row, the nonzero `(j, J_ij)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect()
    }

    /// Sample standard deviation of the off-diagonal entries.
    pub fn off_diagonal_std(&self) -> f64 {
        let n = self.n;
        if n < 2 {
            return 0.0;
        }
        let count = (n * (n - 1)) as f64;
        // Entries are symmetric, so the upper triangle gives the same moments.
        let (mut sum, mut sq) = (0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.get(i, j);
                sum += 2.0 * v;
                sq += 2.0 * v * v;
            }
        }
        let mean = sum / count;
        ((sq - count * mean * mean) / (count - 1.0)).max(0.0).sqrt()
    }

    /// Serializes to the JSON instance document.
    pub fn to_json(&self) -> String {
        let doc = match self.cut_weight {
            Some(_) => InstanceDoc {
                n: self.n,
                label: self.label.clone(),
                kind: InstanceKind::Maxcut,
                edges: self.pairs().map(|(i, j, v)| (i, j, -v)).collect(),
            },
            None => InstanceDoc {
                n: self.n,
                label: self.label.clone(),
                kind: InstanceKind::Ising,
                edges: self.pairs().collect(),
            },
        };
        serde_json::to_string(&doc).expect("instance document serializes")
    }

    /// Parses the JSON instance document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        match doc.kind {
            InstanceKind::Ising => IsingInstance::from_pairs(doc.n, doc.edges, doc.label),
            InstanceKind::Maxcut => {
                let mut edges = Vec::with_capacity(doc.edges.len());
                for (i, j, w) in doc.edges {
                    if w.fract() != 0.0 {
                        return Err(Error::InvalidGraph(format!(
                            "edge ({i}, {j}) has non-integer weight {w}"
                        )));
                    }
                    edges.push(Edge { i, j, w: w as i64 });
                }
                let graph = CutGraph::new(doc.n, edges)?;
                let inst = maxcut_to_ising(&graph)?;
                Ok(match doc.label {
                    Some(l) => inst.with_label(l),
                    None => inst,
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum InstanceKind {
    #[default]
    Ising,
    Maxcut,
}

/// On-disk JSON form: `{"n", "label", "edges": [[i, j, w], ...]}` with 0-based
/// indices. `kind` is `"ising"` (w is `J_ij`, the default) or `"maxcut"` (w is
/// the edge weight and `J_ij = -w`).
#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    n: usize,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    kind: InstanceKind,
    edges: Vec<(usize, usize, f64)>,
}

/// An undirected weighted edge with 0-based endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: i64,
}

/// A MAX-CUT instance with integer edge weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl CutGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.i, e.j
                )));
            }
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", e.i)));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.i, e.j
                )));
            }
        }
        Ok(CutGraph { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> i64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    /// Writes the graph in G-set text form with 1-based indices.
    pub fn to_gset(&self) -> String {
        let mut out = String::with_capacity(16 * (self.edges.len() + 1));
        let _ = writeln!(out, "{} {}", self.n, self.edges.len());
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.i + 1, e.j + 1, e.w);
        }
        out
    }
}

/// A vector of `+1` / `-1` spins.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(pos) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!(
                "spin {pos} is {}, expected +1 or -1",
                spins[pos]
            )));
        }
        Ok(SpinConfig(spins))
    }

    /// All spins `+1`.
    pub fn up(n: usize) -> Self {
        SpinConfig(vec![1; n])
    }

    /// `s_i = sgn(x_i)` with `sgn(0) = +1`.
    pub fn from_positions(x: &[f64]) -> Self {
        SpinConfig(x.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// The globally flipped configuration `-s`.
    pub fn flipped(&self) -> Self {
        SpinConfig(self.0.iter().map(|s| -s).collect())
    }

    /// Run-length encoding as `(spin, run length)` pairs.
    pub fn run_lengths(&self) -> Vec<(i8, usize)> {
        let mut runs: Vec<(i8, usize)> = Vec::new();
        for &s in &self.0 {
            match runs.last_mut() {
                Some((v, len)) if *v == s => *len += 1,
                _ => runs.push((s, 1)),
            }
        }
        runs
    }
}

impl TryFrom<Vec<i8>> for SpinConfig {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        SpinConfig::new(v)
    }
}

impl From<SpinConfig> for Vec<i8> {
    fn from(s: SpinConfig) -> Self {
        s.0
    }
}

/// `s_i = sgn(x_i)`, with `sgn(0) = +1`.
pub fn signs_from_positions(x: &[f64]) -> SpinConfig {
    SpinConfig::from_positions(x)
}

/// Ising energy `-1/2 * sum_ij J_ij s_i s_j`, accumulated as `-sum_{i<j}`.
pub fn ising_energy(instance: &IsingInstance, s: &SpinConfig) -> Result<f64> {
    let n = instance.n();
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: s.len(),
        });
    }
    let spins = s.as_slice();
    let mut acc = 0.0;
    for i in 0..n {
        let row = instance.row(i);
        let mut partial = 0.0;
        for j in (i + 1)..n {
            partial += row[j] * f64::from(spins[j]);
        }
        acc += f64::from(spins[i]) * partial;
    }
    Ok(-acc)
}

/// Total weight of the edges whose endpoints carry opposite spins.
pub fn cut_value(graph: &CutGraph, s: &SpinConfig) -> Result<i64> {
    if s.len() != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            actual: s.len(),
        });
    }
    let spins = s.as_slice();
    Ok(graph
        .edges()
        .iter()
        .filter(|e| spins[e.i] != spins[e.j])
        .map(|e| e.w)
        .sum())
}

/// Maps a MAX-CUT graph to the Ising instance with `J_ij = -w_ij`.
pub fn maxcut_to_ising(graph: &CutGraph) -> Result<IsingInstance> {
    let pairs = graph.edges().iter().map(|e| (e.i, e.j, -(e.w as f64)));
    let mut inst = IsingInstance::from_pairs(graph.n(), pairs, None)
        .map_err(|e| Error::InvalidGraph(e.to_string()))?;
    inst.cut_weight = Some(graph.total_weight());
    Ok(inst)
}

/// Fully connected instance with independent `J_ij = +/-1` (probability 1/2
/// each) drawn for `i < j` in row-major order.
pub fn gen_random_dense(n: usize, seed: u64) -> Result<IsingInstance> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "random dense instances need n >= 2, got {n}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut couplings = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.sign();
            couplings[i * n + j] = v;
            couplings[j * n + i] = v;
        }
    }
    IsingInstance::new(n, couplings, Some(format!("dense-n{n}-seed{seed}")))
}

/// Parses G-set text: a header `n m`, then `m` lines `i j [w]` with 1-based
/// vertices. Tokens may be separated by any whitespace; a missing weight is 1.
pub fn parse_gset(text: &str) -> Result<CutGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(Error::Parse {
            line: hline,
            message: format!("header must be `n m`, got {header:?}"),
        });
    }
    let n = parse_token::<usize>(head[0], hline, "vertex count")?;
    let m = parse_token::<usize>(head[1], hline, "edge count")?;

    let mut edges = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    for (line, content) in lines {
        let tok: Vec<&str> = content.split_whitespace().collect();
        if tok.len() != 2 && tok.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected `i j [w]`, got {content:?}"),
            });
        }
        let a = parse_token::<usize>(tok[0], line, "vertex index")?;
        let b = parse_token::<usize>(tok[1], line, "vertex index")?;
        let w = match tok.get(2) {
            Some(t) => parse_token::<i64>(t, line, "weight")?,
            None => 1,
        };
        for v in [a, b] {
            if v == 0 || v > n {
                return Err(Error::Parse {
                    line,
                    message: format!("vertex index {v} out of range 1..={n}"),
                });
            }
        }
        if a == b {
            return Err(Error::Parse {
                line,
                message: format!("self-loop at vertex {a}"),
            });
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate edge ({a}, {b})"),
            });
        }
        if edges.len() == m {
            return Err(Error::Parse {
                line,
                message: format!("more than the {m} declared edges"),
            });
        }
        edges.push(Edge {
            i: a - 1,
            j: b - 1,
            w,
        });
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: text.lines().count().max(1),
            message: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    CutGraph::new(n, edges)
}

/// Reads G-set text from any byte stream.
pub fn read_gset<R: Read>(mut reader: R) -> Result<CutGraph> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_gset(&text)
}

fn parse_token<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {tok:?}"),
    })
}

/// Exhaustive ground state for `n <= 24`.
///
/// Among all minimizers the lexicographically smallest configuration is
/// returned, ordering `+1` before `-1`. Spin 0 is pinned to `+1` (global flip
/// symmetry) and the remaining spins are walked in Gray-code order with
/// incremental local fields.
pub fn brute_force_ground_state(instance: &IsingInstance) -> Result<(SpinConfig, f64)> {
    let n = instance.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let scale: f64 = instance.as_slice().iter().map(|v| v.abs()).sum::<f64>() + 1.0;
    let tie = if instance.is_integral() { 0.0 } else { 1e-9 * scale };

    let mut spins = vec![1.0f64; n];
    let mut field: Vec<f64> = (0..n).map(|i| instance.row(i).iter().sum()).collect();
    let mut energy = -0.5 * field.iter().sum::<f64>();

    // Bit (n-1-i) of `code` is set when spin i is -1, so `code` is the
    // lexicographic rank of the configuration.
    let mut code: u64 = 0;
    let (mut best_e, mut best_code) = (energy, 0u64);
    let free = n - 1;
    for k in 1u64..(1u64 << free) {
        let bit = k.trailing_zeros() as usize;
        let i = n - 1 - bit;
        energy += 2.0 * spins[i] * field[i];
        let delta = -2.0 * spins[i];
        spins[i] = -spins[i];
        let row = instance.row(i);
        for (h, &jv) in field.iter_mut().zip(row) {
            *h += jv * delta;
        }
        code ^= 1 << bit;
        if energy < best_e - tie || (energy <= best_e + tie && code < best_code) {
            best_e = best_e.min(energy);
            best_code = code;
        }
    }

    let best = SpinConfig(
        (0..n)
            .map(|i| if best_code >> (n - 1 - i) & 1 == 1 { -1 } else { 1 })
            .collect(),
    );
    let e = ising_energy(instance, &best)?;
    Ok((best, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(j: f64) -> IsingInstance {
        IsingInstance::from_pairs(2, [(0, 1, j)], None).unwrap()
    }

    fn spins(v: &[i8]) -> SpinConfig {
        SpinConfig::new(v.to_vec()).unwrap()
    }

    /// Straight double sum over all (i, j), written independently of `ising_energy`.
    fn energy_oracle(inst: &IsingInstance, s: &[i8]) -> f64 {
        let n = inst.n();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += inst.as_slice()[i * n + j] * s[i] as f64 * s[j] as f64;
            }
        }
        -0.5 * total
    }

    fn triangle() -> CutGraph {
        CutGraph::new(
            3,
            vec![
                Edge { i: 0, j: 1, w: 1 },
                Edge { i: 1, j: 2, w: 1 },
                Edge { i: 0, j: 2, w: 1 },
            ],
        )
        .unwrap()
    }

    fn all_configs(n: usize) -> impl Iterator<Item = SpinConfig> {
        (0u32..(1 << n)).map(move |k| {
            SpinConfig((0..n).map(|i| if k >> i & 1 == 1 { -1 } else { 1 }).collect())
        })
    }

    #[test]
    fn rejects_asymmetric_and_diagonal() {
        assert!(IsingInstance::new(2, vec![0.0, 1.0, 2.0, 0.0], None).is_err());
        assert!(IsingInstance::new(2, vec![1.0, 0.0, 0.0, 0.0], None).is_err());
        assert!(IsingInstance::new(0, vec![], None).is_err());
        assert!(IsingInstance::new(2, vec![0.0; 3], None).is_err());
    }

    #[test]
    fn energy_of_zero_coupling_is_zero() {
        let inst = IsingInstance::new(3, vec![0.0; 9], None).unwrap();
        for s in all_configs(3) {
            assert_eq!(ising_energy(&inst, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn energy_hand_expansion() {
        let inst = pair(1.0);
        assert_eq!(ising_energy(&inst, &spins(&[1, 1])).unwrap(), -1.0);
        assert_eq!(ising_energy(&inst, &spins(&[1, -1])).unwrap(), 1.0);
    }

    #[test]
    fn energy_matches_double_sum_oracle() {
        let inst = gen_random_dense(8, 3).unwrap();
        for s in all_configs(8) {
            assert_eq!(
                ising_energy(&inst, &s).unwrap(),
                energy_oracle(&inst, s.as_slice())
            );
        }
    }

    #[test]
    fn energy_dimension_mismatch() {
        assert_eq!(
            ising_energy(&pair(1.0), &SpinConfig::up(3)),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 3
            })
        );
    }

    #[test]
    fn triangle_cut() {
        let g = triangle();
        assert_eq!(cut_value(&g, &spins(&[1, 1, -1])).unwrap(), 2);
        assert_eq!(cut_value(&g, &SpinConfig::up(3)).unwrap(), 0);
        let best = all_configs(3).map(|s| cut_value(&g, &s).unwrap()).max();
        assert_eq!(best, Some(2));
        assert!(cut_value(&g, &SpinConfig::up(2)).is_err());
    }

    #[test]
    fn cut_of_random_graph_matches_enumerated_max() {
        let mut rng = SeededRng::new(11);
        let mut edges = Vec::new();
        for i in 0..10 {
            for j in (i + 1)..10 {
                if rng.unit() < 0.4 {
                    edges.push(Edge {
                        i,
                        j,
                        w: if rng.sign() > 0.0 { 1 } else { 2 },
                    });
                }
            }
        }
        let g = CutGraph::new(10, edges).unwrap();
        let (argmax, best) = all_configs(10)
            .map(|s| {
                let c = cut_value(&g, &s).unwrap();
                (s, c)
            })
            .max_by_key(|(_, c)| *c)
            .unwrap();
        // Independent recount of the crossing edges for the argmax.
        let recount: i64 = g
            .edges()
            .iter()
            .map(|e| e.w * (1 - argmax.as_slice()[e.i] as i64 * argmax.as_slice()[e.j] as i64) / 2)
            .sum();
        assert_eq!(best, recount);
        // The Ising ground state is a maximum cut.
        let (ground, _) = brute_force_ground_state(&maxcut_to_ising(&g).unwrap()).unwrap();
        assert_eq!(cut_value(&g, &ground).unwrap(), best);
    }

    #[test]
    fn maxcut_mapping() {
        let g = CutGraph::new(2, vec![Edge { i: 0, j: 1, w: 1 }]).unwrap();
        let inst = maxcut_to_ising(&g).unwrap();
        assert_eq!(inst.get(0, 1), -1.0);
        assert_eq!(inst.get(1, 0), -1.0);
        assert_eq!(inst.cut_weight(), Some(1));

        let empty = maxcut_to_ising(&CutGraph::new(4, vec![]).unwrap()).unwrap();
        assert!(empty.is_zero());

        let g = triangle();
        let inst = maxcut_to_ising(&g).unwrap();
        for s in all_configs(3) {
            let e = ising_energy(&inst, &s).unwrap();
            let cut = cut_value(&g, &s).unwrap();
            assert_eq!(2 * cut + e as i64, g.total_weight());
            assert_eq!(inst.cut_from_energy(e), Some(cut));
        }
    }

    #[test]
    fn graph_rejects_duplicates_and_self_loops() {
        let dup = vec![Edge { i: 0, j: 1, w: 1 }, Edge { i: 1, j: 0, w: 1 }];
        assert!(matches!(CutGraph::new(2, dup), Err(Error::InvalidGraph(_))));
        assert!(CutGraph::new(2, vec![Edge { i: 1, j: 1, w: 1 }]).is_err());
        assert!(CutGraph::new(2, vec![Edge { i: 0, j: 2, w: 1 }]).is_err());
    }

    #[test]
    fn random_dense_is_deterministic_and_pm_one() {
        let a = gen_random_dense(700, 5).unwrap();
        assert_eq!(a, gen_random_dense(700, 5).unwrap());
        assert_ne!(a, gen_random_dense(700, 6).unwrap());
        for i in 0..700 {
            assert_eq!(a.get(i, i), 0.0);
            for j in 0..700 {
                if i != j {
                    assert!(a.get(i, j) == 1.0 || a.get(i, j) == -1.0);
                }
            }
        }
        assert!(gen_random_dense(1, 0).is_err());
    }

    #[test]
    fn random_dense_mean_is_near_zero() {
        let inst = gen_random_dense(1000, 9).unwrap();
        let count = 1000 * 999 / 2;
        let sum: f64 = (0..1000)
            .flat_map(|i| ((i + 1)..1000).map(move |j| (i, j)))
            .map(|(i, j)| inst.get(i, j))
            .sum();
        let mean = sum / count as f64;
        // Each entry has variance 1, so the standard error is 1/sqrt(count).
        let stderr = 1.0 / (count as f64).sqrt();
        assert!(mean.abs() < 4.0 * stderr, "mean {mean}, stderr {stderr}");
        assert!((inst.off_diagonal_std() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn parse_fixture() {
        let g = parse_gset("3 2\n1 2 1\n2 3 -1").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(
            g.edges(),
            &[Edge { i: 0, j: 1, w: 1 }, Edge { i: 1, j: 2, w: -1 }]
        );
    }

    #[test]
    fn parse_whitespace_and_default_weight() {
        let g = parse_gset("  3\t2 \n\n1   2\n 2\t3  5\n").unwrap();
        assert_eq!(
            g.edges(),
            &[Edge { i: 0, j: 1, w: 1 }, Edge { i: 1, j: 2, w: 5 }]
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_gset("2 1\n1 3 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_gset("3 2\n1 2 1\n2 2 1"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_gset("3 2\n1 2 1\n2 1 1"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_gset("3 2\n1 x 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_gset("3 2\n1 2 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_gset("3 1\n1 2\n2 3\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_gset(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_gset("3\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn read_gset_from_bytes() {
        let g = read_gset(&b"2 1\n1 2 -1\n"[..]).unwrap();
        assert_eq!(g.total_weight(), -1);
    }

    #[test]
    fn signs_tie_break_and_saturation() {
        assert_eq!(signs_from_positions(&[0.3, -0.7]).as_slice(), &[1, -1]);
        assert_eq!(signs_from_positions(&[0.0]).as_slice(), &[1]);
        assert_eq!(signs_from_positions(&[1.0, -1.0, -1.0]).as_slice(), &[1, -1, -1]);
        assert!(SpinConfig::new(vec![1, 0]).is_err());
    }

    #[test]
    fn brute_force_small_cases() {
        let (s, e) = brute_force_ground_state(&pair(1.0)).unwrap();
        assert_eq!((s.as_slice(), e), (&[1i8, 1][..], -1.0));
        let (s, e) = brute_force_ground_state(&pair(-1.0)).unwrap();
        assert_eq!((s.as_slice(), e), (&[1i8, -1][..], -1.0));
        let big = IsingInstance::new(25, vec![0.0; 625], None).unwrap();
        assert!(matches!(
            brute_force_ground_state(&big),
            Err(Error::TooLarge { n: 25, .. })
        ));
    }

    #[test]
    fn brute_force_matches_plain_enumeration() {
        for seed in 0..5 {
            let inst = gen_random_dense(10, seed).unwrap();
            // Second, independent loop: every configuration in lexicographic
            // order, keeping the first strict minimum.
            let mut best: Option<(Vec<i8>, f64)> = None;
            for k in 0u32..(1 << 10) {
                let s: Vec<i8> = (0..10)
                    .map(|i| if k >> (9 - i) & 1 == 1 { -1 } else { 1 })
                    .collect();
                let e = energy_oracle(&inst, &s);
                if best.as_ref().map_or(true, |(_, b)| e < *b) {
                    best = Some((s, e));
                }
            }
            let (want_s, want_e) = best.unwrap();
            let (got_s, got_e) = brute_force_ground_state(&inst).unwrap();
            assert_eq!(got_e, want_e);
            assert_eq!(got_s.as_slice(), &want_s[..]);
        }
    }

    #[test]
    fn brute_force_zero_coupling_picks_all_up() {
        let inst = IsingInstance::new(6, vec![0.0; 36], None).unwrap();
        let (s, e) = brute_force_ground_state(&inst).unwrap();
        assert_eq!(s, SpinConfig::up(6));
        assert_eq!(e, 0.0);
    }

    #[test]
    fn json_round_trip_keeps_maxcut_origin() {
        let g = triangle();
        let inst = maxcut_to_ising(&g).unwrap().with_label("tri");
        let back = IsingInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        let dense = gen_random_dense(5, 1).unwrap();
        assert_eq!(IsingInstance::from_json(&dense.to_json()).unwrap(), dense);
        assert!(IsingInstance::from_json("{\"n\": 2, \"edges\": [[0, 2, 1.0]]}").is_err());
    }

    #[test]
    fn run_lengths() {
        let s = spins(&[1, 1, -1, 1, 1, 1]);
        assert_eq!(s.run_lengths(), vec![(1, 2), (-1, 1), (1, 3)]);
    }
}
