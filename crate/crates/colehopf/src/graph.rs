//! Metric graphs, the weighted energy form, and the first-order calculus
//! (derivation `d`, coderivative `d*`, Helmholtz decomposition).
//!
//! A metric graph is a finite collection of intervals ("edges") glued at
//! vertices.  Each edge `e` carries a length `l_e`, an energy weight `a_e`
//! and a measure weight `c_e`; functions on the graph are continuous across
//! vertices and the Dirichlet energy is
//!
//! ```text
//!   E(f, g) = Σ_e a_e ∫_0^{l_e} f_e'(s) g_e'(s) ds ,
//! ```
//!
//! while L²(μ) pairs with the edge measure `c_e ds`.  The derivation
//!
//! ```text
//!   (df)_e = (a_e / c_e)^{1/2} f_e'
//! ```
//!
//! is an isometry from the energy form into L²(μ):  ⟨df, dg⟩ = E(f, g).
//! Its adjoint `d*` acts as `-(a_e/c_e)^{1/2} u_e'` on fields that satisfy
//! the weighted trace condition Σ_{e∼p} (a_e c_e)^{1/2} U_p(e) u_e(p) = 0 at
//! every vertex `p`, where the orientation sign U_p(e) is `+1` at the
//! terminal vertex and `-1` at the initial vertex of `e`.  The kernel of
//! `d*` is spanned by rescaled fundamental cycles and L²(μ) splits
//! orthogonally as `im d ⊕ ker d*` (Helmholtz).
//!
//! Discretization: functions are continuous piecewise-linear nodal data on a
//! uniform grid per edge (`n_e` cells, `n_e + 1` nodes); fields may be nodal
//! or cellwise constant.  All quadratures below are exact on these spaces,
//! which makes the gradient isometry, the adjointness of `d` and `d*` and
//! the orthogonality `im d ⟂ ker d*` hold to machine precision rather than
//! up to discretization error.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// One edge of a metric graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Stable identifier; edges are ordered by id everywhere (tie breaking).
    pub id: usize,
    /// Initial vertex i(e).
    pub i: usize,
    /// Terminal vertex j(e).
    pub j: usize,
    /// Length l_e > 0 in abstract units.
    pub length: f64,
    /// Energy weight a_e > 0 (dimensionless).
    pub energy_weight: f64,
    /// Measure weight c_e > 0 (dimensionless).
    pub measure_weight: f64,
}

impl Edge {
    /// Unit-weight edge, the common case in the examples.
    pub fn unit(id: usize, i: usize, j: usize) -> Self {
        Edge { id, i, j, length: 1.0, energy_weight: 1.0, measure_weight: 1.0 }
    }
}

/// A finite connected metric graph without loops or multiple edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    n_vertices: usize,
    edges: Vec<Edge>,
    /// Per vertex: (edge index, U_p(e)) for every incident edge, in edge order.
    incidence: Vec<Vec<(usize, f64)>>,
}

impl MetricGraph {
    /// Validates and builds a metric graph from an edge list.
    ///
    /// Rejected inputs, each with its own diagnostic: empty edge list, loops
    /// (`i(e) = j(e)`), duplicate edges (same unordered endpoint pair),
    /// nonpositive or non-finite lengths/weights, endpoints outside
    /// `0..n_vertices`, and disconnected graphs.
    pub fn new(n_vertices: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidGraph("edge list is empty".into()));
        }
        if n_vertices < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least two vertices, got {n_vertices}"
            )));
        }
        edges.sort_by_key(|e| e.id);
        for pair in edges.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge id {}",
                    pair[0].id
                )));
            }
        }
        let mut seen_pairs = std::collections::HashSet::new();
        for e in &edges {
            if e.i == e.j {
                return Err(Error::InvalidGraph(format!(
                    "edge {} is a loop at vertex {}",
                    e.id, e.i
                )));
            }
            if e.i >= n_vertices || e.j >= n_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge {} references vertex outside 0..{n_vertices}",
                    e.id
                )));
            }
            let key = (e.i.min(e.j), e.i.max(e.j));
            if !seen_pairs.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "multiple edges between vertices {} and {}",
                    key.0, key.1
                )));
            }
            for (name, v) in [
                ("length", e.length),
                ("energy weight", e.energy_weight),
                ("measure weight", e.measure_weight),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidGraph(format!(
                        "edge {}: {name} must be positive and finite, got {v}",
                        e.id
                    )));
                }
            }
        }
        let mut incidence = vec![Vec::new(); n_vertices];
        for (idx, e) in edges.iter().enumerate() {
            incidence[e.i].push((idx, -1.0));
            incidence[e.j].push((idx, 1.0));
        }
        let graph = MetricGraph { n_vertices, edges, incidence };
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_vertices];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(p) = stack.pop() {
            for &(eidx, _) in &self.incidence[p] {
                let e = &self.edges[eidx];
                let q = if e.i == p { e.j } else { e.i };
                if !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Parses the line-oriented graph format: one edge per line,
    /// `edge_id i_vertex j_vertex length energy_weight measure_weight`,
    /// whitespace separated, `#` starts a comment.  Vertex ids may be any
    /// non-negative integers; they are renumbered by sorted value.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw: Vec<(usize, usize, usize, f64, f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::InvalidGraph(format!(
                    "line {}: expected 6 fields (edge_id i j length energy_weight measure_weight), got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse_usize = |s: &str, what: &str| {
                s.parse::<usize>().map_err(|_| {
                    Error::InvalidGraph(format!("line {}: bad {what} `{s}`", lineno + 1))
                })
            };
            let parse_f64 = |s: &str, what: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidGraph(format!("line {}: bad {what} `{s}`", lineno + 1))
                })
            };
            raw.push((
                parse_usize(fields[0], "edge id")?,
                parse_usize(fields[1], "initial vertex")?,
                parse_usize(fields[2], "terminal vertex")?,
                parse_f64(fields[3], "length")?,
                parse_f64(fields[4], "energy weight")?,
                parse_f64(fields[5], "measure weight")?,
            ));
        }
        if raw.is_empty() {
            return Err(Error::InvalidGraph("graph file contains no edges".into()));
        }
        let mut ids: Vec<usize> = raw.iter().flat_map(|r| [r.1, r.2]).collect();
        ids.sort_unstable();
        ids.dedup();
        let lookup = |v: usize| ids.binary_search(&v).expect("vertex id collected above");
        let edges = raw
            .into_iter()
            .map(|(id, i, j, l, a, c)| Edge {
                id,
                i: lookup(i),
                j: lookup(j),
                length: l,
                energy_weight: a,
                measure_weight: c,
            })
            .collect();
        MetricGraph::new(ids.len(), edges)
    }

    /// Reads [`MetricGraph::parse`] input from a file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Single unit edge with unit weights: the interval [0, 1].
    pub fn interval() -> Arc<Self> {
        Arc::new(Self::new(2, vec![Edge::unit(0, 0, 1)]).expect("static graph"))
    }

    /// Triangle on three vertices, unit lengths and weights (one cycle).
    pub fn triangle() -> Arc<Self> {
        Arc::new(
            Self::new(
                3,
                vec![Edge::unit(0, 0, 1), Edge::unit(1, 1, 2), Edge::unit(2, 2, 0)],
            )
            .expect("static graph"),
        )
    }

    /// Star with `leaves` unit edges oriented out of the center vertex 0.
    pub fn star(leaves: usize) -> Result<Arc<Self>> {
        if leaves < 2 {
            return Err(Error::InvalidGraph("star needs at least 2 leaves".into()));
        }
        let edges = (0..leaves).map(|k| Edge::unit(k, 0, k + 1)).collect();
        Ok(Arc::new(Self::new(leaves + 1, edges)?))
    }

    /// Path of `k` unit edges in a row (Neumann interval of length `k`).
    pub fn path(k: usize) -> Result<Arc<Self>> {
        if k == 0 {
            return Err(Error::InvalidGraph("path needs at least one edge".into()));
        }
        let edges = (0..k).map(|e| Edge::unit(e, e, e + 1)).collect();
        Ok(Arc::new(Self::new(k + 1, edges)?))
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    /// Incident edges of vertex `p` as (edge index, U_p(e)).
    pub fn incident(&self, p: usize) -> &[(usize, f64)] {
        &self.incidence[p]
    }

    /// Orientation sign U_p(e): +1 if p = j(e), -1 if p = i(e), 0 otherwise.
    pub fn orientation(&self, p: usize, edge_idx: usize) -> f64 {
        let e = &self.edges[edge_idx];
        if p == e.j {
            1.0
        } else if p == e.i {
            -1.0
        } else {
            0.0
        }
    }

    /// Dimension of the cycle space, |E| - |V| + 1 for connected graphs.
    pub fn cycle_dimension(&self) -> usize {
        self.edges.len() + 1 - self.n_vertices
    }

    pub fn is_tree(&self) -> bool {
        self.cycle_dimension() == 0
    }

    /// Total measure μ(X) = Σ_e c_e l_e.
    pub fn total_measure(&self) -> f64 {
        self.edges.iter().map(|e| e.measure_weight * e.length).sum()
    }
}

/// Storage convention of an [`EdgeField`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// `n_e + 1` nodal values per edge (piecewise linear, no vertex coupling).
    Nodal,
    /// `n_e` per-cell constants per edge (piecewise constant / midpoint values).
    Cellwise,
}

/// Common view over nodal functions and edge fields so the exact L²(μ)
/// pairing can mix representations.
pub trait SampledOnEdges {
    fn graph(&self) -> &Arc<MetricGraph>;
    fn kind(&self) -> FieldKind;
    fn edge_values(&self, e: usize) -> &[f64];
    /// Number of grid cells on edge `e`.
    fn n_cells(&self, e: usize) -> usize;
}

fn check_same_support<F: SampledOnEdges + ?Sized, G: SampledOnEdges + ?Sized>(
    f: &F,
    g: &G,
) -> Result<()> {
    if !Arc::ptr_eq(f.graph(), g.graph()) && f.graph().as_ref() != g.graph().as_ref() {
        return Err(Error::Incompatible("operands live on different graphs".into()));
    }
    for e in 0..f.graph().n_edges() {
        if f.n_cells(e) != g.n_cells(e) {
            return Err(Error::Incompatible(format!(
                "operands use different grids on edge {} ({} vs {} cells)",
                f.graph().edge(e).id,
                f.n_cells(e),
                g.n_cells(e)
            )));
        }
    }
    Ok(())
}

/// A continuous function on the graph: piecewise-linear nodal samples per
/// edge, equal at shared vertices.
#[derive(Debug, Clone)]
pub struct GraphFunction {
    graph: Arc<MetricGraph>,
    values: Vec<Vec<f64>>,
}

impl GraphFunction {
    /// Builds from per-edge nodal arrays and checks vertex continuity.
    pub fn from_edge_values(graph: &Arc<MetricGraph>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != graph.n_edges() {
            return Err(Error::Incompatible(format!(
                "expected {} edge arrays, got {}",
                graph.n_edges(),
                values.len()
            )));
        }
        for (e, vals) in values.iter().enumerate() {
            if vals.len() < 2 {
                return Err(Error::InvalidInput(format!(
                    "edge {}: need at least 2 nodal values (n_e >= 1)",
                    graph.edge(e).id
                )));
            }
        }
        let f = GraphFunction { graph: Arc::clone(graph), values };
        f.check_continuity()?;
        Ok(f)
    }

    fn check_continuity(&self) -> Result<()> {
        let scale = 1.0 + self.sup_norm();
        for p in 0..self.graph.n_vertices() {
            let traces: Vec<f64> = self
                .graph
                .incident(p)
                .iter()
                .map(|&(e, sign)| {
                    let vals = &self.values[e];
                    if sign > 0.0 {
                        vals[vals.len() - 1]
                    } else {
                        vals[0]
                    }
                })
                .collect();
            for &t in &traces[1..] {
                if (t - traces[0]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidInput(format!(
                        "nodal values disagree at vertex {p}: {} vs {}",
                        traces[0], t
                    )));
                }
            }
        }
        Ok(())
    }

    /// Constant function on a uniform grid (`n[e]` cells per edge).
    pub fn constant(graph: &Arc<MetricGraph>, grid: &[usize], value: f64) -> Self {
        let values = grid.iter().map(|&n| vec![value; n + 1]).collect();
        GraphFunction { graph: Arc::clone(graph), values }
    }

    /// Edgewise-linear interpolant of prescribed vertex values (the
    /// interpolation operator of the edgewise-linear subspace).
    pub fn from_vertex_values(
        graph: &Arc<MetricGraph>,
        grid: &[usize],
        vertex_values: &[f64],
    ) -> Result<Self> {
        if vertex_values.len() != graph.n_vertices() {
            return Err(Error::Incompatible(format!(
                "expected {} vertex values, got {}",
                graph.n_vertices(),
                vertex_values.len()
            )));
        }
        check_grid(graph, grid)?;
        let values = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let n = grid[e];
                let (fi, fj) = (vertex_values[edge.i], vertex_values[edge.j]);
                (0..=n)
                    .map(|k| {
                        // Endpoints reproduce the prescribed values exactly.
                        if k == 0 {
                            fi
                        } else if k == n {
                            fj
                        } else {
                            fi + (fj - fi) * (k as f64) / (n as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(GraphFunction { graph: Arc::clone(graph), values })
    }

    /// Samples `f(edge_index, s)` on a uniform grid; the two endpoint samples
    /// of every edge are evaluated once per *vertex* (through the first
    /// incident edge), so vertex continuity holds exactly by construction.
    /// The closure must therefore describe a function that is continuous at
    /// the vertices.
    pub fn from_fn(
        graph: &Arc<MetricGraph>,
        grid: &[usize],
        f: impl Fn(usize, f64) -> f64,
    ) -> Result<Self> {
        check_grid(graph, grid)?;
        let vertex_values: Vec<f64> = (0..graph.n_vertices())
            .map(|p| {
                let &(e, sign) = &graph.incident(p)[0];
                let s = if sign > 0.0 { graph.edge(e).length } else { 0.0 };
                f(e, s)
            })
            .collect();
        let values = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                let n = grid[e];
                let h = edge.length / n as f64;
                (0..=n)
                    .map(|k| {
                        if k == 0 {
                            vertex_values[edge.i]
                        } else if k == n {
                            vertex_values[edge.j]
                        } else {
                            f(e, k as f64 * h)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(GraphFunction { graph: Arc::clone(graph), values })
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn edge_values(&self, e: usize) -> &[f64] {
        &self.values[e]
    }

    pub fn grid(&self) -> Vec<usize> {
        self.values.iter().map(|v| v.len() - 1).collect()
    }

    /// Value at vertex `p` (well defined by continuity).
    pub fn vertex_value(&self, p: usize) -> f64 {
        let &(e, sign) = &self.graph.incident(p)[0];
        let vals = &self.values[e];
        if sign > 0.0 {
            vals[vals.len() - 1]
        } else {
            vals[0]
        }
    }

    /// All vertex values in vertex order.
    pub fn vertex_values(&self) -> Vec<f64> {
        (0..self.graph.n_vertices()).map(|p| self.vertex_value(p)).collect()
    }

    /// Pointwise map; continuity is preserved because shared nodal values map
    /// to shared images.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GraphFunction {
            graph: Arc::clone(&self.graph),
            values: self.values.iter().map(|v| v.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &GraphFunction, b: f64) -> Result<Self> {
        check_same_support(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u.iter().zip(v).map(|(&x, &y)| a * x + b * y).collect())
            .collect();
        Ok(GraphFunction { graph: Arc::clone(&self.graph), values })
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }

    /// True when every edge restriction is affine within `tol` (absolute,
    /// relative to the nodal scale).
    pub fn is_edgewise_linear(&self, tol: f64) -> bool {
        let scale = 1.0 + self.sup_norm();
        self.values.iter().all(|vals| {
            let n = vals.len() - 1;
            let (f0, f1) = (vals[0], vals[n]);
            vals.iter().enumerate().all(|(k, &v)| {
                let lin = f0 + (f1 - f0) * k as f64 / n as f64;
                (v - lin).abs() <= tol * scale
            })
        })
    }
}

impl SampledOnEdges for GraphFunction {
    fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Nodal
    }
    fn edge_values(&self, e: usize) -> &[f64] {
        &self.values[e]
    }
    fn n_cells(&self, e: usize) -> usize {
        self.values[e].len() - 1
    }
}

/// An L²(μ) vector field: per-edge data with no continuity constraint.
#[derive(Debug, Clone)]
pub struct EdgeField {
    graph: Arc<MetricGraph>,
    kind: FieldKind,
    values: Vec<Vec<f64>>,
}

impl EdgeField {
    pub fn new(graph: &Arc<MetricGraph>, kind: FieldKind, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != graph.n_edges() {
            return Err(Error::Incompatible(format!(
                "expected {} edge arrays, got {}",
                graph.n_edges(),
                values.len()
            )));
        }
        let min_len = match kind {
            FieldKind::Nodal => 2,
            FieldKind::Cellwise => 1,
        };
        for (e, vals) in values.iter().enumerate() {
            if vals.len() < min_len {
                return Err(Error::InvalidInput(format!(
                    "edge {}: too few samples for a {:?} field",
                    graph.edge(e).id,
                    kind
                )));
            }
        }
        Ok(EdgeField { graph: Arc::clone(graph), kind, values })
    }

    pub fn zero(graph: &Arc<MetricGraph>, grid: &[usize], kind: FieldKind) -> Self {
        let values = grid
            .iter()
            .map(|&n| match kind {
                FieldKind::Nodal => vec![0.0; n + 1],
                FieldKind::Cellwise => vec![0.0; n],
            })
            .collect();
        EdgeField { graph: Arc::clone(graph), kind, values }
    }

    /// Field that is constant on each edge.  Such fields are simultaneously
    /// piecewise linear and piecewise constant, so both storage kinds are
    /// exact; `kind` picks the representation.
    pub fn from_edge_constants(
        graph: &Arc<MetricGraph>,
        grid: &[usize],
        constants: &[f64],
        kind: FieldKind,
    ) -> Result<Self> {
        if constants.len() != graph.n_edges() {
            return Err(Error::Incompatible(format!(
                "expected {} edge constants, got {}",
                graph.n_edges(),
                constants.len()
            )));
        }
        check_grid(graph, grid)?;
        let values = grid
            .iter()
            .zip(constants)
            .map(|(&n, &c)| match kind {
                FieldKind::Nodal => vec![c; n + 1],
                FieldKind::Cellwise => vec![c; n],
            })
            .collect();
        Ok(EdgeField { graph: Arc::clone(graph), kind, values })
    }

    pub fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn edge_values(&self, e: usize) -> &[f64] {
        &self.values[e]
    }

    pub fn grid(&self) -> Vec<usize> {
        (0..self.graph.n_edges()).map(|e| self.n_cells(e)).collect()
    }

    /// Trace of the field at an endpoint of edge `e`: the endpoint sample for
    /// nodal fields, the adjacent cell value for cellwise fields.
    pub fn endpoint_trace(&self, e: usize, at_terminal: bool) -> f64 {
        let vals = &self.values[e];
        match (self.kind, at_terminal) {
            (_, true) => vals[vals.len() - 1],
            (_, false) => vals[0],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        EdgeField {
            graph: Arc::clone(&self.graph),
            kind: self.kind,
            values: self.values.iter().map(|v| v.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// Pointwise square (kind preserved; exact for cellwise fields).
    pub fn squared(&self) -> Self {
        self.map(|x| x * x)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    /// `a * self + b * other`; both fields must share kind and grid.
    pub fn linear_combination(&self, a: f64, other: &EdgeField, b: f64) -> Result<Self> {
        if self.kind != other.kind {
            return Err(Error::Incompatible(
                "cannot combine nodal and cellwise fields".into(),
            ));
        }
        check_same_support(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u.iter().zip(v).map(|(&x, &y)| a * x + b * y).collect())
            .collect();
        Ok(EdgeField { graph: Arc::clone(&self.graph), kind: self.kind, values })
    }
}

impl SampledOnEdges for EdgeField {
    fn graph(&self) -> &Arc<MetricGraph> {
        &self.graph
    }
    fn kind(&self) -> FieldKind {
        self.kind
    }
    fn edge_values(&self, e: usize) -> &[f64] {
        &self.values[e]
    }
    fn n_cells(&self, e: usize) -> usize {
        match self.kind {
            FieldKind::Nodal => self.values[e].len() - 1,
            FieldKind::Cellwise => self.values[e].len(),
        }
    }
}

fn check_grid(graph: &MetricGraph, grid: &[usize]) -> Result<()> {
    if grid.len() != graph.n_edges() {
        return Err(Error::Incompatible(format!(
            "grid has {} entries for {} edges",
            grid.len(),
            graph.n_edges()
        )));
    }
    if let Some(e) = grid.iter().position(|&n| n == 0) {
        return Err(Error::InvalidInput(format!(
            "edge {}: grid needs at least one cell",
            graph.edge(e).id
        )));
    }
    Ok(())
}

/// Uniform grid with `n` cells on every edge.
pub fn uniform_grid(graph: &MetricGraph, n: usize) -> Vec<usize> {
    vec![n.max(1); graph.n_edges()]
}

/// Dirichlet energy E(f, g) = Σ_e a_e ∫ f' g', exact for piecewise-linear
/// nodal data.
pub fn energy_form(f: &GraphFunction, g: &GraphFunction) -> Result<f64> {
    check_same_support(f, g)?;
    let graph = f.graph();
    let mut total = 0.0;
    for (e, edge) in graph.edges().iter().enumerate() {
        let (fv, gv) = (f.edge_values(e), g.edge_values(e));
        let n = fv.len() - 1;
        let h = edge.length / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            s += (fv[k + 1] - fv[k]) * (gv[k + 1] - gv[k]);
        }
        total += edge.energy_weight * s / h;
    }
    Ok(total)
}

/// L²(μ) inner product Σ_e c_e ∫ f g, exact for any mix of piecewise-linear
/// (nodal) and piecewise-constant (cellwise) arguments.
pub fn l2_inner<F, G>(f: &F, g: &G) -> Result<f64>
where
    F: SampledOnEdges + ?Sized,
    G: SampledOnEdges + ?Sized,
{
    check_same_support(f, g)?;
    let graph = f.graph();
    let mut total = 0.0;
    for (e, edge) in graph.edges().iter().enumerate() {
        let n = f.n_cells(e);
        let h = edge.length / n as f64;
        let (fv, gv) = (f.edge_values(e), g.edge_values(e));
        let s = match (f.kind(), g.kind()) {
            (FieldKind::Nodal, FieldKind::Nodal) => (0..n)
                .map(|k| {
                    (2.0 * fv[k] * gv[k]
                        + fv[k] * gv[k + 1]
                        + fv[k + 1] * gv[k]
                        + 2.0 * fv[k + 1] * gv[k + 1])
                        / 6.0
                })
                .sum::<f64>(),
            (FieldKind::Cellwise, FieldKind::Cellwise) => {
                (0..n).map(|k| fv[k] * gv[k]).sum::<f64>()
            }
            (FieldKind::Nodal, FieldKind::Cellwise) => {
                (0..n).map(|k| gv[k] * 0.5 * (fv[k] + fv[k + 1])).sum::<f64>()
            }
            (FieldKind::Cellwise, FieldKind::Nodal) => {
                (0..n).map(|k| fv[k] * 0.5 * (gv[k] + gv[k + 1])).sum::<f64>()
            }
        };
        total += edge.measure_weight * h * s;
    }
    Ok(total)
}

/// L²(μ) norm.
pub fn l2_norm<F: SampledOnEdges + ?Sized>(f: &F) -> f64 {
    l2_inner(f, f).expect("an element is always compatible with itself").max(0.0).sqrt()
}

/// Weighted pairing ⟨φ · u, v⟩_{L²(μ)} for cellwise fields `u`, `v` and a
/// nodal weight φ — exact: on each cell the integrand is (linear)·const².
pub fn weighted_field_inner(phi: &GraphFunction, u: &EdgeField, v: &EdgeField) -> Result<f64> {
    if u.kind() != FieldKind::Cellwise || v.kind() != FieldKind::Cellwise {
        return Err(Error::Incompatible(
            "weighted pairing expects cellwise fields".into(),
        ));
    }
    check_same_support(phi, u)?;
    check_same_support(u, v)?;
    let graph = phi.graph();
    let mut total = 0.0;
    for (e, edge) in graph.edges().iter().enumerate() {
        let n = u.n_cells(e);
        let h = edge.length / n as f64;
        let (pv, uv, vv) = (phi.edge_values(e), u.edge_values(e), v.edge_values(e));
        let s: f64 = (0..n)
            .map(|k| uv[k] * vv[k] * 0.5 * (pv[k] + pv[k + 1]))
            .sum();
        total += edge.measure_weight * h * s;
    }
    Ok(total)
}

/// The derivation d: (df)_e = (a_e/c_e)^{1/2} f_e', returned as a cellwise
/// field.  The isometry ⟨df, dg⟩_{L²(μ)} = E(f, g) is exact on this
/// discretization.
pub fn gradient_d(f: &GraphFunction) -> EdgeField {
    let graph = f.graph();
    let values = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let fv = f.edge_values(e);
            let n = fv.len() - 1;
            let h = edge.length / n as f64;
            let scale = (edge.energy_weight / edge.measure_weight).sqrt();
            (0..n).map(|k| scale * (fv[k + 1] - fv[k]) / h).collect()
        })
        .collect();
    EdgeField { graph: Arc::clone(graph), kind: FieldKind::Cellwise, values }
}

/// Result of applying the coderivative d* to an edge field.
#[derive(Debug, Clone)]
pub struct Coderivative {
    /// The edgewise value -(a_e/c_e)^{1/2} u_e'.  Nodal input yields an exact
    /// cellwise derivative; cellwise input is reconstructed nodally by finite
    /// differences (second order at interior nodes, first order at edge
    /// ends).
    pub value: EdgeField,
    /// Per-vertex residual r_p = Σ_{e∼p} (a_e c_e)^{1/2} U_p(e) u_e(p) of the
    /// weighted trace condition defining the domain of d*.
    pub vertex_residuals: Vec<f64>,
    /// True when all |r_p| are below `tolerance`.
    pub in_domain: bool,
    /// Absolute tolerance used for the domain flag.
    pub tolerance: f64,
}

/// Relative vertex-residual tolerance for the d* domain flag.
pub const DSTAR_DOMAIN_TOLERANCE: f64 = 1e-9;

/// Coderivative with the default domain tolerance (`1e-9` relative to the
/// largest weighted trace magnitude).
pub fn coderivative_dstar(u: &EdgeField) -> Coderivative {
    coderivative_dstar_with_tolerance(u, DSTAR_DOMAIN_TOLERANCE)
}

/// Coderivative with a caller-chosen relative domain tolerance.
pub fn coderivative_dstar_with_tolerance(u: &EdgeField, rel_tol: f64) -> Coderivative {
    let graph = u.graph();
    let values: Vec<Vec<f64>> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let uv = u.edge_values(e);
            let scale = -(edge.energy_weight / edge.measure_weight).sqrt();
            match u.kind() {
                FieldKind::Nodal => {
                    let n = uv.len() - 1;
                    let h = edge.length / n as f64;
                    (0..n).map(|k| scale * (uv[k + 1] - uv[k]) / h).collect()
                }
                FieldKind::Cellwise => {
                    let n = uv.len();
                    let h = edge.length / n as f64;
                    (0..=n)
                        .map(|k| {
                            let slope = if n == 1 {
                                0.0
                            } else if k == 0 {
                                (uv[1] - uv[0]) / h
                            } else if k == n {
                                (uv[n - 1] - uv[n - 2]) / h
                            } else {
                                (uv[k] - uv[k - 1]) / h
                            };
                            scale * slope
                        })
                        .collect()
                }
            }
        })
        .collect();
    let out_kind = match u.kind() {
        FieldKind::Nodal => FieldKind::Cellwise,
        FieldKind::Cellwise => FieldKind::Nodal,
    };
    let mut residuals = vec![0.0; graph.n_vertices()];
    let mut max_trace = 0.0f64;
    for p in 0..graph.n_vertices() {
        for &(e, sign) in graph.incident(p) {
            let edge = graph.edge(e);
            let w = (edge.energy_weight * edge.measure_weight).sqrt();
            let trace = u.endpoint_trace(e, sign > 0.0);
            residuals[p] += w * sign * trace;
            max_trace = max_trace.max((w * trace).abs());
        }
    }
    let tolerance = rel_tol * (1.0 + max_trace);
    let in_domain = residuals.iter().all(|r| r.abs() <= tolerance);
    Coderivative {
        value: EdgeField { graph: Arc::clone(graph), kind: out_kind, values },
        vertex_residuals: residuals,
        in_domain,
        tolerance,
    }
}

/// Orthonormal basis of ker d*: one edgewise-constant field per fundamental
/// cycle of a depth-first spanning tree, with per-edge constants
/// ±(a_e c_e)^{-1/2} so that every weighted vertex trace cancels, then
/// Gram-Schmidt in L²(μ).  Trees yield the empty list.
pub fn kernel_dstar_basis(graph: &Arc<MetricGraph>, grid: &[usize]) -> Result<Vec<EdgeField>> {
    check_grid(graph, grid)?;
    // Depth-first spanning tree from vertex 0, neighbors in edge-id order.
    let mut parent_edge: Vec<Option<usize>> = vec![None; graph.n_vertices()];
    let mut visited = vec![false; graph.n_vertices()];
    let mut tree_edge = vec![false; graph.n_edges()];
    let mut stack = vec![0usize];
    visited[0] = true;
    while let Some(p) = stack.pop() {
        for &(e, _) in graph.incident(p) {
            let edge = graph.edge(e);
            let q = if edge.i == p { edge.j } else { edge.i };
            if !visited[q] {
                visited[q] = true;
                tree_edge[e] = true;
                parent_edge[q] = Some(e);
                stack.push(q);
            }
        }
    }
    let tree_path_to_root = |mut p: usize| -> Vec<usize> {
        let mut path = Vec::new();
        while let Some(e) = parent_edge[p] {
            path.push(e);
            let edge = graph.edge(e);
            p = if edge.i == p { edge.j } else { edge.i };
        }
        path
    };
    let mut raw = Vec::new();
    for (e0, edge0) in graph.edges().iter().enumerate() {
        if tree_edge[e0] {
            continue;
        }
        // Fundamental cycle: e0 from i to j, then the tree path j -> i.
        let mut constants = vec![0.0; graph.n_edges()];
        let weight = |e: usize| {
            let ed = graph.edge(e);
            1.0 / (ed.energy_weight * ed.measure_weight).sqrt()
        };
        constants[e0] = weight(e0);
        let to_root_j = tree_path_to_root(edge0.j);
        let to_root_i = tree_path_to_root(edge0.i);
        // Drop the common tail to the root; what remains is the j -> i path.
        let mut lj = to_root_j.len();
        let mut li = to_root_i.len();
        while lj > 0 && li > 0 && to_root_j[lj - 1] == to_root_i[li - 1] {
            lj -= 1;
            li -= 1;
        }
        // Walk j -> lca: traverse each tree edge from child to parent.
        let mut p = edge0.j;
        for &e in &to_root_j[..lj] {
            let ed = graph.edge(e);
            // Traversal direction p -> other endpoint; positive sign when the
            // traversal agrees with the edge orientation i(e) -> j(e).
            let sign = if ed.i == p { 1.0 } else { -1.0 };
            constants[e] = sign * weight(e);
            p = if ed.i == p { ed.j } else { ed.i };
        }
        // Walk i -> lca recorded against the cycle direction (lca -> i).
        let mut p = edge0.i;
        for &e in &to_root_i[..li] {
            let ed = graph.edge(e);
            let sign = if ed.i == p { -1.0 } else { 1.0 };
            constants[e] = sign * weight(e);
            p = if ed.i == p { ed.j } else { ed.i };
        }
        raw.push(EdgeField::from_edge_constants(
            graph,
            grid,
            &constants,
            FieldKind::Cellwise,
        )?);
    }
    // Gram-Schmidt in L²(μ) with one re-orthogonalization pass.
    let mut basis: Vec<EdgeField> = Vec::with_capacity(raw.len());
    for mut v in raw {
        for _ in 0..2 {
            for b in &basis {
                let c = l2_inner(&v, b)?;
                v = v.linear_combination(1.0, b, -c)?;
            }
        }
        let norm = l2_norm(&v);
        if norm <= 1e-13 {
            return Err(Error::NumericalAssertion(
                "fundamental cycle fields became linearly dependent".into(),
            ));
        }
        basis.push(v.scale(1.0 / norm));
    }
    Ok(basis)
}

/// Helmholtz decomposition `u = gradient part + circulation part` against a
/// precomputed orthonormal kernel basis.  The circulation part is the
/// orthogonal projection onto span(basis); the parts are returned in the
/// same storage kind as `u` (kernel fields are edge constants, hence exact
/// in both representations).
pub fn helmholtz_project_with(
    u: &EdgeField,
    basis: &[EdgeField],
) -> Result<(EdgeField, EdgeField)> {
    let grid = u.grid();
    let mut circulation = EdgeField::zero(u.graph(), &grid, u.kind());
    for b in basis {
        let coeff = l2_inner(u, b)?;
        let constants: Vec<f64> = (0..u.graph().n_edges())
            .map(|e| b.edge_values(e)[0])
            .collect();
        let b_matched =
            EdgeField::from_edge_constants(u.graph(), &grid, &constants, u.kind())?;
        circulation = circulation.linear_combination(1.0, &b_matched, coeff)?;
    }
    let gradient = u.linear_combination(1.0, &circulation, -1.0)?;
    Ok((gradient, circulation))
}

/// Helmholtz decomposition, computing the kernel basis on the fly.
pub fn helmholtz_project(u: &EdgeField) -> Result<(EdgeField, EdgeField)> {
    let basis = kernel_dstar_basis(u.graph(), &u.grid())?;
    helmholtz_project_with(u, &basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn linear_on_interval(n: usize) -> GraphFunction {
        let graph = MetricGraph::interval();
        GraphFunction::from_fn(&graph, &[n], |_, s| s).unwrap()
    }

    #[test]
    fn builders_report_expected_cycle_dimensions() {
        assert_eq!(MetricGraph::triangle().cycle_dimension(), 1);
        assert_eq!(MetricGraph::interval().cycle_dimension(), 0);
        assert_eq!(MetricGraph::star(3).unwrap().cycle_dimension(), 0);
        assert!(MetricGraph::star(3).unwrap().is_tree());
    }

    #[test]
    fn degenerate_and_malformed_graphs_are_rejected() {
        assert!(matches!(
            MetricGraph::new(1, vec![]),
            Err(Error::InvalidGraph(_))
        ));
        let loop_edge = Edge::unit(0, 1, 1);
        assert!(MetricGraph::new(2, vec![loop_edge]).is_err());
        let dup = vec![Edge::unit(0, 0, 1), Edge::unit(1, 1, 0)];
        assert!(MetricGraph::new(2, dup).is_err());
        let mut bad = Edge::unit(0, 0, 1);
        bad.length = -1.0;
        assert!(MetricGraph::new(2, vec![bad]).is_err());
        let disconnected = vec![Edge::unit(0, 0, 1), Edge::unit(1, 2, 3)];
        assert!(MetricGraph::new(4, disconnected).is_err());
    }

    #[test]
    fn graph_file_round_trip_with_comments() {
        let text = "# a triangle\n0 0 1 1.0 1.0 1.0\n1 1 2 1.0 1.0 1.0 # last edge follows\n2 2 0 1.0 1.0 1.0\n";
        let g = MetricGraph::parse(text).unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert_eq!(g.n_edges(), 3);
        assert_eq!(g.cycle_dimension(), 1);
        assert!(MetricGraph::parse("0 0 1 1.0 1.0\n").is_err());
    }

    #[test]
    fn energy_of_unit_slope_is_one_and_constants_have_none() {
        let f = linear_on_interval(16);
        assert_abs_diff_eq!(energy_form(&f, &f).unwrap(), 1.0, epsilon = 1e-14);
        let graph = MetricGraph::interval();
        let c = GraphFunction::constant(&graph, &[16], 3.25);
        assert_abs_diff_eq!(energy_form(&c, &c).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn triangle_vertex_data_energy_matches_hand_value() {
        let graph = MetricGraph::triangle();
        let f = GraphFunction::from_vertex_values(&graph, &uniform_grid(&graph, 4), &[1.0, 0.0, 0.0])
            .unwrap();
        assert_abs_diff_eq!(energy_form(&f, &f).unwrap(), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn l2_inner_handles_weights_and_polynomials_exactly() {
        let graph = Arc::new(
            MetricGraph::new(
                2,
                vec![Edge { id: 0, i: 0, j: 1, length: 1.0, energy_weight: 1.0, measure_weight: 2.0 }],
            )
            .unwrap(),
        );
        let one = GraphFunction::constant(&graph, &[8], 1.0);
        assert_abs_diff_eq!(l2_inner(&one, &one).unwrap(), 2.0, epsilon = 1e-14);

        let tri = MetricGraph::triangle();
        let one3 = GraphFunction::constant(&tri, &uniform_grid(&tri, 3), 1.0);
        assert_abs_diff_eq!(l2_inner(&one3, &one3).unwrap(), 3.0, epsilon = 1e-14);

        let x = linear_on_interval(5);
        let one_u = GraphFunction::constant(&MetricGraph::interval(), &[5], 1.0);
        // ∫_0^1 x dx = 1/2 must be exact on any grid.
        assert_abs_diff_eq!(l2_inner(&x, &one_u).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn gradient_scales_with_the_weight_ratio() {
        let f = linear_on_interval(10);
        let df = gradient_d(&f);
        for k in 0..10 {
            assert_abs_diff_eq!(df.edge_values(0)[k], 1.0, epsilon = 1e-13);
        }
        let weighted = Arc::new(
            MetricGraph::new(
                2,
                vec![Edge { id: 0, i: 0, j: 1, length: 1.0, energy_weight: 1.0, measure_weight: 4.0 }],
            )
            .unwrap(),
        );
        let g = GraphFunction::from_fn(&weighted, &[10], |_, s| s).unwrap();
        let dg = gradient_d(&g);
        assert_abs_diff_eq!(dg.edge_values(0)[3], 0.5, epsilon = 1e-13);
    }

    #[test]
    fn gradient_isometry_is_exact_for_rough_nodal_data() {
        let tri = MetricGraph::triangle();
        let grid = uniform_grid(&tri, 7);
        // Deliberately non-smooth nodal data (still vertex continuous).
        let f = GraphFunction::from_fn(&tri, &grid, |e, s| {
            (7.0 * s + e as f64).sin() + 0.3 * (3.0 * s).cos() * (e as f64 + 1.0)
        })
        .unwrap();
        let df = gradient_d(&f);
        let lhs = l2_inner(&df, &df).unwrap();
        let rhs = energy_form(&f, &f).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn circulation_on_triangle_lies_in_the_kernel_of_dstar() {
        let tri = MetricGraph::triangle();
        let grid = uniform_grid(&tri, 4);
        // Edges 0->1->2->0 all point along the cycle: constants +1 work.
        let u = EdgeField::from_edge_constants(&tri, &grid, &[1.0, 1.0, 1.0], FieldKind::Cellwise)
            .unwrap();
        let ds = coderivative_dstar(&u);
        assert!(ds.in_domain);
        for p in 0..3 {
            assert_abs_diff_eq!(ds.vertex_residuals[p], 0.0, epsilon = 1e-13);
        }
        for e in 0..3 {
            for &v in ds.value.edge_values(e) {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn star_constants_fail_the_leaf_conditions() {
        let star = MetricGraph::star(3).unwrap();
        let grid = uniform_grid(&star, 4);
        // Oriented into the center means against the built orientation
        // (edges point 0 -> leaf); constants (-1, -1, 2) flow into vertex 0.
        let u = EdgeField::from_edge_constants(&star, &grid, &[-1.0, -1.0, 2.0], FieldKind::Cellwise)
            .unwrap();
        let ds = coderivative_dstar(&u);
        assert_abs_diff_eq!(ds.vertex_residuals[0], 0.0, epsilon = 1e-13);
        assert!(!ds.in_domain);
        assert!(ds.vertex_residuals[1].abs() > 0.5);
        assert!(ds.vertex_residuals[3].abs() > 1.5);
    }

    #[test]
    fn dstar_of_a_gradient_approximates_minus_second_derivative() {
        let graph = MetricGraph::interval();
        let n = 200;
        let f = GraphFunction::from_fn(&graph, &[n], |_, s| (std::f64::consts::PI * s).cos())
            .unwrap();
        let du = gradient_d(&f);
        let ds = coderivative_dstar(&du);
        // -f'' = pi^2 cos(pi x); compare at interior nodes.
        let vals = ds.value.edge_values(0);
        for k in (10..190).step_by(17) {
            let x = k as f64 / n as f64;
            let expect = std::f64::consts::PI.powi(2) * (std::f64::consts::PI * x).cos();
            assert!((vals[k] - expect).abs() < 2e-3 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn discrete_adjointness_is_exact_for_domain_fields() {
        let tri = MetricGraph::triangle();
        let grid = uniform_grid(&tri, 6);
        let f = GraphFunction::from_fn(&tri, &grid, |e, s| (2.0 + e as f64) * s * s - s).unwrap();
        // A nodal field in D(d*): zero traces at every vertex, arbitrary inside.
        let u = EdgeField::new(
            &tri,
            FieldKind::Nodal,
            (0..3)
                .map(|e| {
                    (0..=6)
                        .map(|k| {
                            let s = k as f64 / 6.0;
                            (std::f64::consts::PI * s).sin() * (1.0 + 0.2 * e as f64)
                        })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        let ds = coderivative_dstar(&u);
        assert!(ds.in_domain);
        let lhs = l2_inner(&gradient_d(&f), &u).unwrap();
        let rhs = l2_inner(&f, &ds.value).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())),
            "⟨df,u⟩ = {lhs} vs ⟨f,d*u⟩ = {rhs}");
    }

    #[test]
    fn kernel_basis_dimensions_match_the_cycle_space() {
        let grid3 = uniform_grid(&MetricGraph::triangle(), 5);
        let basis = kernel_dstar_basis(&MetricGraph::triangle(), &grid3).unwrap();
        assert_eq!(basis.len(), 1);
        assert_abs_diff_eq!(l2_norm(&basis[0]), 1.0, epsilon = 1e-12);

        let interval = MetricGraph::interval();
        assert!(kernel_dstar_basis(&interval, &[4]).unwrap().is_empty());
    }

    #[test]
    fn kernel_basis_fields_satisfy_the_vertex_conditions() {
        // K4-minus-one-edge style test graph with two independent cycles.
        let graph = Arc::new(
            MetricGraph::new(
                4,
                vec![
                    Edge::unit(0, 0, 1),
                    Edge::unit(1, 1, 2),
                    Edge::unit(2, 2, 0),
                    Edge::unit(3, 1, 3),
                    Edge::unit(4, 3, 2),
                ],
            )
            .unwrap(),
        );
        let grid = uniform_grid(&graph, 3);
        let basis = kernel_dstar_basis(&graph, &grid).unwrap();
        assert_eq!(basis.len(), 2);
        for (a, b) in [(0usize, 1usize)] {
            let ip = l2_inner(&basis[a], &basis[b]).unwrap();
            assert_abs_diff_eq!(ip, 0.0, epsilon = 1e-12);
        }
        for field in &basis {
            let ds = coderivative_dstar(field);
            assert!(ds.in_domain, "residuals: {:?}", ds.vertex_residuals);
        }
    }

    #[test]
    fn helmholtz_splits_gradients_and_circulations() {
        let tri = MetricGraph::triangle();
        let grid = uniform_grid(&tri, 8);
        let basis = kernel_dstar_basis(&tri, &grid).unwrap();
        let circulating = &basis[0];
        let (g, c) = helmholtz_project_with(circulating, &basis).unwrap();
        assert!(l2_norm(&g) <= 1e-12);
        assert_abs_diff_eq!(l2_norm(&c), 1.0, epsilon = 1e-12);

        let f = GraphFunction::from_fn(&tri, &grid, |e, s| (s + e as f64 * 0.5).powi(2)).unwrap();
        let df = gradient_d(&f);
        let (g2, c2) = helmholtz_project_with(&df, &basis).unwrap();
        assert!(l2_norm(&c2) <= 1e-10 * (1.0 + l2_norm(&df)));

        // Mixed field reconstructs both parts.
        let mixed = df.linear_combination(1.0, circulating, 0.7).unwrap();
        let (gm, cm) = helmholtz_project_with(&mixed, &basis).unwrap();
        let gdiff = gm.linear_combination(1.0, &g2, -1.0).unwrap();
        let cdiff = cm.linear_combination(1.0, &circulating.scale(0.7), -1.0).unwrap();
        assert!(l2_norm(&gdiff) <= 1e-10);
        assert!(l2_norm(&cdiff) <= 1e-10);
        // Orthogonality and reconstruction.
        assert!(l2_inner(&gm, &cm).unwrap().abs() <= 1e-12);
        let recon = gm.linear_combination(1.0, &cm, 1.0).unwrap();
        let rdiff = recon.linear_combination(1.0, &mixed, -1.0).unwrap();
        assert!(l2_norm(&rdiff) <= 1e-13);
    }

    #[test]
    fn zero_energy_forces_constant_functions() {
        let star = MetricGraph::star(4).unwrap();
        let grid = uniform_grid(&star, 6);
        let f = GraphFunction::constant(&star, &grid, -2.5);
        assert!(energy_form(&f, &f).unwrap() <= 1e-15);
        // Conversely any function with spread has positive energy.
        let g = GraphFunction::from_fn(&star, &grid, |e, s| s * (1.0 + e as f64)).unwrap();
        assert!(energy_form(&g, &g).unwrap() > 1e-3);
    }

    #[test]
    fn edge_resistance_estimate_holds_on_sampled_pairs() {
        let graph = MetricGraph::interval();
        let n = 32;
        let f = GraphFunction::from_fn(&graph, &[n], |_, s| (5.0 * s).sin() + s * s).unwrap();
        let vals = f.edge_values(0);
        let h = 1.0 / n as f64;
        let edge_energy: f64 =
            (0..n).map(|k| (vals[k + 1] - vals[k]).powi(2) / h).sum();
        for (a, b) in [(0usize, n), (3, 17), (8, 29), (1, 2)] {
            let spread = (vals[a] - vals[b]).powi(2);
            assert!(spread <= 1.0 * edge_energy + 1e-12);
        }
    }

    #[test]
    fn vertex_discontinuous_data_is_rejected() {
        let tri = MetricGraph::triangle();
        let mut values: Vec<Vec<f64>> = vec![vec![0.0; 3]; 3];
        values[0] = vec![1.0, 0.5, 0.0];
        values[1] = vec![0.0, 0.0, 0.0];
        values[2] = vec![0.0, 0.0, 0.9]; // edge 2 ends at vertex 0 with 0.9 != 1.0
        assert!(GraphFunction::from_edge_values(&tri, values).is_err());
    }
}
