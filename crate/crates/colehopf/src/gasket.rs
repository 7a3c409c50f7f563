//! The Sierpinski gasket: level graphs, harmonic extension, self-similar
//! energy and measures, piecewise-harmonic splines, and spectral decimation.
//!
//! Level `m` of the gasket is the graph with `(3^{m+1}+3)/2` vertices and
//! `3^{m+1}` edges obtained by `m` rounds of triangle subdivision.  Vertex
//! ids are *prefix preserving*: the first `|V_{m-1}|` ids of level `m` are
//! the level `m-1` vertices (so restriction of vertex data is literal
//! truncation), and the three corners `{0, 1, 2}` keep their ids at every
//! level.  Coordinates are integer pairs `(a, b)` at scale `2^m`, mapping to
//! the plane as `((a + b/2) / 2^m, (√3 b / 2) / 2^m)`.
//!
//! The self-similar energy uses the doubled convention
//!
//! ```text
//!   E_m(f, g) = 2 (3/5)^{-m} Σ_{edges (p,q) at level m} (f_p - f_q)(g_p - g_q) ,
//! ```
//!
//! normalized so that `E_0` of the corner indicator `(1,0,0)` equals `4`.
//! The resistance factor `r = 3/5` is the unique scaling that makes the
//! energy of harmonic extensions level independent: the one-step minimizer
//! assigns each midpoint the value `(2A + 2B + C)/5` from the two adjacent
//! corners `A, B` and the opposite corner `C`, and the resulting sequence
//! `E_m` is constant in `m` only for this `r` (nonincreasing is automatic,
//! equality pins the factor).
//!
//! Self-similar measures assign cell `w = w_1 … w_m` the mass
//! `μ_{w_1} ⋯ μ_{w_m}`; the induced quadrature weight of a vertex is one
//! third of the total mass of its incident cells, which integrates
//! cellwise-harmonic functions exactly for the uniform measure.

use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};

/// Resistance scaling factor of the gasket energy.
pub const RESISTANCE_FACTOR: f64 = 3.0 / 5.0;

/// One subdivision level: vertex coordinates, cells (corner triples in role
/// order), edges (three per cell in pair order `(0,1), (0,2), (1,2)`), and —
/// for every level but the deepest — the id each edge's midpoint receives at
/// the next level.
#[derive(Debug, Clone)]
pub struct LevelData {
    coords: Vec<(i64, i64)>,
    cells: Vec<[usize; 3]>,
    edges: Vec<(usize, usize)>,
    mid_of_edge: Vec<usize>,
}

impl LevelData {
    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// The gasket with all levels `0 ..= max_level` built eagerly.
#[derive(Debug)]
pub struct SierpinskiGasket {
    levels: Vec<LevelData>,
}

/// A cell address: the word `w_1 … w_m` over `{0, 1, 2}` selecting the child
/// triangle at each subdivision step.  Words map to cell indices in base 3
/// (most significant digit first), so the descendants of a cell occupy a
/// contiguous index range at every deeper level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellWord(pub Vec<u8>);

impl CellWord {
    pub fn level(&self) -> usize {
        self.0.len()
    }

    /// Cell index at the word's own level.
    pub fn index(&self) -> Result<usize> {
        let mut idx = 0usize;
        for &d in &self.0 {
            if d > 2 {
                return Err(Error::InvalidInput(format!("cell word digit {d} outside 0..=2")));
            }
            idx = 3 * idx + d as usize;
        }
        Ok(idx)
    }

    pub fn from_index(level: usize, mut idx: usize) -> Result<Self> {
        if idx >= 3usize.pow(level as u32) {
            return Err(Error::InvalidInput(format!(
                "cell index {idx} outside level {level} (has {} cells)",
                3usize.pow(level as u32)
            )));
        }
        let mut digits = vec![0u8; level];
        for k in (0..level).rev() {
            digits[k] = (idx % 3) as u8;
            idx /= 3;
        }
        Ok(CellWord(digits))
    }

    /// Contiguous range of descendant cell indices at level `target`.
    pub fn descendant_range(&self, target: usize) -> Result<std::ops::Range<usize>> {
        if target < self.level() {
            return Err(Error::InvalidInput(format!(
                "target level {target} is above the word's level {}",
                self.level()
            )));
        }
        let stride = 3usize.pow((target - self.level()) as u32);
        let idx = self.index()?;
        Ok(idx * stride..(idx + 1) * stride)
    }
}

impl SierpinskiGasket {
    /// Builds levels `0 ..= max_level` by repeated subdivision.
    pub fn build(max_level: usize) -> Arc<Self> {
        let mut lv0 = LevelData {
            coords: vec![(0, 0), (1, 0), (0, 1)],
            cells: vec![[0, 1, 2]],
            edges: vec![(0, 1), (0, 2), (1, 2)],
            mid_of_edge: Vec::new(),
        };
        let mut levels = Vec::with_capacity(max_level + 1);
        for _ in 0..max_level {
            let mut nxt = LevelData {
                coords: lv0.coords.iter().map(|&(a, b)| (2 * a, 2 * b)).collect(),
                cells: Vec::with_capacity(3 * lv0.cells.len()),
                edges: Vec::with_capacity(9 * lv0.cells.len()),
                mid_of_edge: Vec::new(),
            };
            // Midpoints appear once per edge listing; edges interior to the
            // gasket belong to a single cell at this level, so no dedup is
            // needed (cells meet at vertices, not edges).
            lv0.mid_of_edge = Vec::with_capacity(lv0.edges.len());
            for &(p, q) in &lv0.edges {
                let (pa, pb) = lv0.coords[p];
                let (qa, qb) = lv0.coords[q];
                nxt.coords.push((pa + qa, pb + qb));
                lv0.mid_of_edge.push(nxt.coords.len() - 1);
            }
            for (ci, &[a, b, c]) in lv0.cells.iter().enumerate() {
                let (mab, mac, mbc) = (
                    lv0.mid_of_edge[3 * ci],
                    lv0.mid_of_edge[3 * ci + 1],
                    lv0.mid_of_edge[3 * ci + 2],
                );
                for cell in [[a, mab, mac], [mab, b, mbc], [mac, mbc, c]] {
                    nxt.cells.push(cell);
                    nxt.edges.push((cell[0], cell[1]));
                    nxt.edges.push((cell[0], cell[2]));
                    nxt.edges.push((cell[1], cell[2]));
                }
            }
            levels.push(lv0);
            lv0 = nxt;
        }
        levels.push(lv0);
        Arc::new(SierpinskiGasket { levels })
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, m: usize) -> &LevelData {
        &self.levels[m]
    }

    pub fn n_vertices(&self, m: usize) -> usize {
        self.levels[m].coords.len()
    }

    /// Planar position of vertex `v` at level `m` (corner 0 at the origin,
    /// corner 1 at `(1, 0)`, corner 2 at `(1/2, √3/2)`).
    pub fn point(&self, m: usize, v: usize) -> (f64, f64) {
        let (a, b) = self.levels[m].coords[v];
        let scale = (1u64 << m) as f64;
        (
            (a as f64 + b as f64 / 2.0) / scale,
            3.0f64.sqrt() / 2.0 * b as f64 / scale,
        )
    }

    fn check_vals(&self, m: usize, vals: &[f64]) -> Result<()> {
        if m > self.max_level() {
            return Err(Error::InvalidInput(format!(
                "level {m} exceeds the built depth {}",
                self.max_level()
            )));
        }
        if vals.len() != self.n_vertices(m) {
            return Err(Error::Incompatible(format!(
                "expected {} values at level {m}, got {}",
                self.n_vertices(m),
                vals.len()
            )));
        }
        Ok(())
    }

    /// One step of harmonic extension: each midpoint of an edge `{A, B}`
    /// within a cell whose opposite corner is `C` receives `(2A + 2B + C)/5`,
    /// the unique energy minimizer given the coarse values.
    pub fn harmonic_extend_once(&self, m: usize, vals: &[f64]) -> Result<Vec<f64>> {
        self.check_vals(m, vals)?;
        if m == self.max_level() {
            return Err(Error::InvalidInput(format!(
                "cannot extend past the built depth {m}"
            )));
        }
        let cur = &self.levels[m];
        let mut out = vec![0.0; self.n_vertices(m + 1)];
        out[..vals.len()].copy_from_slice(vals);
        for (ci, &[a, b, c]) in cur.cells.iter().enumerate() {
            let (va, vb, vc) = (vals[a], vals[b], vals[c]);
            out[cur.mid_of_edge[3 * ci]] = (2.0 * va + 2.0 * vb + vc) / 5.0;
            out[cur.mid_of_edge[3 * ci + 1]] = (2.0 * va + 2.0 * vc + vb) / 5.0;
            out[cur.mid_of_edge[3 * ci + 2]] = (2.0 * vb + 2.0 * vc + va) / 5.0;
        }
        Ok(out)
    }

    /// Harmonic extension from level `m` to level `target ≥ m`.
    pub fn harmonic_extend(&self, m: usize, target: usize, vals: &[f64]) -> Result<Vec<f64>> {
        if target < m {
            return Err(Error::InvalidInput(format!(
                "target level {target} is above the source level {m}"
            )));
        }
        let mut v = vals.to_vec();
        for k in m..target {
            v = self.harmonic_extend_once(k, &v)?;
        }
        self.check_vals(m, vals)?;
        Ok(v)
    }

    /// Restriction of vertex data from level `M` to level `m ≤ M`: literal
    /// truncation, by the prefix property of the ids.
    pub fn restrict(&self, source: usize, target: usize, vals: &[f64]) -> Result<Vec<f64>> {
        self.check_vals(source, vals)?;
        if target > source {
            return Err(Error::InvalidInput(format!(
                "restriction target {target} is below the source level {source}"
            )));
        }
        Ok(vals[..self.n_vertices(target)].to_vec())
    }

    /// Adjoint of [`harmonic_extend_once`] with respect to the Euclidean
    /// pairings on the value vectors.
    pub fn extend_transpose_once(&self, m: usize, eta: &[f64]) -> Result<Vec<f64>> {
        self.check_vals(m + 1, eta)?;
        let cur = &self.levels[m];
        let mut out = eta[..self.n_vertices(m)].to_vec();
        for (ci, &[a, b, c]) in cur.cells.iter().enumerate() {
            let eab = eta[cur.mid_of_edge[3 * ci]];
            let eac = eta[cur.mid_of_edge[3 * ci + 1]];
            let ebc = eta[cur.mid_of_edge[3 * ci + 2]];
            out[a] += (2.0 * eab + 2.0 * eac + ebc) / 5.0;
            out[b] += (2.0 * eab + 2.0 * ebc + eac) / 5.0;
            out[c] += (2.0 * eac + 2.0 * ebc + eab) / 5.0;
        }
        Ok(out)
    }

    /// Adjoint of [`harmonic_extend`] from level `source` down to `target`.
    pub fn extend_transpose(&self, target: usize, source: usize, eta: &[f64]) -> Result<Vec<f64>> {
        if source < target {
            return Err(Error::InvalidInput(format!(
                "transpose source level {source} is above the target level {target}"
            )));
        }
        self.check_vals(source, eta)?;
        let mut v = eta.to_vec();
        for k in (target..source).rev() {
            v = self.extend_transpose_once(k, &v)?;
        }
        Ok(v)
    }

    /// Doubled self-similar energy form at level `m`.
    pub fn graph_energy(&self, m: usize, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_vals(m, f)?;
        self.check_vals(m, g)?;
        let mut s = 0.0;
        for &(p, q) in &self.levels[m].edges {
            s += (f[p] - f[q]) * (g[p] - g[q]);
        }
        Ok(2.0 * RESISTANCE_FACTOR.powi(-(m as i32)) * s)
    }

    /// Energy of level-`level` data localized to the descendants of one cell:
    /// the edge sum runs over the contiguous block of level-`level` cells
    /// below `word`, scaled like the global energy.
    pub fn cell_energy(&self, word: &CellWord, level: usize, f: &[f64]) -> Result<f64> {
        self.check_vals(level, f)?;
        let range = word.descendant_range(level)?;
        if range.end > self.levels[level].cells.len() {
            return Err(Error::InvalidInput(format!(
                "cell word {:?} has no descendants at level {level}",
                word.0
            )));
        }
        let mut s = 0.0;
        for ci in range {
            for k in 0..3 {
                let (p, q) = self.levels[level].edges[3 * ci + k];
                s += (f[p] - f[q]) * (f[p] - f[q]);
            }
        }
        Ok(2.0 * RESISTANCE_FACTOR.powi(-(level as i32)) * s)
    }

    /// The `i`-th piecewise-harmonic spline of level `m`, sampled at level
    /// `target`: the harmonic extension of the vertex indicator.
    pub fn spline_psi(&self, m: usize, i: usize, target: usize) -> Result<Vec<f64>> {
        if i >= self.n_vertices(m) {
            return Err(Error::InvalidInput(format!(
                "vertex {i} outside level {m} (has {} vertices)",
                self.n_vertices(m)
            )));
        }
        let mut e = vec![0.0; self.n_vertices(m)];
        e[i] = 1.0;
        self.harmonic_extend(m, target, &e)
    }

    /// Graph Laplacian `4 I - A` restricted to the interior (non-corner)
    /// vertices of level `m`; every interior vertex has degree exactly 4.
    pub fn dirichlet_laplacian(&self, m: usize) -> Result<Array2<f64>> {
        let n = self.n_vertices(m);
        if n <= 3 {
            return Err(Error::InvalidInput(
                "level 0 has no interior vertices".into(),
            ));
        }
        let k = n - 3;
        let mut a = Array2::<f64>::zeros((k, k));
        let mut degree = vec![0usize; n];
        for &(p, q) in &self.levels[m].edges {
            degree[p] += 1;
            degree[q] += 1;
            if p >= 3 && q >= 3 {
                a[[p - 3, q - 3]] -= 1.0;
                a[[q - 3, p - 3]] -= 1.0;
            }
        }
        for v in 3..n {
            debug_assert_eq!(degree[v], 4, "interior vertex {v} has degree {}", degree[v]);
            a[[v - 3, v - 3]] = degree[v] as f64;
        }
        Ok(a)
    }

    /// Sorted spectrum of the Dirichlet graph Laplacian at level `m`.
    pub fn dirichlet_spectrum(&self, m: usize) -> Result<Vec<f64>> {
        let l = self.dirichlet_laplacian(m)?;
        let (vals, _) = l
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Solver(format!("gasket eigensolve failed: {e}")))?;
        Ok(vals.to_vec())
    }

    /// Serializes level-`m` vertex data as CSV with header
    /// `vertex_id,x,y,value,level`.
    pub fn to_csv(&self, m: usize, vals: &[f64]) -> Result<String> {
        self.check_vals(m, vals)?;
        let mut out = String::from("vertex_id,x,y,value,level\n");
        for (v, &val) in vals.iter().enumerate() {
            let (x, y) = self.point(m, v);
            writeln!(out, "{v},{x},{y},{val},{m}").expect("string write");
        }
        Ok(out)
    }
}

/// A Bernoulli self-similar measure on the gasket, determined by the three
/// child weights (positive, summing to one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarMeasure {
    weights: [f64; 3],
}

impl SelfSimilarMeasure {
    pub fn new(weights: [f64; 3]) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "measure weights must be positive, got {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "measure weights must sum to 1, got sum {sum}"
            )));
        }
        Ok(SelfSimilarMeasure { weights })
    }

    pub fn uniform() -> Self {
        SelfSimilarMeasure { weights: [1.0 / 3.0; 3] }
    }

    pub fn weights(&self) -> [f64; 3] {
        self.weights
    }

    /// Mass of every level-`m` cell, in cell-index order (`3^m` entries,
    /// summing to one).
    pub fn cell_measures(&self, m: usize) -> Vec<f64> {
        let mut meas = vec![1.0];
        for _ in 0..m {
            let mut nxt = Vec::with_capacity(3 * meas.len());
            for &w in &meas {
                nxt.push(w * self.weights[0]);
                nxt.push(w * self.weights[1]);
                nxt.push(w * self.weights[2]);
            }
            meas = nxt;
        }
        meas
    }

    /// Mass of a single cell.
    pub fn cell_measure(&self, word: &CellWord) -> Result<f64> {
        let mut mass = 1.0;
        for &d in &word.0 {
            if d > 2 {
                return Err(Error::InvalidInput(format!("cell word digit {d} outside 0..=2")));
            }
            mass *= self.weights[d as usize];
        }
        Ok(mass)
    }

    /// Largest level-`m` cell mass (controls the quasi-unitarity defect of
    /// the graph approximations).
    pub fn max_cell_measure(&self, m: usize) -> f64 {
        self.weights
            .iter()
            .fold(0.0f64, |acc, &w| acc.max(w))
            .powi(m as i32)
    }

    /// Vertex quadrature weights at level `m`: one third of the mass of the
    /// incident cells.  Exact for cellwise-harmonic integrands under the
    /// uniform measure (each cell's mean of corner values times its mass).
    pub fn quad_weights(&self, gasket: &SierpinskiGasket, m: usize) -> Result<Vec<f64>> {
        if m > gasket.max_level() {
            return Err(Error::InvalidInput(format!(
                "level {m} exceeds the built depth {}",
                gasket.max_level()
            )));
        }
        let meas = self.cell_measures(m);
        let mut w = vec![0.0; gasket.n_vertices(m)];
        for (ci, cell) in gasket.levels[m].cells.iter().enumerate() {
            for &v in cell {
                w[v] += meas[ci] / 3.0;
            }
        }
        Ok(w)
    }

    /// Cell-mean quadrature of level-`m` vertex data.
    pub fn integrate(&self, gasket: &SierpinskiGasket, m: usize, f: &[f64]) -> Result<f64> {
        gasket.check_vals(m, f)?;
        let w = self.quad_weights(gasket, m)?;
        Ok(w.iter().zip(f).map(|(wi, fi)| wi * fi).sum())
    }

    /// L²(μ) pairing of level-`m` data, evaluated by harmonic extension to
    /// the quadrature level `quad_level` followed by cell-mean quadrature of
    /// the product.
    pub fn l2_inner(
        &self,
        gasket: &SierpinskiGasket,
        m: usize,
        f: &[f64],
        g: &[f64],
        quad_level: usize,
    ) -> Result<f64> {
        let ff = gasket.harmonic_extend(m, quad_level, f)?;
        let gg = gasket.harmonic_extend(m, quad_level, g)?;
        let prod: Vec<f64> = ff.iter().zip(&gg).map(|(a, b)| a * b).collect();
        self.integrate(gasket, quad_level, &prod)
    }

    /// Integrals `∫ ψ_{i,m} dμ` of all level-`m` splines at once, via the
    /// transpose trick: pull the level-`quad_level` quadrature weights back
    /// through the extension adjoint.
    pub fn spline_integrals(
        &self,
        gasket: &SierpinskiGasket,
        m: usize,
        quad_level: usize,
    ) -> Result<Vec<f64>> {
        let w = self.quad_weights(gasket, quad_level)?;
        gasket.extend_transpose(m, quad_level, &w)
    }
}

/// Spectral decimation polynomial: a fine-level Dirichlet eigenvalue `λ'`
/// descends to the coarse eigenvalue `φ(λ') = λ'(5 - λ')`.
pub fn decimation_polynomial(lambda_fine: f64) -> f64 {
    lambda_fine * (5.0 - lambda_fine)
}

/// Outcome of matching a coarse Dirichlet spectrum against the image of a
/// fine one under the decimation polynomial.
#[derive(Debug, Clone)]
pub struct DecimationReport {
    /// Pairs `(λ_fine, φ(λ_fine))` that consumed a coarse eigenvalue.
    pub matched: Vec<(f64, f64)>,
    /// Coarse eigenvalues not hit by any fine eigenvalue (decimation holds
    /// exactly when this is empty).
    pub unmatched_coarse: Vec<f64>,
    /// Largest pairing discrepancy among the matches.
    pub worst_gap: f64,
}

/// Greedy multiset matching: each fine eigenvalue claims the nearest
/// remaining coarse eigenvalue when `|φ(λ') - λ| < tol`.  Exact decimation
/// leaves no coarse eigenvalue unconsumed.
pub fn decimation_match(coarse: &[f64], fine: &[f64], tol: f64) -> DecimationReport {
    let mut remaining: Vec<f64> = coarse.to_vec();
    let mut matched = Vec::new();
    let mut worst_gap = 0.0f64;
    for &lf in fine {
        let v = decimation_polynomial(lf);
        if remaining.is_empty() {
            break;
        }
        let (j, gap) = remaining
            .iter()
            .enumerate()
            .map(|(j, &c)| (j, (c - v).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if gap < tol {
            matched.push((lf, v));
            worst_gap = worst_gap.max(gap);
            remaining.remove(j);
        }
    }
    DecimationReport { matched, unmatched_coarse: remaining, worst_gap }
}
