//! Configuration-driven experiment runner: structured TOML configs, six
//! experiment families, deterministic CSV artifacts, and a manifest that
//! makes every output directory re-runnable.
//!
//! A config names one experiment and optional sections:
//!
//! ```toml
//! experiment = "graph-burgers"   # graph-heat | graph-burgers | gasket-approx
//!                                # | heat-convergence | burgers-convergence
//!                                # | lemma-suite
//! seed = 7
//! out = "out"
//!
//! [graph]            # graph-* experiments
//! builtin = "interval"           # interval | triangle | star | path
//! grid = 128                     # cells per edge
//! initial = "single-mode"        # single-mode | edge-sine
//! amplitude = 0.5
//!
//! [time]
//! start = 0.0
//! end = 0.5
//! steps = 10
//!
//! [gasket]           # gasket and convergence experiments
//! levels = [1, 2, 3, 4]
//! reference_level = 6
//! measure = [0.3333333333333333, 0.3333333333333333, 0.3333333333333333]
//! times = [0.1, 0.5]
//! samples = 100
//! ```
//!
//! Unknown keys are rejected with the offending line; the frequently tried
//! key `viscosity` earns a dedicated hint, because the diffusion constant is
//! fixed to one throughout (rescale time instead).  A minimal config such as
//! `experiment = "heat-convergence"` runs entirely on defaults.
//!
//! Determinism contract: identical config + seed produce byte-identical CSV
//! files.  All artifact tables are RFC-4180-style CSV with a header row and
//! `.` as the decimal separator; floating-point values print in Rust's
//! shortest round-trip form.  Every run writes `manifest.toml`, the
//! *effective* configuration (defaults and overrides resolved), which can be
//! fed back to `run` verbatim.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::approx::{
    burgers_convergence_experiment, build_gamma_m, heat_convergence_experiment,
    quasi_unitary_suite, ConvergenceOptions, QUAD_OFFSET,
};
use crate::burgers::{apriori_check, cole_hopf_solve, single_mode_velocity, ColeHopfOptions};
use crate::error::{Error, Result};
use crate::gasket::{decimation_match, SelfSimilarMeasure, SierpinskiGasket};
use crate::graph::{uniform_grid, GraphFunction, MetricGraph};
use crate::spectral::{eigensolve, AssembledOperator, MassKind};

/// The six supported experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GraphHeat,
    GraphBurgers,
    GasketApprox,
    HeatConvergence,
    BurgersConvergence,
    LemmaSuite,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::GraphHeat => "graph-heat",
            Experiment::GraphBurgers => "graph-burgers",
            Experiment::GasketApprox => "gasket-approx",
            Experiment::HeatConvergence => "heat-convergence",
            Experiment::BurgersConvergence => "burgers-convergence",
            Experiment::LemmaSuite => "lemma-suite",
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_builtin() -> String {
    "interval".into()
}

fn default_arms() -> usize {
    3
}

fn default_segments() -> usize {
    2
}

fn default_grid() -> usize {
    128
}

fn default_initial() -> String {
    "single-mode".into()
}

fn default_amplitude() -> f64 {
    0.5
}

fn default_end() -> f64 {
    0.5
}

fn default_steps() -> usize {
    10
}

fn default_levels() -> Vec<usize> {
    vec![1, 2, 3, 4]
}

fn default_reference_level() -> usize {
    6
}

fn default_level() -> usize {
    2
}

fn default_measure() -> [f64; 3] {
    [1.0 / 3.0; 3]
}

fn default_times() -> Vec<f64> {
    vec![0.1, 0.5]
}

fn default_samples() -> usize {
    100
}

fn default_quad_offset() -> usize {
    QUAD_OFFSET
}

/// Graph selection and discretization for the `graph-*` experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    /// Built-in graph: `interval`, `triangle`, `star`, or `path`.
    pub builtin: String,
    /// Optional graph file (`edge_id i j length energy_weight measure_weight`
    /// per line, `#` comments); takes precedence over `builtin`.
    pub file: Option<PathBuf>,
    /// Leaf count for `builtin = "star"`.
    pub arms: usize,
    /// Segment count for `builtin = "path"`.
    pub segments: usize,
    /// Cells per edge.
    pub grid: usize,
    /// Mass convention: `consistent` or `lumped`.  Defaults per experiment:
    /// heat uses consistent, the Cole-Hopf path uses lumped (whose semigroup
    /// is stochastic, making the positivity floor structural).
    pub mass: Option<String>,
    /// Initial datum family: `single-mode` (unit interval only) or
    /// `edge-sine` (any graph; vanishes at vertices).
    pub initial: String,
    /// Amplitude of the initial datum.
    pub amplitude: f64,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            builtin: default_builtin(),
            file: None,
            arms: default_arms(),
            segments: default_segments(),
            grid: default_grid(),
            mass: None,
            initial: default_initial(),
            amplitude: default_amplitude(),
        }
    }
}

/// Output time grid for the `graph-*` experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub start: f64,
    pub end: f64,
    /// Number of steps; the grid has `steps + 1` points.
    pub steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection { start: 0.0, end: default_end(), steps: default_steps() }
    }
}

impl TimeSection {
    fn grid(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|k| self.start + (self.end - self.start) * k as f64 / self.steps as f64)
            .collect()
    }
}

/// Levels, measure, and sampling for the gasket-side experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GasketSection {
    /// Approximation levels of the convergence experiments and lemma suite.
    pub levels: Vec<usize>,
    /// Reference level treated as ground truth by the convergence runs.
    pub reference_level: usize,
    /// Focus level of `gasket-approx`.
    pub level: usize,
    /// Export depth of `gasket-approx` CSV data (defaults to `level + 2`).
    pub export_level: Option<usize>,
    /// Self-similar measure weights (positive, summing to one).
    pub measure: [f64; 3],
    /// Comparison times of the convergence experiments.
    pub times: Vec<f64>,
    /// Random samples per level in the lemma suite.
    pub samples: usize,
    /// Offset between a level and its quadrature depth.
    pub quad_offset: usize,
}

impl Default for GasketSection {
    fn default() -> Self {
        GasketSection {
            levels: default_levels(),
            reference_level: default_reference_level(),
            level: default_level(),
            export_level: None,
            measure: default_measure(),
            times: default_times(),
            samples: default_samples(),
            quad_offset: default_quad_offset(),
        }
    }
}

/// A fully parsed experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub graph: GraphSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub gasket: GasketSection,
}

fn location_of(src: &str, offset: usize) -> (usize, usize) {
    let clamped = offset.min(src.len());
    let mut line = 1;
    let mut col = 1;
    for ch in src[..clamped].chars() {
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

/// Parses and validates a config from TOML text.  Syntax errors, unknown
/// keys, and out-of-range values are reported with their line and column.
pub fn parse_config_str(src: &str) -> Result<Config> {
    let config: Config = toml::from_str(src).map_err(|e| {
        let mut msg = match e.span() {
            Some(span) => {
                let (line, col) = location_of(src, span.start);
                format!("line {line}, column {col}: {}", e.message())
            }
            None => e.message().to_string(),
        };
        if e.message().contains("viscosity") {
            msg.push_str(
                "; the diffusion constant is fixed to 1 — rescale time instead of setting a viscosity",
            );
        }
        Error::Config(msg)
    })?;
    validate_config(&config, src)?;
    Ok(config)
}

/// Reads, parses, and validates a config file.
pub fn parse_config(path: &Path) -> Result<Config> {
    let src = fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config_str(&src)
}

fn key_line(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let t = l.trim_start();
        t.starts_with(key)
            && t[key.len()..].trim_start().starts_with(['=', '.'])
    })
    .map(|i| i + 1)
}

fn config_err(src: &str, key: &str, msg: String) -> Error {
    match key_line(src, key) {
        Some(line) => Error::Config(format!("line {line}: {msg}")),
        None => Error::Config(msg),
    }
}

fn validate_config(c: &Config, src: &str) -> Result<()> {
    let g = &c.graph;
    if !matches!(g.builtin.as_str(), "interval" | "triangle" | "star" | "path") {
        return Err(config_err(
            src,
            "builtin",
            format!(
                "unknown builtin graph {:?}; expected interval, triangle, star, or path",
                g.builtin
            ),
        ));
    }
    if g.grid == 0 {
        return Err(config_err(src, "grid", "grid must be at least 1 cell per edge".into()));
    }
    if let Some(mass) = &g.mass {
        if !matches!(mass.as_str(), "consistent" | "lumped") {
            return Err(config_err(
                src,
                "mass",
                format!("unknown mass convention {mass:?}; expected consistent or lumped"),
            ));
        }
    }
    if !matches!(g.initial.as_str(), "single-mode" | "edge-sine") {
        return Err(config_err(
            src,
            "initial",
            format!("unknown initial datum {:?}; expected single-mode or edge-sine", g.initial),
        ));
    }
    if !g.amplitude.is_finite() || g.amplitude.abs() >= 1.0 || g.amplitude == 0.0 {
        return Err(config_err(
            src,
            "amplitude",
            format!(
                "amplitude must be nonzero with |a| < 1 (positivity of the heat data), got {}",
                g.amplitude
            ),
        ));
    }
    let t = &c.time;
    if t.start < 0.0 || !t.start.is_finite() {
        return Err(config_err(
            src,
            "start",
            format!("times must be nonnegative, got start = {}", t.start),
        ));
    }
    if !(t.end > t.start) || !t.end.is_finite() {
        return Err(config_err(
            src,
            "end",
            format!("need end > start, got [{}, {}]", t.start, t.end),
        ));
    }
    if t.steps == 0 {
        return Err(config_err(src, "steps", "need at least one time step".into()));
    }
    let k = &c.gasket;
    if k.levels.is_empty() || k.levels.windows(2).any(|w| w[1] <= w[0]) || k.levels[0] == 0 {
        return Err(config_err(
            src,
            "levels",
            format!("levels must be strictly ascending and start at 1 or above, got {:?}", k.levels),
        ));
    }
    if matches!(
        c.experiment,
        Experiment::HeatConvergence | Experiment::BurgersConvergence
    ) && *k.levels.last().unwrap() >= k.reference_level
    {
        return Err(config_err(
            src,
            "reference_level",
            format!(
                "reference level {} must exceed the finest approximation level {}",
                k.reference_level,
                k.levels.last().unwrap()
            ),
        ));
    }
    SelfSimilarMeasure::new(k.measure)
        .map_err(|e| config_err(src, "measure", e.to_string()))?;
    if k.times.is_empty()
        || k.times.iter().any(|&t| !(t > 0.0) || !t.is_finite())
        || k.times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(config_err(
            src,
            "times",
            format!("times must be positive and strictly ascending, got {:?}", k.times),
        ));
    }
    if k.samples == 0 {
        return Err(config_err(src, "samples", "need at least one sample".into()));
    }
    if k.quad_offset == 0 {
        return Err(config_err(
            src,
            "quad_offset",
            "quadrature must live strictly below the approximation level".into(),
        ));
    }
    if let Some(export) = k.export_level {
        if export < k.level {
            return Err(config_err(
                src,
                "export_level",
                format!("export level {export} is above the focus level {}", k.level),
            ));
        }
    }
    Ok(())
}

/// Result of a successful run: where the artifacts were written and a short
/// human-readable summary.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<String>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactWriter { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        fs::write(self.dir.join(name), content)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn manifest_toml(config: &Config) -> Result<String> {
    let body = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("cannot serialize effective config: {e}")))?;
    Ok(format!(
        "# Effective configuration (defaults and overrides resolved).\n# Re-run with: colehopf run manifest.toml\n{body}"
    ))
}

fn build_graph(section: &GraphSection) -> Result<Arc<MetricGraph>> {
    if let Some(path) = &section.file {
        return Ok(Arc::new(MetricGraph::from_file(path)?));
    }
    match section.builtin.as_str() {
        "interval" => Ok(MetricGraph::interval()),
        "triangle" => Ok(MetricGraph::triangle()),
        "star" => MetricGraph::star(section.arms),
        "path" => MetricGraph::path(section.segments),
        other => Err(Error::Config(format!("unknown builtin graph {other:?}"))),
    }
}

fn mass_kind(section: &GraphSection, default: MassKind) -> Result<MassKind> {
    match section.mass.as_deref() {
        None => Ok(default),
        Some("consistent") => Ok(MassKind::Consistent),
        Some("lumped") => Ok(MassKind::Lumped),
        Some(other) => Err(Error::Config(format!(
            "unknown mass convention {other:?}; expected consistent or lumped"
        ))),
    }
}

fn is_unit_interval(graph: &MetricGraph) -> bool {
    graph.n_edges() == 1 && (graph.edge(0).length - 1.0).abs() <= 1e-12
}

/// Initial heat datum for `graph-heat`: `1 + a cos(π s)` on the interval
/// (single-mode) or `1 + a sin(π s / l_e)` per edge (edge-sine).
fn initial_heat_datum(
    graph: &Arc<MetricGraph>,
    grid: &[usize],
    section: &GraphSection,
) -> Result<GraphFunction> {
    let a = section.amplitude;
    match section.initial.as_str() {
        "single-mode" => {
            if !is_unit_interval(graph) {
                return Err(Error::Config(
                    "single-mode initial data requires the unit interval; use initial = \"edge-sine\""
                        .into(),
                ));
            }
            GraphFunction::from_fn(graph, grid, |_, s| {
                1.0 + a * (std::f64::consts::PI * s).cos()
            })
        }
        "edge-sine" => GraphFunction::from_fn(graph, grid, |e, s| {
            let l = graph.edge(e).length;
            1.0 + a * (std::f64::consts::PI * s / l).sin()
        }),
        other => Err(Error::Config(format!("unknown initial datum {other:?}"))),
    }
}

/// Initial potential for `graph-burgers`: the Cole-Hopf potential of the
/// single-mode heat datum, or the edge-sine bump as a potential directly.
fn initial_potential(
    graph: &Arc<MetricGraph>,
    grid: &[usize],
    section: &GraphSection,
) -> Result<GraphFunction> {
    let a = section.amplitude;
    match section.initial.as_str() {
        "single-mode" => {
            if !is_unit_interval(graph) {
                return Err(Error::Config(
                    "single-mode initial data requires the unit interval; use initial = \"edge-sine\""
                        .into(),
                ));
            }
            GraphFunction::from_fn(graph, grid, |_, s| {
                -2.0 * (1.0 + a * (std::f64::consts::PI * s).cos()).ln()
            })
        }
        "edge-sine" => GraphFunction::from_fn(graph, grid, |e, s| {
            let l = graph.edge(e).length;
            a * (std::f64::consts::PI * s / l).sin()
        }),
        other => Err(Error::Config(format!("unknown initial datum {other:?}"))),
    }
}

fn spectrum_csv(eigenvalues: &[f64]) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (k, lambda) in eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{k},{lambda}");
    }
    out
}

/// Nodal representative of a cellwise field for table output: interior nodes
/// average the two adjacent cell values, end nodes copy the end cells.
fn nodal_averages(cell_values: &[f64]) -> Vec<f64> {
    let n = cell_values.len();
    (0..=n)
        .map(|k| {
            if k == 0 {
                cell_values[0]
            } else if k == n {
                cell_values[n - 1]
            } else {
                0.5 * (cell_values[k - 1] + cell_values[k])
            }
        })
        .collect()
}

fn run_graph_heat(config: &Config, w: &mut ArtifactWriter) -> Result<String> {
    let graph = build_graph(&config.graph)?;
    let grid = uniform_grid(&graph, config.graph.grid);
    let mass = mass_kind(&config.graph, MassKind::Consistent)?;
    let op = Arc::new(AssembledOperator::assemble(&graph, &grid)?);
    let dec = eigensolve(&op, op.n_dofs(), mass)?;
    let w0 = initial_heat_datum(&graph, &grid, &config.graph)?;
    let times = config.time.grid();

    w.write("spectrum.csv", &spectrum_csv(dec.eigenvalues().as_slice().unwrap()))?;

    let mass0 = dec.mass_functional(&w0)?;
    let mut heat = String::from("time,edge_id,node_index,w_value\n");
    let mut max_drift = 0.0f64;
    for &t in &times {
        let wt = dec.heat_apply(&w0, t)?;
        max_drift = max_drift.max((dec.mass_functional(&wt)? - mass0).abs());
        for e in 0..graph.n_edges() {
            for (k, &val) in wt.edge_values(e).iter().enumerate() {
                let _ = writeln!(heat, "{t},{e},{k},{val}");
            }
        }
    }
    w.write("heat.csv", &heat)?;
    if max_drift > 1e-10 * (1.0 + mass0.abs()) {
        return Err(Error::NumericalAssertion(format!(
            "mass conservation drift {max_drift:.3e} exceeds 1e-10"
        )));
    }
    Ok(format!(
        "graph-heat: {} times on {} edges, n_dofs = {}, mass drift {:.3e}",
        times.len(),
        graph.n_edges(),
        op.n_dofs(),
        max_drift
    ))
}

fn run_graph_burgers(config: &Config, w: &mut ArtifactWriter) -> Result<String> {
    let graph = build_graph(&config.graph)?;
    let grid = uniform_grid(&graph, config.graph.grid);
    let mass = mass_kind(&config.graph, MassKind::Lumped)?;
    let h0 = initial_potential(&graph, &grid, &config.graph)?;
    let times = config.time.grid();
    let opts = ColeHopfOptions { mass, ..Default::default() };
    let sol = cole_hopf_solve(&h0, &times, &opts)?;

    w.write(
        "spectrum.csv",
        &spectrum_csv(sol.decomposition().eigenvalues().as_slice().unwrap()),
    )?;

    let mut traj = String::from("time,edge_id,node_index,u_value,h_value,w_value\n");
    for (i, &t) in times.iter().enumerate() {
        let u = sol.velocity(i)?;
        let h = sol.potential(i);
        let heat = sol.heat_solution(i);
        for e in 0..graph.n_edges() {
            let u_nodes = nodal_averages(u.edge_values(e));
            let h_vals = h.edge_values(e);
            let w_vals = heat.edge_values(e);
            for k in 0..h_vals.len() {
                let _ = writeln!(
                    traj,
                    "{t},{e},{k},{},{},{}",
                    u_nodes[k], h_vals[k], w_vals[k]
                );
            }
        }
    }
    w.write("trajectory.csv", &traj)?;

    let report = apriori_check(&sol)?;
    let mut apriori = String::from(
        "time,u_norm,norm_bound,log_energy,log_energy_bound,min_w,identity_gap\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            apriori,
            "{},{},{},{},{},{},{}",
            r.t, r.u_norm, r.norm_bound, r.log_energy, r.log_energy_bound, r.min_w, r.identity_gap
        );
    }
    w.write("apriori.csv", &apriori)?;
    if !report.ok {
        return Err(Error::NumericalAssertion(
            "a-priori estimate chain violated along the trajectory".into(),
        ));
    }

    let mut summary = format!(
        "graph-burgers: {} times, mass = {}, floor = {:.6}",
        times.len(),
        match mass {
            MassKind::Consistent => "consistent",
            MassKind::Lumped => "lumped",
        },
        report.floor
    );
    if config.graph.initial == "single-mode" {
        // Closed-form single-mode check on the unit interval.
        let a = config.graph.amplitude;
        let n = grid[0];
        let mut err_csv = String::from("time,max_error\n");
        let mut worst = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            let u = sol.velocity(i)?;
            let mut e_t = 0.0f64;
            for k in 0..n {
                let x = (k as f64 + 0.5) / n as f64;
                e_t = e_t.max((u.edge_values(0)[k] - single_mode_velocity(a, t, x)).abs());
            }
            worst = worst.max(e_t);
            let _ = writeln!(err_csv, "{t},{e_t}");
        }
        w.write("closed_form_error.csv", &err_csv)?;
        let _ = write!(summary, ", max closed-form error {worst:.3e}");
    }
    Ok(summary)
}

fn run_gasket_approx(config: &Config, w: &mut ArtifactWriter) -> Result<String> {
    let k = &config.gasket;
    let level = k.level;
    let export = k.export_level.unwrap_or(level + 2);
    let depth = export.max(level + k.quad_offset).max(level + 1);
    let gasket = SierpinskiGasket::build(depth);
    let measure = SelfSimilarMeasure::new(k.measure)?;
    let bundle = build_gamma_m(&gasket, level, measure, k.quad_offset)?;

    // Crosswalk graph in the standard file format, reusable as graph input.
    let mut gfile = String::from(
        "# level crosswalk graph: edge_id i j length energy_weight measure_weight\n",
    );
    for edge in bundle.graph().edges() {
        let _ = writeln!(
            gfile,
            "{} {} {} {} {} {}",
            edge.id, edge.i, edge.j, edge.length, edge.energy_weight, edge.measure_weight
        );
    }
    w.write("gamma_m.graph", &gfile)?;

    // Harmonic extension of the corner datum, exported at the chosen depth.
    let harmonic = gasket.harmonic_extend(0, export, &[1.0, 0.0, 0.0])?;
    w.write("harmonic.csv", &gasket.to_csv(export, &harmonic)?)?;

    // Spline integrals of the focus level.
    let ints = measure.spline_integrals(&gasket, level, level + k.quad_offset)?;
    let mut spl = String::from("vertex_id,integral\n");
    for (p, v) in ints.iter().enumerate() {
        let _ = writeln!(spl, "{p},{v}");
    }
    w.write("spline_integrals.csv", &spl)?;

    // Dirichlet spectra of the focus level and the next, with the decimation
    // pairing.
    let coarse = gasket.dirichlet_spectrum(level)?;
    let fine = gasket.dirichlet_spectrum(level + 1)?;
    w.write("spectrum.csv", &spectrum_csv(&coarse))?;
    let report = decimation_match(&coarse, &fine, 1e-8);
    let mut dec_csv = String::from("lambda_fine,phi_lambda_fine\n");
    for (lf, v) in &report.matched {
        let _ = writeln!(dec_csv, "{lf},{v}");
    }
    w.write("decimation.csv", &dec_csv)?;
    if !report.unmatched_coarse.is_empty() {
        return Err(Error::NumericalAssertion(format!(
            "spectral decimation failed: {} coarse eigenvalues unmatched",
            report.unmatched_coarse.len()
        )));
    }
    Ok(format!(
        "gasket-approx: level {level}, export level {export}, mu_m(X_m) = {:.12}, delta_m = {:.4e}, decimation matched {} of {}",
        bundle.total_measure(),
        bundle.delta_m(),
        report.matched.len(),
        coarse.len()
    ))
}

fn run_heat_convergence(config: &Config, w: &mut ArtifactWriter) -> Result<String> {
    let k = &config.gasket;
    let opts = ConvergenceOptions {
        levels: k.levels.clone(),
        reference_level: k.reference_level,
        times: k.times.clone(),
        measure: SelfSimilarMeasure::new(k.measure)?,
    };
    let report = heat_convergence_experiment(&opts)?;
    let mut dist = String::from("time,level,distance\n");
    for row in &report.rows {
        for (m, d) in report.levels.iter().zip(&row.distances) {
            let _ = writeln!(dist, "{},{m},{d}", row.t);
        }
    }
    w.write("distances.csv", &dist)?;
    let mut rates = String::from("time,ols_slope,final_log_ratio,strictly_decreasing,gate\n");
    for row in &report.rows {
        let _ = writeln!(
            rates,
            "{},{},{},{},{}",
            row.t, row.ols_slope, row.final_log_ratio, row.strictly_decreasing, report.rate_gate
        );
    }
    w.write("rates.csv", &rates)?;
    if !report.pass {
        return Err(Error::NumericalAssertion(format!(
            "heat convergence gates failed:\n{report}"
        )));
    }
    Ok(format!(
        "heat-convergence: levels {:?} vs reference {}, slope(t={}) = {:.4} (gate {:.4})",
        report.levels, report.reference_level, report.rows[0].t, report.rows[0].ols_slope,
        report.rate_gate
    ))
}

fn run_burgers_convergence(config: &Config, w: &mut ArtifactWriter) -> Result<String> {
    let k = &config.gasket;
    let opts = ConvergenceOptions {
        levels: k.levels.clone(),
        reference_level: k.reference_level,
        times: k.times.clone(),
        measure: SelfSimilarMeasure::new(k.measure)?,
    };
    let report = burgers_convergence_experiment(&opts)?;
    let mut csv = String::from("time,potential,level,abs_pairing\n");
    for row in &report.rows {
        for (m, p) in report.levels.iter().zip(&row.pairings) {
            let _ = writeln!(csv, "{},{},{m},{p}", row.t, row.potential);
        }
    }
    w.write("pairings.csv", &csv)?;
    let mut floor = String::from("floor,min_heat_value\n");
    let _ = writeln!(floor, "{},{}", report.floor, report.min_heat_value);
    w.write("floor.csv", &floor)?;
    if !report.pass {
        return Err(Error::NumericalAssertion(format!(
            "weak convergence gates failed:\n{report}"
        )));
    }
    Ok(format!(
        "burgers-convergence: levels {:?} vs reference {}, {} pairings all decreasing, min w = {:.6} >= floor {:.6}",
        report.levels,
        report.reference_level,
        report.rows.len(),
        report.min_heat_value,
        report.floor
    ))
}

fn run_lemma_suite(config: &Config, w: &mut ArtifactWriter) -> Result<String> {
    let k = &config.gasket;
    let max_level = *k.levels.last().expect("validated nonempty");
    let gasket = SierpinskiGasket::build(max_level + k.quad_offset);
    let measure = SelfSimilarMeasure::new(k.measure)?;
    let report = quasi_unitary_suite(&gasket, measure, &k.levels, k.samples, config.seed)?;
    let mut csv = String::from(
        "level,delta_m,adjoint_retraction,forward_comparison,adjoint_comparison,round_trip,worst\n",
    );
    for row in &report.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.level,
            row.delta_m,
            row.adjoint_retraction,
            row.forward_comparison,
            row.adjoint_comparison,
            row.round_trip,
            row.worst()
        );
    }
    w.write("ratios.csv", &csv)?;
    if !report.pass {
        return Err(Error::NumericalAssertion(format!(
            "quasi-unitarity bound violated:\n{report}"
        )));
    }
    let worst = report.rows.iter().map(|r| r.worst()).fold(0.0f64, f64::max);
    Ok(format!(
        "lemma-suite: levels {:?}, {} samples each, worst ratio {:.4e} (< 1)",
        k.levels, report.samples, worst
    ))
}

/// Runs the configured experiment, writing all artifacts plus the manifest
/// into `config.out`.
pub fn run(config: &Config) -> Result<RunOutcome> {
    let mut writer = ArtifactWriter::new(&config.out)?;
    writer.write("manifest.toml", &manifest_toml(config)?)?;
    let summary = match config.experiment {
        Experiment::GraphHeat => run_graph_heat(config, &mut writer),
        Experiment::GraphBurgers => run_graph_burgers(config, &mut writer),
        Experiment::GasketApprox => run_gasket_approx(config, &mut writer),
        Experiment::HeatConvergence => run_heat_convergence(config, &mut writer),
        Experiment::BurgersConvergence => run_burgers_convergence(config, &mut writer),
        Experiment::LemmaSuite => run_lemma_suite(config, &mut writer),
    }?;
    Ok(RunOutcome { out_dir: writer.dir, files: writer.files, summary })
}
