//! Benchmark problems, the satisfiability-rate statistic, multi-sample
//! experiments, and the on-disk artifacts they produce.
//!
//! An experiment draws one problem instance from `instance_seed` and `I`
//! starting points, sample `i` using seed `seed_base + i`. Every deterministic
//! artifact (trace CSV, summary, plot data, metadata) is a pure function of the
//! configuration; timings live in a separate file.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::directions::BetaKind;
use crate::error::{invalid, Error, Result};
use crate::linesearch::{conditions_hold, LineSearchConfig, SearchMode};
use crate::mappings::{
    make_gcfp_map, make_projected_gradient_map, residual, Ball, DiagonalQuadratic, FixedPointMap,
};
use crate::rng::Rng;
use crate::solver::{run_algorithm1, run_km_armijo, run_km_constant, KmConfig, RunResult, SolverConfig};
use crate::vector::Vector;

/// Half-width of the box that instance data and starting points are drawn from.
pub const DATA_HALF_WIDTH: f64 = 32.0;
const INSTANCE_STREAM: u64 = 0;
const START_STREAM: u64 = 1;

pub const TRACE_HEADER: &str =
    "sample,iter,residual,alpha,beta,ls_probes,ls_satisfied,used_fallback,descent_ok";
pub const TIMING_HEADER: &str = "sample,iter,elapsed_ns";
pub const TRACE_FILE: &str = "trace.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const META_FILE: &str = "run.meta";
pub const ITER_PLOT_FILE: &str = "iter_residual.dat";
pub const TIME_PLOT_FILE: &str = "time_residual.dat";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Convex quadratic over a ball, solved through its projected-gradient map.
    QpBall,
    /// Generalized convex feasibility over intersecting-or-not balls.
    Gcfp,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::QpBall => "qp",
            ProblemKind::Gcfp => "gcfp",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qp" | "qp_ball" => Ok(ProblemKind::QpBall),
            "gcfp" => Ok(ProblemKind::Gcfp),
            other => Err(Error::Parse(format!("unknown problem kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProblemData {
    Qp {
        quadratic: DiagonalQuadratic,
        ball: Ball,
    },
    Gcfp {
        outer: Ball,
        inner: Vec<Ball>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub dim: usize,
    pub seed: u64,
    pub data: ProblemData,
    pub descriptor: String,
}

impl ProblemInstance {
    /// The fixed-point map whose fixed points solve this problem.
    pub fn map(&self) -> Result<FixedPointMap> {
        match &self.data {
            ProblemData::Qp { quadratic, ball } => {
                let lambda = 2.0 / quadratic.lambda_max();
                make_projected_gradient_map(quadratic.clone(), ball.clone(), lambda)
            }
            ProblemData::Gcfp {
                outer,
                inner,
                weights,
            } => make_gcfp_map(outer.clone(), inner.clone(), weights.clone()),
        }
    }

    /// The constraint set every fixed point lies in.
    pub fn feasible_ball(&self) -> &Ball {
        match &self.data {
            ProblemData::Qp { ball, .. } => ball,
            ProblemData::Gcfp { outer, .. } => outer,
        }
    }

    /// Merit function minimized over [`Self::feasible_ball`] by the fixed points.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        match &self.data {
            ProblemData::Qp { quadratic, .. } => quadratic.value(x),
            ProblemData::Gcfp { inner, weights, .. } => crate::mappings::gcfp_objective(x, inner, weights),
        }
    }

    /// Full-precision text dump of the instance data.
    pub fn to_text(&self) -> String {
        let mut out = format!("kind={}\ndim={}\nseed={}\n", self.kind, self.dim, self.seed);
        let mut push_vec = |label: &str, v: &Vector| {
            let _ = write!(out, "{label}=");
            for (i, x) in v.iter().enumerate() {
                let sep = if i == 0 { "" } else { "," };
                let _ = write!(out, "{sep}{x:.16e}");
            }
            out.push('\n');
        };
        match &self.data {
            ProblemData::Qp { quadratic, ball } => {
                push_vec("eigenvalues", quadratic.eigenvalues());
                push_vec("linear", quadratic.linear());
                push_vec("center", ball.center());
            }
            ProblemData::Gcfp { outer, inner, .. } => {
                push_vec("outer", outer.center());
                for b in inner {
                    push_vec("inner", b.center());
                }
            }
        }
        out
    }
}

fn check_problem_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(invalid(format!(
            "problem dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

/// Random ball-constrained diagonal QP: eigenvalues `0 = λ₁ ≤ … ≤ λ_d = d`,
/// linear term and ball center uniform on `(−32, 32)^d`, unit radius.
/// Instances whose unconstrained stationary points reach the ball are redrawn.
pub fn gen_qp(dim: usize, seed: u64) -> Result<ProblemInstance> {
    check_problem_dim(dim)?;
    let mut rng = Rng::with_stream(seed, INSTANCE_STREAM);
    let top = dim as f64;
    loop {
        let mut eig = vec![0.0; dim];
        eig[dim - 1] = top;
        for e in eig.iter_mut().take(dim - 1).skip(1) {
            *e = rng.uniform_closed(0.0, top);
        }
        eig.sort_by(f64::total_cmp);
        let linear = rng.sample_uniform_box(dim, -DATA_HALF_WIDTH, DATA_HALF_WIDTH)?;
        let center = rng.sample_uniform_box(dim, -DATA_HALF_WIDTH, DATA_HALF_WIDTH)?;
        let quadratic = DiagonalQuadratic::new(Vector::new(eig)?, linear)?;
        let ball = Ball::unit(center);
        // ‖∇f(y) − ∇f(c)‖ ≤ λ_max‖y − c‖ ≤ λ_max on the ball, so this keeps ∇f ≠ 0 there
        let grad_at_center = crate::mappings::qp_gradient(&quadratic, ball.center())?.norm();
        if grad_at_center <= quadratic.lambda_max() * ball.radius() {
            continue;
        }
        let descriptor = format!("qp_ball(d={dim}, seed={seed}, lambda_max={top}, radius=1)");
        return Ok(ProblemInstance {
            kind: ProblemKind::QpBall,
            dim,
            seed,
            data: ProblemData::Qp { quadratic, ball },
            descriptor,
        });
    }
}

/// Shape of a generated feasibility problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GcfpOptions {
    /// Number of balls averaged inside the outer projection.
    pub inner_count: usize,
    pub radius: f64,
}

impl Default for GcfpOptions {
    fn default() -> Self {
        Self {
            inner_count: 99,
            radius: 1.0,
        }
    }
}

/// Random feasibility problem: an outer ball and 99 inner balls, all of unit
/// radius with centers uniform on `(−32, 32)^d`, equal weights. Instances are
/// redrawn until some pair of centers is farther apart than twice the radius,
/// which certifies that the balls have no common point.
pub fn gen_gcfp(dim: usize, seed: u64) -> Result<ProblemInstance> {
    gen_gcfp_with(dim, seed, &GcfpOptions::default())
}

pub fn gen_gcfp_with(dim: usize, seed: u64, options: &GcfpOptions) -> Result<ProblemInstance> {
    check_problem_dim(dim)?;
    if options.inner_count == 0 {
        return Err(invalid("at least one inner ball is required"));
    }
    if !(options.radius > 0.0) {
        return Err(invalid("ball radius must be positive"));
    }
    let mut rng = Rng::with_stream(seed, INSTANCE_STREAM);
    loop {
        let centers = (0..=options.inner_count)
            .map(|_| rng.sample_uniform_box(dim, -DATA_HALF_WIDTH, DATA_HALF_WIDTH))
            .collect::<Result<Vec<_>>>()?;
        if !has_separated_pair(&centers, 2.0 * options.radius)? {
            continue;
        }
        let mut balls = centers
            .into_iter()
            .map(|c| Ball::new(c, options.radius))
            .collect::<Result<Vec<_>>>()?;
        let inner = balls.split_off(1);
        let outer = balls.pop().expect("outer ball drawn first");
        let weights = vec![1.0 / options.inner_count as f64; options.inner_count];
        let descriptor = format!(
            "gcfp(d={dim}, seed={seed}, m={}, radius={})",
            options.inner_count, options.radius
        );
        return Ok(ProblemInstance {
            kind: ProblemKind::Gcfp,
            dim,
            seed,
            data: ProblemData::Gcfp {
                outer,
                inner,
                weights,
            },
            descriptor,
        });
    }
}

fn has_separated_pair(centers: &[Vector], gap: f64) -> Result<bool> {
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            if a.distance(b)? > gap {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

pub fn generate(kind: ProblemKind, dim: usize, seed: u64) -> Result<ProblemInstance> {
    match kind {
        ProblemKind::QpBall => gen_qp(dim, seed),
        ProblemKind::Gcfp => gen_gcfp(dim, seed),
    }
}

/// Starting point of sample `i`: uniform on `(−32, 32)^d` from seed `seed_base + i`.
pub fn initial_point(dim: usize, seed_base: u64, sample: usize) -> Result<Vector> {
    let mut rng = Rng::with_stream(seed_base.wrapping_add(sample as u64), START_STREAM);
    rng.sample_uniform_box(dim, -DATA_HALF_WIDTH, DATA_HALF_WIDTH)
}

/// The eight benchmarked algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    /// Krasnosel'skiĭ–Mann with constant step 1/2.
    Sd1,
    /// Krasnosel'skiĭ–Mann with potential backtracking.
    Sd2,
    /// Line-search iteration with steepest-descent directions.
    Sd3,
    Fr,
    PrpPlus,
    HsPlus,
    Dy,
    Hz,
}

impl Algo {
    pub const ALL: [Algo; 8] = [
        Algo::Sd1,
        Algo::Sd2,
        Algo::Sd3,
        Algo::Fr,
        Algo::PrpPlus,
        Algo::HsPlus,
        Algo::Dy,
        Algo::Hz,
    ];

    /// Display name, e.g. `PRP+`.
    pub fn name(self) -> &'static str {
        match self {
            Algo::Sd1 => "SD-1",
            Algo::Sd2 => "SD-2",
            Algo::Sd3 => "SD-3",
            Algo::Fr => "FR",
            Algo::PrpPlus => "PRP+",
            Algo::HsPlus => "HS+",
            Algo::Dy => "DY",
            Algo::Hz => "HZ",
        }
    }

    /// Command-line token, e.g. `prp+`.
    pub fn token(self) -> &'static str {
        match self {
            Algo::Sd1 => "sd1",
            Algo::Sd2 => "sd2",
            Algo::Sd3 => "sd3",
            Algo::Fr => "fr",
            Algo::PrpPlus => "prp+",
            Algo::HsPlus => "hs+",
            Algo::Dy => "dy",
            Algo::Hz => "hz",
        }
    }

    /// Filesystem-safe name, e.g. `prp_plus`.
    pub fn slug(self) -> String {
        self.token().replace('+', "_plus")
    }

    /// Direction formula for the line-search variants.
    pub fn beta_kind(self) -> Option<BetaKind> {
        match self {
            Algo::Sd1 | Algo::Sd2 => None,
            Algo::Sd3 => Some(BetaKind::Sd),
            Algo::Fr => Some(BetaKind::Fr),
            Algo::PrpPlus => Some(BetaKind::PrpPlus),
            Algo::HsPlus => Some(BetaKind::HsPlus),
            Algo::Dy => Some(BetaKind::Dy),
            Algo::Hz => Some(BetaKind::Hz),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Algo::ALL
            .into_iter()
            .find(|a| a.token() == key || a.name().to_ascii_lowercase() == key || a.slug() == key)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm `{s}`")))
    }
}

/// Algorithm choice plus the numeric knobs shared by all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSpec {
    pub algo: Algo,
    pub delta: f64,
    pub sigma: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl AlgoSpec {
    pub fn new(algo: Algo) -> Self {
        Self {
            algo,
            delta: 0.3,
            sigma: 0.5,
            max_iters: 10,
            residual_tol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.linesearch().validate()?;
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(invalid("residual_tol must be nonnegative"));
        }
        Ok(())
    }

    /// Step-size settings; the Armijo constant `D` follows `δ`.
    pub fn linesearch(&self) -> LineSearchConfig {
        let mode = if self.algo == Algo::Sd2 {
            SearchMode::ArmijoPotential
        } else {
            SearchMode::Wolfe
        };
        LineSearchConfig {
            delta: self.delta,
            sigma: self.sigma,
            mode,
            armijo_d: self.delta,
            ..LineSearchConfig::default()
        }
    }

    pub fn solver_config(&self) -> Option<SolverConfig> {
        self.algo.beta_kind().map(|beta_kind| SolverConfig {
            beta_kind,
            linesearch: self.linesearch(),
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            ..SolverConfig::default()
        })
    }

    pub fn run(&self, map: &FixedPointMap, x0: &Vector) -> Result<RunResult> {
        self.validate()?;
        let km = KmConfig {
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            linesearch: self.linesearch(),
            ..KmConfig::default()
        };
        match self.algo {
            Algo::Sd1 => run_km_constant(map, x0, 0.5, &km),
            Algo::Sd2 => run_km_armijo(map, x0, &km),
            _ => run_algorithm1(map, x0, &self.solver_config().expect("line-search variant")),
        }
    }
}

/// `(N₁, N₂)`: steps meeting their conditions, and executed steps.
pub fn step_counts(run: &RunResult) -> (usize, usize) {
    (run.satisfied_steps(), run.executed_steps())
}

/// `100 · ΣN₁ / ΣN₂` over the given runs.
pub fn satisfiability_rate(traces: &[RunResult]) -> Result<f64> {
    if traces.is_empty() {
        return Err(invalid("no traces"));
    }
    let (n1, n2) = traces
        .iter()
        .map(step_counts)
        .fold((0, 0), |(a, b), (c, d)| (a + c, b + d));
    if n2 == 0 {
        return Err(Error::NoExecutedIterations);
    }
    Ok(100.0 * n1 as f64 / n2 as f64)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub spec: AlgoSpec,
    pub kind: ProblemKind,
    pub dim: usize,
    pub samples: usize,
    pub instance_seed: u64,
    pub seed_base: u64,
    /// Where to write artifacts; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Command line echoed into the summary.
    pub command: String,
}

impl ExperimentConfig {
    pub fn new(spec: AlgoSpec, kind: ProblemKind, dim: usize, samples: usize) -> Self {
        Self {
            spec,
            kind,
            dim,
            samples,
            instance_seed: 0,
            seed_base: 0,
            out_dir: None,
            command: String::new(),
        }
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            algo: self.spec.algo,
            kind: self.kind,
            dim: self.dim,
            samples: self.samples,
            instance_seed: self.instance_seed,
            seed_base: self.seed_base,
            delta: self.spec.delta,
            sigma: self.spec.sigma,
            max_iters: self.spec.max_iters,
            residual_tol: self.spec.residual_tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub algo_name: String,
    pub descriptor: String,
    pub samples: usize,
    /// 100 when no sample executed a step.
    pub sr_percent: f64,
    pub traces: Vec<RunResult>,
    /// Mean residual per iteration index.
    pub iter_series: Vec<f64>,
    /// Mean `(elapsed seconds, residual)` per iteration index.
    pub time_series: Vec<(f64, f64)>,
}

impl ExperimentReport {
    pub fn mean_final_residual(&self) -> f64 {
        let sum: f64 = self.traces.iter().map(RunResult::final_residual).sum();
        sum / self.traces.len() as f64
    }

    pub fn summary_text(&self, config: &ExperimentConfig) -> String {
        format!(
            "algo={}\nkind={}\ndim={}\nI={}\nsr_percent={:.6}\nmean_final_residual={:.16e}\ninstance={}\ninitial_points=uniform(-{h},{h})^d seeds {}..{}\ncommand={}\n",
            self.algo_name,
            config.kind,
            config.dim,
            self.samples,
            self.sr_percent,
            self.mean_final_residual(),
            self.descriptor,
            config.seed_base,
            config.seed_base + self.samples as u64 - 1,
            config.command,
            h = DATA_HALF_WIDTH,
        )
    }
}

/// Runs every sample of an experiment (in parallel) and writes its artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    if config.samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    config.spec.validate()?;
    let instance = generate(config.kind, config.dim, config.instance_seed)?;
    let map = instance.map()?;
    let traces = (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let x0 = initial_point(config.dim, config.seed_base, i)?;
            config.spec.run(&map, &x0)
        })
        .collect::<Result<Vec<_>>>()?;

    let sr_percent = match satisfiability_rate(&traces) {
        Ok(sr) => sr,
        Err(Error::NoExecutedIterations) => 100.0,
        Err(e) => return Err(e),
    };
    let (iter_series, time_series) = mean_series(&traces);
    let report = ExperimentReport {
        algo_name: config.spec.algo.name().to_string(),
        descriptor: instance.descriptor.clone(),
        samples: config.samples,
        sr_percent,
        traces,
        iter_series,
        time_series,
    };
    if let Some(dir) = &config.out_dir {
        write_artifacts(dir, config, &report)?;
    }
    Ok(report)
}

/// Mean residual-vs-iteration and residual-vs-time series. Shorter traces are
/// padded with their terminal values.
pub fn mean_series(traces: &[RunResult]) -> (Vec<f64>, Vec<(f64, f64)>) {
    let len = traces.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let count = traces.len() as f64;
    let mut iter = Vec::with_capacity(len);
    let mut time = Vec::with_capacity(len);
    for n in 0..len {
        let (mut res, mut secs) = (0.0, 0.0);
        for t in traces {
            let rec = &t.records[n.min(t.records.len() - 1)];
            res += rec.residual_norm;
            secs += rec.elapsed_ns as f64 * 1e-9;
        }
        iter.push(res / count);
        time.push((secs / count, res / count));
    }
    (iter, time)
}

/// Trace CSV body: one row per executed step.
pub fn trace_csv(traces: &[RunResult]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (sample, t) in traces.iter().enumerate() {
        for r in t.records.iter().filter(|r| r.step_executed) {
            let _ = writeln!(
                out,
                "{sample},{},{:.16e},{:.16e},{:.16e},{},{},{},{}",
                r.n,
                r.residual_norm,
                r.alpha,
                r.beta_value,
                r.ls_probes,
                r.ls_satisfied,
                r.used_fallback,
                r.descent_ok
            );
        }
    }
    out
}

pub fn timing_csv(traces: &[RunResult]) -> String {
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for (sample, t) in traces.iter().enumerate() {
        for r in &t.records {
            let _ = writeln!(out, "{sample},{},{}", r.n, r.elapsed_ns);
        }
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_artifacts(dir: &Path, config: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    let mut iter_plot = String::from("# iter residual\n");
    for (n, r) in report.iter_series.iter().enumerate() {
        let _ = writeln!(iter_plot, "{n} {r:.16e}");
    }
    let mut time_plot = String::from("# elapsed_s residual\n");
    for (s, r) in &report.time_series {
        let _ = writeln!(time_plot, "{s:.9e} {r:.16e}");
    }
    write_atomic(&dir.join(TRACE_FILE), &trace_csv(&report.traces))?;
    write_atomic(&dir.join(TIMING_FILE), &timing_csv(&report.traces))?;
    write_atomic(&dir.join(SUMMARY_FILE), &report.summary_text(config))?;
    write_atomic(&dir.join(ITER_PLOT_FILE), &iter_plot)?;
    write_atomic(&dir.join(TIME_PLOT_FILE), &time_plot)?;
    write_atomic(&dir.join(META_FILE), &config.meta().to_text())?;
    Ok(())
}

/// Everything needed to regenerate an experiment's instance and starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub algo: Algo,
    pub kind: ProblemKind,
    pub dim: usize,
    pub samples: usize,
    pub instance_seed: u64,
    pub seed_base: u64,
    pub delta: f64,
    pub sigma: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

impl RunMeta {
    pub fn to_text(&self) -> String {
        format!(
            "algo={}\nkind={}\ndim={}\nsamples={}\ninstance_seed={}\nseed_base={}\ndelta={:e}\nsigma={:e}\nmax_iters={}\nresidual_tol={:e}\n",
            self.algo.token(),
            self.kind,
            self.dim,
            self.samples,
            self.instance_seed,
            self.seed_base,
            self.delta,
            self.sigma,
            self.max_iters,
            self.residual_tol
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed metadata line `{line}`")))?;
            fields.insert(k.trim(), v.trim());
        }
        fn get<T: FromStr>(fields: &BTreeMap<&str, &str>, key: &str) -> Result<T> {
            let raw = fields
                .get(key)
                .ok_or_else(|| Error::Parse(format!("metadata is missing `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::Parse(format!("bad value `{raw}` for `{key}`")))
        }
        Ok(Self {
            algo: fields
                .get("algo")
                .ok_or_else(|| Error::Parse("metadata is missing `algo`".into()))?
                .parse()?,
            kind: fields
                .get("kind")
                .ok_or_else(|| Error::Parse("metadata is missing `kind`".into()))?
                .parse()?,
            dim: get(&fields, "dim")?,
            samples: get(&fields, "samples")?,
            instance_seed: get(&fields, "instance_seed")?,
            seed_base: get(&fields, "seed_base")?,
            delta: get(&fields, "delta")?,
            sigma: get(&fields, "sigma")?,
            max_iters: get(&fields, "max_iters")?,
            residual_tol: get(&fields, "residual_tol")?,
        })
    }

    pub fn spec(&self) -> AlgoSpec {
        AlgoSpec {
            algo: self.algo,
            delta: self.delta,
            sigma: self.sigma,
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
        }
    }
}

/// One parsed row of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub sample: usize,
    pub iter: usize,
    pub residual: f64,
    pub alpha: f64,
    pub beta: f64,
    pub ls_probes: usize,
    pub ls_satisfied: bool,
    pub used_fallback: bool,
    pub descent_ok: bool,
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected trace header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 9 {
                return Err(Error::Parse(format!(
                    "row {}: expected 9 columns, found {}",
                    i + 1,
                    cols.len()
                )));
            }
            let bad = |c: usize| Error::Parse(format!("row {}: bad value `{}`", i + 1, cols[c]));
            let num = |c: usize| cols[c].parse::<f64>().map_err(|_| bad(c));
            let int = |c: usize| cols[c].parse::<usize>().map_err(|_| bad(c));
            let flag = |c: usize| cols[c].parse::<bool>().map_err(|_| bad(c));
            Ok(TraceRow {
                sample: int(0)?,
                iter: int(1)?,
                residual: num(2)?,
                alpha: num(3)?,
                beta: num(4)?,
                ls_probes: int(5)?,
                ls_satisfied: flag(6)?,
                used_fallback: flag(7)?,
                descent_ok: flag(8)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sample: usize,
    pub iter: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    /// Steps whose conditions were re-evaluated.
    pub checked: usize,
    pub violations: Vec<Violation>,
}

/// Replays every trajectory in a trace from the regenerated instance and
/// starting points, re-evaluating the step conditions of each accepted step
/// in non-strict form and comparing the recomputed residuals.
pub fn verify_trace(meta: &RunMeta, rows: &[TraceRow]) -> Result<VerifyReport> {
    let instance = generate(meta.kind, meta.dim, meta.instance_seed)?;
    let map = instance.map()?;
    let spec = meta.spec();
    let ls = spec.linesearch();
    let mut report = VerifyReport::default();

    let mut by_sample: BTreeMap<usize, Vec<&TraceRow>> = BTreeMap::new();
    for row in rows {
        if row.sample >= meta.samples {
            return Err(Error::Parse(format!("sample index {} out of range", row.sample)));
        }
        by_sample.entry(row.sample).or_default().push(row);
    }

    for (sample, mut steps) in by_sample {
        steps.sort_by_key(|r| r.iter);
        let mut x = initial_point(meta.dim, meta.seed_base, sample)?;
        let mut r = residual(&map, &x)?;
        let mut d = r.neg();
        for (expected_iter, row) in steps.into_iter().enumerate() {
            let mut flag = |reason: String| {
                report.violations.push(Violation {
                    sample,
                    iter: row.iter,
                    reason,
                })
            };
            if row.iter != expected_iter {
                flag(format!("expected iteration {expected_iter}"));
                break;
            }
            let norm = r.norm();
            if (norm - row.residual).abs() > 1e-9 * row.residual.abs().max(1e-300) {
                flag(format!(
                    "recomputed residual {norm:e} differs from recorded {:e}",
                    row.residual
                ));
            }
            let dir = match spec.algo {
                Algo::Sd1 | Algo::Sd2 => r.neg(),
                _ if row.used_fallback => r.neg(),
                _ => d.clone(),
            };
            let accepted = spec.algo != Algo::Sd1 || row.ls_satisfied;
            if accepted {
                report.checked += 1;
                if !(row.alpha > 0.0) {
                    flag(format!("non-positive step {}", row.alpha));
                } else if !conditions_hold(&map, &x, &dir, row.alpha, &ls)? {
                    flag(format!("step {:e} fails its conditions", row.alpha));
                }
            }
            x = x.add_scaled(row.alpha, &dir)?;
            r = residual(&map, &x)?;
            d = r.neg().add_scaled(row.beta, &dir)?;
        }
    }
    Ok(report)
}

/// Reads `run.meta` and `trace.csv` from an experiment directory and verifies them.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let meta = RunMeta::parse(&fs::read_to_string(dir.join(META_FILE))?)?;
    let rows = parse_trace_csv(&fs::read_to_string(dir.join(TRACE_FILE))?)?;
    verify_trace(&meta, &rows)
}
