//! Monte Carlo orchestration: replicated runs, table reproduction, rate sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, GridSpec, Method, Metric, ModelKind};
use crate::empirical::{
    eigen_decompose, empirical_bosq, empirical_componentwise, empirical_covariance, empirical_guillas,
    predict_curve,
};
use crate::error::{Error, Result};
use crate::gaussian_theory::{
    exact_var_mean_cross, exact_var_mean_eta_squared, path_statistics, summarize, var_mean_cross, var_mean_eta_squared,
};
use crate::spectral_model::DiagonalSpectrum;
use crate::estimators::{
    self, default_threshold, truncation_level, BasisTag, OperatorEstimate, TruncationRule,
};
use crate::metrics::{self, prediction_error_h_norm, rate_fit, RateFit, Representation};
use crate::quadrature::Grid;
use crate::reference;
use crate::rng::derive_seed;
use crate::simulator::{
    basis_matrix, simulate_nondiagonal, simulate_spectrum, BandProfile, CoefficientSeries, FunctionalSample,
    NonDiagonalModel,
};
use crate::smoothing::{kernel_predict, penalized_fpca_predict, pointwise_emae, SplineSmoother};
use crate::wavelet::{wavelet_smooth_then_estimate, ShrinkagePlan, WaveletSpec};

/// Desk-scale cap on the sample size of reproduced tables.
pub const DESK_MAX_N: usize = 55000;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub table: String,
    pub n: usize,
    pub k_n: usize,
    pub method: String,
    pub metric: Metric,
    pub value: f64,
    /// Monte Carlo standard error of `value`.
    pub se: f64,
    pub paper_value: Option<f64>,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub config_hash: String,
    pub version: String,
}

pub const CSV_HEADER: &str = "table,n,k_n,method,metric,value,paper_value,N,seed";

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let paper = r.paper_value.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:e},{},{},{}",
                r.table, r.n, r.k_n, r.method, r.metric, r.value, paper, r.replications, r.seed
            );
        }
        out
    }

    /// SHA-256 of the CSV body.
    pub fn content_hash(&self) -> String {
        hex(&Sha256::digest(self.to_csv().as_bytes()))
    }

    pub fn find(&self, n: usize, method: &str, metric: Metric) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.n == n && r.method == method && r.metric == metric)
    }

    /// Writes `<stem>.csv` and `<stem>.meta`; returns the CSV path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv())?;
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = format!(
            "config_hash = {}\ncsv_sha256 = {}\nversion = {}\ncreated_unix = {created}\n",
            self.config_hash,
            self.content_hash(),
            self.version
        );
        std::fs::write(dir.join(format!("{stem}.meta")), meta)?;
        Ok(csv)
    }

    /// One two-column `n value` file per (method, metric, k_n series).
    pub fn write_plot_data(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut keys: Vec<(String, Metric)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.method.clone(), r.metric)) {
                keys.push((r.method.clone(), r.metric));
            }
        }
        let mut paths = Vec::new();
        for (method, metric) in keys {
            let mut body = String::from("# n value\n");
            for r in self.rows.iter().filter(|r| r.method == method && r.metric == metric) {
                let _ = writeln!(body, "{} {:e}", r.n, r.value);
            }
            let path = dir.join(format!("{stem}_{}_{metric}.dat", method.replace(['/', '='], "_")));
            std::fs::write(&path, body)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    rule: Option<usize>,
    method: Method,
    metric: Metric,
}

fn applicable(method: Method, basis: BasisTag) -> &'static [Metric] {
    match (method, basis) {
        (Method::Kernel(_) | Method::Fpca, _) => &[Metric::Emae],
        (Method::Componentwise, BasisTag::Theoretical) => &[Metric::Emse, Metric::Ub, Metric::Error],
        (_, BasisTag::Theoretical) => &[Metric::Emse, Metric::Error],
        (_, BasisTag::Empirical) => &[Metric::Error],
    }
}

fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let wanted = |m: &Metric| cfg.metrics.is_empty() || cfg.metrics.contains(m);
    let mut out = Vec::new();
    for (r, _) in cfg.rules.iter().enumerate() {
        for &method in cfg.methods.iter().filter(|m| m.is_projection()) {
            for metric in applicable(method, cfg.basis).iter().filter(|m| wanted(m)) {
                out.push(Cell { rule: Some(r), method, metric: *metric });
            }
        }
    }
    for &method in cfg.methods.iter().filter(|m| !m.is_projection()) {
        for metric in applicable(method, cfg.basis).iter().filter(|m| wanted(m)) {
            out.push(Cell { rule: None, method, metric: *metric });
        }
    }
    out
}

/// Method label; the rule is appended when several rules share a run.
fn label(cfg: &ExperimentConfig, cell: &Cell) -> String {
    match cell.rule {
        Some(r) if cfg.rules.len() > 1 => format!("{}/{}", cell.method, rule_tag(&cfg.rules[r])),
        _ => cell.method.to_string(),
    }
}

fn rule_tag(rule: &TruncationRule) -> String {
    match rule {
        TruncationRule::PowerAlpha { alpha } => format!("alpha{alpha}"),
        TruncationRule::GuillasEx2 { .. } => "ex2".into(),
        TruncationRule::LogN => "log_n".into(),
        TruncationRule::GuillasEx4 { .. } => "ex4".into(),
    }
}

/// Truncation levels for `n`, or a config error if a rule asks for `k_n >= n`.
pub fn checked_levels(rules: &[TruncationRule], n: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Config(format!("sample size {n} is too small")));
    }
    rules
        .iter()
        .map(|r| {
            if r.unclamped(n) >= n {
                Err(Error::Config(format!("rule {r} gives k_n = {} >= n = {n}", r.unclamped(n))))
            } else {
                Ok(truncation_level(r, n))
            }
        })
        .collect()
}

/// State shared by every replication at one sample size.
struct Context {
    ks: Vec<usize>,
    sim_k: usize,
    nondiagonal: Option<NonDiagonalModel<f64>>,
    truth_matrix: Array2<f64>,
    grid: Option<Grid<f64>>,
    phi: Option<Array2<f64>>,
    spline: Option<SplineSmoother<f64>>,
    wavelet: Option<(WaveletSpec<f64>, ShrinkagePlan<f64>)>,
}

fn make_grid(cfg: &ExperimentConfig) -> Result<Grid<f64>> {
    match cfg.grid {
        GridSpec::Step(h) => Grid::from_step(cfg.model.interval, h),
        GridSpec::Points(p) => Grid::uniform(cfg.model.interval, p),
    }
}

fn context(cfg: &ExperimentConfig, n: usize, nondiagonal: &Option<NonDiagonalModel<f64>>) -> Result<Context> {
    let ks = checked_levels(&cfg.rules, n)?;
    let kmax = ks.iter().copied().max().unwrap_or(1);
    let empirical = cfg.basis == BasisTag::Empirical;
    if kmax > cfg.components {
        return Err(Error::Config(format!("k_n = {kmax} exceeds the {} simulated components", cfg.components)));
    }
    let sim_k = if empirical || nondiagonal.is_some() { cfg.components } else { kmax };
    let truth_matrix = match nondiagonal {
        Some(nd) => nd.rho_matrix.clone(),
        None => Array2::from_diag(&Array1::from_shape_fn(sim_k, |j| cfg.model.rho(j + 1))),
    };
    let (mut grid, mut phi, mut spline, mut wavelet) = (None, None, None, None);
    if empirical {
        let g = make_grid(cfg)?;
        if kmax > g.len() {
            return Err(Error::Config(format!("k_n = {kmax} exceeds the {} grid points", g.len())));
        }
        phi = Some(basis_matrix(&cfg.model, &g, cfg.components));
        if cfg.methods.iter().any(|m| matches!(m, Method::Kernel(_))) && cfg.spline_lambda > 0.0 {
            spline = Some(SplineSmoother::new(g.points.view())?);
        }
        if cfg.methods.contains(&Method::Wavelet) {
            let mut spec = WaveletSpec::for_length(g.len(), cfg.model.delta1)
                .map_err(|e| Error::Config(format!("wavelet grid: {e}")))?;
            spec.family = cfg.wavelet_family;
            spec.j0 = cfg.wavelet_j0;
            spec.validate(g.len()).map_err(|e| Error::Config(e.to_string()))?;
            wavelet = Some((spec, ShrinkagePlan::from_model(&cfg.model, n, cfg.wavelet_m)?));
        }
        grid = Some(g);
    }
    Ok(Context { ks, sim_k, nondiagonal: nondiagonal.clone(), truth_matrix, grid, phi, spline, wavelet })
}

fn theoretical_estimate(
    method: Method,
    x: &CoefficientSeries<f64>,
    k: usize,
    a_n: f64,
) -> Result<OperatorEstimate<f64>> {
    match method {
        Method::Componentwise => estimators::componentwise(x, k),
        Method::Bosq => estimators::bosq(x, k),
        Method::Guillas => estimators::guillas(x, k, a_n),
        Method::BosqFull => estimators::bosq_full(x, k),
        Method::GuillasFull => estimators::guillas_full(x, k, a_n),
        o => Err(Error::Config(format!("{o} is not a theoretical-basis estimator"))),
    }
}

/// Values of every non-derived cell for one replication, in cell order.
fn replicate(cfg: &ExperimentConfig, ctx: &Context, cells: &[Cell], n: usize, seed: u64, rep: u64) -> Result<Vec<f64>> {
    let series = match &ctx.nondiagonal {
        Some(nd) => simulate_nondiagonal(nd, n + 1, seed, rep)?,
        None => simulate_spectrum(&cfg.model.spectrum(ctx.sim_k), n + 1, seed, rep)?,
    };
    let sample = series.head(n)?;
    let last = series.values.row(n - 1);
    let truth = ctx.truth_matrix.dot(&last);
    let a_n = |k: usize| default_threshold(cfg.model.c(k), cfg.a_n_beta);

    let mut out = vec![f64::NAN; cells.len()];
    match cfg.basis {
        BasisTag::Theoretical => {
            for (r, &k) in ctx.ks.iter().enumerate() {
                for method in cfg.methods.iter().copied() {
                    let idx: Vec<usize> =
                        (0..cells.len()).filter(|&i| cells[i].rule == Some(r) && cells[i].method == method).collect();
                    if idx.is_empty() {
                        continue;
                    }
                    let est = theoretical_estimate(method, &sample, k, a_n(k))?;
                    for i in idx {
                        out[i] = match cells[i].metric {
                            Metric::Emse => {
                                metrics::hs_distance_sq(est.matrix.view(), ctx.truth_matrix.slice(s![..k, ..k]))?
                            }
                            Metric::Error => {
                                let pred = est.predict(last)?;
                                prediction_error_h_norm(truth.slice(s![..k]), pred.view(), Representation::Coefficients)?
                            }
                            _ => f64::NAN,
                        };
                    }
                }
            }
        }
        BasisTag::Empirical => {
            let (grid, phi) = (ctx.grid.as_ref().expect("grid"), ctx.phi.as_ref().expect("basis"));
            let all = series.values.dot(phi);
            let curves = FunctionalSample::new(grid.clone(), all.slice(s![..n, ..]).to_owned())?;
            let last_curve = all.row(n - 1);
            let next_curve = all.row(n);
            let kmax = ctx.ks.iter().copied().max().unwrap_or(0);
            let needs_eigen = cfg.methods.iter().any(|m| m.is_projection() && *m != Method::Wavelet);
            let eig = if needs_eigen && kmax > 0 {
                let cov = empirical_covariance(&curves)?;
                Some(eigen_decompose(cov.view(), grid.weights.view(), kmax, None)?)
            } else {
                None
            };
            for (r, &k) in ctx.ks.iter().enumerate() {
                let truth_curve = truth.slice(s![..k]).dot(&phi.slice(s![..k, ..]));
                for method in cfg.methods.iter().copied().filter(Method::is_projection) {
                    let idx: Vec<usize> =
                        (0..cells.len()).filter(|&i| cells[i].rule == Some(r) && cells[i].method == method).collect();
                    if idx.is_empty() {
                        continue;
                    }
                    let pred = match method {
                        Method::Wavelet => {
                            let (spec, plan) = ctx.wavelet.as_ref().expect("wavelet plan");
                            wavelet_smooth_then_estimate(&curves, spec, plan, k)?.prediction
                        }
                        m => {
                            let eig = eig.as_ref().expect("eigensystem");
                            let est = match m {
                                Method::Componentwise => empirical_componentwise(&curves, eig, k)?,
                                Method::Bosq => empirical_bosq(&curves, eig, k)?,
                                Method::Guillas => empirical_guillas(&curves, eig, k, a_n(k))?,
                                o => return Err(Error::Config(format!("{o} needs basis = theoretical"))),
                            };
                            predict_curve(&est, eig, last_curve)?
                        }
                    };
                    let err = prediction_error_h_norm(truth_curve.view(), pred.view(), Representation::Grid(grid))?;
                    for i in idx {
                        out[i] = err;
                    }
                }
            }
            for (i, cell) in cells.iter().enumerate().filter(|(_, c)| c.rule.is_none()) {
                out[i] = match cell.method {
                    Method::Kernel(h) => {
                        let (history, x) = match &ctx.spline {
                            Some(sp) => {
                                let sm = FunctionalSample::new(
                                    grid.clone(),
                                    sp.smooth(curves.curves.view(), cfg.spline_lambda)?,
                                )?;
                                let x = sm.curves.row(n - 1).to_owned();
                                (sm, x)
                            }
                            None => (curves.clone(), last_curve.to_owned()),
                        };
                        let pred = kernel_predict(&history, x.view(), h)?;
                        pointwise_emae(next_curve, pred.curve.view())?
                    }
                    Method::Fpca => {
                        let pred = penalized_fpca_predict(&curves, cfg.fpca, last_curve)?;
                        pointwise_emae(next_curve, pred.curve.view())?
                    }
                    _ => f64::NAN,
                };
            }
        }
    }
    Ok(out)
}

/// Ordered reduction of per-replication values into (mean, standard error).
fn reduce(per_rep: &[Vec<f64>], i: usize) -> (f64, f64) {
    let v: Vec<f64> = per_rep.iter().map(|r| r[i]).collect();
    metrics::mean_se(&v)
}

fn validate_levels(cfg: &ExperimentConfig) -> Result<()> {
    for &n in &cfg.n_grid {
        checked_levels(&cfg.rules, n)?;
    }
    Ok(())
}

/// Runs every `(n, rule, method, metric)` cell of the configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    validate_levels(cfg)?;
    let nondiagonal = match cfg.kind {
        ModelKind::Diagonal => None,
        ModelKind::NonDiagonal => {
            Some(NonDiagonalModel::banded(&cfg.model, cfg.components, BandProfile::default(), cfg.burn_in)?)
        }
    };
    let cells = cells(cfg);
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let ctx = context(cfg, n, &nondiagonal)?;
        let seed = derive_seed(cfg.seed, &format!("{}/n={n}", cfg.table));
        log::info!("table {} n={n} k={:?} N={}", cfg.table, ctx.ks, cfg.replications);
        let per_rep: Vec<Vec<f64>> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|w| replicate(cfg, &ctx, &cells, n, seed, w))
            .collect::<Result<_>>()?;
        for (i, cell) in cells.iter().enumerate() {
            let k = match cell.rule {
                Some(r) => ctx.ks[r],
                None if cell.method == Method::Fpca => cfg.fpca.q,
                None => 0,
            };
            let (value, se) = match cell.metric {
                Metric::Ub => {
                    let j = cells
                        .iter()
                        .position(|c| c.rule == cell.rule && c.method == cell.method && c.metric == Metric::Emse)
                        .expect("ub follows emse");
                    let (emse, emse_se) = reduce(&per_rep, j);
                    let sx = metrics::sigma_x_sq(&cfg.model, k).sqrt();
                    let ub = metrics::ub_emae(emse, &cfg.model, k)?;
                    (ub, if emse > 0.0 { sx * emse_se / (2.0 * emse.sqrt()) } else { 0.0 })
                }
                _ => reduce(&per_rep, i),
            };
            if !value.is_finite() {
                return Err(Error::Numerical(format!("non-finite {} for {} at n = {n}", cell.metric, cell.method)));
            }
            rows.push(ResultRow {
                table: cfg.table.clone(),
                n,
                k_n: k,
                method: label(cfg, cell),
                metric: cell.metric,
                value,
                se,
                paper_value: None,
                replications: cfg.replications,
                seed: cfg.seed,
            });
        }
    }
    Ok(ResultTable { rows, config_hash: cfg.hash(), version: env!("CARGO_PKG_VERSION").to_string() })
}

/// Sample-size and replication scaling of a reproduced table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub n: f64,
    pub replications: f64,
    /// Use the published replication counts and every printed sample size.
    pub full: bool,
}

impl Default for Scale {
    fn default() -> Self {
        Self { n: 1.0, replications: 1.0, full: false }
    }
}

fn sizes<const W: usize>(t: &[[f64; W]]) -> Vec<usize> {
    t.iter().map(|r| r[0] as usize).collect()
}

/// Configuration of table `id` at the given scale.
pub fn table_config(id: u8, scale: Scale, seed: u64) -> Result<ExperimentConfig> {
    if !(scale.n > 0.0 && scale.n <= 1.0) || !(scale.replications > 0.0 && scale.replications <= 1.0) {
        return Err(Error::Config(format!(
            "scale factors must lie in (0, 1], got n: {}, N: {}",
            scale.n, scale.replications
        )));
    }
    let mut c = ExperimentConfig { table: id.to_string(), seed, ..Default::default() };
    let alpha = |a: f64| TruncationRule::PowerAlpha { alpha: a };
    let (ns, paper_n, desk_n) = match id {
        1 => {
            c.rules = vec![alpha(5.0), alpha(6.0)];
            c.metrics = vec![Metric::Emse, Metric::Ub];
            (sizes(&reference::TABLE1), 700, 100)
        }
        2 | 3 => {
            c.methods = vec![Method::Componentwise, Method::Bosq, Method::Guillas];
            c.metrics = vec![Metric::Error];
            if id == 3 {
                c.model.delta1 = 61.0 / 60.0;
                c.rules = vec![TruncationRule::guillas_ex2(61.0 / 60.0)];
                (sizes(&reference::TABLE3), 700, 100)
            } else {
                (sizes(&reference::TABLE2), 700, 100)
            }
        }
        4..=6 => {
            c.methods = vec![Method::Componentwise, Method::Bosq, Method::Guillas];
            c.basis = BasisTag::Empirical;
            match id {
                4 => {
                    c.grid = GridSpec::Step(0.08);
                    c.rules = vec![TruncationRule::LogN];
                    (sizes(&reference::TABLE4), 700, 100)
                }
                5 => (sizes(&reference::TABLE5), 200, 50),
                _ => {
                    c.rules = vec![TruncationRule::guillas_ex4(2.4)];
                    (sizes(&reference::TABLE6), 200, 50)
                }
            }
        }
        7 => {
            c.methods = vec![Method::Kernel(0.1), Method::Kernel(0.3), Method::Fpca];
            c.basis = BasisTag::Empirical;
            c.rules = Vec::new();
            (sizes(&reference::TABLE7), 200, 50)
        }
        8 => {
            c.methods = vec![Method::Componentwise, Method::Wavelet];
            c.basis = BasisTag::Empirical;
            c.grid = GridSpec::Points(256);
            c.rules = vec![alpha(6.0), alpha(10.0)];
            (sizes(&reference::TABLE8), 200, 50)
        }
        9 => {
            c.kind = ModelKind::NonDiagonal;
            c.methods = vec![Method::Componentwise, Method::BosqFull, Method::GuillasFull];
            c.metrics = vec![Metric::Error];
            (sizes(&reference::TABLE9), 200, 50)
        }
        o => return Err(Error::Config(format!("unknown table {o}; expected 1..=9"))),
    };
    let base_n = if scale.full { paper_n } else { desk_n };
    c.replications = ((base_n as f64 * scale.replications).round() as usize).max(1);
    let mut grid: Vec<usize> = ns
        .into_iter()
        .filter(|&n| scale.full || n <= DESK_MAX_N)
        .map(|n| (n as f64 * scale.n).round() as usize)
        .collect();
    grid.dedup();
    c.n_grid = grid;
    validate_levels(&c)?;
    c.validate()?;
    Ok(c)
}

fn lookup<const W: usize>(t: &[[f64; W]], n: usize, col: usize) -> Option<f64> {
    t.iter().find(|r| r[0] as usize == n).map(|r| r[col])
}

/// Published value of a table cell, when the table prints one for this `n`.
pub fn paper_value(id: u8, n: usize, rule: Option<usize>, method: Method, metric: Metric) -> Option<f64> {
    use Method::*;
    let three = |t: &[[f64; 5]]| -> Option<f64> {
        let col = match method {
            Componentwise => 2,
            Bosq | BosqFull => 3,
            Guillas | GuillasFull => 4,
            _ => return None,
        };
        lookup(t, n, col)
    };
    match (id, metric) {
        (1, Metric::Emse | Metric::Ub) if method == Componentwise => {
            let base = 1 + 3 * rule?;
            lookup(&reference::TABLE1, n, base + if metric == Metric::Emse { 1 } else { 2 })
        }
        (2, Metric::Error) => three(&reference::TABLE2),
        (3, Metric::Error) => three(&reference::TABLE3),
        (4, Metric::Error) => three(&reference::TABLE4),
        (5, Metric::Error) => three(&reference::TABLE5),
        (6, Metric::Error) => three(&reference::TABLE6),
        (9, Metric::Error) => three(&reference::TABLE9),
        (7, Metric::Emae) => {
            let col = match method {
                Kernel(h) => match h {
                    0.1 => 1,
                    0.3 => 2,
                    _ => return None,
                },
                Fpca => 3,
                _ => return None,
            };
            lookup(&reference::TABLE7, n, col)
        }
        (8, Metric::Error) => {
            let off = match method {
                Componentwise => 2,
                Wavelet => 3,
                _ => return None,
            };
            lookup(&reference::TABLE8, n, off + 3 * rule?)
        }
        _ => None,
    }
}

/// Runs table `id` and attaches the published values.
pub fn reproduce_table(id: u8, scale: Scale, seed: u64) -> Result<ResultTable> {
    let cfg = table_config(id, scale, seed)?;
    let mut table = run_experiment(&cfg)?;
    let cells = cells(&cfg);
    let per_n = cells.len();
    for (i, row) in table.rows.iter_mut().enumerate() {
        let cell = cells[i % per_n];
        row.paper_value = paper_value(id, row.n, cell.rule, cell.method, cell.metric);
    }
    Ok(table)
}

/// Sample sizes of the convergence-rate sweep.
pub const RATE_GRID: [usize; 7] = [5000, 10000, 20000, 35000, 50000, 75000, 100000];

#[derive(Debug, Clone)]
pub struct RateReport {
    pub table: ResultTable,
    pub emse: RateFit,
    pub ub: RateFit,
}

/// EMSE and UB sweep for the componentwise estimator with `k_n = n^(1/alpha)`.
pub fn rate_sweep(ns: &[usize], replications: usize, alpha: f64, seed: u64) -> Result<RateReport> {
    let cfg = ExperimentConfig {
        table: "rates".into(),
        n_grid: ns.to_vec(),
        replications,
        rules: vec![TruncationRule::PowerAlpha { alpha }],
        metrics: vec![Metric::Emse, Metric::Ub],
        seed,
        ..Default::default()
    };
    let table = run_experiment(&cfg)?;
    let series = |m: Metric| -> Vec<f64> { table.rows.iter().filter(|r| r.metric == m).map(|r| r.value).collect() };
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let emse = rate_fit(&x, &series(Metric::Emse))?;
    let ub = rate_fit(&x, &series(Metric::Ub))?;
    Ok(RateReport { table, emse, ub })
}

impl RateReport {
    /// Plot data for the EMSE and UB figures together with the `(1/n)^(3/4)`
    /// reference line anchored at the first point.
    pub fn write_plot_data(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = self.table.write_plot_data(dir, "rates")?;
        for metric in [Metric::Emse, Metric::Ub] {
            let rows: Vec<&ResultRow> = self.table.rows.iter().filter(|r| r.metric == metric).collect();
            let Some(first) = rows.first() else { continue };
            let scale = first.value * (first.n as f64).powf(0.75);
            let mut body = String::from("# n (1/n)^(3/4)\n");
            for r in &rows {
                let _ = writeln!(body, "{} {:e}", r.n, scale * (r.n as f64).powf(-0.75));
            }
            let path = dir.join(format!("rates_reference_{metric}.dat"));
            std::fs::write(&path, body)?;
            paths.push(path);
        }
        let mut fit = String::from("metric,slope,intercept,r2\n");
        let _ = writeln!(fit, "emse,{},{},{}", self.emse.slope, self.emse.intercept, self.emse.r2);
        let _ = writeln!(fit, "ub,{},{},{}", self.ub.slope, self.ub.intercept, self.ub.r2);
        let path = dir.join("rates_fit.csv");
        std::fs::write(&path, fit)?;
        paths.push(path);
        Ok(paths)
    }
}

/// Monte Carlo variance of a path statistic next to its closed form and the
/// exact value under the stationary AR(1) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub rho: f64,
    pub n: usize,
    /// `eta_sq` for `(1/n) sum eta^2`, `cross` for the lag-one mean.
    pub statistic: &'static str,
    pub closed_form: f64,
    pub exact: f64,
    pub mc_var: f64,
    pub mc_se: f64,
}

impl OracleRow {
    /// Distance to the closed form in Monte Carlo standard errors.
    pub fn z_closed(&self) -> f64 {
        (self.mc_var - self.closed_form) / self.mc_se
    }

    pub fn z_exact(&self) -> f64 {
        (self.mc_var - self.exact) / self.mc_se
    }
}

pub const ORACLE_HEADER: &str = "rho,n,statistic,closed_form,exact,mc_var,mc_se";

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e}",
            r.rho, r.n, r.statistic, r.closed_form, r.exact, r.mc_var, r.mc_se
        );
    }
    out
}

/// Simulates unit-variance AR(1) paths and compares the spread of the path
/// statistics against the variance formulas.
pub fn gaussian_oracle(rhos: &[f64], ns: &[usize], replications: usize, seed: u64) -> Result<Vec<OracleRow>> {
    if replications < 2 {
        return Err(Error::Config("the oracle needs at least 2 replications".into()));
    }
    let mut rows = Vec::new();
    for &rho in rhos {
        for &n in ns {
            let spec = DiagonalSpectrum { c: vec![1.0], rho: vec![rho] };
            let s = derive_seed(seed, &format!("oracle/{rho}/{n}"));
            let stats: Vec<(f64, f64)> = (0..replications as u64)
                .into_par_iter()
                .map(|w| simulate_spectrum(&spec, n, s, w).map(|x| path_statistics(x.column(0))))
                .collect::<Result<_>>()?;
            let sq = summarize(Array1::from_iter(stats.iter().map(|v| v.0)).view());
            let cross = summarize(Array1::from_iter(stats.iter().map(|v| v.1)).view());
            rows.push(OracleRow {
                rho,
                n,
                statistic: "eta_sq",
                closed_form: var_mean_eta_squared(rho, n)?,
                exact: exact_var_mean_eta_squared(rho, n)?,
                mc_var: sq.var,
                mc_se: sq.var_se,
            });
            rows.push(OracleRow {
                rho,
                n,
                statistic: "cross",
                closed_form: var_mean_cross(rho, n)?,
                exact: exact_var_mean_cross(rho, n)?,
                mc_var: cross.var,
                mc_se: cross.var_se,
            });
        }
    }
    Ok(rows)
}
