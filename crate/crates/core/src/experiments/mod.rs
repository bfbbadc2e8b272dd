//! Monte Carlo sweeps over node count, budget and density.
//!
//! A sweep is the product `densities × epsilons × n_values`; each point runs
//! `realizations` independent layouts. Realization `j` of point `i` is seeded
//! with `seed::derive(master_seed, &[i, j])`, and from that seed the layout
//! uses child `0` and the rounding child `1`, so any single realization can be
//! replayed in isolation. Results are stored by index and reduced in index
//! order, which makes the output independent of thread count and scheduling.

mod output;
mod rules;

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{solve_exact, DEFAULT_LIMIT};
use crate::network::{build_instance, generate_uniform, PathLossModel};
use crate::problem::lift;
use crate::rounding::{round, RoundingOptions};
use crate::sdp::{solve_sdr, SolveStatus, SolverConfig};
use crate::seed;

pub use output::{emit_csv, emit_plotdata, parse_csv, plotdata_text, series_count, write_csv, SweepRow};
pub use rules::{DensityRule, EpsilonRule};

/// Environment variable capping the worker threads of a sweep.
pub const THREADS_ENV: &str = "PACK_THREADS";

/// Share of excluded realizations above which a sweep point fails.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// `x = N`, one series per density (and budget) rule.
    Nodes,
    /// `x = ε`, one series per density rule.
    Epsilon,
    /// `x = N` at a single density rule, one series per budget rule.
    DensityFixed,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Nodes => "nodes",
            SweepKind::Epsilon => "epsilon",
            SweepKind::DensityFixed => "density-fixed",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" => Ok(SweepKind::Nodes),
            "epsilon" => Ok(SweepKind::Epsilon),
            "density-fixed" => Ok(SweepKind::DensityFixed),
            _ => Err(Error::invalid(format!(
                "unknown sweep kind {s:?}; expected nodes, epsilon or density-fixed"
            ))),
        }
    }
}

/// Rounding sample count per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialsRule {
    /// `max(1000, 10·N)`.
    Default,
    Fixed(usize),
    /// `c·N`.
    PerNode(usize),
}

impl TrialsRule {
    pub fn trials(self, n: usize) -> usize {
        match self {
            TrialsRule::Default => RoundingOptions::default_trials(n),
            TrialsRule::Fixed(k) => k,
            TrialsRule::PerNode(c) => c * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub n_values: Vec<usize>,
    pub epsilons: Vec<EpsilonRule>,
    pub densities: Vec<DensityRule>,
    pub beta: f64,
    pub realizations: usize,
    pub master_seed: u64,
    pub solver: SolverConfig,
    pub trials: TrialsRule,
    /// Largest `N` for which the exact packing is computed.
    pub exact_limit: usize,
    pub strict_rounding: bool,
}

impl SweepConfig {
    /// A sweep with full-scale defaults: 1000 realizations, `β = 3`.
    pub fn new(kind: SweepKind, n_values: Vec<usize>, epsilons: Vec<EpsilonRule>, densities: Vec<DensityRule>) -> Self {
        SweepConfig {
            kind,
            n_values,
            epsilons,
            densities,
            beta: 3.0,
            realizations: 1000,
            master_seed: 0,
            solver: SolverConfig::default(),
            trials: TrialsRule::Default,
            exact_limit: DEFAULT_LIMIT,
            strict_rounding: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::invalid("a sweep needs at least one realization"));
        }
        if self.n_values.is_empty() || self.epsilons.is_empty() || self.densities.is_empty() {
            return Err(Error::invalid(
                "node counts, budgets and densities must all be non-empty",
            ));
        }
        if let Some(n) = self.n_values.iter().find(|&&n| n == 0) {
            return Err(Error::invalid(format!("node counts must be positive, got {n}")));
        }
        if self.kind == SweepKind::DensityFixed && self.densities.len() != 1 {
            return Err(Error::invalid("a density-fixed sweep takes exactly one density rule"));
        }
        PathLossModel::new(self.beta)?;
        self.solver.validate()?;
        for &n in &self.n_values {
            for e in &self.epsilons {
                e.epsilon(n)?;
            }
            for d in &self.densities {
                d.density(n)?;
            }
            let k = self.trials.trials(n);
            if k <= n {
                return Err(Error::invalid(format!(
                    "rounding needs more than N = {n} trials, got {k}"
                )));
            }
        }
        Ok(())
    }

    /// Sweep points in output order: density, then budget, then node count.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for d in &self.densities {
            for e in &self.epsilons {
                for &n in &self.n_values {
                    out.push(SweepPoint {
                        n,
                        density: *d,
                        epsilon: *e,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n: usize,
    pub density: DensityRule,
    pub epsilon: EpsilonRule,
}

/// Outcome of one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub sigma: Option<usize>,
    pub rho: f64,
    pub sigma_hat: usize,
    pub status: SolveStatus,
}

/// Runs one realization end to end; `Ok(None)` marks a numerically failed solve.
pub fn run_realization(cfg: &SweepConfig, point: &SweepPoint, realization_seed: u64) -> Result<Option<Realization>> {
    let density = point.density.density(point.n)?;
    let epsilon = point.epsilon.epsilon(point.n)?;
    let side = (point.n as f64 / density).sqrt();
    let net = generate_uniform(density, side, seed::derive(realization_seed, &[0]))?;
    let inst = build_instance(&net, PathLossModel::new(cfg.beta)?, epsilon)?;
    let sp = lift(&inst)?;
    let sol = match solve_sdr(&sp, &cfg.solver) {
        Ok(sol) if sol.status != SolveStatus::InfeasibleNumerics => sol,
        Ok(_) | Err(Error::InfeasibleNumerics(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let opts = RoundingOptions {
        trials: cfg.trials.trials(inst.len()),
        seed: seed::derive(realization_seed, &[1]),
        strict: cfg.strict_rounding,
    };
    let rounded = round(&sp, &sol, &opts)?;
    let sigma = if inst.len() <= cfg.exact_limit {
        Some(solve_exact(&inst, cfg.exact_limit)?.sigma)
    } else {
        None
    };
    Ok(Some(Realization {
        sigma,
        rho: sol.rho,
        sigma_hat: rounded.sigma_hat,
        status: sol.status,
    }))
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker threads: {e}")))
}

/// Runs every point of the sweep and aggregates one row per point.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let points = cfg.points();
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.realizations).map(move |r| (p, r)))
        .collect();
    let start = Instant::now();
    let results: Vec<Result<Option<Realization>>> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(p, r)| {
                let s = seed::derive(cfg.master_seed, &[p as u64, r as u64]);
                run_realization(cfg, &points[p], s)
            })
            .collect()
    });
    log::info!(
        "{} realizations over {} points in {:.2}s",
        jobs.len(),
        points.len(),
        start.elapsed().as_secs_f64()
    );

    let mut rows = Vec::with_capacity(points.len());
    for (p, chunk) in results.chunks(cfg.realizations).enumerate() {
        let kept = chunk
            .iter()
            .filter_map(|r| r.as_ref().map(Option::as_ref).transpose())
            .collect::<Result<Vec<&Realization>, &Error>>()
            .map_err(|e| Error::invalid(format!("sweep point {p} failed: {e}")))?;
        let excluded = cfg.realizations - kept.len();
        if excluded as f64 > MAX_EXCLUDED_FRACTION * cfg.realizations as f64 {
            return Err(Error::ExclusionBudget {
                count: excluded,
                total: cfg.realizations,
            });
        }
        if excluded > 0 {
            log::warn!("sweep point {p}: {excluded} realizations excluded after numerical failure");
        }
        rows.push(aggregate(cfg, &points[p], &kept, excluded)?);
    }
    Ok(rows)
}

fn aggregate(cfg: &SweepConfig, point: &SweepPoint, kept: &[&Realization], excluded: usize) -> Result<SweepRow> {
    let k = kept.len();
    let mean = |f: &dyn Fn(&Realization) -> f64| {
        if k == 0 {
            f64::NAN
        } else {
            kept.iter().map(|r| f(r)).sum::<f64>() / k as f64
        }
    };
    let exact = k > 0 && kept.iter().all(|r| r.sigma.is_some());
    let (mean_sigma, frac_gap_le_1) = if exact {
        let sigma = |r: &Realization| r.sigma.map_or(0.0, |s| s as f64);
        let close = kept.iter().filter(|r| r.rho - sigma(r) <= 1.0).count();
        (Some(mean(&sigma)), Some(close as f64 / k as f64))
    } else {
        (None, None)
    };
    Ok(SweepRow {
        n: point.n,
        lambda: point.density.density(point.n)?,
        epsilon: point.epsilon.epsilon(point.n)?,
        beta: cfg.beta,
        mean_sigma,
        mean_rho: mean(&|r| r.rho),
        mean_sigma_hat: mean(&|r| r.sigma_hat as f64),
        frac_gap_le_1,
        realizations: k,
        excluded,
        density_rule: point.density.to_string(),
        epsilon_rule: point.epsilon.to_string(),
    })
}
