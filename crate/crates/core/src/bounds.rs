//! Diagnostics for the sandwich `σ ≤ ρ ≤ (π/2)·σ/(1 − p)`.
//!
//! The left inequality is checked directly. For the right one, `p` is
//! reported two ways: as the indicator of the deterministic event
//! `R − Λ ⪰ 0` with `Λ` the eigenvalues of `RĤ`, and as the square root of the
//! empirical frequency of `rᵀRr > 4` over sign samples `r = sign(n)`,
//! `n ~ N(0, Ĥ)`. Neither is treated as the definitive `p`, and the right
//! inequality is reported without being enforced.
//!
//! The arcsin identity `E[r_i r_j] = (2/π)·arcsin Ĥ_ij` gives
//! `E[rᵀQr] = (2/π)·Tr(Q·arcsin Ĥ)`; [`expected_objective`] evaluates the
//! closed form and [`monte_carlo_objective`] the sample mean.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, spectral_map, sym_eigen, symmetric_eigenvalues, trace_product};
use crate::network::{PackingInstance, FEASIBILITY_TOL};
use crate::problem::{lift, Spin, SpinProblem};
use crate::rounding::{trial_rng, GaussianSignSampler};
use crate::sdp::SdrSolution;

/// Entries may exceed `±1` by this much before [`arcsin_matrix`] rejects them.
pub const ARCSIN_CLAMP_TOL: f64 = 1e-9;

/// Tolerance of the PSD test of `R − Λ`.
pub const INDICATOR_TOL: f64 = 1e-8;

/// Slack allowed on both sides of the sandwich.
pub const SANDWICH_TOL: f64 = 1e-6;

/// Fewest sign samples accepted for the empirical violation frequency.
pub const MIN_SAMPLES: usize = 10_000;

/// Elementwise `arcsin`, clamping entries within [`ARCSIN_CLAMP_TOL`] of `±1`.
pub fn arcsin_matrix(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(v) = a.iter().find(|v| !(v.abs() <= 1.0 + ARCSIN_CLAMP_TOL)) {
        return Err(Error::invalid(format!("entry {v} is outside the arcsin domain")));
    }
    Ok(a.map(|v| v.clamp(-1.0, 1.0).asin()))
}

/// `(2/π)·Tr(Q·arcsin Ĥ)`, the expectation of `rᵀQr` under sign rounding.
pub fn expected_objective(sp: &SpinProblem, h_hat: &DMatrix<f64>) -> Result<f64> {
    check_dim(sp, h_hat)?;
    Ok(trace_product(sp.q_matrix(), &arcsin_matrix(h_hat)?) / FRAC_PI_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Sample mean and standard error of `rᵀQr` over `samples` sign vectors.
/// Sample `t` uses stream `t` of the generator keyed by `seed`.
pub fn monte_carlo_objective(
    sp: &SpinProblem,
    h_hat: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_dim(sp, h_hat)?;
    if samples < 2 {
        return Err(Error::invalid("need at least two samples for a standard error"));
    }
    let sampler = GaussianSignSampler::new(h_hat)?;
    let n = sp.n() as i64;
    // For the block Q, rᵀQr = 2N + 2·r_{N+1}·Σ_{i≤N} r_i: an integer, so the
    // parallel sums below are exact and order-independent.
    let (sum, sum_sq) = (0..samples)
        .into_par_iter()
        .map(|t| {
            let r = sampler.sample(&mut trial_rng(seed, t as u64));
            let (&last, head) = r.split_last().expect("non-empty sample");
            let s: i64 = head.iter().map(|&v| i64::from(v)).sum();
            let v = 2 * n + 2 * i64::from(last) * s;
            (i128::from(v), i128::from(v) * i128::from(v))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let k = samples as f64;
    let mean = sum as f64 / k;
    let var = ((sum_sq as f64) - k * mean * mean) / (k - 1.0);
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var.max(0.0) / k).sqrt(),
        samples,
    })
}

/// Eigenvalues of `RĤ`, ascending.
///
/// With `Ĥ = T·Y·Tᵀ` for the moment matrix `Y = [[X, x], [xᵀ, 1]]`, the
/// product `RĤ` is similar to `TᵀRT·Y = (4/ε)·[[F, 0], [0, 0]]·Y`, whose
/// spectrum is that of the symmetric `(4/ε)·D·X·Dᵀ` plus one zero. This avoids
/// forming `R^{1/2}`, whose entries span many orders of magnitude when nodes
/// are close together.
pub fn rh_eigenvalues(inst: &PackingInstance, sol: &SdrSolution) -> Result<Vec<f64>> {
    let n = inst.len();
    if sol.moment.nrows() != n + 1 {
        return Err(Error::invalid("relaxation solution does not match the instance size"));
    }
    let d = inst.dist_matrix();
    let x = sol.moment.view((0, 0), (n, n)).into_owned();
    let mut m = d * x * d.transpose();
    crate::linalg::symmetrize_in_place(&mut m);
    let scale = 4.0 / inst.epsilon();
    let mut eigs: Vec<f64> = symmetric_eigenvalues(&m)?.iter().map(|l| l * scale).collect();
    eigs.push(0.0);
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// Eigenvalues of `RH`, ascending, from the symmetric `R^{1/2}·H·R^{1/2}`.
pub fn rh_eigenvalues_sqrt(r: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<Vec<f64>> {
    if r.shape() != h.shape() || r.nrows() != r.ncols() {
        return Err(Error::invalid("R and H must be square matrices of equal size"));
    }
    let (values, vectors) = sym_eigen(r)?;
    let root = spectral_map(&values, &vectors, |l| l.max(0.0).sqrt());
    let mut m = &root * h * &root;
    crate::linalg::symmetrize_in_place(&mut m);
    Ok(symmetric_eigenvalues(&m)?.iter().copied().collect())
}

/// Whether `R − diag(eigs) ⪰ 0` up to [`INDICATOR_TOL`]; `eigs` in the order given.
pub fn indicator_psd(r: &DMatrix<f64>, eigs: &[f64]) -> Result<bool> {
    if eigs.len() != r.nrows() {
        return Err(Error::invalid("one eigenvalue per row of R is required"));
    }
    let mut m = r.clone();
    for (i, &l) in eigs.iter().enumerate() {
        m[(i, i)] -= l;
    }
    Ok(min_eigenvalue(&m)? >= -INDICATOR_TOL)
}

/// Fraction of sign samples with `rᵀRr > 4`, sample `t` drawn from stream `t`.
pub fn violation_frequency(sp: &SpinProblem, h_hat: &DMatrix<f64>, samples: usize, seed: u64) -> Result<f64> {
    check_dim(sp, h_hat)?;
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let sampler = GaussianSignSampler::new(h_hat)?;
    let violations = (0..samples)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let r: Vec<Spin> = sampler.sample(&mut trial_rng(seed, t as u64));
            Ok(usize::from(sp.constraint_value(&r)? > 4.0 + FEASIBILITY_TOL))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(violations as f64 / samples as f64)
}

/// `π / (2(1 − p))`, infinite at `p = 1`.
pub fn theta(p: f64) -> f64 {
    if p >= 1.0 {
        f64::INFINITY
    } else {
        FRAC_PI_2 / (1.0 - p)
    }
}

/// The packing value the report compares `ρ` against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Packing {
    /// Optimum from exhaustive search.
    Exact(usize),
    /// Best rounded activation count, a lower bound on the optimum.
    Rounded(usize),
}

impl Packing {
    pub fn value(self) -> usize {
        match self {
            Packing::Exact(v) | Packing::Rounded(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Packing::Exact(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            samples: MIN_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rho: f64,
    pub sigma_or_hat: usize,
    pub sigma_is_exact: bool,
    /// `Tr(RĤ)`.
    pub trace_rh: f64,
    /// Eigenvalues of `RĤ`, ascending.
    pub lambda_eigs: Vec<f64>,
    /// 1 if `R − Λ ⪰ 0`, with `Λ` the ascending eigenvalues on the diagonal.
    pub p_indicator: u8,
    pub p_emp: f64,
    pub theta_emp: f64,
    pub sandwich_ok: bool,
}

impl BoundReport {
    pub const CSV_HEADER: [&'static str; 9] = [
        "rho",
        "sigma_or_hat",
        "sigma_is_exact",
        "trace_rh",
        "p_indicator",
        "p_emp",
        "theta_emp",
        "sandwich_ok",
        "lambda_eigs",
    ];

    /// Fields in [`Self::CSV_HEADER`] order; eigenvalues joined with `;`.
    pub fn csv_record(&self) -> Vec<String> {
        let eigs: Vec<String> = self.lambda_eigs.iter().map(|l| l.to_string()).collect();
        vec![
            self.rho.to_string(),
            self.sigma_or_hat.to_string(),
            self.sigma_is_exact.to_string(),
            self.trace_rh.to_string(),
            self.p_indicator.to_string(),
            self.p_emp.to_string(),
            self.theta_emp.to_string(),
            self.sandwich_ok.to_string(),
            eigs.join(";"),
        ]
    }
}

/// Fills a [`BoundReport`] for a solved instance.
pub fn theorem1_report(
    inst: &PackingInstance,
    sol: &SdrSolution,
    packing: Packing,
    opts: &ReportOptions,
) -> Result<BoundReport> {
    if opts.samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "the violation frequency needs at least {MIN_SAMPLES} samples, got {}",
            opts.samples
        )));
    }
    let sp = lift(inst)?;
    let lambda_eigs = rh_eigenvalues(inst, sol)?;
    let p_indicator = u8::from(indicator_psd(sp.r_matrix(), &lambda_eigs)?);
    let p_emp = violation_frequency(&sp, &sol.h_hat, opts.samples, opts.seed)?.sqrt();
    let theta_emp = theta(p_emp);
    let sigma = packing.value() as f64;
    let left = sigma <= sol.rho + SANDWICH_TOL;
    let right = p_emp >= 1.0 || sol.rho <= theta_emp * sigma + SANDWICH_TOL;
    Ok(BoundReport {
        rho: sol.rho,
        sigma_or_hat: packing.value(),
        sigma_is_exact: packing.is_exact(),
        trace_rh: sol.budget,
        lambda_eigs,
        p_indicator,
        p_emp,
        theta_emp,
        sandwich_ok: left && right,
    })
}

fn check_dim(sp: &SpinProblem, h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() != sp.dim() || h.ncols() != sp.dim() {
        return Err(Error::invalid(format!(
            "matrix is {}×{}, expected {}×{}",
            h.nrows(),
            h.ncols(),
            sp.dim(),
            sp.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{solve_exact, DEFAULT_LIMIT};
    use crate::network::{build_instance, generate_uniform, PathLossModel, Point};
    use crate::sdp::{solve_sdr, SolverConfig};
    use std::f64::consts::PI;

    fn random_instance(n: usize, eps: f64, seed: u64) -> PackingInstance {
        let side = (n as f64).sqrt();
        build_instance(
            &generate_uniform(1.0, side, seed).unwrap(),
            PathLossModel::new(3.0).unwrap(),
            eps,
        )
        .unwrap()
    }

    #[test]
    fn arcsin_examples() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((arcsin_matrix(&eye).unwrap() - &eye * FRAC_PI_2).norm() < 1e-15);
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!((arcsin_matrix(&ones).unwrap() - &ones * FRAC_PI_2).norm() < 1e-15);
        let edge = DMatrix::from_element(1, 1, 1.0 + 5e-10);
        assert_eq!(arcsin_matrix(&edge).unwrap()[(0, 0)], FRAC_PI_2);
        assert!(arcsin_matrix(&DMatrix::from_element(1, 1, 1.001)).is_err());
        assert!(arcsin_matrix(&DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn identity_covariance_expectation_is_trace_of_q() {
        // Independent signs: E[r_i r_j] = δ_ij, so E[rᵀQr] = Tr(Q) = N + N.
        let inst = random_instance(6, 10.0, 1);
        let sp = lift(&inst).unwrap();
        let eye = DMatrix::identity(7, 7);
        assert!((expected_objective(&sp, &eye).unwrap() - 12.0).abs() < 1e-12);
        let mc = monte_carlo_objective(&sp, &eye, 100_000, 3).unwrap();
        assert!((mc.mean - 12.0).abs() < 3.0 * mc.std_error, "{mc:?}");
    }

    #[test]
    fn rank_one_expectation_is_exact() {
        let inst = random_instance(5, 10.0, 2);
        let sp = lift(&inst).unwrap();
        let u = [1.0, -1.0, 1.0, 1.0, -1.0, 1.0];
        let h = DMatrix::from_fn(6, 6, |i, j| u[i] * u[j]);
        let spins: Vec<i8> = u.iter().map(|&v| v as i8).collect();
        let exact = 4.0 * sp.objective(&spins).unwrap();
        assert!((expected_objective(&sp, &h).unwrap() - exact).abs() < 1e-12);
        let mc = monte_carlo_objective(&sp, &h, 1000, 1).unwrap();
        assert_eq!(mc.mean, exact);
        assert_eq!(mc.std_error, 0.0);
    }

    #[test]
    fn solved_instance_matches_monte_carlo() {
        let inst = random_instance(10, 10.0, 7);
        let sp = lift(&inst).unwrap();
        let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        let closed = expected_objective(&sp, &sol.h_hat).unwrap();
        let mc = monte_carlo_objective(&sp, &sol.h_hat, 100_000, 9).unwrap();
        assert!((mc.mean - closed).abs() <= 3.0 * mc.std_error, "{closed} vs {mc:?}");
        let q = sp.q_matrix();
        assert!(trace_product(q, &sol.h_hat) <= trace_product(q, &arcsin_matrix(&sol.h_hat).unwrap()) + 1e-8);
    }

    #[test]
    fn pair_correlations_follow_arcsin_law() {
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, -0.3, 0.6, 1.0, 0.1, -0.3, 0.1, 1.0]);
        let sampler = GaussianSignSampler::new(&h).unwrap();
        let k = 100_000;
        let mut sums = [0i64; 3];
        for t in 0..k {
            let r = sampler.sample(&mut trial_rng(21, t));
            sums[0] += i64::from(r[0] * r[1]);
            sums[1] += i64::from(r[0] * r[2]);
            sums[2] += i64::from(r[1] * r[2]);
        }
        for (s, rho) in sums.iter().zip([0.6f64, -0.3, 0.1]) {
            let expected = 2.0 / PI * rho.asin();
            let mean = *s as f64 / k as f64;
            let se = ((1.0 - expected * expected) / k as f64).sqrt();
            assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected}");
        }
    }

    #[test]
    fn eigenvalue_routes_agree() {
        for seed in 0..5 {
            let inst = random_instance(8, 10.0, seed);
            let sp = lift(&inst).unwrap();
            let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
            let stable = rh_eigenvalues(&inst, &sol).unwrap();
            let direct = rh_eigenvalues_sqrt(sp.r_matrix(), &sol.h_hat).unwrap();
            let sum: f64 = stable.iter().sum();
            assert!((sum - sol.budget).abs() <= 1e-8 * sol.budget.max(1e-300));
            assert!(stable[0] >= -1e-8);
            // Both orders ascending; the direct route loses absolute accuracy
            // of order ‖R‖·1e-16.
            let scale = 1e-9 * (1.0 + sp.r_matrix().norm());
            for (a, b) in stable.iter().zip(&direct) {
                assert!((a - b).abs() <= scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn indicator_examples() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(indicator_psd(&r, &[1.0, 1.0]).unwrap());
        assert!(!indicator_psd(&r, &[1.0, 1.5]).unwrap());
        assert!(indicator_psd(&r, &[1.0]).is_err());
    }

    #[test]
    fn theta_shape() {
        assert_eq!(theta(0.0), FRAC_PI_2);
        assert!(theta(0.3) > FRAC_PI_2);
        assert!(theta(1.0).is_infinite());
    }

    #[test]
    fn single_node_report() {
        let inst =
            PackingInstance::from_positions(&[Point::new(0.2, 0.7)], PathLossModel::new(3.0).unwrap(), 1.0).unwrap();
        let sp = lift(&inst).unwrap();
        let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        let rep = theorem1_report(&inst, &sol, Packing::Exact(1), &ReportOptions::default()).unwrap();
        assert_eq!(rep.p_emp, 0.0);
        assert_eq!(rep.theta_emp, FRAC_PI_2);
        assert!(rep.sandwich_ok);
        assert_eq!(rep.lambda_eigs.len(), 2);
        assert_eq!(rep.csv_record().len(), BoundReport::CSV_HEADER.len());
    }

    #[test]
    fn reports_on_small_instances() {
        for seed in 0..10 {
            let inst = random_instance(7, 1.0, 100 + seed);
            let sp = lift(&inst).unwrap();
            let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
            let sigma = solve_exact(&inst, DEFAULT_LIMIT).unwrap().sigma;
            let rep = theorem1_report(
                &inst,
                &sol,
                Packing::Exact(sigma),
                &ReportOptions {
                    samples: MIN_SAMPLES,
                    seed,
                },
            )
            .unwrap();
            assert!(rep.sigma_or_hat as f64 <= rep.rho + SANDWICH_TOL);
            if rep.p_emp > 0.0 {
                assert!(rep.theta_emp > FRAC_PI_2);
            }
            let again = theorem1_report(
                &inst,
                &sol,
                Packing::Exact(sigma),
                &ReportOptions {
                    samples: MIN_SAMPLES,
                    seed,
                },
            )
            .unwrap();
            assert_eq!(rep, again);
        }
    }

    #[test]
    fn rejects_too_few_samples() {
        let inst = random_instance(3, 1.0, 0);
        let sol = solve_sdr(&lift(&inst).unwrap(), &SolverConfig::default()).unwrap();
        let opts = ReportOptions { samples: 10, seed: 0 };
        assert!(theorem1_report(&inst, &sol, Packing::Rounded(0), &opts).is_err());
    }
}
