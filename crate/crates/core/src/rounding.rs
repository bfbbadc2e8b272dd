//! Randomized sign rounding of the relaxation.
//!
//! Each trial draws `n ~ N(0, Ĥ)`, takes `r = sign(n)` with `sign(0) = -1`,
//! and keeps `r` if it satisfies the budget `rᵀRr ≤ 4`. The homogenizing
//! coordinate must be `+1`; a sample with `r_{N+1} = -1` is negated, which
//! changes neither `rᵀQr` nor `rᵀRr`. In strict mode such samples are
//! rejected instead. The kept sample with the most active nodes wins, earliest
//! trial first on ties.
//!
//! Trial `t` draws its normals from stream `t` of a ChaCha8 generator keyed by
//! the master seed, so trials are independent of evaluation order.
//!
//! The selection criterion is the activation count `¼ rᵀQr`. Maximizing
//! `‖r‖₂²` literally would not discriminate, since it equals `N+1` for every
//! sign vector.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::network::FEASIBILITY_TOL;
use crate::problem::{activation_count, Spin, SpinProblem};
use crate::sdp::SdrSolution;

/// Draws sign vectors of correlated Gaussians with covariance `Ĥ`.
#[derive(Debug, Clone)]
pub struct GaussianSignSampler {
    /// `V·diag(√max(λ, 0))`, so `factor·factorᵀ` is the PSD part of `Ĥ`.
    factor: DMatrix<f64>,
}

impl GaussianSignSampler {
    pub fn new(h_hat: &DMatrix<f64>) -> Result<Self> {
        if h_hat.nrows() != h_hat.ncols() || h_hat.nrows() == 0 {
            return Err(Error::invalid("covariance must be a non-empty square matrix"));
        }
        let (values, mut factor) = sym_eigen(h_hat)?;
        for (c, &l) in values.iter().enumerate() {
            factor.column_mut(c).scale_mut(l.max(0.0).sqrt());
        }
        Ok(GaussianSignSampler { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// One Gaussian draw `n` with covariance `Ĥ`.
    pub fn gaussian(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        &self.factor * z
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<Spin> {
        self.gaussian(rng)
            .iter()
            .map(|&v| if v > 0.0 { 1 } else { -1 })
            .collect()
    }
}

/// One sign vector `sign(n)`, `n ~ N(0, Ĥ)`, from a generator seeded with `seed`.
pub fn sample_signs(h_hat: &DMatrix<f64>, seed: u64) -> Result<Vec<Spin>> {
    let sampler = GaussianSignSampler::new(h_hat)?;
    Ok(sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}

pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingOptions {
    /// Number of samples `K`; must exceed `N`.
    pub trials: usize,
    pub seed: u64,
    /// Reject samples whose homogenizing coordinate is `-1` instead of negating them.
    pub strict: bool,
}

impl RoundingOptions {
    /// `max(1000, 10·N)` trials.
    pub fn default_trials(n: usize) -> usize {
        1000.max(10 * n)
    }

    pub fn new(n: usize, seed: u64) -> Self {
        RoundingOptions {
            trials: Self::default_trials(n),
            seed,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingResult {
    /// Lifted spin vector `[v; 1]` of the best kept sample, or the all-off
    /// vector when no sample was feasible.
    pub best_spin: Vec<Spin>,
    pub sigma_hat: usize,
    /// Samples that passed the budget check.
    pub accepted: usize,
    pub trials: usize,
    /// Trial that produced `best_spin`; `None` for the all-off fallback.
    pub best_trial: Option<usize>,
}

impl RoundingResult {
    /// Binary activation vector of the winning sample.
    pub fn best_x(&self) -> Vec<u8> {
        let (_, head) = self.best_spin.split_last().expect("lifted vector is non-empty");
        head.iter().map(|&s| u8::from(s == 1)).collect()
    }
}

pub fn round(sp: &SpinProblem, sol: &SdrSolution, opts: &RoundingOptions) -> Result<RoundingResult> {
    let n = sp.n();
    if opts.trials <= n {
        return Err(Error::invalid(format!(
            "rounding needs more than N = {n} trials, got {}",
            opts.trials
        )));
    }
    if sol.h_hat.nrows() != sp.dim() {
        return Err(Error::invalid("relaxation solution does not match the problem size"));
    }
    let sampler = GaussianSignSampler::new(&sol.h_hat)?;

    let mut best_spin: Vec<Spin> = vec![-1; n + 1];
    best_spin[n] = 1;
    let mut best = None::<(usize, usize)>;
    let mut accepted = 0;

    for t in 0..opts.trials {
        let mut spin = sampler.sample(&mut trial_rng(opts.seed, t as u64));
        if spin[n] == -1 {
            if opts.strict {
                continue;
            }
            spin.iter_mut().for_each(|s| *s = -*s);
        }
        if sp.constraint_value(&spin)? > 4.0 + FEASIBILITY_TOL {
            continue;
        }
        accepted += 1;
        let count = activation_count(&spin)?;
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, t));
            best_spin = spin;
        }
    }

    Ok(RoundingResult {
        sigma_hat: best.map_or(0, |(c, _)| c),
        best_spin,
        accepted,
        trials: opts.trials,
        best_trial: best.map(|(_, t)| t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{PackingInstance, PathLossModel, Point};
    use crate::problem::{lift, spin_feasible};
    use crate::sdp::{solve_sdr, SolverConfig};

    #[test]
    fn rank_one_all_ones_is_perfectly_correlated() {
        let h = DMatrix::from_element(4, 4, 1.0);
        for seed in 0..50 {
            let r = sample_signs(&h, seed).unwrap();
            assert!(r.iter().all(|&s| s == r[0]));
        }
    }

    #[test]
    fn identity_gives_fair_independent_signs() {
        // Chi-square over the 8 sign patterns of 3 independent coordinates.
        let sampler = GaussianSignSampler::new(&DMatrix::identity(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples = 10_000;
        let mut counts = [0usize; 8];
        for _ in 0..samples {
            let r = sampler.sample(&mut rng);
            let idx = r
                .iter()
                .enumerate()
                .map(|(i, &s)| usize::from(s == 1) << i)
                .sum::<usize>();
            counts[idx] += 1;
        }
        let expected = samples as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 7 degrees of freedom, p = 0.001 critical value.
        assert!(chi2 < 24.32, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn zero_maps_to_minus_one() {
        let h = DMatrix::zeros(3, 3);
        assert_eq!(sample_signs(&h, 1).unwrap(), vec![-1, -1, -1]);
    }

    #[test]
    fn single_node_always_on() {
        let inst =
            PackingInstance::from_positions(&[Point::new(0.1, 0.2)], PathLossModel::new(3.0).unwrap(), 1.0).unwrap();
        let sp = lift(&inst).unwrap();
        let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        let res = round(
            &sp,
            &sol,
            &RoundingOptions {
                trials: 20,
                seed: 3,
                strict: false,
            },
        )
        .unwrap();
        assert_eq!(res.sigma_hat, 1);
        assert_eq!(res.accepted, 20);
        assert_eq!(res.best_x(), vec![1]);
    }

    #[test]
    fn trials_must_exceed_n() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        let inst = PackingInstance::from_positions(&pts, PathLossModel::new(3.0).unwrap(), 1.0).unwrap();
        let sp = lift(&inst).unwrap();
        let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        let opts = RoundingOptions {
            trials: 2,
            seed: 0,
            strict: false,
        };
        assert!(matches!(round(&sp, &sol, &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fallback_is_all_off_and_feasible() {
        // Covariance concentrated on "all on", which breaks a tiny budget.
        let pts = [Point::new(0.0, 0.0), Point::new(0.5, 0.0), Point::new(1.0, 0.0)];
        let inst = PackingInstance::from_positions(&pts, PathLossModel::new(3.0).unwrap(), 1e-3).unwrap();
        let sp = lift(&inst).unwrap();
        let mut sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        sol.h_hat = DMatrix::from_element(4, 4, 1.0);
        let res = round(
            &sp,
            &sol,
            &RoundingOptions {
                trials: 10,
                seed: 0,
                strict: false,
            },
        )
        .unwrap();
        assert_eq!(res.accepted, 0);
        assert_eq!(res.best_trial, None);
        assert_eq!(res.sigma_hat, 0);
        assert_eq!(res.best_spin, vec![-1, -1, -1, 1]);
        assert!(spin_feasible(&sp, &res.best_spin).unwrap());
    }

    #[test]
    fn strict_mode_accepts_fewer() {
        let pts = [Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 3.0)];
        let inst = PackingInstance::from_positions(&pts, PathLossModel::new(3.0).unwrap(), 10.0).unwrap();
        let sp = lift(&inst).unwrap();
        let mut sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        // R is tiny here, so every sample is feasible; strict mode then keeps about half.
        sol.h_hat = DMatrix::identity(4, 4);
        let loose = round(
            &sp,
            &sol,
            &RoundingOptions {
                trials: 400,
                seed: 5,
                strict: false,
            },
        )
        .unwrap();
        let strict = round(
            &sp,
            &sol,
            &RoundingOptions {
                trials: 400,
                seed: 5,
                strict: true,
            },
        )
        .unwrap();
        assert_eq!(loose.accepted, 400);
        assert!(strict.accepted > 150 && strict.accepted < 250, "{}", strict.accepted);
        assert!(strict.sigma_hat <= loose.sigma_hat);
    }

    #[test]
    fn reproducible() {
        let pts = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.2),
            Point::new(1.5, 1.5),
        ];
        let inst = PackingInstance::from_positions(&pts, PathLossModel::new(3.0).unwrap(), 2.0).unwrap();
        let sp = lift(&inst).unwrap();
        let sol = solve_sdr(&sp, &SolverConfig::default()).unwrap();
        let opts = RoundingOptions::new(4, 11);
        assert_eq!(round(&sp, &sol, &opts).unwrap(), round(&sp, &sol, &opts).unwrap());
    }
}
