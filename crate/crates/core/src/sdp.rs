//! Semidefinite relaxation of the spin problem:
//!
//! ```text
//! ρ = max Tr(QH)/4   s.t.  Tr(RH) ≤ 4,  H ⪰ 0,  H_ii = 1
//! ```
//!
//! The solver works on the moment matrix `Y = [[X, x], [xᵀ, 1]]` of the
//! activation vector, related to `H` by the congruence `H = T·Y·Tᵀ` with
//! `T = [[2I, -1], [0, 1]]`. In these coordinates the relaxation reads
//!
//! ```text
//! max Σ x_i   s.t.  X_ii = x_i,  Y_{N+1,N+1} = 1,  ⟨F/ε, X⟩ + s = 1,  Y ⪰ 0,  s ≥ 0.
//! ```
//!
//! When two nodes nearly coincide, `F` has entries many orders of magnitude
//! above the rest and the optimum keeps their activations at values like
//! `1e-18`. Those are representable here; in the spin coordinates they would
//! sit below the rounding unit of `H_ij ≈ -1`.
//!
//! The method is a primal-dual interior-point iteration (HKM direction,
//! Mehrotra predictor-corrector). The returned point is polished to be exactly
//! feasible: a diagonal congruence restores `H_ii = 1`, and if the budget is
//! exceeded the point is blended toward the all-off vertex, which uses none of it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, spectral_map, sym_eigen, symmetrize_in_place, trace_product};
use crate::problem::SpinProblem;

/// Diagonal, PSD and budget tolerance guaranteed on returned solutions.
pub const SOLUTION_TOL: f64 = 1e-6;

/// Fraction of the distance to the cone boundary taken by each step.
const STEP_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Bound on the relative primal residual, dual residual and duality gap.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("solver needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Iteration budget exhausted with residuals above `100·tol`.
    MaxIterations,
    /// The iteration lost positive definiteness before converging. The last
    /// interior iterate is polished and returned.
    InfeasibleNumerics,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::InfeasibleNumerics => "infeasible-numerics",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdrSolution {
    /// Polished matrix `Ĥ`: symmetric PSD, unit diagonal, `Tr(RĤ) ≤ 4`.
    /// Every status carries a feasible point, so `rho` never overstates what
    /// the relaxation attains at `Ĥ`.
    pub h_hat: DMatrix<f64>,
    /// `Y` with `Ĥ = T·Y·Tᵀ`; entries keep full relative precision.
    pub moment: DMatrix<f64>,
    /// `Tr(QĤ)/4 = Σ x_i`.
    pub rho: f64,
    /// `Tr(RĤ)`, evaluated as `(4/ε)·⟨F, X⟩`.
    pub budget: f64,
    /// Certified upper bound on the relaxation optimum, from the final dual
    /// iterate shifted onto dual feasibility.
    pub dual_bound: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Primal objective `Σ x_i` at the unpolished iterate.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// Barrier parameter `(⟨Y, Z⟩ + s·z_s) / (N+2)`.
    pub mu: f64,
}

/// Nearest PSD matrix in Frobenius norm: eigenvalues clipped at zero.
pub fn project_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::invalid("PSD projection needs a square matrix"));
    }
    let mut sym = a.clone();
    symmetrize_in_place(&mut sym);
    let (values, vectors) = sym_eigen(&sym)?;
    Ok(spectral_map(&values, &vectors, |l| l.max(0.0)))
}

/// `T·Y·Tᵀ`: spin-coordinate matrix of a moment matrix.
pub fn spin_matrix(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows() - 1;
    DMatrix::from_fn(n + 1, n + 1, |i, j| match (i == n, j == n) {
        (false, false) => 4.0 * y[(i, j)] - 2.0 * y[(i, n)] - 2.0 * y[(j, n)] + y[(n, n)],
        (false, true) => 2.0 * y[(i, n)] - y[(n, n)],
        (true, false) => 2.0 * y[(j, n)] - y[(n, n)],
        (true, true) => y[(n, n)],
    })
}

pub fn solve_sdr(sp: &SpinProblem, cfg: &SolverConfig) -> Result<SdrSolution> {
    solve_sdr_traced(sp, cfg, |_| {})
}

/// Primal-dual point of the cone `S₊ⁿ × R₊`.
#[derive(Clone)]
struct Iterate {
    x: DMatrix<f64>,
    xs: f64,
    y: DVector<f64>,
    z: DMatrix<f64>,
    zs: f64,
}

struct Direction {
    dx: DMatrix<f64>,
    dxs: f64,
    dy: DVector<f64>,
    dz: DMatrix<f64>,
    dzs: f64,
}

/// One entry `α·e_a e_bᵀ` of a sparse constraint matrix.
type Term = (usize, usize, f64);

/// Standard form `min ⟨C, Ỹ⟩ s.t. A(Ỹ, s) = b` in the rescaled variable
/// `Ỹ = D⁻¹·Y·D⁻¹`, `D = diag(d, 1)` with `d_i = min(1, (F_ii/ε)^{-1/2})`.
/// A node whose solo activation already costs more than the budget can only
/// reach `x_i ≲ ε/F_ii`; after rescaling its entries are of order one.
///
/// Rows `0..n` are sparse (the diagonal links `d_i·X̃_ii = x̃_i` and
/// `Ỹ_nn = 1`); row `n` is the budget `⟨DGD, X̃⟩ + s = 1`, the only one with a
/// slack.
struct Data {
    n: usize,
    d: Vec<f64>,
    c: DMatrix<f64>,
    rows: Vec<Vec<Term>>,
    budget: DMatrix<f64>,
    b: DVector<f64>,
}

impl Data {
    fn new(g: &DMatrix<f64>) -> Self {
        let m = g.nrows();
        let n = m + 1;
        let mut d: Vec<f64> = (0..m)
            .map(|i| if g[(i, i)] > 1.0 { g[(i, i)].sqrt().recip() } else { 1.0 })
            .collect();
        d.push(1.0);
        let mut c = DMatrix::zeros(n, n);
        let mut rows = Vec::with_capacity(n);
        for i in 0..m {
            c[(i, m)] = -0.5 * d[i];
            c[(m, i)] = -0.5 * d[i];
            rows.push(vec![(i, i, d[i]), (i, m, -0.5), (m, i, -0.5)]);
        }
        rows.push(vec![(m, m, 1.0)]);
        let mut budget = DMatrix::zeros(n, n);
        for j in 0..m {
            for i in 0..m {
                budget[(i, j)] = d[i] * g[(i, j)] * d[j];
            }
        }
        symmetrize_in_place(&mut budget);
        let mut b = DVector::zeros(n + 1);
        b[m] = 1.0;
        b[n] = 1.0;
        Data {
            n,
            d,
            c,
            rows,
            budget,
            b,
        }
    }

    /// `D·Ỹ·D`.
    fn unscale(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.d[i] * y[(i, j)] * self.d[j])
    }

    fn apply(&self, y: &DMatrix<f64>, s: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.n + 1);
        for (k, row) in self.rows.iter().enumerate() {
            out[k] = row.iter().map(|&(a, b, w)| w * y[(a, b)]).sum();
        }
        out[self.n] = trace_product(&self.budget, y) + s;
        out
    }

    /// Matrix part of `A*(v)`; the slack part is `v[n]`.
    fn adjoint(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut out = &self.budget * v[self.n];
        for (k, row) in self.rows.iter().enumerate() {
            for &(a, b, w) in row {
                out[(a, b)] += w * v[k];
            }
        }
        out
    }

    /// `b − A(Y, s)` and `C − A*(v) − Z` (matrix, slack).
    fn residuals(&self, it: &Iterate) -> (DVector<f64>, DMatrix<f64>, f64) {
        let rp = &self.b - self.apply(&it.x, it.xs);
        let rd = &self.c - self.adjoint(&it.y) - &it.z;
        let rds = -it.y[self.n] - it.zs;
        (rp, rd, rds)
    }
}

fn sym(mut a: DMatrix<f64>) -> DMatrix<f64> {
    symmetrize_in_place(&mut a);
    a
}

fn cholesky(a: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone()).ok_or_else(|| Error::numerics(format!("{what} lost positive definiteness")))
}

/// Largest `α` with `X + α·ΔX ⪰ 0` (infinite if `ΔX ⪰ 0`).
fn max_step(chol: &Cholesky<f64, Dyn>, dx: &DMatrix<f64>) -> Result<f64> {
    let l = chol.l();
    let mut t = dx.clone();
    l.solve_lower_triangular_mut(&mut t);
    let mut t = t.transpose();
    l.solve_lower_triangular_mut(&mut t);
    symmetrize_in_place(&mut t);
    let lambda = min_eigenvalue(&t)?;
    Ok(if lambda < 0.0 { -1.0 / lambda } else { f64::INFINITY })
}

fn max_step_scalar(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

/// Solver iteration state that is fixed for one Newton system.
struct Newton<'a> {
    data: &'a Data,
    it: &'a Iterate,
    w: DMatrix<f64>,
    schur: Cholesky<f64, Dyn>,
    rp: DVector<f64>,
    rd: DMatrix<f64>,
    rds: f64,
}

impl<'a> Newton<'a> {
    fn new(data: &'a Data, it: &'a Iterate) -> Result<Self> {
        let n = data.n;
        let w = sym(cholesky(&it.z, "dual matrix")?.inverse());
        let x = &it.x;
        // M_kl = Tr(A_k W A_l X); for A_k = Σ α e_a e_bᵀ, A_l = Σ β e_c e_dᵀ
        // each pair of terms contributes αβ·W_bc·X_da.
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for (k, rk) in data.rows.iter().enumerate() {
            for (l, rl) in data.rows.iter().enumerate().skip(k) {
                let mut acc = 0.0;
                for &(a, b, alpha) in rk {
                    for &(c, d, beta) in rl {
                        acc += alpha * beta * w[(b, c)] * x[(d, a)];
                    }
                }
                m[(k, l)] = acc;
                m[(l, k)] = acc;
            }
        }
        let wbx = &w * &data.budget * x;
        for (k, rk) in data.rows.iter().enumerate() {
            let v: f64 = rk.iter().map(|&(a, b, alpha)| alpha * wbx[(b, a)]).sum();
            m[(k, n)] = v;
            m[(n, k)] = v;
        }
        m[(n, n)] = trace_product(&data.budget, &wbx.transpose()) + it.xs / it.zs;
        let schur = cholesky(&m, "Schur complement")?;
        let (rp, rd, rds) = data.residuals(it);
        Ok(Newton {
            data,
            it,
            w,
            schur,
            rp,
            rd,
            rds,
        })
    }

    /// Solves the linearized system whose complementarity rows are
    /// `ΔX = K − W·ΔZ·X` (symmetrized) and `Δxs = ks − (xs/zs)·Δzs`.
    fn direction(&self, k: &DMatrix<f64>, ks: f64) -> Direction {
        let n = self.data.n;
        let it = self.it;
        let ratio = it.xs / it.zs;
        let wrdx = &self.w * &self.rd * &it.x;
        let mut rhs = &self.rp - self.data.apply(k, 0.0) + self.data.apply(&wrdx, 0.0);
        rhs[n] -= ks - ratio * self.rds;
        let dy = self.schur.solve(&rhs);
        let dz = &self.rd - self.data.adjoint(&dy);
        let dzs = self.rds - dy[n];
        let dx = sym(k - &self.w * &dz * &it.x);
        let dxs = ks - ratio * dzs;
        Direction { dx, dxs, dy, dz, dzs }
    }
}

/// Primal and dual step lengths to the cone boundary.
fn step_lengths(it: &Iterate, d: &Direction, xc: &Cholesky<f64, Dyn>, zc: &Cholesky<f64, Dyn>) -> Result<(f64, f64)> {
    let ap = max_step(xc, &d.dx)?.min(max_step_scalar(it.xs, d.dxs));
    let ad = max_step(zc, &d.dz)?.min(max_step_scalar(it.zs, d.dzs));
    Ok((ap, ad))
}

/// One predictor-corrector update.
fn step(data: &Data, it: &Iterate, mu: f64) -> Result<Iterate> {
    let nu = (data.n + 1) as f64;
    let newton = Newton::new(data, it)?;
    let xc = cholesky(&it.x, "primal matrix")?;
    let zc = cholesky(&it.z, "dual matrix")?;

    let pred = newton.direction(&(-&it.x), -it.xs);
    let (ap, ad) = step_lengths(it, &pred, &xc, &zc)?;
    let (ap, ad) = (ap.min(1.0), ad.min(1.0));
    let mu_aff = (trace_product(&(&it.x + &pred.dx * ap), &(&it.z + &pred.dz * ad))
        + (it.xs + ap * pred.dxs) * (it.zs + ad * pred.dzs))
        / nu;
    let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

    let target = sigma * mu;
    let k = &newton.w * target - &it.x - &newton.w * &pred.dz * &pred.dx;
    let ks = (target - pred.dzs * pred.dxs) / it.zs - it.xs;
    let corr = newton.direction(&k, ks);
    let (ap, ad) = step_lengths(it, &corr, &xc, &zc)?;
    let ap = (STEP_FRACTION * ap).min(1.0);
    let ad = (STEP_FRACTION * ad).min(1.0);

    let next = Iterate {
        x: sym(&it.x + &corr.dx * ap),
        xs: it.xs + ap * corr.dxs,
        y: &it.y + &corr.dy * ad,
        z: sym(&it.z + &corr.dz * ad),
        zs: it.zs + ad * corr.dzs,
    };
    cholesky(&next.x, "primal matrix")?;
    cholesky(&next.z, "dual matrix")?;
    if !(next.xs > 0.0 && next.zs > 0.0) {
        return Err(Error::numerics("budget slack left the cone"));
    }
    Ok(next)
}

struct Measures {
    pres: f64,
    dres: f64,
    gap: f64,
    mu: f64,
    objective: f64,
}

fn measure(data: &Data, it: &Iterate) -> Measures {
    let (rp, rd, rds) = data.residuals(it);
    let pobj = trace_product(&data.c, &it.x);
    let dobj = data.b.dot(&it.y);
    Measures {
        pres: rp.norm() / (1.0 + data.b.norm()),
        dres: (rd.norm_squared() + rds * rds).sqrt() / (1.0 + data.c.norm()),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
        mu: (trace_product(&it.x, &it.z) + it.xs * it.zs) / (data.n + 1) as f64,
        objective: -pobj,
    }
}

/// [`solve_sdr`] with a callback invoked once per iteration.
pub fn solve_sdr_traced(
    sp: &SpinProblem,
    cfg: &SolverConfig,
    mut trace: impl FnMut(&IterationTrace),
) -> Result<SdrSolution> {
    cfg.validate()?;
    let g = sp.gram_over_epsilon();
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerics("problem data contains non-finite entries"));
    }
    let data = Data::new(g);
    let n = data.n;
    let m = n - 1;
    if (0..m).any(|i| data.d[i] < 1e-150) {
        return Err(Error::numerics("interference gain too large to rescale"));
    }

    // Independent fair coins: X = (I + 11ᵀ)/4, x = 1/2, i.e. H = I.
    let mut x0 = DMatrix::from_element(n, n, 0.25);
    for i in 0..m {
        x0[(i, i)] = 0.5;
        x0[(i, m)] = 0.5;
        x0[(m, i)] = 0.5;
    }
    x0[(m, m)] = 1.0;
    let eta = 1.0 + data.c.norm();
    let mut it = Iterate {
        x: x0,
        xs: 1.0,
        y: DVector::zeros(n + 1),
        z: DMatrix::identity(n, n) * eta,
        zs: eta,
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = false;
    let mut polished = polish(&data.unscale(&it.x), sp)?;
    let mut meas;
    loop {
        meas = measure(&data, &it);
        if ![meas.pres, meas.dres, meas.gap, meas.mu].iter().all(|v| v.is_finite()) {
            return Err(Error::numerics(format!("non-finite iterate at iteration {iterations}")));
        }
        if iterations > 0 {
            trace(&IterationTrace {
                iteration: iterations,
                objective: meas.objective,
                primal_residual: meas.pres,
                dual_residual: meas.dres,
                gap: meas.gap,
                mu: meas.mu,
            });
        }
        if meas.pres <= cfg.tol && meas.dres <= cfg.tol && meas.gap <= cfg.tol {
            // Near-zero activations of close nodes amplify diagonal residuals
            // through F; keep iterating until polishing costs at most `tol`.
            polished = polish(&data.unscale(&it.x), sp)?;
            if polished.blend <= cfg.tol {
                converged = true;
                break;
            }
        }
        if iterations == cfg.max_iter {
            break;
        }
        match step(&data, &it, meas.mu) {
            Ok(next) => {
                it = next;
                iterations += 1;
            }
            Err(Error::InfeasibleNumerics(msg)) if iterations > 0 => {
                log::debug!("interior-point iteration stopped at {iterations}: {msg}");
                stalled = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if !converged {
        polished = polish(&data.unscale(&it.x), sp)?;
    }

    let within = meas.pres.max(meas.dres).max(meas.gap) <= 100.0 * cfg.tol;
    let status = if converged || within {
        SolveStatus::Optimal
    } else if stalled {
        SolveStatus::InfeasibleNumerics
    } else {
        SolveStatus::MaxIterations
    };
    let dual_bound = certified_bound(&data, &it.y)?;
    let Polished { moment, budget, .. } = polished;
    let mut h_hat = spin_matrix(&moment);
    for i in 0..n {
        h_hat[(i, i)] = 1.0;
    }
    let rho = (0..m).map(|i| moment[(i, m)]).sum();
    Ok(SdrSolution {
        h_hat,
        moment,
        rho,
        budget,
        dual_bound,
        status,
        iterations,
        primal_residual: meas.pres,
        dual_residual: meas.dres,
        gap: meas.gap,
    })
}

/// Dual objective made valid by shifting onto dual feasibility.
///
/// Lowering every unit-diagonal multiplier of the spin form by `δ` adds
/// `δ·D·TᵀT·D` to the dual slack and costs `δ·(N+1)`; lowering the budget
/// multiplier adds `δ·DGD` and costs `δ`. Both together give a pencil that
/// stays well conditioned for rescaled nodes.
fn certified_bound(data: &Data, y: &DVector<f64>) -> Result<f64> {
    let n = data.n;
    let m = n - 1;
    let mut y = y.clone();
    y[n] = y[n].min(0.0);
    let z = sym(&data.c - data.adjoint(&y));
    // D·Tᵀ with T = [[2I, -1], [0, 1]].
    let mut dt = DMatrix::zeros(n, n);
    for i in 0..m {
        dt[(i, i)] = 2.0 * data.d[i];
    }
    for j in 0..m {
        dt[(m, j)] = -1.0;
    }
    dt[(m, m)] = 1.0;
    let pencil = sym(&dt * dt.transpose() + &data.budget);
    let chol = cholesky(&pencil, "certificate pencil")?;
    let l = chol.l();
    let mut t = z;
    l.solve_lower_triangular_mut(&mut t);
    let mut t = t.transpose();
    l.solve_lower_triangular_mut(&mut t);
    let shift = (-min_eigenvalue(&sym(t))?).max(0.0);
    Ok(-data.b.dot(&y) + (n + 1) as f64 * shift)
}

struct Polished {
    moment: DMatrix<f64>,
    budget: f64,
    /// Weight `t` moved onto the all-off vertex.
    blend: f64,
}

/// Maps an interior iterate onto an exactly feasible point of the relaxation.
///
/// The congruence `H ↦ S·H·S` with `S = diag(H_ii^{-1/2})` becomes, on the
/// moment matrix, `x_i ↦ s_i x_i + (1 − s_i)/2` and the matching update of
/// `X`; the terms are formed separately so tiny activations keep their
/// relative precision.
fn polish(y: &DMatrix<f64>, sp: &SpinProblem) -> Result<Polished> {
    let n = y.nrows();
    let m = n - 1;
    let ynn = y[(m, m)];
    if !(ynn > 0.0) {
        return Err(Error::numerics(format!("homogenizing entry collapsed to {ynn}")));
    }
    let y = sym(y / ynn);
    let mut s = vec![1.0; m];
    let mut c = vec![0.0; m];
    for i in 0..m {
        let delta = y[(i, i)] - y[(i, m)];
        let growth = 4.0 * delta;
        if !(growth > -1.0) {
            return Err(Error::numerics(format!("diagonal entry {i} collapsed")));
        }
        let log_s = -0.5 * growth.ln_1p();
        s[i] = log_s.exp();
        c[i] = -log_s.exp_m1();
    }
    let mut out = DMatrix::zeros(n, n);
    for j in 0..m {
        let xj = y[(j, m)];
        for i in 0..m {
            let xi = y[(i, m)];
            out[(i, j)] = s[i] * s[j] * y[(i, j)] + 0.5 * (s[i] * xi * c[j] + c[i] * s[j] * xj) + 0.25 * c[i] * c[j];
        }
        let v = s[j] * xj + 0.5 * c[j];
        out[(j, m)] = v;
        out[(m, j)] = v;
    }
    out[(m, m)] = 1.0;
    symmetrize_in_place(&mut out);

    let mut budget = sp.budget_of_moment(&out);
    let mut blend = 0.0;
    if budget > 4.0 {
        blend = (budget - 4.0) / budget;
        out *= 1.0 - blend;
        out[(m, m)] = 1.0;
        budget = sp.budget_of_moment(&out);
    }
    Ok(Polished {
        moment: out,
        budget,
        blend,
    })
}
