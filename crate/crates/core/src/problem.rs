//! The `{-1,+1}` reformulation of the packing problem.
//!
//! With `v = 2x - 1` and the homogenizing coordinate `u = [v; 1]`, the binary
//! problem becomes
//!
//! ```text
//! maximize  ¼ uᵀQu   subject to  uᵀRu ≤ 4,  u_i² = 1
//! Q = [[I, 1], [1ᵀ, N]]      R = (1/ε)·[[F, F1], [1ᵀF, 1ᵀF1]]
//! ```
//!
//! The unit-modulus constraints are not stored; they become the unit diagonal
//! of the lifted matrix in [`crate::sdp`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::network::{PackingInstance, FEASIBILITY_TOL};

pub type Spin = i8;

#[derive(Debug, Clone)]
pub struct SpinProblem {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    /// `F/ε`. Budget values are evaluated through it, since `R` mixes entries
    /// of wildly different magnitude when nodes are close together.
    gram_over_eps: DMatrix<f64>,
    n: usize,
}

impl SpinProblem {
    /// Node count `N`; the matrices are `(N+1)×(N+1)`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r_matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    fn check_lifted(&self, u: &[Spin]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::invalid(format!(
                "lifted spin vector has length {}, expected {}",
                u.len(),
                self.dim()
            )));
        }
        check_spins(u)
    }

    /// `¼ uᵀQu` evaluated as a dense quadratic form.
    pub fn objective(&self, u: &[Spin]) -> Result<f64> {
        self.check_lifted(u)?;
        Ok(0.25 * quad_form(&self.q, &as_f64(u)))
    }

    pub fn gram_over_epsilon(&self) -> &DMatrix<f64> {
        &self.gram_over_eps
    }

    /// `uᵀRu`, evaluated as `(4/ε)·xᵀFx` for the activation `x` encoded by
    /// `±u`. Every term is non-negative, so there is no cancellation.
    pub fn constraint_value(&self, u: &[Spin]) -> Result<f64> {
        self.check_lifted(u)?;
        let sign = u[self.n];
        let active: Vec<usize> = (0..self.n).filter(|&i| u[i] == sign).collect();
        let mut acc = 0.0;
        for &j in &active {
            for &i in &active {
                acc += self.gram_over_eps[(i, j)];
            }
        }
        Ok(4.0 * acc)
    }

    /// `uᵀRu` as a dense quadratic form in `R`.
    pub fn constraint_value_dense(&self, u: &[Spin]) -> Result<f64> {
        self.check_lifted(u)?;
        Ok(quad_form(&self.r, &as_f64(u)))
    }

    /// `Tr(RH)` for `H = T·Y·Tᵀ` given the moment matrix `Y = [[X, x], [xᵀ, 1]]`:
    /// equals `(4/ε)·⟨F, X⟩`.
    pub fn budget_of_moment(&self, y: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n {
            for i in 0..self.n {
                acc += self.gram_over_eps[(i, j)] * y[(i, j)];
            }
        }
        4.0 * acc
    }
}

/// Builds `Q` and `R` for an instance.
pub fn lift(inst: &PackingInstance) -> Result<SpinProblem> {
    let eps = inst.epsilon();
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!(
            "lifting needs a positive interference budget, got {eps}"
        )));
    }
    let n = inst.len();
    let f = inst.gram();

    let mut q = DMatrix::identity(n + 1, n + 1);
    for i in 0..n {
        q[(i, n)] = 1.0;
        q[(n, i)] = 1.0;
    }
    q[(n, n)] = n as f64;

    let f1: DVector<f64> = f * DVector::from_element(n, 1.0);
    let one_f_one = f1.sum();
    let mut r = DMatrix::zeros(n + 1, n + 1);
    r.view_mut((0, 0), (n, n)).copy_from(f);
    for i in 0..n {
        r[(i, n)] = f1[i];
        r[(n, i)] = f1[i];
    }
    r[(n, n)] = one_f_one;
    r /= eps;
    crate::linalg::symmetrize_in_place(&mut r);

    Ok(SpinProblem {
        q,
        r,
        gram_over_eps: f / eps,
        n,
    })
}

fn check_spins(u: &[Spin]) -> Result<()> {
    match u.iter().position(|&s| s != 1 && s != -1) {
        Some(i) => Err(Error::invalid(format!("spin entry {i} is {}, not ±1", u[i]))),
        None => Ok(()),
    }
}

pub(crate) fn as_f64(u: &[Spin]) -> Vec<f64> {
    u.iter().map(|&s| f64::from(s)).collect()
}

/// `v = 2x - 1`.
pub fn binary_to_spin(x: &[u8]) -> Result<Vec<Spin>> {
    x.iter()
        .enumerate()
        .map(|(i, &b)| match b {
            0 => Ok(-1),
            1 => Ok(1),
            _ => Err(Error::invalid(format!("binary entry {i} is {b}, not 0 or 1"))),
        })
        .collect()
}

/// `x = (v + 1) / 2`.
pub fn spin_to_binary(v: &[Spin]) -> Result<Vec<u8>> {
    check_spins(v)?;
    Ok(v.iter().map(|&s| u8::from(s == 1)).collect())
}

/// `[2x - 1; 1]`.
pub fn lifted_from_binary(x: &[u8]) -> Result<Vec<Spin>> {
    let mut u = binary_to_spin(x)?;
    u.push(1);
    Ok(u)
}

/// Number of active nodes `¼ uᵀQu` for a lifted spin vector with `u_{N+1} = +1`.
///
/// For the block `Q` this reduces to `(2N + 2·Σ_{i≤N} u_i) / 4`, evaluated in
/// integers.
pub fn activation_count(u: &[Spin]) -> Result<usize> {
    let (&last, head) = u
        .split_last()
        .ok_or_else(|| Error::invalid("lifted spin vector is empty"))?;
    check_spins(u)?;
    if last != 1 {
        return Err(Error::invalid("homogenizing coordinate is -1; negate the vector first"));
    }
    let n = head.len() as i64;
    let sum: i64 = head.iter().map(|&s| i64::from(s)).sum();
    Ok(((2 * n + 2 * sum) / 4) as usize)
}

/// `uᵀRu ≤ 4` up to [`FEASIBILITY_TOL`].
pub fn spin_feasible(sp: &SpinProblem, u: &[Spin]) -> Result<bool> {
    Ok(sp.constraint_value(u)? <= 4.0 + FEASIBILITY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_instance, generate_uniform, PathLossModel, Point};
    use crate::seed;
    use rand::Rng;

    fn two_node(eps: f64) -> PackingInstance {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        PackingInstance::from_positions(&pts, PathLossModel::new(3.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn single_node_lift() {
        let pts = [Point::new(0.3, 0.3)];
        let inst = PackingInstance::from_positions(&pts, PathLossModel::new(3.0).unwrap(), 1.0).unwrap();
        let sp = lift(&inst).unwrap();
        assert_eq!(sp.q_matrix().as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(sp.r_matrix().as_slice(), &[0.0; 4]);
    }

    #[test]
    fn two_node_lift() {
        let sp = lift(&two_node(1.0)).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0]) / 64.0;
        assert!((sp.r_matrix() - expected).norm() < 1e-15);
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        assert_eq!(sp.q_matrix(), &q);
    }

    #[test]
    fn lift_rejects_zero_budget() {
        assert!(matches!(lift(&two_node(0.0)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn spin_conversions() {
        assert_eq!(binary_to_spin(&[0, 1, 0]).unwrap(), vec![-1, 1, -1]);
        assert_eq!(binary_to_spin(&[1; 4]).unwrap(), vec![1; 4]);
        assert!(binary_to_spin(&[0, 2]).is_err());
        assert!(spin_to_binary(&[1, 0]).is_err());
        for bits in 0u32..256 {
            let x: Vec<u8> = (0..8).map(|i| ((bits >> i) & 1) as u8).collect();
            assert_eq!(spin_to_binary(&binary_to_spin(&x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn activation_count_extremes() {
        let mut off = vec![-1i8; 5];
        off.push(1);
        assert_eq!(activation_count(&off).unwrap(), 0);
        assert_eq!(activation_count(&[1; 6]).unwrap(), 5);
        assert!(activation_count(&[1, -1]).is_err());
        assert!(activation_count(&[]).is_err());
    }

    #[test]
    fn activation_count_matches_popcount_and_quadratic_form() {
        let inst = build_instance(
            &generate_uniform(1.0, 10f64.sqrt(), 3).unwrap(),
            PathLossModel::new(3.0).unwrap(),
            10.0,
        )
        .unwrap();
        let sp = lift(&inst).unwrap();
        let mut rng = seed::rng(99);
        for _ in 0..200 {
            let x: Vec<u8> = (0..10).map(|_| rng.random_range(0..2)).collect();
            let u = lifted_from_binary(&x).unwrap();
            let pop = x.iter().filter(|&&b| b == 1).count();
            assert_eq!(activation_count(&u).unwrap(), pop);
            assert!((sp.objective(&u).unwrap() - pop as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn feasibility_examples() {
        let sp = lift(&two_node(1.0)).unwrap();
        assert!(spin_feasible(&sp, &[-1, -1, 1]).unwrap());
        assert!(spin_feasible(&sp, &[1, 1, 1]).unwrap());
        assert!((sp.constraint_value(&[1, 1, 1]).unwrap() - 4.0 * 2.0 / 64.0).abs() < 1e-15);
        assert!(spin_feasible(&sp, &[1, 1]).is_err());
    }

    #[test]
    fn global_sign_invariance() {
        let inst = build_instance(
            &generate_uniform(1.0, 3.0, 8).unwrap(),
            PathLossModel::new(3.0).unwrap(),
            5.0,
        )
        .unwrap();
        let sp = lift(&inst).unwrap();
        let mut rng = seed::rng(4);
        for _ in 0..1000 {
            let u: Vec<i8> = (0..sp.dim())
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect();
            let neg: Vec<i8> = u.iter().map(|s| -s).collect();
            assert_eq!(sp.objective(&u).unwrap(), sp.objective(&neg).unwrap());
            assert_eq!(sp.constraint_value(&u).unwrap(), sp.constraint_value(&neg).unwrap());
            let dense = sp.constraint_value_dense(&u).unwrap();
            assert_eq!(dense, sp.constraint_value_dense(&neg).unwrap());
            let stable = sp.constraint_value(&u).unwrap();
            assert!((dense - stable).abs() <= 1e-9 * (1.0 + stable));
        }
    }

    #[test]
    fn spin_feasibility_agrees_with_interference() {
        let inst = build_instance(
            &generate_uniform(0.5, 4.0, 21).unwrap(),
            PathLossModel::new(3.0).unwrap(),
            0.5,
        )
        .unwrap();
        let sp = lift(&inst).unwrap();
        let mut rng = seed::rng(5);
        let mut seen = [0usize; 2];
        for _ in 0..1000 {
            let x: Vec<u8> = (0..inst.len()).map(|_| rng.random_range(0..2)).collect();
            let u = lifted_from_binary(&x).unwrap();
            let a = spin_feasible(&sp, &u).unwrap();
            assert_eq!(a, inst.is_feasible(&x).unwrap());
            seen[usize::from(a)] += 1;
        }
        assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
    }
}
