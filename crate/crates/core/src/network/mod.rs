//! Planar node layouts, the path-loss gain matrix `D` and its Gram matrix `F = DᵀD`.

mod file;

pub use file::{parse_instance, read_instance, write_instance, InstanceFile};

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Absolute slack on the normalized constraint `4·xᵀFx/ε ≤ 4`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Hard cap on generated layouts; guards against runaway `λ·side²`.
const MAX_NODES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A random layout of nodes in the square `[0, side]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    positions: Vec<Point>,
    side: f64,
    density: f64,
    seed: u64,
}

impl Network {
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Node count for a density and region side: `round(λ·side²)`.
pub fn node_count(density: f64, side: f64) -> Result<usize> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::invalid(format!("density must be positive, got {density}")));
    }
    if !(side.is_finite() && side > 0.0) {
        return Err(Error::invalid(format!("side must be positive, got {side}")));
    }
    let n = (density * side * side).round();
    if n < 1.0 {
        return Err(Error::invalid(format!(
            "density {density} over side {side} yields no nodes"
        )));
    }
    if n > MAX_NODES as f64 {
        return Err(Error::invalid(format!("{n} nodes exceeds the cap of {MAX_NODES}")));
    }
    Ok(n as usize)
}

/// Draws `round(λ·side²)` i.i.d. uniform points in `[0, side]²`.
///
/// Coordinates are drawn x then y, node by node, from a ChaCha8 stream seeded
/// with `seed`, so layouts are bit-identical across platforms.
pub fn generate_uniform(density: f64, side: f64, seed: u64) -> Result<Network> {
    let n = node_count(density, side)?;
    let mut rng = seed::rng(seed);
    let positions = (0..n)
        .map(|_| {
            let x = rng.random::<f64>() * side;
            let y = rng.random::<f64>() * side;
            Point::new(x, y)
        })
        .collect();
    Ok(Network {
        positions,
        side,
        density,
        seed,
    })
}

/// Power-law path loss `ℓ(r) = r^-β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    beta: f64,
}

impl PathLossModel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 2.0) {
            return Err(Error::invalid(format!("path-loss exponent must exceed 2, got {beta}")));
        }
        Ok(PathLossModel { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Gain at distance `r`. The self-term `r = 0` maps to 0.
    pub fn gain(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            r.powf(-self.beta)
        }
    }
}

/// The binary packing problem: maximize `Σx` subject to `xᵀFx ≤ ε`.
#[derive(Debug, Clone)]
pub struct PackingInstance {
    dist: DMatrix<f64>,
    gram: DMatrix<f64>,
    epsilon: f64,
}

impl PackingInstance {
    pub fn from_positions(positions: &[Point], model: PathLossModel, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::invalid(format!(
                "interference budget must be finite and non-negative, got {epsilon}"
            )));
        }
        if positions.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::invalid("node coordinates must be finite"));
        }
        let n = positions.len();
        let mut dist = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let g = model.gain(positions[i].distance(&positions[j]));
                if positions[i] == positions[j] || !g.is_finite() {
                    return Err(Error::DegenerateGeometry { first: i, second: j });
                }
                dist[(i, j)] = g;
                dist[(j, i)] = g;
            }
        }
        let gram = dist.transpose() * &dist;
        if let Some(k) = gram.iter().position(|v| !v.is_finite()) {
            // An overflowing Gram entry means some pair sits too close together.
            let (i, j) = (k % n, k / n);
            return Err(Error::DegenerateGeometry {
                first: i.min(j),
                second: i.max(j),
            });
        }
        Ok(PackingInstance { dist, gram, epsilon })
    }

    pub fn len(&self) -> usize {
        self.dist.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Path-loss gain matrix `D`: symmetric, zero diagonal.
    pub fn dist_matrix(&self) -> &DMatrix<f64> {
        &self.dist
    }

    /// `F = DᵀD`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same layout, different budget.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::invalid(format!(
                "interference budget must be finite and non-negative, got {epsilon}"
            )));
        }
        Ok(PackingInstance {
            epsilon,
            ..self.clone()
        })
    }

    fn check_activation(&self, x: &[u8]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::invalid(format!(
                "activation has length {}, instance has {} nodes",
                x.len(),
                self.len()
            )));
        }
        if let Some(i) = x.iter().position(|&v| v > 1) {
            return Err(Error::invalid(format!("activation entry {i} is not 0 or 1")));
        }
        Ok(())
    }

    /// Interference vector `w = Dx`.
    pub fn interference(&self, x: &[u8]) -> Result<Vec<f64>> {
        self.check_activation(x)?;
        let n = self.len();
        Ok((0..n)
            .map(|i| (0..n).filter(|&j| x[j] == 1).map(|j| self.dist[(i, j)]).sum())
            .collect())
    }

    /// `‖Dx‖₂²`.
    pub fn interference_energy(&self, x: &[u8]) -> Result<f64> {
        Ok(self.interference(x)?.iter().map(|w| w * w).sum())
    }

    /// `xᵀFx`, summed over active pairs only.
    pub fn quadratic_energy(&self, x: &[u8]) -> Result<f64> {
        self.check_activation(x)?;
        let active: Vec<usize> = (0..self.len()).filter(|&i| x[i] == 1).collect();
        Ok(active
            .iter()
            .map(|&i| active.iter().map(|&j| self.gram[(i, j)]).sum::<f64>())
            .sum())
    }

    /// `‖Dx‖₂² ≤ ε`, with [`FEASIBILITY_TOL`] slack on the normalized form.
    pub fn is_feasible(&self, x: &[u8]) -> Result<bool> {
        let energy = self.interference_energy(x)?;
        Ok(within_budget(energy, self.epsilon))
    }
}

pub(crate) fn within_budget(energy: f64, epsilon: f64) -> bool {
    energy <= epsilon * (1.0 + FEASIBILITY_TOL / 4.0)
}

pub fn build_instance(net: &Network, model: PathLossModel, epsilon: f64) -> Result<PackingInstance> {
    PackingInstance::from_positions(net.positions(), model, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cube() -> PathLossModel {
        PathLossModel::new(3.0).unwrap()
    }

    #[test]
    fn twenty_nodes_at_unit_density() {
        let side = 20f64.sqrt();
        let net = generate_uniform(1.0, side, 3).unwrap();
        assert_eq!(net.len(), 20);
        assert!(net
            .positions()
            .iter()
            .all(|p| (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y)));
    }

    #[test]
    fn single_node_in_unit_square() {
        let net = generate_uniform(1.0, 1.0, 0).unwrap();
        assert_eq!(net.len(), 1);
        let inst = build_instance(&net, cube(), 1.0).unwrap();
        assert_eq!(inst.dist_matrix()[(0, 0)], 0.0);
        assert_eq!(inst.gram()[(0, 0)], 0.0);
    }

    #[test]
    fn same_seed_same_layout() {
        let n = 15.0f64;
        let density = n.powf(-0.5);
        let side = (n / density).sqrt();
        let a = generate_uniform(density, side, 42).unwrap();
        let b = generate_uniform(density, side, 42).unwrap();
        assert_eq!(a.len(), 15);
        assert_eq!(a, b);
        let c = generate_uniform(density, side, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_density_and_side() {
        assert!(matches!(generate_uniform(0.0, 1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_uniform(1.0, -1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_uniform(0.1, 1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            generate_uniform(f64::NAN, 1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn path_loss_requires_beta_above_two() {
        assert!(PathLossModel::new(2.0).is_err());
        assert!(PathLossModel::new(f64::INFINITY).is_err());
        assert_eq!(cube().gain(0.0), 0.0);
        assert_eq!(cube().gain(2.0), 0.125);
    }

    #[test]
    fn two_nodes_hand_computed() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        let inst = PackingInstance::from_positions(&pts, cube(), 1.0).unwrap();
        let d = inst.dist_matrix();
        assert_eq!(d.as_slice(), &[0.0, 0.125, 0.125, 0.0]);
        let f = inst.gram();
        assert_eq!(f.as_slice(), &[1.0 / 64.0, 0.0, 0.0, 1.0 / 64.0]);
        let e = inst.interference_energy(&[1, 1]).unwrap();
        assert_relative_eq!(e, 2.0 * 2f64.powi(-6), max_relative = 1e-15);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let pts = [Point::new(1.0, 1.0), Point::new(0.0, 0.0), Point::new(1.0, 1.0)];
        let err = PackingInstance::from_positions(&pts, cube(), 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry { first: 0, second: 2 }));
    }

    #[test]
    fn nearly_coincident_overflow_rejected() {
        let pts = [Point::new(0.0, 0.0), Point::new(1e-120, 0.0)];
        let err = PackingInstance::from_positions(&pts, cube(), 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry { .. }));
    }

    #[test]
    fn empty_activation_feasible() {
        let net = generate_uniform(1.0, 3.0, 9).unwrap();
        let inst = build_instance(&net, cube(), 0.0).unwrap();
        let zero = vec![0u8; inst.len()];
        assert!(inst.interference(&zero).unwrap().iter().all(|&w| w == 0.0));
        assert!(inst.is_feasible(&zero).unwrap());
    }

    #[test]
    fn activation_shape_errors() {
        let pts = [Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        let inst = PackingInstance::from_positions(&pts, cube(), 1.0).unwrap();
        assert!(matches!(inst.interference(&[1]), Err(Error::InvalidArgument(_))));
        assert!(matches!(inst.interference(&[1, 2]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gram_matches_triple_loop() {
        let net = generate_uniform(1.0, 5f64.sqrt(), 11).unwrap();
        let inst = build_instance(&net, cube(), 1.0).unwrap();
        let d = inst.dist_matrix();
        let n = inst.len();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += d[(k, i)] * d[(k, j)];
                }
                assert_relative_eq!(inst.gram()[(i, j)], acc, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn energy_identity_on_random_activations() {
        use rand::Rng;
        let net = generate_uniform(1.0, 6f64.sqrt(), 5).unwrap();
        let inst = build_instance(&net, cube(), 1.0).unwrap();
        let mut rng = seed::rng(1);
        for _ in 0..200 {
            let x: Vec<u8> = (0..inst.len()).map(|_| rng.random_range(0..2)).collect();
            let a = inst.interference_energy(&x).unwrap();
            let b = inst.quadratic_energy(&x).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
        }
    }
}
