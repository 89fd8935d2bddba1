//! Correlations between two qubits: mutual information and quantum discord.
//!
//! Both are in nats. Discord is computed for rank-one projective
//! measurements on one side, parameterized by the Bloch angles (θ, φ) of the
//! measured direction:
//!
//! ```text
//! D_A(ρ) = I(A:B) − max_{θ,φ} [S(ρ_B) − Σ_k p_k S(ρ_{B|k})]
//! ```
//!
//! The maximization seeds a simplex search with the best point of a
//! 64 × 128 angle grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::qmat::{partial_trace, von_neumann_entropy, DensityMatrix, C64, ENTROPY_CUTOFF};

/// Grid resolution in θ ∈ [0, π).
pub const GRID_THETA: usize = 64;
/// Grid resolution in φ ∈ [0, 2π).
pub const GRID_PHI: usize = 128;
/// Negative discord down to this is rounding and is reported as 0.
pub const DISCORD_CLIP: f64 = 1e-8;

const SIMPLEX_MAX_ITER: usize = 5_000;
const SIMPLEX_FTOL: f64 = 1e-15;
const SIMPLEX_XTOL: f64 = 1e-10;

/// A labelled two-qubit state.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    rho: DensityMatrix,
    labels: (String, String),
}

/// Which qubit of a [`BipartiteState`] is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

impl BipartiteState {
    pub fn new(rho: DensityMatrix, labels: (impl Into<String>, impl Into<String>)) -> Result<Self> {
        if rho.dims() != [2, 2] {
            return Err(Error::InvalidSubsystems(format!(
                "expected two qubits, got subsystem dimensions {:?}",
                rho.dims()
            )));
        }
        Ok(BipartiteState { rho, labels: (labels.0.into(), labels.1.into()) })
    }

    /// The reduced state of subsystems `a < b` of `state`.
    pub fn from_subsystems(state: &DensityMatrix, a: usize, b: usize) -> Result<Self> {
        if a >= b {
            return Err(Error::InvalidSubsystems(format!("need a < b, got {a} and {b}")));
        }
        BipartiteState::new(partial_trace(state, &[a, b])?, (format!("#{a}"), format!("#{b}")))
    }

    /// Ancillas A_{i+1} and A_{i+2} (1-based labels) of a joint ancilla state.
    pub fn adjacent_ancillas(joint: &DensityMatrix, i: usize) -> Result<Self> {
        let rho = partial_trace(joint, &[i, i + 1])?;
        BipartiteState::new(rho, (format!("A{}", i + 1), format!("A{}", i + 2)))
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn labels(&self) -> (&str, &str) {
        (&self.labels.0, &self.labels.1)
    }

    fn marginal(&self, side: Side) -> DensityMatrix {
        let keep = match side {
            Side::A => 0,
            Side::B => 1,
        };
        partial_trace(&self.rho, &[keep]).expect("two-qubit state")
    }
}

/// I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ_AB), clipped at zero against rounding.
pub fn mutual_information(s: &BipartiteState) -> f64 {
    let mi = von_neumann_entropy(&s.marginal(Side::A)) + von_neumann_entropy(&s.marginal(Side::B))
        - von_neumann_entropy(&s.rho);
    mi.max(0.0)
}

/// Entries of the state as plain arrays, indexed 2a + b.
type Mat4 = [[C64; 4]; 4];

fn to_array(rho: &DensityMatrix) -> Mat4 {
    let m = rho.mat();
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Σ_k p_k S(ρ_{other|k}) for the measurement along (θ, φ) on `side`.
fn conditional_entropy(rho: &Mat4, side: Side, theta: f64, phi: f64) -> f64 {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let e = C64::from_polar(1.0, phi);
    let up = [C64::new(c, 0.0), e * s];
    let down = [-e.conj() * s, C64::new(c, 0.0)];
    [up, down].iter().map(|m| weighted_entropy(&project(rho, side, m))).sum()
}

/// Unnormalized conditional state ⟨m|ρ|m⟩ on the unmeasured qubit.
fn project(rho: &Mat4, side: Side, m: &[C64; 2]) -> [[C64; 2]; 2] {
    let idx = |meas: usize, other: usize| match side {
        Side::A => 2 * meas + other,
        Side::B => 2 * other + meas,
    };
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (o1, row) in out.iter_mut().enumerate() {
        for (o2, cell) in row.iter_mut().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    *cell += m[a].conj() * m[b] * rho[idx(a, o1)][idx(b, o2)];
                }
            }
        }
    }
    out
}

/// p·S(σ/p) = −Σ λ ln λ + p ln p for an unnormalized 2×2 state σ of trace p.
fn weighted_entropy(sigma: &[[C64; 2]; 2]) -> f64 {
    let (a, d, b) = (sigma[0][0].re, sigma[1][1].re, sigma[0][1]);
    let p = a + d;
    if p <= ENTROPY_CUTOFF {
        return 0.0;
    }
    let r = ((a - d).powi(2) + 4.0 * b.norm_sqr()).sqrt();
    let xlnx = |x: f64| if x > ENTROPY_CUTOFF { x * x.ln() } else { 0.0 };
    -xlnx(0.5 * (p + r)) - xlnx(0.5 * (p - r)) + xlnx(p)
}

/// Minimum conditional entropy over projective measurements on `side` and
/// the angles reaching it.
pub fn min_conditional_entropy(s: &BipartiteState, side: Side) -> Result<(f64, (f64, f64))> {
    let rho = to_array(&s.rho);
    let f = |x: [f64; 2]| conditional_entropy(&rho, side, x[0], x[1]);
    let mut best = ([0.0, 0.0], f64::INFINITY);
    for i in 0..GRID_THETA {
        for j in 0..GRID_PHI {
            let x = [PI * i as f64 / GRID_THETA as f64, 2.0 * PI * j as f64 / GRID_PHI as f64];
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    let step = [PI / GRID_THETA as f64, 2.0 * PI / GRID_PHI as f64];
    let (x, v) = nelder_mead(f, best.0, step)?;
    Ok((v.min(best.1), (x[0], x[1])))
}

/// Classical correlations J = S(ρ_other) − min Σ_k p_k S(ρ_{other|k}).
pub fn classical_correlation(s: &BipartiteState, side: Side) -> Result<f64> {
    let other = match side {
        Side::A => Side::B,
        Side::B => Side::A,
    };
    Ok(von_neumann_entropy(&s.marginal(other)) - min_conditional_entropy(s, side)?.0)
}

/// Quantum discord with the measurement on `side`.
pub fn discord(s: &BipartiteState, side: Side) -> Result<f64> {
    let d = mutual_information(s) - classical_correlation(s, side)?;
    if d < -DISCORD_CLIP {
        return Err(Error::NonConvergence(format!("discord came out negative ({d:e})")));
    }
    Ok(d.max(0.0))
}

/// Two-dimensional Nelder–Mead minimization from `start` with initial
/// steps `step`.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: [f64; 2]) -> Result<([f64; 2], f64)> {
    let mut simplex = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut values = simplex.map(&f);
    for _ in 0..SIMPLEX_MAX_ITER {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.map(|i| simplex[i]);
        values = order.map(|i| values[i]);

        let size = (1..3)
            .map(|k| (simplex[k][0] - simplex[0][0]).abs().max((simplex[k][1] - simplex[0][1]).abs()))
            .fold(0.0, f64::max);
        if values[2] - values[0] <= SIMPLEX_FTOL || size <= SIMPLEX_XTOL {
            return Ok((simplex[0], values[0]));
        }

        let centroid = [0.5 * (simplex[0][0] + simplex[1][0]), 0.5 * (simplex[0][1] + simplex[1][1])];
        let along =
            |t: f64| [centroid[0] + t * (simplex[2][0] - centroid[0]), centroid[1] + t * (simplex[2][1] - centroid[1])];
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            (simplex[2], values[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < values[1] {
            (simplex[2], values[2]) = (reflected, fr);
        } else {
            let contracted = if fr < values[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < values[2].min(fr) {
                (simplex[2], values[2]) = (contracted, fc);
            } else {
                for k in 1..3 {
                    simplex[k] = [0.5 * (simplex[0][0] + simplex[k][0]), 0.5 * (simplex[0][1] + simplex[k][1])];
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    Err(Error::NonConvergence(format!("simplex search did not settle in {SIMPLEX_MAX_ITER} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_chain;
    use crate::model::{gibbs_state, CollisionSpec, EnvironmentParams};
    use crate::qmat::{kron, random_density_matrix, random_hermitian, unitary_from_hamiltonian, ComplexMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn bell() -> BipartiteState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ket = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
        BipartiteState::new(DensityMatrix::pure(&ket).unwrap(), ("A", "B")).unwrap()
    }

    fn chain_pair(nbar: f64, gamma_eff: f64) -> BipartiteState {
        let env = EnvironmentParams::new(nbar, 1.0).unwrap();
        let tau = gamma_eff / (2.0 * nbar + 1.0);
        let r = run_chain(&env, &CollisionSpec::zz_optimal(), 2, &[tau], &gibbs_state(nbar).unwrap()).unwrap();
        BipartiteState::adjacent_ancillas(&r.joint_ancillas, 0).unwrap()
    }

    #[test]
    fn mutual_information_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_density_matrix(&[2], &mut rng);
        let b = random_density_matrix(&[2], &mut rng);
        let prod = BipartiteState::new(a.tensor(&b).unwrap(), ("a", "b")).unwrap();
        assert!(mutual_information(&prod).abs() < 1e-12);
        assert!((mutual_information(&bell()) - 2.0 * LN_2).abs() < 1e-12);
        assert!(mutual_information(&chain_pair(1.0, 50.0)) < 1e-8);
    }

    #[test]
    fn discord_examples() {
        let cc = ComplexMatrix::from_real_diagonal(&[0.1, 0.2, 0.3, 0.4]);
        let cc = BipartiteState::new(DensityMatrix::qubits(cc).unwrap(), ("a", "b")).unwrap();
        assert!(discord(&cc, Side::A).unwrap() < 1e-10);
        assert!(discord(&cc, Side::B).unwrap() < 1e-10);
        assert!((discord(&bell(), Side::A).unwrap() - LN_2).abs() < 1e-9);
        assert!((discord(&bell(), Side::B).unwrap() - LN_2).abs() < 1e-9);
    }

    #[test]
    fn werner_state_discord() {
        // Werner state p|Φ+⟩⟨Φ+| + (1−p)I/4: both marginals are I/2 and the
        // best measurement leaves conditional states with Bloch length p.
        let p: f64 = 0.6;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi =
            DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)]).unwrap();
        let m = &phi.mat().scale_real(p) + &ComplexMatrix::identity(4).scale_real((1.0 - p) / 4.0);
        let w = BipartiteState::new(DensityMatrix::qubits(m).unwrap(), ("a", "b")).unwrap();
        let xlog = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
        let l1 = (1.0 + 3.0 * p) / 4.0;
        let l2 = (1.0 - p) / 4.0;
        let s_ab = -xlog(l1) - 3.0 * xlog(l2);
        let h = |x: f64| -xlog(x) - xlog(1.0 - x);
        // I = 2 ln2 − S_AB, J = ln2 − h((1+p)/2)
        let expect = (2.0 * LN_2 - s_ab) - (LN_2 - h((1.0 + p) / 2.0));
        assert!((discord(&w, Side::A).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn zz_chain_pairs_are_classical() {
        for &nb in &[0.1, 1.0, 3.0] {
            for &g in &[0.01, 0.3, 2.0] {
                let pair = chain_pair(nb, g);
                for side in [Side::A, Side::B] {
                    let d = discord(&pair, side).unwrap();
                    assert!(d < 1e-6, "nbar={nb} Gamma={g}: {d}");
                }
            }
        }
    }

    #[test]
    fn measurement_grid_agrees_with_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let s = BipartiteState::new(random_density_matrix(&[2, 2], &mut rng), ("a", "b")).unwrap();
            let rho = to_array(&s.rho);
            let (opt, _) = min_conditional_entropy(&s, Side::A).unwrap();
            // a brute-force grid can only do worse
            let brute = (0..200)
                .flat_map(|i| (0..200).map(move |j| (PI * i as f64 / 199.0, 2.0 * PI * j as f64 / 200.0)))
                .map(|(t, p)| conditional_entropy(&rho, Side::A, t, p))
                .fold(f64::INFINITY, f64::min);
            assert!(opt <= brute + 1e-12);
            assert!(brute - opt < 1e-3);
        }
    }

    #[test]
    fn wrong_dimensions() {
        let rho = random_density_matrix(&[2, 2, 2], &mut ChaCha8Rng::seed_from_u64(1));
        assert!(BipartiteState::new(rho.clone(), ("a", "b")).is_err());
        assert!(BipartiteState::from_subsystems(&rho, 0, 2).is_ok());
        assert!(BipartiteState::from_subsystems(&rho, 2, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn discord_bounded_by_mi(seed in any::<u64>()) {
                let s = BipartiteState::new(random_density_matrix(&[2, 2], &mut ChaCha8Rng::seed_from_u64(seed)), ("a", "b")).unwrap();
                let mi = mutual_information(&s);
                prop_assert!((-1e-10..=2.0 * LN_2 + 1e-10).contains(&mi));
                for side in [Side::A, Side::B] {
                    let d = discord(&s, side).unwrap();
                    prop_assert!(d >= 0.0 && d <= mi + 1e-8);
                }
            }

            #[test]
            fn mi_local_unitary_invariant(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density_matrix(&[2, 2], &mut rng);
                let u = kron(
                    &unitary_from_hamiltonian(&random_hermitian(2, &mut rng), 1.0).unwrap(),
                    &unitary_from_hamiltonian(&random_hermitian(2, &mut rng), 1.0).unwrap(),
                ).unwrap();
                let rotated = DensityMatrix::qubits(&(&u * rho.mat()) * &u.adjoint()).unwrap();
                let a = mutual_information(&BipartiteState::new(rho, ("a", "b")).unwrap());
                let b = mutual_information(&BipartiteState::new(rotated, ("a", "b")).unwrap());
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
