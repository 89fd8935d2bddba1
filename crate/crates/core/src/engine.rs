//! The collision chain.
//!
//! An ancilla collides with S, then S thermalizes for a waiting time τ, then
//! the next ancilla collides, and so on:
//!
//! ```text
//! ρ_{S,A₁…A_N} = 𝒰_{SA_N} ∘ ℰ_{τ_{N−1}} ∘ 𝒰_{SA_{N−1}} ∘ … ∘ ℰ_{τ_1} ∘ 𝒰_{SA_1} (ρ_S ⊗ ρ_A^{⊗N})
//! ```
//!
//! Collisions are instantaneous on the scale of ℰ. Ancillas are appended to
//! the state as they collide, so the largest matrix held is 2^(N+1) square.
//! S is subsystem 0 and ancilla A_i is subsystem i.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{collision_unitary, gibbs_state, thermal_channel, CollisionSpec, EnvironmentParams, KrausSet};
use crate::qmat::{apply_on_subsystems, guard_dim, partial_trace, ComplexMatrix, DensityMatrix, C64, ONE, ZERO};

/// Convergence threshold of [`steady_state`] (max-entry norm).
pub const STEADY_TOL: f64 = 1e-12;
/// Iteration cap of [`steady_state`].
pub const STEADY_MAX_ITER: usize = 100_000;

/// Output of [`run_chain`].
#[derive(Clone, Debug)]
pub struct ChainResult {
    /// S followed by A₁…A_N.
    pub full: DensityMatrix,
    /// A₁…A_N with S traced out.
    pub joint_ancillas: DensityMatrix,
    pub final_system: DensityMatrix,
    pub taus: Vec<f64>,
    /// Waiting time of the thermalization applied before the first
    /// collision, if any.
    pub initial_tau: Option<f64>,
}

/// Runs the chain exactly as written above: no thermalization before the
/// first collision.
pub fn run_chain(
    env: &EnvironmentParams,
    spec: &CollisionSpec,
    n_ancillas: usize,
    taus: &[f64],
    initial_system: &DensityMatrix,
) -> Result<ChainResult> {
    run_chain_with(env, spec, n_ancillas, taus, initial_system, None)
}

/// [`run_chain`] with an optional ℰ_{initial_tau} applied to S before the
/// first collision. Irrelevant when S starts in the Gibbs state.
pub fn run_chain_with(
    env: &EnvironmentParams,
    spec: &CollisionSpec,
    n_ancillas: usize,
    taus: &[f64],
    initial_system: &DensityMatrix,
    initial_tau: Option<f64>,
) -> Result<ChainResult> {
    if n_ancillas == 0 {
        return Err(Error::param("at least one ancilla is required"));
    }
    if taus.len() != n_ancillas - 1 {
        return Err(Error::param(format!(
            "{} ancillas need {} waiting times, got {}",
            n_ancillas,
            n_ancillas - 1,
            taus.len()
        )));
    }
    if initial_system.dims() != [2] {
        return Err(Error::InvalidSubsystems("initial system must be one qubit".into()));
    }
    let peak = 1usize.checked_shl(n_ancillas as u32 + 1).filter(|&d| d > 0).unwrap_or(usize::MAX);
    guard_dim(peak)?;

    let unitary = collision_unitary(spec)?;
    let mut state = initial_system.clone();
    if let Some(t) = initial_tau {
        state = thermal_channel(env, t)?.apply(&state)?;
    }
    for i in 0..n_ancillas {
        state = state.tensor(&spec.ancilla_prep)?;
        state = apply_on_subsystems(&state, &unitary, &[0, i + 1])?;
        if let Some(&tau) = taus.get(i) {
            state = apply_on_subsystems(&state, &thermal_channel(env, tau)?, &[0])?;
        }
    }
    let ancillas: Vec<usize> = (1..=n_ancillas).collect();
    Ok(ChainResult {
        joint_ancillas: partial_trace(&state, &ancillas)?,
        final_system: partial_trace(&state, &[0])?,
        full: state,
        taus: taus.to_vec(),
        initial_tau,
    })
}

/// Φ(ρ) = tr_A[𝒰_{SA}(ℰ_τ(ρ) ⊗ ρ_A)]: thermalize, collide, discard the
/// ancilla.
#[derive(Clone, Debug)]
pub struct StroboscopicMap {
    channel: KrausSet,
    unitary: ComplexMatrix,
    prep: DensityMatrix,
}

pub fn stroboscopic_map(env: &EnvironmentParams, spec: &CollisionSpec, tau: f64) -> Result<StroboscopicMap> {
    Ok(StroboscopicMap {
        channel: thermal_channel(env, tau)?,
        unitary: collision_unitary(spec)?,
        prep: spec.ancilla_prep.clone(),
    })
}

impl StroboscopicMap {
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dims() != [2] {
            return Err(Error::InvalidSubsystems("stroboscopic map acts on one qubit".into()));
        }
        let out = self.apply_linear(rho.mat());
        Ok(DensityMatrix::from_parts_unchecked(out.hermitian_part(), vec![2]))
    }

    /// The map extended linearly to arbitrary 2×2 matrices.
    fn apply_linear(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let thermal =
            self.channel.ops().iter().fold(ComplexMatrix::zeros(2), |acc, k| &acc + &(&(k * x) * &k.adjoint()));
        let joint = crate::qmat::kron(&thermal, self.prep.mat()).expect("4x4");
        let z = &(&self.unitary * &joint) * &self.unitary.adjoint();
        ComplexMatrix::from_fn(2, |a, b| z[(2 * a, 2 * b)] + z[(2 * a + 1, 2 * b + 1)])
    }

    /// 4×4 matrix of the map on column-stacked 2×2 matrices.
    pub fn transfer_matrix(&self) -> DMatrix<C64> {
        let mut t = DMatrix::<C64>::zeros(4, 4);
        for col in 0..4 {
            let mut e = ComplexMatrix::zeros(2);
            e[(col % 2, col / 2)] = ONE;
            let img = self.apply_linear(&e);
            for row in 0..4 {
                t[(row, col)] = img[(row % 2, row / 2)];
            }
        }
        t
    }
}

/// Fixed point of `map` by iteration from I/2.
pub fn steady_state(map: &StroboscopicMap) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::maximally_mixed(vec![2])?;
    for _ in 0..STEADY_MAX_ITER {
        let next = map.apply(&rho)?;
        let diff = next.mat().max_abs_diff(rho.mat());
        rho = next;
        if diff < STEADY_TOL {
            return Ok(rho);
        }
    }
    Err(Error::NonConvergence(format!("stroboscopic map did not converge in {STEADY_MAX_ITER} iterations")))
}

/// Fixed point of `map` by solving (T − I)v = 0 with tr ρ = 1.
///
/// Agrees with [`steady_state`] when the fixed point is unique, but is exact
/// and smooth in the model parameters, which finite-difference derivatives
/// need.
pub fn steady_state_exact(map: &StroboscopicMap) -> Result<DensityMatrix> {
    let mut a = map.transfer_matrix() - DMatrix::<C64>::identity(4, 4);
    // Replace one equation by the trace condition.
    for (col, v) in [ONE, ZERO, ZERO, ONE].into_iter().enumerate() {
        a[(0, col)] = v;
    }
    let mut rhs = DVector::<C64>::zeros(4);
    rhs[0] = ONE;
    let v = a
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|z| z.is_finite()))
        .ok_or_else(|| Error::Singular("stroboscopic map has no unique fixed point".into()))?;
    let m = ComplexMatrix::from_fn(2, |i, j| v[i + 2 * j]);
    DensityMatrix::new(m.hermitian_part(), vec![2])
}

/// How S is prepared before the first collision.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSystem {
    /// Thermal equilibrium with the environment.
    Gibbs,
    /// The steady state of the stroboscopic map with waiting time `tau`.
    SteadyState {
        tau: f64,
    },
    Fixed(DensityMatrix),
}

impl InitialSystem {
    pub fn resolve(&self, env: &EnvironmentParams, spec: &CollisionSpec) -> Result<DensityMatrix> {
        match self {
            InitialSystem::Gibbs => gibbs_state(env.nbar),
            InitialSystem::SteadyState { tau } => steady_state_exact(&stroboscopic_map(env, spec, *tau)?),
            InitialSystem::Fixed(rho) => Ok(rho.clone()),
        }
    }
}

/// Everything needed to run a chain except the environment, so the same
/// configuration can be re-run at shifted (n̄, γ) for derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub spec: CollisionSpec,
    pub taus: Vec<f64>,
    pub initial: InitialSystem,
    pub initial_tau: Option<f64>,
}

impl ChainConfig {
    /// `n_ancillas` collisions spaced by `tau`, S starting in the Gibbs state.
    pub fn deterministic(spec: CollisionSpec, n_ancillas: usize, tau: f64) -> Result<Self> {
        if n_ancillas == 0 {
            return Err(Error::param("at least one ancilla is required"));
        }
        Ok(ChainConfig { spec, taus: vec![tau; n_ancillas - 1], initial: InitialSystem::Gibbs, initial_tau: None })
    }

    /// Arbitrary waiting times, S starting in the Gibbs state.
    pub fn with_taus(spec: CollisionSpec, taus: Vec<f64>) -> Self {
        ChainConfig { spec, taus, initial: InitialSystem::Gibbs, initial_tau: None }
    }

    /// S in the stroboscopic steady state for waiting time `tau`, thermalized
    /// for `tau` once more before the first collision, as it would be deep
    /// inside a long periodic chain.
    pub fn steady(spec: CollisionSpec, n_ancillas: usize, tau: f64) -> Result<Self> {
        let mut cfg = ChainConfig::deterministic(spec, n_ancillas, tau)?;
        cfg.initial = InitialSystem::SteadyState { tau };
        cfg.initial_tau = Some(tau);
        Ok(cfg)
    }

    pub fn n_ancillas(&self) -> usize {
        self.taus.len() + 1
    }

    pub fn run(&self, env: &EnvironmentParams) -> Result<ChainResult> {
        let initial = self.initial.resolve(env, &self.spec)?;
        run_chain_with(env, &self.spec, self.n_ancillas(), &self.taus, &initial, self.initial_tau)
    }
}
