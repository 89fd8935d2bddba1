//! Physical ingredients of the collision model.
//!
//! Units: ħ = k_B = 1. Temperature enters only through the mean occupation
//! n̄ = 1/(e^{Ω/T} − 1). Qubit basis ordering is {|g⟩, |e⟩} with
//! σ_z|e⟩ = +|e⟩ and σ⁻|e⟩ = |g⟩.
//!
//! The thermalizing channel e^{τℒ} of the weak-coupling master equation
//!
//! ```text
//! dρ/dt = γ(n̄+1) D[σ⁻](ρ) + γ n̄ D[σ⁺](ρ),   D[A](ρ) = AρA† − ½{A†A, ρ}
//! ```
//!
//! is implemented in closed form as a generalized amplitude damping channel.
//! [`lindblad_oracle`] integrates the same equation by exponentiating the
//! vectorized generator and exists to certify that closed form.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qmat::{herm_eig, kron, pauli, unitary_from_hamiltonian, ComplexMatrix, DensityMatrix, C64, ONE, ZERO};

/// Completeness tolerance for Kraus sets.
pub const KRAUS_TOL: f64 = 1e-10;

/// Mean occupation n̄ and system–environment coupling rate γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvironmentParams {
    pub nbar: f64,
    pub gamma: f64,
}

impl EnvironmentParams {
    pub fn new(nbar: f64, gamma: f64) -> Result<Self> {
        if !(nbar.is_finite() && nbar >= 0.0) {
            return Err(Error::param(format!("nbar must be finite and >= 0, got {nbar}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param(format!("gamma must be finite and > 0, got {gamma}")));
        }
        Ok(EnvironmentParams { nbar, gamma })
    }

    /// Effective thermalization Γ = γ(2n̄+1)τ accumulated over `tau`.
    pub fn effective_rate(&self, tau: f64) -> f64 {
        self.gamma * (2.0 * self.nbar + 1.0) * tau
    }
}

/// Bose occupation 1/(e^{Ω/T} − 1).
pub fn nbar_from_temperature(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0 && temperature > 0.0) {
        return Err(Error::param("omega and temperature must be positive"));
    }
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// System–ancilla coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InteractionKind {
    /// H = (g/2) σ_z ⊗ σ_z.
    Zz,
    /// H = g (σ⁺ ⊗ σ⁻ + σ⁻ ⊗ σ⁺).
    Swap,
}

impl FromStr for InteractionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zz" => Ok(InteractionKind::Zz),
            "swap" => Ok(InteractionKind::Swap),
            other => Err(Error::param(format!("unknown interaction kind '{other}'"))),
        }
    }
}

impl fmt::Display for InteractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InteractionKind::Zz => "zz",
            InteractionKind::Swap => "swap",
        })
    }
}

/// One collision: interaction kind, dimensionless strength g·τ_SA and the
/// state every ancilla is prepared in.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionSpec {
    pub kind: InteractionKind,
    pub g_tau: f64,
    pub ancilla_prep: DensityMatrix,
}

impl CollisionSpec {
    pub fn new(kind: InteractionKind, g_tau: f64, ancilla_prep: DensityMatrix) -> Result<Self> {
        if ancilla_prep.dims() != [2] {
            return Err(Error::InvalidSubsystems("ancilla preparation must be a single qubit".into()));
        }
        if !g_tau.is_finite() {
            return Err(Error::param("g_tau must be finite"));
        }
        Ok(CollisionSpec { kind, g_tau, ancilla_prep })
    }

    /// ZZ coupling at g·τ_SA = π/2 with |+_x⟩ ancillas.
    pub fn zz_optimal() -> Self {
        CollisionSpec { kind: InteractionKind::Zz, g_tau: std::f64::consts::FRAC_PI_2, ancilla_prep: ancilla_plus_x() }
    }

    /// Full swap with ground-state ancillas.
    pub fn swap_full() -> Self {
        CollisionSpec {
            kind: InteractionKind::Swap,
            g_tau: std::f64::consts::FRAC_PI_2,
            ancilla_prep: ancilla_ground(),
        }
    }
}

/// A CPTP map as a list of Kraus operators.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    ops: Vec<ComplexMatrix>,
}

impl KrausSet {
    /// Checks Σ K†K = I to [`KRAUS_TOL`].
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let set = KrausSet { ops };
        let dim = set.ops.first().map(|k| k.dim()).ok_or_else(|| Error::param("empty Kraus set"))?;
        if let Some(bad) = set.ops.iter().find(|k| k.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        let err = set.completeness_error();
        if err > KRAUS_TOL {
            return Err(Error::NotCptp(err));
        }
        Ok(set)
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    /// max |Σ K†K − I|.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.ops[0].dim();
        let sum = self.ops.iter().fold(ComplexMatrix::zeros(dim), |acc, k| &acc + &(&k.adjoint() * k));
        sum.max_abs_diff(&ComplexMatrix::identity(dim))
    }

    /// Σ K ρ K† on a state of matching dimension.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rho.dim() });
        }
        let out =
            self.ops.iter().fold(ComplexMatrix::zeros(rho.dim()), |acc, k| &acc + &(&(k * rho.mat()) * &k.adjoint()));
        Ok(DensityMatrix::from_parts_unchecked(out.hermitian_part(), rho.dims().to_vec()))
    }
}

/// diag(p_g, p_e) with p_e = n̄/(2n̄+1).
pub fn gibbs_state(nbar: f64) -> Result<DensityMatrix> {
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(Error::param(format!("nbar must be finite and >= 0, got {nbar}")));
    }
    let (pg, pe) = gibbs_populations(nbar);
    Ok(DensityMatrix::from_parts_unchecked(ComplexMatrix::from_real_diagonal(&[pg, pe]), vec![2]))
}

pub(crate) fn gibbs_populations(nbar: f64) -> (f64, f64) {
    let z = 2.0 * nbar + 1.0;
    ((nbar + 1.0) / z, nbar / z)
}

/// The channel e^{τℒ} as a generalized amplitude damping Kraus set.
///
/// With Γ = γ(2n̄+1)τ, populations relax to the Gibbs state as e^{−Γ} and
/// coherences decay as e^{−Γ/2}.
pub fn thermal_channel(env: &EnvironmentParams, tau: f64) -> Result<KrausSet> {
    if !(tau >= 0.0) {
        return Err(Error::param(format!("tau must be >= 0, got {tau}")));
    }
    let rate = env.effective_rate(tau);
    if rate == 0.0 {
        return KrausSet::new(vec![ComplexMatrix::identity(2)]);
    }
    let eta = -(-rate).exp_m1();
    let keep = (-0.5 * rate).exp();
    let (p_down, p_up) = gibbs_populations(env.nbar);
    let r = |x: f64| C64::new(x, 0.0);

    let mut ops = Vec::with_capacity(4);
    if p_down > 0.0 {
        let s = p_down.sqrt();
        ops.push(ComplexMatrix::from_rows(&[r(s), ZERO, ZERO, r(s * keep)]));
        ops.push(ComplexMatrix::from_rows(&[ZERO, r(s * eta.sqrt()), ZERO, ZERO]));
    }
    if p_up > 0.0 {
        let s = p_up.sqrt();
        ops.push(ComplexMatrix::from_rows(&[r(s * keep), ZERO, ZERO, r(s)]));
        ops.push(ComplexMatrix::from_rows(&[ZERO, ZERO, r(s * eta.sqrt()), ZERO]));
    }
    KrausSet::new(ops)
}

/// Reference propagation of the master equation: exponentiates the 4×4
/// column-stacked generator. Slow; meant for certifying [`thermal_channel`].
pub fn lindblad_oracle(env: &EnvironmentParams, tau: f64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho.dim() });
    }
    if !(tau >= 0.0) {
        return Err(Error::param(format!("tau must be >= 0, got {tau}")));
    }
    let generator = lindblad_generator(env);
    let prop = expm(&(generator * C64::new(tau, 0.0)));
    let m = rho.mat().as_inner();
    // column-stacking: vec index = row + 2·col
    let v = nalgebra::DVector::from_fn(4, |k, _| m[(k % 2, k / 2)]);
    let w = prop * v;
    let out = ComplexMatrix::from_fn(2, |i, j| w[i + 2 * j]);
    DensityMatrix::new(out.hermitian_part(), vec![2])
}

fn lindblad_generator(env: &EnvironmentParams) -> DMatrix<C64> {
    let id = ComplexMatrix::identity(2);
    let dissipator = |a: &ComplexMatrix, rate: f64| -> DMatrix<C64> {
        // vec(A X B) = (Bᵀ ⊗ A) vec(X)
        let ad_a = &a.adjoint() * a;
        let conj_a = ComplexMatrix::from_fn(2, |i, j| a[(i, j)].conj());
        let jump = kron(&conj_a, a).expect("4x4");
        let left = kron(&id, &ad_a).expect("4x4");
        let right = kron(&ComplexMatrix::from_fn(2, |i, j| ad_a[(j, i)]), &id).expect("4x4");
        let d = &jump - &(&left + &right).scale_real(0.5);
        d.into_inner() * C64::new(rate, 0.0)
    };
    dissipator(&pauli::lowering(), env.gamma * (env.nbar + 1.0)) + dissipator(&pauli::raising(), env.gamma * env.nbar)
}

/// Matrix exponential by scaling and squaring with a Taylor core.
fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm / 0.25).log2().ceil().max(0.0) as i32;
    let scaled = a * C64::new(0.5f64.powi(squarings), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &scaled * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// The two-qubit collision unitary exp(−i H τ_SA), a function of g·τ_SA only.
pub fn collision_unitary(spec: &CollisionSpec) -> Result<ComplexMatrix> {
    let h = match spec.kind {
        InteractionKind::Zz => kron(&pauli::z(), &pauli::z())?.scale_real(0.5),
        InteractionKind::Swap => {
            let exchange = kron(&pauli::raising(), &pauli::lowering())?;
            &exchange + &exchange.adjoint()
        }
    };
    unitary_from_hamiltonian(&h, spec.g_tau)
}

/// |+_x⟩ = (|g⟩ + |e⟩)/√2.
pub fn ancilla_plus_x() -> DensityMatrix {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    DensityMatrix::from_parts_unchecked(ComplexMatrix::outer(&[s, s]), vec![2])
}

/// |g⟩.
pub fn ancilla_ground() -> DensityMatrix {
    DensityMatrix::from_parts_unchecked(ComplexMatrix::outer(&[ONE, ZERO]), vec![2])
}

/// Checks that `rho` is stationary under `channel` to within `tol`.
pub fn is_fixed_point(channel: &KrausSet, rho: &DensityMatrix, tol: f64) -> Result<bool> {
    Ok(channel.apply(rho)?.mat().max_abs_diff(rho.mat()) <= tol)
}

/// Smallest eigenvalue, for quick positivity checks in tests.
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eig(m)?.values[0])
}
