//! Estimation theory: classical and quantum Fisher information.
//!
//! The estimated parameter is the mean occupation n̄ rather than the
//! temperature; [`thermal_fi_temperature`] shows the conversion. State
//! derivatives are central finite differences of a *builder*, a function
//! mapping the parameter to a state, so any model that can be simulated can
//! be differentiated.
//!
//! The QFI is tr(ρL²), with the symmetric logarithmic derivative L solving
//! ∂ρ = (Lρ + ρL)/2. In the eigenbasis {|λ_i⟩} of ρ,
//!
//! ```text
//! ⟨λ_i|L|λ_j⟩ = 2⟨λ_i|∂ρ|λ_j⟩ / (λ_i + λ_j),
//! ```
//!
//! and pairs with λ_i + λ_j below [`SLD_CUTOFF`] are set to zero. They do
//! not contribute to tr(ρL²).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::engine::ChainConfig;
use crate::error::{Error, Result};
use crate::model::{gibbs_populations, EnvironmentParams};
use crate::qmat::{guard_dim, herm_eig, kron, ComplexMatrix, DensityMatrix, HermEig, C64, ZERO};

/// Eigenvalue pairs with λ_i + λ_j below this are outside the support.
pub const SLD_CUTOFF: f64 = 1e-12;
/// Outcomes less likely than this are dropped from classical sums.
pub const PROB_CUTOFF: f64 = 1e-14;
/// Completeness and positivity tolerance for POVMs.
pub const POVM_TOL: f64 = 1e-10;
/// [`ratio_r`] treats Fisher matrices whose unit-diagonal normalization has a
/// larger condition number as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// [`qfi_matrix`] rejects a parameter whose state derivative is within this
/// factor of the central-difference rounding noise ε·max|ρ|/h.
pub const FD_RESOLUTION: f64 = 1e4;

/// QFI of the Gibbs qubit with respect to n̄: 1/(n̄(n̄+1)(2n̄+1)²).
pub fn thermal_fi_nbar(nbar: f64) -> Result<f64> {
    if !(nbar > 0.0 && nbar.is_finite()) {
        return Err(Error::param(format!("thermal Fisher information needs nbar > 0, got {nbar}")));
    }
    let z = 2.0 * nbar + 1.0;
    Ok(1.0 / (nbar * (nbar + 1.0) * z * z))
}

/// ∂n̄/∂T for a mode of frequency Ω.
pub fn dnbar_dtemperature(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0 && temperature > 0.0) {
        return Err(Error::param("omega and temperature must be positive"));
    }
    let x = omega / temperature;
    let em1 = x.exp_m1();
    // e^x/(e^x − 1)² written to stay finite for large x
    let factor = if x > 700.0 { (-x).exp() } else { (em1 + 1.0) / (em1 * em1) };
    Ok(x / temperature * factor)
}

/// QFI of the Gibbs qubit with respect to T.
pub fn thermal_fi_temperature(omega: f64, temperature: f64) -> Result<f64> {
    let nbar = crate::model::nbar_from_temperature(omega, temperature)?;
    let d = dnbar_dtemperature(omega, temperature)?;
    Ok(thermal_fi_nbar(nbar)? * d * d)
}

/// Finite-difference scheme for [`drho_dtheta_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Derivative {
    #[default]
    Central,
    /// Combines central differences at h and h/2 to cancel the O(h²) term.
    Richardson,
}

/// 1e-5·max(1, |θ|).
pub fn default_step(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// (ρ(θ+h) − ρ(θ−h)) / 2h, with `h` defaulting to [`default_step`].
pub fn drho_dtheta<F>(builder: F, theta: f64, h: Option<f64>) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<DensityMatrix>,
{
    drho_dtheta_with(builder, theta, h, Derivative::Central)
}

pub fn drho_dtheta_with<F>(builder: F, theta: f64, h: Option<f64>, method: Derivative) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Result<DensityMatrix>,
{
    let h = h.unwrap_or_else(|| default_step(theta));
    if !(h > 0.0) {
        return Err(Error::param(format!("step must be positive, got {h}")));
    }
    let central = |h: f64| -> Result<ComplexMatrix> {
        let plus = builder(theta + h)?;
        let minus = builder(theta - h)?;
        Ok((plus.mat() - minus.mat()).scale_real(0.5 / h))
    };
    let d = match method {
        Derivative::Central => central(h)?,
        Derivative::Richardson => {
            let coarse = central(h)?;
            let fine = central(0.5 * h)?;
            (&fine.scale_real(4.0) - &coarse).scale_real(1.0 / 3.0)
        }
    };
    Ok(d.hermitian_part())
}

/// ∂ρ expressed in the eigenbasis of ρ.
fn in_eigenbasis(eig: &HermEig, m: &ComplexMatrix) -> ComplexMatrix {
    &(&eig.vectors.adjoint() * m) * &eig.vectors
}

fn check_pair(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<()> {
    if drho.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: drho.dim() });
    }
    let herm = drho.hermiticity_error();
    if herm > 1e-9 {
        return Err(Error::NotHermitian(herm));
    }
    Ok(())
}

/// The symmetric logarithmic derivative of ρ given ∂ρ.
pub fn sld(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_pair(rho, drho)?;
    let eig = herm_eig(rho.mat())?;
    let d = in_eigenbasis(&eig, drho);
    let lam = &eig.values;
    let l_eig = ComplexMatrix::from_fn(rho.dim(), |i, j| {
        let s = lam[i] + lam[j];
        if s < SLD_CUTOFF {
            ZERO
        } else {
            d[(i, j)] * (2.0 / s)
        }
    });
    Ok((&(&eig.vectors * &l_eig) * &eig.vectors.adjoint()).hermitian_part())
}

/// max |∂ρ − (Lρ + ρL)/2| over eigenbasis pairs inside the support.
pub fn sld_residual(rho: &DensityMatrix, drho: &ComplexMatrix, l: &ComplexMatrix) -> Result<f64> {
    check_pair(rho, drho)?;
    let eig = herm_eig(rho.mat())?;
    let anti = (&(l * rho.mat()) + &(rho.mat() * l)).scale_real(0.5);
    let r = in_eigenbasis(&eig, &(drho - &anti));
    let lam = &eig.values;
    let mut worst = 0.0f64;
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            if lam[i] + lam[j] >= SLD_CUTOFF {
                worst = worst.max(r[(i, j)].norm());
            }
        }
    }
    Ok(worst)
}

/// Σ_ij 2 Re(∂_aρ_ij conj(∂_bρ_ij)) / (λ_i + λ_j) in the eigenbasis of ρ,
/// which equals Re tr(ρ L_a L_b).
fn fisher_entries(rho: &DensityMatrix, derivs: &[ComplexMatrix]) -> Result<DMatrix<f64>> {
    for d in derivs {
        check_pair(rho, d)?;
    }
    let eig = herm_eig(rho.mat())?;
    let rotated: Vec<ComplexMatrix> = derivs.iter().map(|d| in_eigenbasis(&eig, d)).collect();
    let lam = &eig.values;
    let m = derivs.len();
    let mut f = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut acc = 0.0;
            for i in 0..rho.dim() {
                for j in 0..rho.dim() {
                    let s = lam[i] + lam[j];
                    if s >= SLD_CUTOFF {
                        acc += 2.0 * (rotated[a][(i, j)] * rotated[b][(i, j)].conj()).re / s;
                    }
                }
            }
            f[(a, b)] = acc;
            f[(b, a)] = acc;
        }
    }
    Ok(f)
}

/// tr(ρL²) for a state and its derivative.
pub fn qfi_from_derivative(rho: &DensityMatrix, drho: &ComplexMatrix) -> Result<f64> {
    Ok(fisher_entries(rho, std::slice::from_ref(drho))?[(0, 0)].max(0.0))
}

/// QFI of the family `builder` at `theta`.
pub fn qfi_of_state<F>(builder: F, theta: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityMatrix>,
{
    let rho = builder(theta)?;
    let drho = drho_dtheta(&builder, theta, None)?;
    qfi_from_derivative(&rho, &drho)
}

/// A measurement: positive operators summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let dim = elements.first().map(|e| e.dim()).ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let mut sum = ComplexMatrix::zeros(dim);
        for (k, e) in elements.iter().enumerate() {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: e.dim() });
            }
            let min = herm_eig(e).map_err(|_| Error::InvalidPovm(format!("element {k} is not Hermitian")))?.values[0];
            if min < -POVM_TOL {
                return Err(Error::InvalidPovm(format!("element {k} has eigenvalue {min:e}")));
            }
            sum = &sum + e;
        }
        let err = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if err > POVM_TOL {
            return Err(Error::InvalidPovm(format!("elements sum to identity only within {err:e}")));
        }
        Ok(Povm { elements })
    }

    /// Rank-one projectors onto the given (normalized) kets.
    pub fn projective(kets: &[Vec<C64>]) -> Result<Self> {
        Povm::new(kets.iter().map(|k| ComplexMatrix::outer(k)).collect())
    }

    /// Projectors onto the eigenvectors of a Hermitian operator, such as an
    /// SLD.
    pub fn eigenbasis(op: &ComplexMatrix) -> Result<Self> {
        let eig = herm_eig(op)?;
        Povm::projective(&(0..op.dim()).map(|k| eig.vector(k)).collect::<Vec<_>>())
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Outcome probabilities tr(Π_x ρ).
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: rho.dim() });
        }
        Ok(self.elements.iter().map(|e| trace_product(e, rho.mat())).collect())
    }
}

/// Re tr(AB).
fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Σ_x (∂p_x)²/p_x for outcomes with p_x above [`PROB_CUTOFF`].
pub fn classical_fi<F>(builder: F, theta: f64, povm: &Povm) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityMatrix>,
{
    let rho = builder(theta)?;
    let drho = drho_dtheta(&builder, theta, None)?;
    classical_fi_from_derivative(&rho, &drho, povm)
}

pub fn classical_fi_from_derivative(rho: &DensityMatrix, drho: &ComplexMatrix, povm: &Povm) -> Result<f64> {
    check_pair(rho, drho)?;
    let p = povm.probabilities(rho)?;
    Ok(povm
        .elements
        .iter()
        .zip(p)
        .filter(|(_, p)| *p > PROB_CUTOFF)
        .map(|(e, p)| {
            let dp = trace_product(e, drho);
            dp * dp / p
        })
        .sum())
}

/// Products of y_± = (|g⟩ ± i|e⟩)/√2 on `n_ancillas` qubits; bit 0 of each
/// factor selects y_+.
pub fn optimal_measurement_basis(n_ancillas: usize) -> Result<Povm> {
    if n_ancillas == 0 {
        return Err(Error::param("need at least one qubit"));
    }
    let dim = 1usize.checked_shl(n_ancillas as u32).filter(|&d| d > 0).unwrap_or(usize::MAX);
    guard_dim(dim)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let y = [
        ComplexMatrix::outer(&[C64::new(s, 0.0), C64::new(0.0, s)]),
        ComplexMatrix::outer(&[C64::new(s, 0.0), C64::new(0.0, -s)]),
    ];
    let elements = (0..dim)
        .map(|idx| {
            (0..n_ancillas).try_fold(ComplexMatrix::identity(1), |acc, k| {
                let bit = (idx >> (n_ancillas - 1 - k)) & 1;
                kron(&acc, &y[bit])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Povm::new(elements)
}

/// Per-ancilla QFI increment Δ for ZZ collisions at g·τ_SA = π/2 with |+_x⟩
/// ancillas, as a function of n̄ and the effective rate Γ = γ(2n̄+1)τ.
///
/// At that coupling the ancilla record is diagonal in the product y basis and
/// is the trajectory of a two-state Markov chain: the sign of S's σ_z in each
/// collision, which relaxes between collisions with x = e^{−Γ}. Writing
/// q = n̄/(2n̄+1) and a = 1 − x, the flip probabilities are qa (g→e) and
/// (1−q)a (e→g), and Δ is the stationary average of the Fisher information of
/// one transition with γτ held fixed:
///
/// ```text
/// d₁ = (a + 2n̄Γx)/(2n̄+1)²,   d₂ = (−a + 2(n̄+1)Γx)/(2n̄+1)²
/// Δ = (1−q) d₁²/(qa(1−qa)) + q d₂²/((1−q)a(1−(1−q)a))
/// ```
///
/// Δ vanishes as Γ → 0 and tends to [`thermal_fi_nbar`] as Γ → ∞.
pub fn delta_analytic(nbar: f64, gamma_eff: f64) -> Result<f64> {
    if !(nbar > 0.0 && nbar.is_finite()) {
        return Err(Error::param(format!("nbar must be > 0, got {nbar}")));
    }
    if !(gamma_eff >= 0.0) {
        return Err(Error::param(format!("effective rate must be >= 0, got {gamma_eff}")));
    }
    if gamma_eff == 0.0 {
        return Ok(0.0);
    }
    let z = 2.0 * nbar + 1.0;
    let (_, q) = gibbs_populations(nbar);
    let x = (-gamma_eff).exp();
    let a = -(-gamma_eff).exp_m1();
    if x == 0.0 {
        return thermal_fi_nbar(nbar);
    }
    let d1 = (a + 2.0 * nbar * gamma_eff * x) / (z * z);
    let d2 = (-a + 2.0 * (nbar + 1.0) * gamma_eff * x) / (z * z);
    let up = q * a;
    let down = (1.0 - q) * a;
    Ok((1.0 - q) * d1 * d1 / (up * (1.0 - up)) + q * d2 * d2 / (down * (1.0 - down)))
}

/// F_N = F_th + (N − 1)Δ.
pub fn qfi_deterministic_n(nbar: f64, gamma_eff: f64, n_ancillas: usize) -> Result<f64> {
    if n_ancillas == 0 {
        return Err(Error::param("need at least one ancilla"));
    }
    Ok(thermal_fi_nbar(nbar)? + (n_ancillas - 1) as f64 * delta_analytic(nbar, gamma_eff)?)
}

/// Which parameters a [`ParamPoint`] estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    NbarOnly,
    NbarAndGamma,
}

/// A point in (n̄, γ) space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamPoint {
    pub nbar: f64,
    pub gamma: f64,
    pub which: Which,
}

impl ParamPoint {
    pub fn new(nbar: f64, gamma: f64, which: Which) -> Result<Self> {
        if !(nbar > 0.0 && gamma > 0.0 && nbar.is_finite() && gamma.is_finite()) {
            return Err(Error::param("parameter point needs nbar > 0 and gamma > 0"));
        }
        Ok(ParamPoint { nbar, gamma, which })
    }

    fn coords(&self) -> Vec<f64> {
        match self.which {
            Which::NbarOnly => vec![self.nbar],
            Which::NbarAndGamma => vec![self.nbar, self.gamma],
        }
    }
}

/// QFI matrix Re tr(ρ L_a L_b) of a multi-parameter family, with central
/// differences in each coordinate.
pub fn qfi_matrix<F>(builder: F, point: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<DensityMatrix>,
{
    if point.is_empty() {
        return Err(Error::param("empty parameter point"));
    }
    let rho = builder(point)?;
    let derivs = (0..point.len())
        .map(|a| {
            drho_dtheta(
                |t| {
                    let mut p = point.to_vec();
                    p[a] = t;
                    builder(&p)
                },
                point[a],
                None,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    // a parameter the state barely depends on yields a derivative made of
    // rounding noise, whose correlations with the others are meaningless
    for (a, d) in derivs.iter().enumerate() {
        let noise = f64::EPSILON * rho.mat().max_abs() / default_step(point[a]);
        if d.max_abs() < FD_RESOLUTION * noise {
            return Err(Error::Singular(format!(
                "state derivative in parameter {a} ({:e}) is below finite-difference resolution",
                d.max_abs()
            )));
        }
    }
    let f = fisher_entries(&rho, &derivs)?;
    let scale = f.diagonal().iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let min = SymmetricEigen::new(f.clone()).eigenvalues.min();
    if min < -1e-8 * scale.max(1.0) {
        return Err(Error::NotPsd(min));
    }
    Ok(f)
}

/// QFI with respect to n̄ (γ and the waiting times fixed) of the joint
/// ancilla state produced by `config`.
pub fn chain_qfi(env: &EnvironmentParams, config: &ChainConfig) -> Result<f64> {
    qfi_of_state(|nb| chain_state(nb, env.gamma, config), env.nbar)
}

/// QFI matrix of the joint ancilla state at `point`, derivatives at fixed
/// waiting times.
pub fn chain_qfi_matrix(point: &ParamPoint, config: &ChainConfig) -> Result<DMatrix<f64>> {
    let gamma = point.gamma;
    match point.which {
        Which::NbarOnly => qfi_matrix(|p| chain_state(p[0], gamma, config), &point.coords()),
        Which::NbarAndGamma => qfi_matrix(|p| chain_state(p[0], p[1], config), &point.coords()),
    }
}

fn chain_state(nbar: f64, gamma: f64, config: &ChainConfig) -> Result<DensityMatrix> {
    Ok(config.run(&EnvironmentParams::new(nbar, gamma)?)?.joint_ancillas)
}

/// R = tr(ℱ⁻¹) / Σ_a 1/ℱ_aa ≥ 1, equal to 1 when the parameters are
/// independent.
///
/// Works on the unit-diagonal correlation matrix C = DℱD, D = diag(ℱ_aa^−½),
/// so that parameters with very different information scales do not lose
/// precision: tr(ℱ⁻¹) = Σ_a (C⁻¹)_aa / ℱ_aa.
pub fn ratio_r(f: &DMatrix<f64>) -> Result<f64> {
    if f.nrows() != f.ncols() || f.nrows() == 0 {
        return Err(Error::param("Fisher matrix must be square and nonempty"));
    }
    let diag: Vec<f64> = f.diagonal().iter().copied().collect();
    if let Some(d) = diag.iter().find(|&&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Singular(format!("Fisher matrix has diagonal entry {d:e}")));
    }
    let n = f.nrows();
    let corr = DMatrix::from_fn(n, n, |a, b| f[(a, b)] / (diag[a] * diag[b]).sqrt());
    let eig = SymmetricEigen::new(corr);
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::Singular(format!("correlation matrix eigenvalues span [{min:e}, {max:e}]")));
    }
    let trace_inv: f64 = (0..n)
        .map(|a| {
            let c_inv: f64 = (0..n).map(|k| eig.eigenvectors[(a, k)].powi(2) / eig.eigenvalues[k]).sum();
            c_inv / diag[a]
        })
        .sum();
    let diag_inv: f64 = diag.iter().map(|d| 1.0 / d).sum();
    Ok(trace_inv / diag_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_chain;
    use crate::model::{ancilla_plus_x, gibbs_state, CollisionSpec, InteractionKind};
    use crate::qmat::{random_density_matrix, random_hermitian, unitary_from_hamiltonian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};

    fn gibbs(nb: f64) -> Result<DensityMatrix> {
        gibbs_state(nb)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn thermal_fi_values() {
        assert!(rel(thermal_fi_nbar(1.0).unwrap(), 1.0 / 18.0) < 1e-15);
        assert!(rel(thermal_fi_nbar(2.0).unwrap(), 1.0 / 150.0) < 1e-15);
        assert!(thermal_fi_nbar(0.0).is_err());
        for &nb in &[0.1, 0.5, 1.0, 2.0, 3.0] {
            let q = qfi_of_state(gibbs, nb).unwrap();
            assert!(rel(q, thermal_fi_nbar(nb).unwrap()) < 1e-6, "nbar={nb}");
        }
    }

    #[test]
    fn temperature_conversion() {
        let (omega, t) = (1.0, 1.0);
        let nb = crate::model::nbar_from_temperature(omega, t).unwrap();
        assert!((nb - 0.581_976_706_869_326_4).abs() < 1e-14);
        let h = 1e-5;
        let fd = (crate::model::nbar_from_temperature(omega, t + h).unwrap()
            - crate::model::nbar_from_temperature(omega, t - h).unwrap())
            / (2.0 * h);
        let d = dnbar_dtemperature(omega, t).unwrap();
        assert!(rel(d, fd) < 1e-8);
        let f = thermal_fi_temperature(omega, t).unwrap();
        assert!(rel(f, thermal_fi_nbar(nb).unwrap() * d * d) < 1e-15);
        // QFI of the family T ↦ Gibbs(n̄(T))
        let direct = qfi_of_state(|tt| gibbs(crate::model::nbar_from_temperature(omega, tt)?), t).unwrap();
        assert!(rel(f, direct) < 1e-6);
        // high temperature: F·T² stays finite and positive
        for &tt in &[1e2, 1e4] {
            let v = thermal_fi_temperature(omega, tt).unwrap() * tt * tt;
            assert!(v.is_finite() && v > 0.0);
        }
        assert!(thermal_fi_temperature(1.0, 0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let zero = drho_dtheta(|_| gibbs(1.0), 1.0, None).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let d = drho_dtheta(gibbs, 1.0, None).unwrap();
        assert!((d[(1, 1)].re - 1.0 / 9.0).abs() < 1e-7);
        assert!((d[(0, 0)].re + 1.0 / 9.0).abs() < 1e-7);
        assert!(d.trace().norm() < 1e-9);

        // central-difference error shrinks as h²
        let f = |nb: f64| -> Result<DensityMatrix> {
            let spec = CollisionSpec::zz_optimal();
            Ok(run_chain(&EnvironmentParams::new(nb, 1.0)?, &spec, 2, &[0.7], &gibbs(nb)?)?.joint_ancillas)
        };
        let exact = drho_dtheta_with(f, 1.0, Some(1e-3), Derivative::Richardson).unwrap();
        let e1 = drho_dtheta(f, 1.0, Some(0.04)).unwrap().max_abs_diff(&exact);
        let e2 = drho_dtheta(f, 1.0, Some(0.02)).unwrap().max_abs_diff(&exact);
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn sld_commuting_case() {
        let (p, q) = (0.3, 0.1);
        let rho = DensityMatrix::qubits(ComplexMatrix::from_real_diagonal(&[p, 1.0 - p])).unwrap();
        let drho = ComplexMatrix::from_real_diagonal(&[q, -q]);
        let l = sld(&rho, &drho).unwrap();
        assert!(l.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[q / p, -q / (1.0 - p)])) < 1e-14);
        assert_eq!(sld(&rho, &ComplexMatrix::zeros(2)).unwrap().max_abs(), 0.0);
        assert!(sld(&rho, &ComplexMatrix::zeros(4)).is_err());
    }

    #[test]
    fn pure_state_qfi_is_four_variances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let h = random_hermitian(4, &mut rng);
            let psi = random_density_matrix(&[2, 2], &mut rng);
            let eig = herm_eig(psi.mat()).unwrap();
            let ket = eig.vector(3);
            let pure = DensityMatrix::pure(&ket).unwrap();
            let family = |t: f64| -> Result<DensityMatrix> {
                let u = unitary_from_hamiltonian(&h, t)?;
                DensityMatrix::qubits(&(&u * pure.mat()) * &u.adjoint())
            };
            let mean = trace_product(pure.mat(), &h);
            let h2 = &h * &h;
            let var = trace_product(pure.mat(), &h2) - mean * mean;
            assert!(rel(qfi_of_state(family, 0.0).unwrap(), 4.0 * var) < 1e-7);
        }
    }

    #[test]
    fn mixed_qubit_bloch_formula() {
        // r(θ) = (0.6 cos θ, 0.6 sin θ, 0.3θ): F = |∂r|² + (r·∂r)²/(1 − |r|²)
        let bloch = |t: f64| [0.6 * t.cos(), 0.6 * t.sin(), 0.3 * t];
        let family = |t: f64| -> Result<DensityMatrix> {
            let r = bloch(t);
            let m = ComplexMatrix::from_rows(&[
                C64::new(0.5 * (1.0 - r[2]), 0.0),
                C64::new(0.5 * r[0], -0.5 * r[1]),
                C64::new(0.5 * r[0], 0.5 * r[1]),
                C64::new(0.5 * (1.0 + r[2]), 0.0),
            ]);
            DensityMatrix::qubits(m)
        };
        let t = 0.8;
        let r = bloch(t);
        let dr = [-0.6 * t.sin(), 0.6 * t.cos(), 0.3];
        let dot: f64 = r.iter().zip(&dr).map(|(a, b)| a * b).sum();
        let r2: f64 = r.iter().map(|a| a * a).sum();
        let dr2: f64 = dr.iter().map(|a| a * a).sum();
        let expect = dr2 + dot * dot / (1.0 - r2);
        assert!(rel(qfi_of_state(family, t).unwrap(), expect) < 1e-8);
    }

    #[test]
    fn sld_residual_and_eigenbasis_povm() {
        let nb = 1.0;
        let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, 0.4).unwrap();
        let b = |x: f64| chain_state(x, 1.0, &cfg);
        let rho = b(nb).unwrap();
        let d = drho_dtheta(b, nb, None).unwrap();
        let l = sld(&rho, &d).unwrap();
        assert!(sld_residual(&rho, &d, &l).unwrap() < 1e-8);
        let qfi = qfi_from_derivative(&rho, &d).unwrap();
        let trl2 = trace_product(rho.mat(), &(&l * &l));
        assert!(rel(qfi, trl2) < 1e-10);
        let povm = Povm::eigenbasis(&l).unwrap();
        assert!(rel(classical_fi(b, nb, &povm).unwrap(), qfi) < 1e-6);
        let trivial = Povm::new(vec![ComplexMatrix::identity(4)]).unwrap();
        assert!(classical_fi(b, nb, &trivial).unwrap() < 1e-18);
    }

    #[test]
    fn single_ancilla_law() {
        for &nb in &[0.5, 1.0, 2.0] {
            let fth = thermal_fi_nbar(nb).unwrap();
            for &gt in &[0.0, FRAC_PI_8, FRAC_PI_4, FRAC_PI_2] {
                let spec = CollisionSpec::new(InteractionKind::Zz, gt, ancilla_plus_x()).unwrap();
                let cfg = ChainConfig::deterministic(spec, 1, 0.0).unwrap();
                let q = chain_qfi(&EnvironmentParams::new(nb, 1.0).unwrap(), &cfg).unwrap();
                let expect = (1.0 - (2.0 * gt).cos()) / 2.0;
                assert!((q / fth - expect).abs() < 1e-6, "nbar={nb} g_tau={gt}: {}", q / fth);
            }
        }
    }

    /// Fisher information of the two-state Markov trajectory, by enumerating
    /// all 2^N sequences.
    fn markov_enumeration(nb: f64, gamma_eff: f64, n: usize) -> f64 {
        let probs = |nb: f64| -> Vec<f64> {
            let q = nb / (2.0 * nb + 1.0);
            // hold γτ fixed while n̄ moves
            let gt = gamma_eff / (2.0 * 1.0 + 1.0);
            let a = -(-(gt * (2.0 * nb + 1.0))).exp_m1();
            let t = [[1.0 - q * a, q * a], [(1.0 - q) * a, 1.0 - (1.0 - q) * a]];
            let pi = [1.0 - q, q];
            (0..1usize << n)
                .map(|seq| {
                    let bit = |k: usize| (seq >> k) & 1;
                    (1..n).fold(pi[bit(0)], |p, k| p * t[bit(k - 1)][bit(k)])
                })
                .collect()
        };
        let h = 1e-6;
        let (p, pp, pm) = (probs(nb), probs(nb + h), probs(nb - h));
        p.iter()
            .zip(pp.iter().zip(&pm))
            .map(|(p, (a, b))| {
                let d = (a - b) / (2.0 * h);
                d * d / p
            })
            .sum()
    }

    #[test]
    fn delta_matches_markov_enumeration() {
        // nbar = 1 so the fixed γτ above corresponds to gamma_eff at the point
        for &g in &[0.1, 0.5, 2.0, 5.0] {
            let f3 = markov_enumeration(1.0, g, 3);
            let expect = qfi_deterministic_n(1.0, g, 3).unwrap();
            assert!(rel(f3, expect) < 1e-6, "Gamma={g}");
        }
    }

    #[test]
    fn delta_limits_and_chain_oracle() {
        assert_eq!(delta_analytic(1.0, 0.0).unwrap(), 0.0);
        assert!(delta_analytic(1.0, 1e-6).unwrap() < 1e-5);
        assert!(rel(delta_analytic(1.5, 60.0).unwrap(), thermal_fi_nbar(1.5).unwrap()) < 1e-12);
        assert!(rel(delta_analytic(1.5, 1e4).unwrap(), thermal_fi_nbar(1.5).unwrap()) < 1e-15);
        assert!(delta_analytic(1.0, -1.0).is_err());
        assert!(delta_analytic(0.0, 1.0).is_err());

        let (nb, g) = (1.0, 2.0);
        let tau = g / (2.0 * nb + 1.0);
        let env = EnvironmentParams::new(nb, 1.0).unwrap();
        let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, tau).unwrap();
        let f2 = chain_qfi(&env, &cfg).unwrap();
        assert!(rel(f2 - thermal_fi_nbar(nb).unwrap(), delta_analytic(nb, g).unwrap()) < 1e-6);

        let cfg4 = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 4, tau).unwrap();
        let f4 = chain_qfi(&env, &cfg4).unwrap();
        assert!(rel(f4, qfi_deterministic_n(nb, g, 4).unwrap()) < 1e-5);
        assert_eq!(qfi_deterministic_n(nb, g, 1).unwrap(), thermal_fi_nbar(nb).unwrap());
        assert!(rel(qfi_deterministic_n(nb, 50.0, 3).unwrap(), 3.0 * thermal_fi_nbar(nb).unwrap()) < 1e-6);
    }

    #[test]
    fn y_basis_povm() {
        let one = optimal_measurement_basis(1).unwrap();
        let expect = ComplexMatrix::from_rows(&[
            C64::new(0.5, 0.0),
            C64::new(0.0, -0.5),
            C64::new(0.0, 0.5),
            C64::new(0.5, 0.0),
        ]);
        assert!(one.elements()[0].max_abs_diff(&expect) < 1e-15);
        let minus = ComplexMatrix::from_fn(2, |i, j| expect[(i, j)].conj());
        assert!(one.elements()[1].max_abs_diff(&minus) < 1e-15);
        let three = optimal_measurement_basis(3).unwrap();
        assert_eq!(three.elements().len(), 8);
        let sum = three.elements().iter().fold(ComplexMatrix::zeros(8), |a, e| &a + e);
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-15);
        assert!(optimal_measurement_basis(14).is_err());
    }

    #[test]
    fn y_basis_is_optimal_on_zz_chains() {
        for &nb in &[0.5, 2.0] {
            for &g in &[0.1, 1.0, 5.0] {
                let tau = g / (2.0 * nb + 1.0);
                for n in 1..=3 {
                    let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), n, tau).unwrap();
                    let b = |x: f64| chain_state(x, 1.0, &cfg);
                    let q = qfi_of_state(b, nb).unwrap();
                    let c = classical_fi(b, nb, &optimal_measurement_basis(n).unwrap()).unwrap();
                    assert!(rel(c, q) < 1e-6, "nbar={nb} Gamma={g} N={n}");
                }
            }
        }
    }

    #[test]
    fn povm_validation() {
        assert!(Povm::new(vec![]).is_err());
        assert!(Povm::new(vec![ComplexMatrix::from_real_diagonal(&[1.0, 0.5])]).is_err());
        assert!(Povm::new(vec![
            ComplexMatrix::from_real_diagonal(&[1.5, 0.5]),
            ComplexMatrix::from_real_diagonal(&[-0.5, 0.5])
        ])
        .is_err());
    }

    #[test]
    fn product_states_add() {
        let a = |nb: f64| gibbs(nb);
        let b = |nb: f64| -> Result<DensityMatrix> {
            let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 1, 0.0)?;
            chain_state(nb, 1.0, &cfg)
        };
        let both = |nb: f64| a(nb)?.tensor(&b(nb)?);
        let sum = qfi_of_state(a, 0.7).unwrap() + qfi_of_state(b, 0.7).unwrap();
        assert!(rel(qfi_of_state(both, 0.7).unwrap(), sum) < 1e-8);
    }

    #[test]
    fn ratio_examples() {
        let diag = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        assert!((ratio_r(&diag).unwrap() - 1.0).abs() < 1e-15);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((ratio_r(&m).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(ratio_r(&sing), Err(Error::Singular(_))));
        // badly scaled but uncorrelated
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 1e-12, 1e-12, 1e-11]);
        let r = ratio_r(&skew).unwrap();
        assert!(r >= 1.0 && r - 1.0 < 1e-9, "{r}");
    }

    #[test]
    fn qfi_matrix_on_chains() {
        let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, 0.5).unwrap();
        let p = ParamPoint::new(1.0, 1.0, Which::NbarAndGamma).unwrap();
        let f = chain_qfi_matrix(&p, &cfg).unwrap();
        assert!(f[(0, 0)] > 0.0 && f[(1, 1)] > 0.0);
        assert!(ratio_r(&f).unwrap() >= 1.0);
        let only = chain_qfi_matrix(&ParamPoint::new(1.0, 1.0, Which::NbarOnly).unwrap(), &cfg).unwrap();
        assert!(rel(only[(0, 0)], f[(0, 0)]) < 1e-12);
        let y = optimal_measurement_basis(2).unwrap();
        let c = classical_fi(|x| chain_state(x, 1.0, &cfg), 1.0, &y).unwrap();
        assert!(c <= f[(0, 0)] + 1e-6);

        // long waits: γ is no longer imprinted on the record
        let long = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, 50.0 / 3.0).unwrap();
        assert!(matches!(chain_qfi_matrix(&p, &long), Err(Error::Singular(_))));
        let moderate = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, 10.0 / 3.0).unwrap();
        let g = chain_qfi_matrix(&p, &moderate).unwrap();
        assert!(g[(1, 1)] < 1e-2 * f[(1, 1)]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_basis(seed: u64) -> Povm {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = unitary_from_hamiltonian(&random_hermitian(4, &mut rng), 1.0).unwrap();
            let kets: Vec<Vec<C64>> = (0..4).map(|c| (0..4).map(|r| u[(r, c)]).collect()).collect();
            Povm::projective(&kets).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn classical_never_beats_quantum(seed in any::<u64>(), nb in 0.2f64..3.0, tau in 0.01f64..3.0) {
                let cfg = ChainConfig::deterministic(CollisionSpec::zz_optimal(), 2, tau).unwrap();
                let b = |x: f64| chain_state(x, 1.0, &cfg);
                let q = qfi_of_state(b, nb).unwrap();
                let c = classical_fi(b, nb, &random_basis(seed)).unwrap();
                prop_assert!(c <= q + 1e-6);
                prop_assert!(q >= 0.0);
            }

            #[test]
            fn sld_solves_lyapunov(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_density_matrix(&[2, 2], &mut rng);
                let h = random_hermitian(4, &mut rng);
                // tangent of a unitary orbit: ∂ρ = −i[H, ρ]
                let comm = &(&h * rho.mat()) - &(rho.mat() * &h);
                let drho = comm.scale(C64::new(0.0, -1.0));
                let l = sld(&rho, &drho).unwrap();
                prop_assert!(sld_residual(&rho, &drho, &l).unwrap() < 1e-8);
            }

            #[test]
            fn ratio_at_least_one(a in 0.1f64..10.0, b in 0.1f64..10.0, c in -0.99f64..0.99) {
                let off = c * (a * b).sqrt();
                let m = DMatrix::from_row_slice(2, 2, &[a, off, off, b]);
                let r = ratio_r(&m).unwrap();
                prop_assert!(r >= 1.0 - 1e-12);
                prop_assert!((r - 1.0 / (1.0 - c * c)).abs() < 1e-9 * r);
            }
        }
    }
}
