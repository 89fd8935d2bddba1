//! Random waiting times between collisions.
//!
//! Every distribution is parameterized by its mean. For the Weibull family
//! p(t) = (k/λ)(t/λ)^{k−1} e^{−(t/λ)^k} the scale is derived from the mean as
//! λ = mean / Γ(1 + 1/k), so curves with different shapes compare at equal
//! average collision rate. The exponential law is the k = 1 member.
//!
//! Averages over a distribution use Gauss–Legendre quadrature in the
//! probability variable u = F(t), which maps the half line onto (0, 1) and
//! absorbs the integrable singularity of k < 1 densities at t = 0. The map
//! t(u) itself is singular at the ends (like u^{1/k} near 0 and like
//! ln(1 − u)^{1/k} near 1), so (0, 1) is cut into panels that shrink
//! geometrically towards both ends, each with its own rule.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Gamma};
use statrs::function::gamma::gamma;

use crate::engine::ChainConfig;
use crate::error::{Error, Result};
use crate::fisher::{chain_qfi, delta_analytic};
use crate::model::{CollisionSpec, EnvironmentParams};

/// Nodes of the primary quadrature rule.
pub const QUAD_NODES: usize = 64;
/// Nodes of the refinement rule used as a convergence check.
pub const QUAD_CHECK_NODES: usize = 128;
/// Maximum relative change between the two rules.
pub const QUAD_TOL: f64 = 1e-8;
/// Panels shrink geometrically down to widths of 10^−PANEL_DEPTH at each end.
pub const PANEL_DEPTH: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WtdKind {
    Deterministic,
    Exponential,
    Weibull,
    Erlang,
}

/// A waiting-time distribution with a prescribed mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WtdSpec {
    pub kind: WtdKind,
    /// Weibull k or Erlang order; ignored otherwise.
    pub shape: f64,
    pub mean_tau: f64,
}

impl WtdSpec {
    pub fn new(kind: WtdKind, shape: f64, mean_tau: f64) -> Result<Self> {
        if !(mean_tau > 0.0 && mean_tau.is_finite()) {
            return Err(Error::param(format!("mean waiting time must be positive, got {mean_tau}")));
        }
        match kind {
            WtdKind::Weibull if !(shape > 0.0 && shape.is_finite()) => {
                return Err(Error::param(format!("Weibull shape must be positive, got {shape}")))
            }
            WtdKind::Erlang if !(shape >= 1.0 && shape.fract() == 0.0 && shape.is_finite()) => {
                return Err(Error::param(format!("Erlang order must be a positive integer, got {shape}")))
            }
            _ => {}
        }
        let shape = match kind {
            WtdKind::Exponential => 1.0,
            WtdKind::Deterministic => f64::INFINITY,
            _ => shape,
        };
        Ok(WtdSpec { kind, shape, mean_tau })
    }

    pub fn deterministic(mean_tau: f64) -> Result<Self> {
        WtdSpec::new(WtdKind::Deterministic, f64::INFINITY, mean_tau)
    }

    pub fn exponential(mean_tau: f64) -> Result<Self> {
        WtdSpec::new(WtdKind::Exponential, 1.0, mean_tau)
    }

    pub fn weibull(k: f64, mean_tau: f64) -> Result<Self> {
        WtdSpec::new(WtdKind::Weibull, k, mean_tau)
    }

    pub fn erlang(order: u32, mean_tau: f64) -> Result<Self> {
        WtdSpec::new(WtdKind::Erlang, order as f64, mean_tau)
    }

    /// The same shape with a different mean.
    pub fn with_mean(&self, mean_tau: f64) -> Result<Self> {
        WtdSpec::new(self.kind, self.shape, mean_tau)
    }

    /// Weibull scale λ = mean / Γ(1 + 1/k).
    pub fn scale(&self) -> f64 {
        match self.kind {
            WtdKind::Exponential => self.mean_tau,
            WtdKind::Weibull => self.mean_tau / gamma(1.0 + 1.0 / self.shape),
            WtdKind::Erlang => self.mean_tau / self.shape,
            WtdKind::Deterministic => self.mean_tau,
        }
    }

    /// Mean implied by the distribution parameters; equals `mean_tau` up to
    /// rounding.
    pub fn realized_mean(&self) -> f64 {
        match self.kind {
            WtdKind::Weibull | WtdKind::Exponential => self.scale() * gamma(1.0 + 1.0 / self.shape),
            WtdKind::Erlang => self.shape * self.scale(),
            WtdKind::Deterministic => self.mean_tau,
        }
    }

    fn erlang_dist(&self) -> Gamma {
        Gamma::new(self.shape, 1.0 / self.scale()).expect("validated Erlang parameters")
    }

    fn weibull_k(&self) -> f64 {
        self.shape
    }

    /// Probability density. Not defined for the deterministic law.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::param(format!("waiting time must be >= 0, got {t}")));
        }
        match self.kind {
            WtdKind::Deterministic => Err(Error::param("the deterministic law is a point mass without a density")),
            WtdKind::Erlang => Ok(self.erlang_dist().pdf(t)),
            WtdKind::Weibull | WtdKind::Exponential => {
                let (k, lam) = (self.weibull_k(), self.scale());
                if t == 0.0 {
                    return Ok(match k {
                        k if k < 1.0 => f64::INFINITY,
                        1.0 => 1.0 / lam,
                        _ => 0.0,
                    });
                }
                let x = t / lam;
                Ok(k / lam * x.powf(k - 1.0) * (-x.powf(k)).exp())
            }
        }
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::param(format!("waiting time must be >= 0, got {t}")));
        }
        Ok(match self.kind {
            WtdKind::Deterministic => f64::from(u8::from(t >= self.mean_tau)),
            WtdKind::Erlang => self.erlang_dist().cdf(t),
            WtdKind::Weibull | WtdKind::Exponential => -(-(t / self.scale()).powf(self.weibull_k())).exp_m1(),
        })
    }

    /// Inverse CDF on [0, 1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::param(format!("probability must lie in [0, 1), got {u}")));
        }
        Ok(match self.kind {
            WtdKind::Deterministic => self.mean_tau,
            WtdKind::Erlang => self.erlang_dist().inverse_cdf(u),
            WtdKind::Weibull | WtdKind::Exponential => self.scale() * (-(-u).ln_1p()).powf(1.0 / self.weibull_k()),
        })
    }

    /// Quantile given both u and 1 − u, so that the far tail keeps full
    /// relative precision.
    fn quantile_split(&self, u: f64, tail: f64) -> f64 {
        match self.kind {
            WtdKind::Deterministic => self.mean_tau,
            WtdKind::Erlang => self.erlang_dist().inverse_cdf(u.min(1.0 - f64::EPSILON / 2.0)),
            WtdKind::Weibull | WtdKind::Exponential => {
                let s = if u < 0.5 { -(-u).ln_1p() } else { -tail.ln() };
                self.scale() * s.powf(1.0 / self.weibull_k())
            }
        }
    }

    /// One draw: inverse CDF for Weibull, a sum of exponentials for Erlang.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let exp = |rng: &mut R, mean: f64| -mean * (-rng.random::<f64>()).ln_1p();
        match self.kind {
            WtdKind::Deterministic => self.mean_tau,
            WtdKind::Erlang => {
                let mean = self.scale();
                (0..self.shape as u64).map(|_| exp(rng, mean)).sum()
            }
            WtdKind::Weibull | WtdKind::Exponential => {
                self.scale() * (-(-rng.random::<f64>()).ln_1p()).powf(1.0 / self.weibull_k())
            }
        }
    }

    /// E[f(τ)], by quadrature over u = F(τ). The deterministic law evaluates
    /// `f` at the mean.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        expectation_with(self, |t| Ok(f(t)))
    }

    /// [`WtdSpec::expectation`] for fallible integrands.
    pub fn try_expectation(&self, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        expectation_with(self, f)
    }
}

/// Panel edges of the composite rule as (u, 1 − u) pairs, graded
/// geometrically towards both ends of (0, 1) where the integrand in u can
/// behave like a power of u or of ln(1 − u).
fn panel_edges() -> &'static [(f64, f64)] {
    static EDGES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    EDGES.get_or_init(|| {
        let mut edges = vec![(0.0, 1.0)];
        edges.extend((1..=PANEL_DEPTH).rev().map(|j| {
            let u = 10f64.powi(-(j as i32));
            (u, 1.0 - u)
        }));
        edges.push((0.5, 0.5));
        edges.extend((1..=PANEL_DEPTH).map(|j| {
            let t = 10f64.powi(-(j as i32));
            (1.0 - t, t)
        }));
        edges.push((1.0, 0.0));
        edges
    })
}

fn legendre(n: usize) -> &'static [(f64, f64)] {
    static RULES: OnceLock<[GaussLegendre; 2]> = OnceLock::new();
    let rules = RULES.get_or_init(|| {
        [QUAD_NODES, QUAD_CHECK_NODES].map(|n| GaussLegendre::new(NonZeroUsize::new(n).expect("nonzero")))
    });
    let rule = if n == QUAD_NODES { &rules[0] } else { &rules[1] };
    rule.as_node_weight_pairs()
}

/// ∫₀¹ f(τ(u)) du with an `n`-node rule on every panel.
fn composite(spec: &WtdSpec, n: usize, f: &impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let edges = panel_edges();
    let mut panels = Vec::with_capacity(edges.len() - 1);
    for (k, w) in edges.windows(2).enumerate() {
        let ((a, a_tail), (b, b_tail)) = (w[0], w[1]);
        // lower half: u is accurate; upper half: 1 − u is
        let lower = k < edges.len() / 2;
        let half = 0.5 * (b - a);
        let mut acc = Vec::with_capacity(n);
        for &(x, wt) in legendre(n) {
            let (u, tail) = if lower {
                let u = a + half * (x + 1.0);
                (u, 1.0 - u)
            } else {
                let tail = b_tail + 0.5 * (a_tail - b_tail) * (1.0 - x);
                (1.0 - tail, tail)
            };
            acc.push(half * wt * f(spec.quantile_split(u, tail))?);
        }
        panels.push(pairwise_sum(&acc));
    }
    Ok(pairwise_sum(&panels))
}

fn expectation_with(spec: &WtdSpec, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if spec.kind == WtdKind::Deterministic {
        return f(spec.mean_tau);
    }
    let coarse = composite(spec, QUAD_NODES, &f)?;
    let fine = composite(spec, QUAD_CHECK_NODES, &f)?;
    let diff = (fine - coarse).abs();
    if diff > QUAD_TOL * fine.abs() && diff > f64::MIN_POSITIVE {
        return Err(Error::NonConvergence(format!(
            "quadrature changed by {:e} between {QUAD_NODES} and {QUAD_CHECK_NODES} nodes per panel",
            diff / fine.abs()
        )));
    }
    Ok(fine)
}

/// Δ̄ = ∫ p(τ) Δ(n̄, γ(2n̄+1)τ) dτ for ZZ collisions at g·τ_SA = π/2.
pub fn average_delta(spec: &WtdSpec, nbar: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    let rate = gamma * (2.0 * nbar + 1.0);
    spec.try_expectation(|tau| delta_analytic(nbar, rate * tau))
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// The generator for sample `index` of a run seeded with `seed`. Streams are
/// independent of the order in which samples are evaluated.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean over waiting-time sequences of the joint-ancilla QFI of an
/// `n_ancillas` chain started from the Gibbs state.
///
/// Each sample draws N − 1 waiting times from its own stream, so the result
/// is bit-identical for a given seed however many threads run.
pub fn average_qfi_mc(
    spec: &WtdSpec,
    env: &EnvironmentParams,
    collision: &CollisionSpec,
    n_ancillas: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_ancillas < 2 {
        return Err(Error::param("Monte Carlo averaging needs at least two ancillas"));
    }
    if n_samples == 0 {
        return Err(Error::param("need at least one sample"));
    }
    // fail fast on the size guard before spawning work
    crate::qmat::guard_dim(1usize.checked_shl(n_ancillas as u32 + 1).filter(|&d| d > 0).unwrap_or(usize::MAX))?;
    let values = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let taus: Vec<f64> = (0..n_ancillas - 1).map(|_| spec.sample(&mut rng)).collect();
            chain_qfi(env, &ChainConfig::with_taus(collision.clone(), taus))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = n_samples as f64;
    let mean = pairwise_sum(&values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let std_error = if n_samples > 1 { (pairwise_sum(&dev) / (n - 1.0) / n).sqrt() } else { 0.0 };
    Ok(McEstimate { mean, std_error, n_samples })
}

/// Sum by recursive halving in fixed index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}
