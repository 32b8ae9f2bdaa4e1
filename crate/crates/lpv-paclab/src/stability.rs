//! Quadratic-stability certificates and weighted H2 norms.
//!
//! A family is certified at decay weight `lambda` by a `Q > 0` satisfying
//!
//! ```text
//! A_0^T Q + Q A_0 + sum_{i>=1} A_i^T Q A_i + sum_{i>=0} C_i^T C_i < -lambda Q
//! ```
//!
//! The module solves the *equality* counterpart (a generalized Lyapunov
//! equation in the shifted matrix `A_0 + (lambda/2) I`), whose solution is the
//! kernel-energy Gramian: `sum_i trace(B_i^T Q B_i)` is exactly the squared
//! lambda-weighted H2 norm. A quadrature estimate of the kernel energies with
//! an explicit tail bound provides an independent numerical cross-check.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    log_norm, solve_with_condition, spectral_norm, symmetric_eigenvalues, unvec, vec_of, ExpCache,
};
use crate::lpv::{output_at_t_final, LpvSystem, Method, ThetaFamily};
use crate::signals::{l2_norm, PiecewiseConstantSignal};

/// Eigenvalues closer to zero than this are treated as zero when deciding
/// positive semidefiniteness (symmetrization roundoff).
const PSD_TOLERANCE: f64 = 1e-10;

/// Condition-number ceiling above which the Lyapunov operator is reported
/// singular.
const CONDITION_LIMIT: f64 = 1e12;

/// Outcome of a quadratic-stability check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub lambda: f64,
    /// Candidate Lyapunov matrix (row-major, n_x x n_x).
    pub q: Vec<Vec<f64>>,
    /// Most-positive eigenvalue of the symmetrized LMI residual; negative
    /// when the strict inequality holds.
    pub lmi_margin: f64,
    /// Smallest eigenvalue of `Q`; positive when `Q > 0`.
    pub q_min_eig: f64,
    /// `sum_i trace(B_i^T Q B_i)`, the squared-norm bound carried by `Q`.
    pub h2_sq_bound: f64,
    /// Number of scheduling channels of the certified system.
    pub n_p: usize,
}

impl StabilityCertificate {
    /// Certificate is valid iff the LMI holds strictly, `Q > 0` and
    /// `lambda >= n_p`.
    pub fn is_valid(&self) -> bool {
        self.lmi_margin < 0.0 && self.q_min_eig > 0.0 && self.lambda >= self.n_p as f64
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.q.len();
        DMatrix::from_row_iterator(n, n, self.q.iter().flatten().copied())
    }
}

fn q_rows(q: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..q.nrows())
        .map(|r| q.row(r).iter().copied().collect())
        .collect()
}

/// `sum_{i=0..n_p} C_i^T C_i`.
fn output_gram(sys: &LpvSystem) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(sys.n_x(), sys.n_x());
    for i in 0..=sys.n_p() {
        s += sys.c(i).transpose() * sys.c(i);
    }
    s
}

/// `sum_{i=0..n_p} trace(B_i^T Q B_i)`.
fn input_energy(sys: &LpvSystem, q: &DMatrix<f64>) -> f64 {
    (0..=sys.n_p())
        .map(|i| (sys.b(i).transpose() * q * sys.b(i)).trace())
        .sum()
}

/// Evaluate the stability LMI for a user-supplied candidate `Q`.
///
/// Forms `M = A_0^T Q + Q A_0 + sum A_i^T Q A_i + sum C_i^T C_i + lambda Q`
/// and reports its most-positive eigenvalue together with the smallest
/// eigenvalue of `Q` and the norm bound carried by `Q`.
pub fn lmi_check(sys: &LpvSystem, lambda: f64, q: &DMatrix<f64>) -> Result<StabilityCertificate> {
    let n = sys.n_x();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Config(format!(
            "Q must be {n}x{n}, got {}x{}",
            q.nrows(),
            q.ncols()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let asym = (q - q.transpose()).amax();
    if asym > 1e-12 * q.amax().max(1.0) {
        return Err(Error::Config(format!(
            "Q is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    let mut m = sys.a(0).transpose() * q + q * sys.a(0) + q * lambda;
    for i in 1..=sys.n_p() {
        m += sys.a(i).transpose() * q * sys.a(i);
    }
    m += output_gram(sys);
    let lmi_margin = symmetric_eigenvalues(&m).max();
    let q_min_eig = symmetric_eigenvalues(q).min();
    Ok(StabilityCertificate {
        lambda,
        q: q_rows(q),
        lmi_margin,
        q_min_eig,
        h2_sq_bound: input_energy(sys, q),
        n_p: sys.n_p(),
    })
}

/// Solve the generalized Lyapunov equality
/// `At^T Q + Q At + sum_i A_i^T Q A_i + sum_i C_i^T C_i = 0`
/// with `At = A_0 + (lambda/2) I`, by dense factorization over the `n_x^2`
/// unknowns of `vec(Q)`.
///
/// Fails when the operator is near-singular (condition above 1e12) or the
/// symmetrized solution has an eigenvalue below `-1e-10`; both outcomes mean
/// the family is not certifiable at this `lambda`, not that it is unstable.
pub fn solve_gen_lyapunov(sys: &LpvSystem, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = sys.n_x();
    let a_tilde = sys.a(0) + DMatrix::identity(n, n) * (lambda / 2.0);
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(At^T Q) = (I (x) At^T) vec(Q); vec(Q At) = (At^T (x) I) vec(Q);
    // vec(A_i^T Q A_i) = (A_i^T (x) A_i^T) vec(Q)   [column-stacking vec]
    let mut l = eye.kronecker(&a_tilde.transpose()) + a_tilde.transpose().kronecker(&eye);
    for i in 1..=sys.n_p() {
        l += sys.a(i).transpose().kronecker(&sys.a(i).transpose());
    }
    let rhs_mat = -output_gram(sys);
    let (x, cond) = solve_with_condition(&l, &vec_of(&rhs_mat)).map_err(|_| {
        Error::NotCertifiable(format!(
            "family not lambda-stable at lambda = {lambda}: singular operator"
        ))
    })?;
    if cond > CONDITION_LIMIT {
        return Err(Error::NotCertifiable(format!(
            "family not lambda-stable at lambda = {lambda}: operator condition {cond:.3e}"
        )));
    }
    let q = unvec(&x, n);
    let q = (&q + q.transpose()) * 0.5;
    let min_eig = symmetric_eigenvalues(&q).min();
    if min_eig < -PSD_TOLERANCE {
        return Err(Error::NotCertifiable(format!(
            "family not lambda-stable at lambda = {lambda}: solution indefinite (min eig {min_eig:.3e})"
        )));
    }
    // exact-solution residual, relative to the forcing term
    let mut residual = a_tilde.transpose() * &q + &q * &a_tilde;
    for i in 1..=sys.n_p() {
        residual += sys.a(i).transpose() * &q * sys.a(i);
    }
    residual += output_gram(sys);
    let denom = output_gram(sys).norm().max(f64::MIN_POSITIVE);
    let rel = residual.norm() / denom;
    if rel > 1e-10 {
        return Err(Error::Numerical(format!(
            "Lyapunov solve residual {rel:.3e} exceeds 1e-10"
        )));
    }
    Ok(q)
}

/// Squared lambda-weighted H2 norm via the Gramian identity:
/// `sum_i trace(B_i^T Q B_i)` with `Q` from [`solve_gen_lyapunov`].
pub fn h2_norm_sq(sys: &LpvSystem, lambda: f64) -> Result<f64> {
    let q = solve_gen_lyapunov(sys, lambda)?;
    Ok(input_energy(sys, &q))
}

/// Decay-envelope data for the sufficient condition: `||e^{A_0 t}|| <=
/// e^{-gamma t / 2}`, `Gamma >= n_p * sup_{i>=1} ||A_i||^2`, and spectral
/// norm bounds on the input/output matrices.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SufficientConditionInput {
    pub gamma: f64,
    pub big_gamma: f64,
    pub k_b: f64,
    pub k_c: f64,
}

impl SufficientConditionInput {
    pub fn new(gamma: f64, big_gamma: f64, k_b: f64, k_c: f64, n_p: usize) -> Result<Self> {
        if !(gamma > 0.0) || !(big_gamma >= 0.0) {
            return Err(Error::Config(format!(
                "need gamma > 0 and Gamma >= 0 (got gamma {gamma}, Gamma {big_gamma})"
            )));
        }
        if gamma < big_gamma + n_p as f64 {
            return Err(Error::Config(format!(
                "envelope requires gamma >= Gamma + n_p ({gamma} < {big_gamma} + {n_p})"
            )));
        }
        Ok(Self {
            gamma,
            big_gamma,
            k_b,
            k_c,
        })
    }

    /// Derive envelope data from a concrete system using the logarithmic
    /// norm: `||e^{A_0 t}|| <= e^{mu(A_0) t}` gives `gamma = -2 mu(A_0)`.
    pub fn from_system(sys: &LpvSystem) -> Result<Self> {
        let mu = log_norm(sys.a(0));
        if mu >= 0.0 {
            return Err(Error::NotCertifiable(format!(
                "log-norm of A_0 is {mu:.3e} >= 0; no exponential envelope available"
            )));
        }
        let gamma = -2.0 * mu;
        let sup_a_sq = (1..=sys.n_p())
            .map(|i| spectral_norm(sys.a(i)).powi(2))
            .fold(0.0_f64, f64::max);
        let big_gamma = sys.n_p() as f64 * sup_a_sq;
        let k_b = (0..=sys.n_p())
            .map(|i| spectral_norm(sys.b(i)))
            .fold(0.0_f64, f64::max);
        let k_c = (0..=sys.n_p())
            .map(|i| spectral_norm(sys.c(i)))
            .fold(0.0_f64, f64::max);
        Self::new(gamma, big_gamma, k_b, k_c, sys.n_p())
    }
}

/// The closed-form norm bound available under the decay envelope with
/// `Q = I`: `(n_p+1)^2 K_C^2 K_B^2 (1/lambda + 1/(gamma - lambda + Gamma))`,
/// valid for `n_p <= lambda <= gamma - Gamma`.
pub fn sufficient_bound(inp: &SufficientConditionInput, lambda: f64, n_p: usize) -> Result<f64> {
    if !(lambda > 0.0) || lambda < n_p as f64 || lambda > inp.gamma - inp.big_gamma {
        return Err(Error::Domain(format!(
            "lambda = {lambda} outside [n_p, gamma - Gamma] = [{}, {}]",
            n_p,
            inp.gamma - inp.big_gamma
        )));
    }
    let np1 = (n_p + 1) as f64;
    Ok(np1 * np1
        * inp.k_c.powi(2)
        * inp.k_b.powi(2)
        * (1.0 / lambda + 1.0 / (inp.gamma - lambda + inp.big_gamma)))
}

/// Lower estimate of the squared weighted H2 norm by simplex quadrature of
/// the kernel energies, plus a rigorous upper bound on everything left out.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelEnergyEstimate {
    /// `sum_{k <= K} int_{simplex, horizon} ||w||^2` (quadrature value).
    pub lower: f64,
    /// Envelope bound on the mass beyond the horizon and beyond order `K`.
    pub tail_bound: f64,
}

/// Numerically integrate the kernel energies `||w||^2` over the truncated
/// simplices (orders `k <= k_max`, leading coordinate below `horizon`) by a
/// nested composite midpoint rule with step `h`, and bound the remainder via
/// the decay envelope: the out-of-order mass forms a geometric series with
/// ratio `Gamma / (gamma - lambda)`.
///
/// Requires `lambda < gamma - Gamma`; otherwise no tail bound exists.
pub fn h2_kernel_estimate(
    sys: &LpvSystem,
    lambda: f64,
    k_max: usize,
    horizon: f64,
    h: f64,
    env: &SufficientConditionInput,
) -> Result<KernelEnergyEstimate> {
    if !(lambda >= 0.0) || !(horizon > 0.0) || !(h > 0.0) {
        return Err(Error::Config("lambda >= 0, horizon > 0, h > 0 required".into()));
    }
    let mu = env.gamma - lambda;
    if mu <= env.big_gamma {
        return Err(Error::Domain(format!(
            "tail bound unavailable: lambda = {lambda} >= gamma - Gamma = {}",
            env.gamma - env.big_gamma
        )));
    }
    let cells_per_level = (horizon / h).ceil();
    if k_max > 4 || cells_per_level.powi(k_max as i32 + 1) > 2.5e8 {
        return Err(Error::Resource(format!(
            "kernel-energy quadrature budget exceeded (k_max {k_max} > 4 or (horizon/h)^(k_max+1) = {:.2e} evaluations)",
            cells_per_level.powi(k_max as i32 + 1)
        )));
    }

    let n_p = sys.n_p();
    let mut cache = ExpCache::new(sys.a(0).clone());
    let mut lower = 0.0;
    for i_q in 0..=n_p {
        if sys.c(i_q).amax() == 0.0 {
            continue;
        }
        for i_r in 0..=n_p {
            if sys.b(i_r).amax() == 0.0 {
                continue;
            }
            for k in 0..=k_max {
                let mut index = vec![1usize; k];
                loop {
                    if index.iter().all(|&i| sys.a(i).amax() != 0.0) {
                        lower +=
                            energy_integral(sys, i_q, i_r, &index, lambda, horizon, h, &mut cache);
                    }
                    if !next_index(&mut index, n_p) {
                        break;
                    }
                }
            }
        }
    }

    // Horizon tail for kept orders: the envelope mass with leading coordinate
    // beyond `horizon`, via int_H^inf t^k e^{-mu t} dt / k!.
    let np1 = ((n_p + 1) * (n_p + 1)) as f64;
    let prefactor = np1 * env.k_c.powi(2) * env.k_b.powi(2);
    let mut tail = 0.0;
    for k in 0..=k_max {
        let mut series = 0.0;
        let mut term = 1.0;
        for j in 0..=k {
            if j > 0 {
                term *= mu * horizon / j as f64;
            }
            series += term;
        }
        tail +=
            env.big_gamma.powi(k as i32) * (-mu * horizon).exp() / mu.powi(k as i32 + 1) * series;
    }
    // Out-of-order mass: geometric series in Gamma/mu beyond k_max.
    let ratio = env.big_gamma / mu;
    tail += (1.0 / mu) * ratio.powi(k_max as i32 + 1) / (1.0 - ratio);
    Ok(KernelEnergyEstimate {
        lower,
        tail_bound: prefactor * tail,
    })
}

/// Advance a multi-index over `{1..n_p}^k` in lexicographic order.
pub(crate) fn next_index(index: &mut [usize], n_p: usize) -> bool {
    for slot in index.iter_mut().rev() {
        if *slot < n_p {
            *slot += 1;
            return true;
        }
        *slot = 1;
    }
    false
}

/// `int ||w_{iq,ir,I}||^2` over the descending simplex of order `k+1`
/// truncated at `horizon`, nested composite midpoint with step `h`.
#[allow(clippy::too_many_arguments)]
fn energy_integral(
    sys: &LpvSystem,
    i_q: usize,
    i_r: usize,
    index: &[usize],
    lambda: f64,
    horizon: f64,
    h: f64,
    cache: &mut ExpCache,
) -> f64 {
    let k = index.len();
    let mut tau = vec![0.0_f64; k + 1];
    recurse_energy(sys, i_q, i_r, index, lambda, horizon, h, cache, &mut tau, 0)
}

#[allow(clippy::too_many_arguments)]
fn recurse_energy(
    sys: &LpvSystem,
    i_q: usize,
    i_r: usize,
    index: &[usize],
    lambda: f64,
    upper: f64,
    h: f64,
    cache: &mut ExpCache,
    tau: &mut [f64],
    level: usize,
) -> f64 {
    let k = index.len();
    if upper <= 0.0 {
        return 0.0;
    }
    let n = ((upper / h).ceil() as usize).max(1);
    let w = upper / n as f64;
    let mut total = 0.0;
    for j in 0..n {
        let mid = (j as f64 + 0.5) * w;
        tau[level] = mid;
        let inner = if level == k {
            let m = kernel_matrix(sys, i_q, i_r, index, lambda, &tau[..=k], cache);
            m.iter().map(|v| v * v).sum::<f64>()
        } else {
            recurse_energy(sys, i_q, i_r, index, lambda, mid, h, cache, tau, level + 1)
        };
        total += w * inner;
    }
    total
}

/// The weighted kernel at a descending simplex point
/// `tau = (tau_{k+1}, ..., tau_1)`:
/// `C_{iq} e^{A_0 (tau_{k+1}-tau_k)} A_{i_k} ... A_{i_1} e^{A_0 tau_1} B_{ir}
///  e^{(lambda/2) tau_{k+1}}`.
pub(crate) fn kernel_matrix(
    sys: &LpvSystem,
    i_q: usize,
    i_r: usize,
    index: &[usize],
    lambda: f64,
    tau_desc: &[f64],
    cache: &mut ExpCache,
) -> DMatrix<f64> {
    let k = index.len();
    debug_assert_eq!(tau_desc.len(), k + 1);
    let mut m = sys.c(i_q).clone();
    for j in 0..k {
        m = m * cache.at(tau_desc[j] - tau_desc[j + 1]);
        // the multi-index is (i_1, ..., i_k); the factor next to C is A_{i_k}
        m = m * sys.a(index[k - 1 - j]);
    }
    m = m * cache.at(tau_desc[k]);
    m = m * sys.b(i_r);
    m * (lambda / 2.0 * tau_desc[0]).exp()
}

/// Verdict on whether a family member satisfies the admissible-set condition
/// `||Sigma(theta)||_{lambda,H2} < c_E`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    pub theta: [f64; 3],
    pub lambda: f64,
    pub c_e: f64,
    pub h2_sq: Option<f64>,
    pub h2: Option<f64>,
    pub is_member: bool,
    /// Why membership failed, when it failed for a reason other than the
    /// norm comparison.
    pub reason: Option<String>,
    pub certificate: Option<StabilityCertificate>,
}

/// Decide membership of `theta` in the admissible set of `family` by the
/// exact Gramian norm.
pub fn check_family(family: &ThetaFamily, theta: &[f64; 3]) -> MembershipReport {
    let base = MembershipReport {
        theta: *theta,
        lambda: family.lambda,
        c_e: family.c_e,
        h2_sq: None,
        h2: None,
        is_member: false,
        reason: None,
        certificate: None,
    };
    let sys = match family.system(theta) {
        Ok(s) => s,
        Err(e) => {
            return MembershipReport {
                reason: Some(e.to_string()),
                ..base
            }
        }
    };
    match solve_gen_lyapunov(&sys, family.lambda) {
        Ok(q) => {
            let h2_sq = input_energy(&sys, &q);
            let certificate = lmi_check(&sys, family.lambda, &q).ok();
            MembershipReport {
                h2_sq: Some(h2_sq),
                h2: Some(h2_sq.sqrt()),
                is_member: h2_sq.sqrt() < family.c_e,
                certificate,
                ..base
            }
        }
        Err(e) => MembershipReport {
            reason: Some(e.to_string()),
            ..base
        },
    }
}

/// Both sides of the output bound
/// `|y(T)| <= (n_p + 1) ||Sigma||_{lambda,H2} ||u||_{L2}`.
///
/// The left side is the RK4-simulated output magnitude at the horizon; the
/// right side combines the exact Gramian norm with the input energy.
pub fn output_bound_check(
    sys: &LpvSystem,
    lambda: f64,
    u: &PiecewiseConstantSignal,
    p: &PiecewiseConstantSignal,
) -> Result<(f64, f64)> {
    if sys.n_out() != 1 {
        return Err(Error::Config(
            "output bound applies to scalar-output systems".into(),
        ));
    }
    let h2 = h2_norm_sq(sys, lambda)?.sqrt();
    let step = u.ts() / 100.0;
    let y = output_at_t_final(sys, u, p, Method::Rk4, step)?;
    let lhs = y[0].abs();
    let rhs = (sys.n_p() + 1) as f64 * h2 * l2_norm(u);
    Ok((lhs, rhs))
}
