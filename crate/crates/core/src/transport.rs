//! Coupling solvers: entropy-penalized scaling (IPFP) and exact optimal
//! transport over the transport polytope.
//!
//! For a gain matrix `G[i][j] = x_i' M y_j` the entropic problem
//! `max E_pi[X'MY] + T * Ent(pi)` has the Gibbs-form solution
//! `pi(i,j) = exp(G[i][j]/T + u_i + v_j)`; [`ipfp_solve`] finds the dual
//! scalings `u`, `v` by alternating marginal fits, entirely in the log
//! domain so temperatures down to `1e-3` and below stay finite.
//! [`ot_exact`] solves the unpenalized (`T = 0`) problem with a
//! transportation simplex and returns an optimal vertex of the polytope.

mod simplex;

use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::affinity::AffinityMatrix;
use crate::fmath;
use crate::marginals::DiscreteMarginal;

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    /// The affinity matrix dimensions do not match the marginal dimensions.
    ShapeMismatch {
        affinity: (usize, usize),
        marginals: (usize, usize),
    },
    NonPositiveTemperature {
        temperature: f64,
    },
    /// IPFP did not reach the marginal tolerance within the iteration budget.
    Convergence {
        iterations: usize,
        residual: f64,
    },
    /// Transportation simplex exceeded its pivot budget (should not happen on
    /// well-posed inputs; kept instead of looping forever).
    PivotLimit {
        pivots: usize,
    },
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportError::ShapeMismatch { affinity, marginals } => write!(
                f,
                "affinity matrix is {}x{} but marginals have dims {}x{}",
                affinity.0, affinity.1, marginals.0, marginals.1
            ),
            TransportError::NonPositiveTemperature { temperature } => {
                write!(f, "temperature {temperature} must be > 0")
            }
            TransportError::Convergence { iterations, residual } => write!(
                f,
                "IPFP did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            TransportError::PivotLimit { pivots } => {
                write!(f, "transportation simplex exceeded {pivots} pivots")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TransportError {}

/// Options for the IPFP scaling loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpfpOptions {
    pub max_iter: usize,
    /// Convergence threshold on the L1 marginal residual.
    pub marginal_tol: f64,
}

impl Default for IpfpOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            marginal_tol: 1e-10,
        }
    }
}

impl IpfpOptions {
    pub fn with_tol(marginal_tol: f64) -> Self {
        Self {
            marginal_tol,
            ..Self::default()
        }
    }
}

/// A joint probability table over atom pairs with prescribed marginals.
///
/// At temperature `T > 0` the dual potentials are the log scalings of the
/// Gibbs form `log pi = G/T + u + v` (up to the constant absorbed by the
/// kernel normalization). At temperature 0 the table is an optimal vertex of
/// the transport polytope and the potentials are the optimality duals of the
/// linear program, in value scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    probs: DMatrix<f64>,
    u: DVector<f64>,
    v: DVector<f64>,
    temperature: f64,
}

impl Coupling {
    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn potentials(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.u, &self.v)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn nrows(&self) -> usize {
        self.probs.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.probs.ncols()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// L1 distances of the table's row/column sums from the target weights.
    pub fn marginal_residuals(&self, p: &DiscreteMarginal, q: &DiscreteMarginal) -> (f64, f64) {
        let mut row = 0.0;
        for i in 0..self.nrows() {
            let s: f64 = self.probs.row(i).iter().sum();
            row += (s - p.weights()[i]).abs();
        }
        let mut col = 0.0;
        for j in 0..self.ncols() {
            let s: f64 = self.probs.column(j).iter().sum();
            col += (s - q.weights()[j]).abs();
        }
        (row, col)
    }
}

/// Cross-covariance matrix `sigma[i][j] = E_pi[X_i Y_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    sigma: DMatrix<f64>,
}

impl CrossCovariance {
    pub fn from_matrix(sigma: DMatrix<f64>) -> Self {
        debug_assert!(sigma.iter().all(|x| x.is_finite()));
        Self { sigma }
    }

    pub fn zeros(i: usize, j: usize) -> Self {
        Self {
            sigma: DMatrix::zeros(i, j),
        }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn nrows(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.sigma.ncols()
    }

    /// Matrix inner product `Tr(M' sigma)`.
    pub fn dot(&self, m: &DMatrix<f64>) -> f64 {
        self.sigma.dot(m)
    }

    pub fn norm(&self) -> f64 {
        self.sigma.norm()
    }
}

/// Pairwise gains `G[i][j] = x_i' M y_j`.
pub(crate) fn gain_table(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
) -> Result<DMatrix<f64>, TransportError> {
    if m.nrows() != p.dim() || m.ncols() != q.dim() {
        return Err(TransportError::ShapeMismatch {
            affinity: (m.nrows(), m.ncols()),
            marginals: (p.dim(), q.dim()),
        });
    }
    Ok(p.atoms() * m.as_matrix() * q.atoms().transpose())
}

/// Log of the Gibbs kernel `exp(x'My / T)`, normalized so the maximum log
/// entry is 0.
pub fn kernel(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
    temperature: f64,
) -> Result<DMatrix<f64>, TransportError> {
    if !(temperature > 0.0) {
        return Err(TransportError::NonPositiveTemperature { temperature });
    }
    let gains = gain_table(p, q, m)?;
    Ok(normalized_log_kernel(&gains, temperature))
}

fn normalized_log_kernel(gains: &DMatrix<f64>, temperature: f64) -> DMatrix<f64> {
    let max = gains.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    gains.map(|g| (g - max) / temperature)
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for t in terms.clone() {
        max = max.max(t);
    }
    let mut sum = 0.0;
    for t in terms {
        sum += fmath::exp(t - max);
    }
    max + fmath::ln(sum)
}

/// IPFP solve with reported iteration count and final residual.
#[derive(Debug, Clone, PartialEq)]
pub struct IpfpSolution {
    pub coupling: Coupling,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve the entropy-penalized coupling problem at `temperature > 0`.
///
/// Alternates the two marginal fits in log domain until the L1 column
/// residual drops below `opts.marginal_tol` (row sums are exact by
/// construction after every sweep).
pub fn ipfp_solve(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
    temperature: f64,
    opts: &IpfpOptions,
) -> Result<IpfpSolution, TransportError> {
    ipfp_solve_warm(p, q, m, temperature, opts, None)
}

/// [`ipfp_solve`] with optional initial potentials (warm start).
///
/// Trajectory tracing scales the previous temperature's potentials by
/// `T_prev / T_next` before passing them here; that is the annealing schedule
/// that keeps low temperatures reachable.
pub fn ipfp_solve_warm(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
    temperature: f64,
    opts: &IpfpOptions,
    warm: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<IpfpSolution, TransportError> {
    if !(temperature > 0.0) {
        return Err(TransportError::NonPositiveTemperature { temperature });
    }
    let gains = gain_table(p, q, m)?;
    let kernel = normalized_log_kernel(&gains, temperature);
    let n = p.len();
    let l = q.len();

    let log_p = DVector::from_fn(n, |i, _| fmath::ln(p.weights()[i]));
    let log_q = DVector::from_fn(l, |j, _| fmath::ln(q.weights()[j]));

    let (mut u, mut v) = match warm {
        Some((u0, v0)) if u0.len() == n && v0.len() == l => (u0.clone_owned(), v0.clone_owned()),
        _ => (DVector::zeros(n), DVector::zeros(l)),
    };

    let mut col_lse = DVector::zeros(l);
    let mut row_lse = DVector::zeros(n);
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    loop {
        for j in 0..l {
            col_lse[j] = log_sum_exp((0..n).map(|i| kernel[(i, j)] + u[i]));
        }
        if iterations >= 1 {
            // Row sums are exact after the last u update, so the column L1
            // residual is the full marginal residual of the current iterate.
            residual = (0..l)
                .map(|j| (fmath::exp(v[j] + col_lse[j]) - q.weights()[j]).abs())
                .sum();
            if residual <= opts.marginal_tol {
                converged = true;
                break;
            }
        }
        if iterations >= opts.max_iter {
            break;
        }
        for j in 0..l {
            v[j] = log_q[j] - col_lse[j];
        }
        for i in 0..n {
            row_lse[i] = log_sum_exp((0..l).map(|j| kernel[(i, j)] + v[j]));
        }
        for i in 0..n {
            u[i] = log_p[i] - row_lse[i];
        }
        iterations += 1;
    }

    if !converged {
        return Err(TransportError::Convergence {
            iterations,
            residual,
        });
    }

    let probs = DMatrix::from_fn(n, l, |i, j| fmath::exp(kernel[(i, j)] + u[i] + v[j]));
    Ok(IpfpSolution {
        coupling: Coupling {
            probs,
            u,
            v,
            temperature,
        },
        iterations,
        residual,
    })
}

/// Exact (`T = 0`) optimal transport: maximize `E_pi[X'MY]` over the
/// transport polytope.
///
/// Returns the optimal value and an optimal vertex coupling (at most
/// `N + L - 1` nonzero entries). The coupling's potentials are the LP duals.
pub fn ot_exact(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
) -> Result<(f64, Coupling), TransportError> {
    let gains = gain_table(p, q, m)?;
    let sol = simplex::solve_max(&gains, p.weights(), q.weights())
        .map_err(|pivots| TransportError::PivotLimit { pivots })?;
    let mut probs = DMatrix::zeros(p.len(), q.len());
    for &(i, j, f) in &sol.flows {
        probs[(i, j)] = f.max(0.0);
    }
    Ok((
        sol.value,
        Coupling {
            probs,
            u: sol.row_duals,
            v: sol.col_duals,
            temperature: 0.0,
        },
    ))
}

/// Route a coupling request by temperature: `T = 0` goes to [`ot_exact`],
/// `T > 0` to [`ipfp_solve`]. `T` is never used as a divisor at 0.
pub fn solve_coupling(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
    temperature: f64,
    opts: &IpfpOptions,
) -> Result<Coupling, TransportError> {
    if temperature == 0.0 {
        ot_exact(p, q, m).map(|(_, c)| c)
    } else {
        ipfp_solve(p, q, m, temperature, opts).map(|s| s.coupling)
    }
}

/// Cross-covariance `sigma[i][j] = sum pi(x,y) x_i y_j` of a coupling.
pub fn cross_cov(
    coupling: &Coupling,
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
) -> CrossCovariance {
    debug_assert_eq!(coupling.nrows(), p.len());
    debug_assert_eq!(coupling.ncols(), q.len());
    let sigma = p.atoms().transpose() * coupling.probs() * q.atoms();
    CrossCovariance::from_matrix(sigma)
}

/// Discrete Shannon entropy `-sum pi log pi`, with `0 log 0 = 0`.
pub fn entropy(coupling: &Coupling) -> f64 {
    let mut h = 0.0;
    for &x in coupling.probs.iter() {
        if x > 0.0 {
            h -= x * fmath::ln(x);
        }
    }
    h
}

/// Expected gain `E_pi[X'MY]` of a coupling under the bilinear form `M`.
pub fn expected_gain(
    coupling: &Coupling,
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
) -> Result<f64, TransportError> {
    let gains = gain_table(p, q, m)?;
    Ok(gains.dot(coupling.probs()))
}

/// Optimal objective `W(M,T) = E_pi[X'MY] + T Ent(pi)` at the IPFP solution.
///
/// Convex in `M`; positively homogeneous jointly: `W(aM, aT) = a W(M, T)`
/// for `a > 0`.
pub fn eval_w(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
    temperature: f64,
    opts: &IpfpOptions,
) -> Result<f64, TransportError> {
    let sol = ipfp_solve(p, q, m, temperature, opts)?;
    let gains = gain_table(p, q, m)?;
    Ok(gains.dot(sol.coupling.probs()) + temperature * entropy(&sol.coupling))
}

/// `W` evaluated from an already-solved coupling, avoiding a re-solve.
pub fn eval_w_from(
    coupling: &Coupling,
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
) -> Result<f64, TransportError> {
    let gains = gain_table(p, q, m)?;
    Ok(gains.dot(coupling.probs()) + coupling.temperature() * entropy(coupling))
}
