//! Affinity-matrix fitting, dependence index, and temperature trajectories.
//!
//! The affinity matrix `M_hat` is the direction of dependence: the matrix
//! whose entropy-penalized optimal coupling at temperature 1 reproduces a
//! target cross-covariance. It is found by minimizing the convex objective
//! `F(M) = W(M,1) - sigma_hat . M`, whose gradient is the cross-covariance
//! of the current coupling minus the target. Sliding the temperature of
//! `pi_{M_hat,T}` from large values towards 0 then traces a path from
//! independence through the observed coupling (at `T = 1`) to an extreme
//! coupling on the boundary of the covariance set.

mod lbfgs;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::fmath;
use crate::marginals::DiscreteMarginal;
use crate::transport::{
    self, cross_cov, entropy, ipfp_solve_warm, CrossCovariance, IpfpOptions, TransportError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum AffinityError {
    Transport(TransportError),
    /// Solver failure at a specific trajectory temperature.
    SolveAtTemperature {
        temperature: f64,
        source: TransportError,
    },
    NonFiniteEntries,
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    RowCountMismatch {
        p_atoms: usize,
        q_atoms: usize,
    },
    InvalidTemperatureGrid(String),
    /// The dependence index `1/||M||` is undefined for the zero matrix.
    ZeroAffinity,
}

impl fmt::Display for AffinityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AffinityError::Transport(e) => write!(f, "{e}"),
            AffinityError::SolveAtTemperature { temperature, source } => {
                write!(f, "solve failed at temperature {temperature}: {source}")
            }
            AffinityError::NonFiniteEntries => write!(f, "matrix has non-finite entries"),
            AffinityError::ShapeMismatch { expected, got } => write!(
                f,
                "expected {}x{} matrix, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            AffinityError::RowCountMismatch { p_atoms, q_atoms } => write!(
                f,
                "paired marginals need equal atom counts ({p_atoms} vs {q_atoms})"
            ),
            AffinityError::InvalidTemperatureGrid(msg) => {
                write!(f, "invalid temperature grid: {msg}")
            }
            AffinityError::ZeroAffinity => {
                write!(f, "dependence index is undefined for a zero affinity matrix")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AffinityError {}

impl From<TransportError> for AffinityError {
    fn from(e: TransportError) -> Self {
        AffinityError::Transport(e)
    }
}

/// The `I x J` matrix driving the bilinear gain `x' M y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    m: DMatrix<f64>,
}

impl AffinityMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, AffinityError> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(AffinityError::NonFiniteEntries);
        }
        Ok(Self { m })
    }

    pub fn zeros(i: usize, j: usize) -> Self {
        Self {
            m: DMatrix::zeros(i, j),
        }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.m.ncols()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            m: &self.m * factor,
        }
    }
}

/// Options for [`fit_affinity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Gradient norm threshold; `None` means `1e-8 * (1 + ||sigma_hat||)`.
    pub grad_tol: Option<f64>,
    /// Outer quasi-Newton iteration cap.
    pub max_iter: usize,
    /// Inner IPFP options. The default tolerance is tightened to `1e-12` so
    /// outer gradients stay accurate.
    pub ipfp: IpfpOptions,
    /// Number of secant pairs kept by the limited-memory update.
    pub memory: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grad_tol: None,
            max_iter: 500,
            ipfp: IpfpOptions {
                max_iter: 100_000,
                marginal_tol: 1e-12,
            },
            memory: 10,
        }
    }
}

/// Outcome of an affinity fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub m_hat: AffinityMatrix,
    /// `||sigma_{M_hat} - sigma_hat|| / ||sigma_hat||` (absolute norm when
    /// the target is the zero matrix).
    pub fit_error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `1 / ||M_hat||`; `None` when the fitted matrix is zero.
    pub dependence_index: Option<f64>,
}

/// One sample along a temperature trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub temperature: f64,
    pub sigma: CrossCovariance,
    pub entropy: f64,
    /// `sigma_T . M_hat`, the expected bilinear gain at this temperature.
    pub objective: f64,
}

/// Cross-covariance of the empirical coupling.
///
/// With `paired_rows`, atom `t` of `P` is matched with atom `t` of `Q`
/// (the row-paired empirical coupling): `sigma[i][j] = sum_t w_t x_ti y_tj`.
/// Without it, the independence coupling is used instead, whose
/// cross-covariance is the outer product of the means (zero once centered).
pub fn target_cov(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    paired_rows: bool,
) -> Result<CrossCovariance, AffinityError> {
    if !paired_rows {
        let sigma = p.mean() * q.mean().transpose();
        return Ok(CrossCovariance::from_matrix(sigma));
    }
    if p.len() != q.len() {
        return Err(AffinityError::RowCountMismatch {
            p_atoms: p.len(),
            q_atoms: q.len(),
        });
    }
    let mut sigma = DMatrix::zeros(p.dim(), q.dim());
    for t in 0..p.len() {
        let w = p.weights()[t];
        for i in 0..p.dim() {
            for j in 0..q.dim() {
                sigma[(i, j)] += w * p.atoms()[(t, i)] * q.atoms()[(t, j)];
            }
        }
    }
    Ok(CrossCovariance::from_matrix(sigma))
}

/// Fit the affinity matrix reproducing `sigma_hat` at temperature 1.
///
/// Quasi-Newton descent on `F(M) = W(M,1) - sigma_hat . M` starting from
/// `M = 0`, with warm-started IPFP solves providing value and gradient.
/// Line-search failure or hitting the iteration cap returns the best iterate
/// with `converged = false` rather than an error.
pub fn fit_affinity(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    sigma_hat: &CrossCovariance,
    opts: &FitOptions,
) -> Result<FitResult, AffinityError> {
    let (rows, cols) = (p.dim(), q.dim());
    if sigma_hat.nrows() != rows || sigma_hat.ncols() != cols {
        return Err(AffinityError::ShapeMismatch {
            expected: (rows, cols),
            got: (sigma_hat.nrows(), sigma_hat.ncols()),
        });
    }
    let target_norm = sigma_hat.norm();
    let grad_tol = opts
        .grad_tol
        .unwrap_or(1e-8 * (1.0 + target_norm));

    // Potentials persist across oracle calls; each L-BFGS trial point warm
    // starts from the previous solve.
    let mut warm_u: Option<DVector<f64>> = None;
    let mut warm_v: Option<DVector<f64>> = None;

    let outcome = lbfgs::minimize(
        DVector::zeros(rows * cols),
        &lbfgs::LbfgsOptions {
            memory: opts.memory,
            max_iter: opts.max_iter,
            grad_tol,
        },
        |flat: &DVector<f64>| -> Result<(f64, DVector<f64>), AffinityError> {
            let m = unflatten(flat, rows, cols);
            let affinity = AffinityMatrix { m };
            let warm = match (&warm_u, &warm_v) {
                (Some(u), Some(v)) => Some((u, v)),
                _ => None,
            };
            let sol = ipfp_solve_warm(p, q, &affinity, 1.0, &opts.ipfp, warm)?;
            let sigma = cross_cov(&sol.coupling, p, q);
            let w = transport::eval_w_from(&sol.coupling, p, q, &affinity)?;
            let value = w - sigma_hat.dot(affinity.as_matrix());
            let grad = flatten(&(sigma.as_matrix() - sigma_hat.as_matrix()));
            let (u, v) = sol.coupling.potentials();
            warm_u = Some(u.clone_owned());
            warm_v = Some(v.clone_owned());
            Ok((value, grad))
        },
    )?;

    let m_hat = AffinityMatrix {
        m: unflatten(&outcome.x, rows, cols),
    };
    // fit error measured on a fresh tight solve at the returned iterate
    let sol = ipfp_solve_warm(
        p,
        q,
        &m_hat,
        1.0,
        &opts.ipfp,
        match (&warm_u, &warm_v) {
            (Some(u), Some(v)) => Some((u, v)),
            _ => None,
        },
    )?;
    let sigma = cross_cov(&sol.coupling, p, q);
    let err_abs = (sigma.as_matrix() - sigma_hat.as_matrix()).norm();
    let fit_error = if target_norm > 0.0 {
        err_abs / target_norm
    } else {
        err_abs
    };
    let norm = m_hat.norm();
    Ok(FitResult {
        m_hat,
        fit_error,
        iterations: outcome.iterations,
        converged: outcome.converged,
        dependence_index: if norm > 0.0 { Some(1.0 / norm) } else { None },
    })
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(m.nrows() * m.ncols(), |k, _| {
        m[(k / m.ncols(), k % m.ncols())]
    })
}

fn unflatten(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| v[i * cols + j])
}

/// Trace `T -> pi_{M_hat, T}` over a strictly decreasing positive grid.
///
/// Each temperature is solved with potentials warm-started from the previous
/// one (scaled by the temperature ratio), which is what makes the low end of
/// the grid reachable. As `T` grows the cross-covariance vanishes (for
/// centered marginals); as `T` drops the objective climbs to the exact
/// optimal-transport value.
pub fn trajectory(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m_hat: &AffinityMatrix,
    temps: &[f64],
    opts: &IpfpOptions,
) -> Result<Vec<TrajectoryPoint>, AffinityError> {
    validate_grid(temps)?;
    let mut points = Vec::with_capacity(temps.len());
    let mut warm: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut prev_t = 0.0;
    for &t in temps {
        let warm_scaled = warm.as_ref().map(|(u, v)| {
            let ratio = prev_t / t;
            (u * ratio, v * ratio)
        });
        let sol = ipfp_solve_warm(
            p,
            q,
            m_hat,
            t,
            opts,
            warm_scaled.as_ref().map(|(u, v)| (u, v)),
        )
        .map_err(|source| AffinityError::SolveAtTemperature {
            temperature: t,
            source,
        })?;
        let sigma = cross_cov(&sol.coupling, p, q);
        let objective = sigma.dot(m_hat.as_matrix());
        points.push(TrajectoryPoint {
            temperature: t,
            sigma,
            entropy: entropy(&sol.coupling),
            objective,
        });
        let (u, v) = sol.coupling.potentials();
        warm = Some((u.clone_owned(), v.clone_owned()));
        prev_t = t;
    }
    Ok(points)
}

fn validate_grid(temps: &[f64]) -> Result<(), AffinityError> {
    if temps.is_empty() {
        return Err(AffinityError::InvalidTemperatureGrid("empty grid".into()));
    }
    for (k, &t) in temps.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(AffinityError::InvalidTemperatureGrid(alloc::format!(
                "temperature {t} at index {k} is not positive and finite"
            )));
        }
        if k > 0 && t >= temps[k - 1] {
            return Err(AffinityError::InvalidTemperatureGrid(alloc::format!(
                "grid must be strictly decreasing, violated at index {k}"
            )));
        }
    }
    Ok(())
}

/// Descending geometric grid of `n` temperatures from `hi` down to `lo`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, AffinityError> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(AffinityError::InvalidTemperatureGrid(alloc::format!(
            "need 0 < lo < hi and n >= 2, got lo={lo}, hi={hi}, n={n}"
        )));
    }
    let ratio = fmath::ln(lo / hi) / (n - 1) as f64;
    Ok((0..n).map(|k| hi * fmath::exp(ratio * k as f64)).collect())
}

/// The default 40-point grid from `1e2` down to `1e-3`.
pub fn default_trajectory_grid() -> Vec<f64> {
    geometric_grid(1e-3, 1e2, 40).expect("static grid parameters")
}

/// Dependence index `1 / ||M_hat||` (Frobenius).
///
/// By homogeneity of the entropic objective, the coupling at `(M_hat, 1)`
/// equals the coupling at `(M_hat / ||M_hat||, 1 / ||M_hat||)`, so this is
/// the effective temperature of the normalized affinity.
pub fn dependence_index(m_hat: &AffinityMatrix) -> Result<f64, AffinityError> {
    let norm = m_hat.norm();
    if norm == 0.0 {
        return Err(AffinityError::ZeroAffinity);
    }
    Ok(1.0 / norm)
}
