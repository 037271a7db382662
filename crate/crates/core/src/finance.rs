//! Financial applications of dependence trajectories: Markowitz
//! stress-testing, rainbow-option pricing, and saliency analysis of the
//! affinity matrix.
//!
//! The stress-test slides the temperature of the fitted coupling and
//! reassembles the full covariance with fixed marginal blocks and the
//! trajectory's cross block, which keeps every stressed matrix admissible
//! (realized by an actual coupling) in contrast with flat-correlation
//! fills. Pricing evaluates a two-sided best-of payoff under the same
//! trajectory. Saliency decomposes the affinity matrix into portfolio pairs
//! of maximal correlation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::affinity::{
    fit_affinity, trajectory, AffinityError, AffinityMatrix, FitOptions, FitResult,
};
use crate::fmath;
use crate::marginals::{synthesize_lognormal, DiscreteMarginal, MarginalError, OptionMarginalSpec};
use crate::transport::{
    cross_cov, ipfp_solve_warm, ot_exact, CrossCovariance, IpfpOptions, TransportError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum FinanceError {
    Marginal(MarginalError),
    Transport(TransportError),
    Affinity(AffinityError),
    NotPsd {
        eigenvalue: f64,
    },
    /// Covariance is singular beyond the ridge tolerance; a larger explicit
    /// ridge is the caller's way out.
    Singular,
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    NotCentered,
    /// The cross-covariance implied by the correlation guess cannot be
    /// reproduced by any coupling of the discretized marginals.
    InfeasibleGuess {
        fit_error: f64,
    },
    ZeroMatrix,
    InvalidSpec(String),
}

impl fmt::Display for FinanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinanceError::Marginal(e) => write!(f, "{e}"),
            FinanceError::Transport(e) => write!(f, "{e}"),
            FinanceError::Affinity(e) => write!(f, "{e}"),
            FinanceError::NotPsd { eigenvalue } => {
                write!(f, "covariance is not PSD (eigenvalue {eigenvalue})")
            }
            FinanceError::Singular => write!(
                f,
                "covariance is singular beyond the ridge tolerance; add an explicit ridge"
            ),
            FinanceError::ShapeMismatch { expected, got } => write!(
                f,
                "expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            FinanceError::NotCentered => write!(f, "marginals must be centered"),
            FinanceError::InfeasibleGuess { fit_error } => write!(
                f,
                "correlation guess is infeasible for these marginals (fit error {fit_error:.3e})"
            ),
            FinanceError::ZeroMatrix => write!(f, "matrix must be nonzero"),
            FinanceError::InvalidSpec(msg) => write!(f, "invalid spec: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FinanceError {}

impl From<MarginalError> for FinanceError {
    fn from(e: MarginalError) -> Self {
        FinanceError::Marginal(e)
    }
}

impl From<TransportError> for FinanceError {
    fn from(e: TransportError) -> Self {
        FinanceError::Transport(e)
    }
}

impl From<AffinityError> for FinanceError {
    fn from(e: AffinityError) -> Self {
        FinanceError::Affinity(e)
    }
}

/// One-period allocation inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec {
    /// Expected returns of the concatenated `(X, Y)` assets.
    pub mu: DVector<f64>,
    pub risk_aversion: f64,
    pub asset_names: Vec<String>,
}

/// Fully-invested mean-variance solution with its optimality residual.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkowitzSolution {
    pub weights: DVector<f64>,
    /// Lagrange multiplier of the budget constraint.
    pub multiplier: f64,
    pub kkt_residual: f64,
}

/// Solve `max mu . w - (lambda/2) w' Sigma w` subject to `sum w = 1`.
///
/// Closed-form KKT solution through a Cholesky factorization. A minimal
/// eigenvalue in `(-1e-10, 0)` is lifted by a ridge; anything lower is
/// rejected as not PSD, and a singular factorization is reported as such.
pub fn markowitz(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    lambda: f64,
) -> Result<MarkowitzSolution, FinanceError> {
    let n = mu.len();
    if sigma.nrows() != n || sigma.ncols() != n {
        return Err(FinanceError::ShapeMismatch {
            expected: (n, n),
            got: (sigma.nrows(), sigma.ncols()),
        });
    }
    if !(lambda > 0.0) {
        return Err(FinanceError::InvalidSpec(alloc::format!(
            "risk aversion {lambda} must be > 0"
        )));
    }
    let sym = (sigma + sigma.transpose()) * 0.5;
    let min_eig = sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < -1e-10 {
        return Err(FinanceError::NotPsd { eigenvalue: min_eig });
    }
    let lifted = if min_eig < 0.0 {
        &sym + DMatrix::identity(n, n) * (-min_eig + 1e-14)
    } else {
        sym
    };
    let chol = nalgebra::Cholesky::new(lifted.clone()).ok_or(FinanceError::Singular)?;
    let ones = DVector::from_element(n, 1.0);
    let sinv_mu = chol.solve(mu);
    let sinv_one = chol.solve(&ones);
    let denom = ones.dot(&sinv_one);
    if denom.abs() < 1e-300 {
        return Err(FinanceError::Singular);
    }
    let eta = (ones.dot(&sinv_mu) - lambda) / denom;
    let weights = (&sinv_mu - &sinv_one * eta) / lambda;

    let kkt = (&lifted * &weights) * lambda - mu + &ones * eta;
    let kkt_residual = kkt
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()))
        .max((weights.sum() - 1.0).abs());
    Ok(MarkowitzSolution {
        weights,
        multiplier: eta,
        kkt_residual,
    })
}

/// Stack the block covariance `[[Sigma_XX, C], [C', Sigma_YY]]`.
pub fn assemble_covariance(
    sigma_xx: &DMatrix<f64>,
    sigma_yy: &DMatrix<f64>,
    cross: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = sigma_xx.nrows();
    let m = sigma_yy.nrows();
    let mut full = DMatrix::zeros(n + m, n + m);
    full.view_mut((0, 0), (n, n)).copy_from(sigma_xx);
    full.view_mut((n, n), (m, m)).copy_from(sigma_yy);
    full.view_mut((0, n), (n, m)).copy_from(cross);
    full.view_mut((n, 0), (m, n)).copy_from(&cross.transpose());
    full
}

/// Flat-correlation cross block `rho * sx_i * sy_j`.
pub fn flat_rho_cross(sx: &DVector<f64>, sy: &DVector<f64>, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(sx.len(), sy.len(), |i, j| rho * sx[i] * sy[j])
}

/// Largest flat correlation keeping `[[I_n, rho J], [rho J', I_m]]` PSD,
/// namely `1 / sqrt(n m)`.
pub fn flat_rho_bound(n: usize, m: usize) -> f64 {
    1.0 / fmath::sqrt((n * m) as f64)
}

/// One stress scenario along the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StressRow {
    pub temperature: f64,
    /// Variance of the baseline allocation under the stressed covariance.
    pub stressed_variance: f64,
    pub reopt_weights: DVector<f64>,
    /// `mu . w_T - mu . w`: return foregone by sticking to the baseline
    /// allocation instead of reoptimizing.
    pub opportunity_cost: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressReport {
    pub baseline_weights: DVector<f64>,
    pub baseline_variance: f64,
    pub rows: Vec<StressRow>,
}

/// Dependence stress-test of a fully-invested allocation.
///
/// The baseline allocation is optimized at the `T = 1` covariance. Each
/// temperature of the (strictly decreasing) grid contributes the stressed
/// variance of the baseline weights, the reoptimized weights, the
/// opportunity cost, and the minimal eigenvalue of the assembled covariance
/// (realized by an actual coupling, hence PSD up to solver tolerance).
pub fn stress_portfolio(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    spec: &PortfolioSpec,
    m_hat: &AffinityMatrix,
    temps: &[f64],
    opts: &IpfpOptions,
) -> Result<StressReport, FinanceError> {
    if !p.is_centered() || !q.is_centered() {
        return Err(FinanceError::NotCentered);
    }
    let total = p.dim() + q.dim();
    if spec.mu.len() != total {
        return Err(FinanceError::ShapeMismatch {
            expected: (total, 1),
            got: (spec.mu.len(), 1),
        });
    }
    let sigma_xx = p.covariance();
    let sigma_yy = q.covariance();

    let baseline_sol = ipfp_solve_warm(p, q, m_hat, 1.0, opts, None).map_err(AffinityError::from)?;
    let baseline_cross = cross_cov(&baseline_sol.coupling, p, q);
    let baseline_cov = assemble_covariance(&sigma_xx, &sigma_yy, baseline_cross.as_matrix());
    let baseline = markowitz(&spec.mu, &baseline_cov, spec.risk_aversion)?;
    let w = baseline.weights;
    let baseline_variance = (&baseline_cov * &w).dot(&w);

    let points = trajectory(p, q, m_hat, temps, opts)?;
    let mut rows = Vec::with_capacity(points.len());
    for point in &points {
        let full = assemble_covariance(&sigma_xx, &sigma_yy, point.sigma.as_matrix());
        let stressed_variance = (&full * &w).dot(&w);
        let reopt = markowitz(&spec.mu, &full, spec.risk_aversion)?;
        let opportunity_cost = spec.mu.dot(&reopt.weights) - spec.mu.dot(&w);
        let min_eigenvalue = full
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        rows.push(StressRow {
            temperature: point.temperature,
            stressed_variance,
            reopt_weights: reopt.weights,
            opportunity_cost,
            min_eigenvalue,
        });
    }
    Ok(StressReport {
        baseline_weights: w,
        baseline_variance,
        rows,
    })
}

/// Two-sided best-of option on the discretized terminal laws.
#[derive(Debug, Clone, PartialEq)]
pub struct RainbowSpec {
    pub x: OptionMarginalSpec,
    pub y: OptionMarginalSpec,
    pub strike: f64,
    /// Cross-correlation guess between the drivers, converted to a target
    /// cross-covariance through the discretized standard deviations.
    pub cross_corr: DMatrix<f64>,
}

impl RainbowSpec {
    pub fn validate(&self) -> Result<(), FinanceError> {
        self.x.validate()?;
        self.y.validate()?;
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(FinanceError::InvalidSpec(alloc::format!(
                "strike {} must be > 0",
                self.strike
            )));
        }
        let (n, m) = (self.x.vols.len(), self.y.vols.len());
        if self.cross_corr.nrows() != n || self.cross_corr.ncols() != m {
            return Err(FinanceError::ShapeMismatch {
                expected: (n, m),
                got: (self.cross_corr.nrows(), self.cross_corr.ncols()),
            });
        }
        if self.cross_corr.iter().any(|x| !x.is_finite()) {
            return Err(FinanceError::InvalidSpec("non-finite correlation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RainbowPoint {
    pub temperature: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RainbowCurve {
    pub points: Vec<RainbowPoint>,
    /// Price under the independence coupling (the `T -> inf` anchor).
    pub independence_price: f64,
    /// Price under the exact (`T = 0`) extreme coupling.
    pub extreme_price: f64,
    pub fit: FitResult,
}

/// Price `min((max_i X_i - K)+, (max_j Y_j - K)+)` along the dependence
/// trajectory implied by the cross-correlation guess.
///
/// The terminal laws are discretized by seeded Monte Carlo; the coupling
/// machinery runs on centered copies while the payoff is evaluated on the
/// uncentered atoms. A correlation guess whose implied cross-covariance the
/// fit cannot reach is reported as infeasible.
pub fn price_rainbow(
    spec: &RainbowSpec,
    temps: &[f64],
    fit_opts: &FitOptions,
    opts: &IpfpOptions,
) -> Result<RainbowCurve, FinanceError> {
    spec.validate()?;
    let mx = synthesize_lognormal(&spec.x)?;
    let my = synthesize_lognormal(&spec.y)?;

    let best_of = |m: &DiscreteMarginal, t: usize| -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..m.dim() {
            best = best.max(m.atoms()[(t, i)]);
        }
        (best - spec.strike).max(0.0)
    };
    let phi_x: Vec<f64> = (0..mx.len()).map(|t| best_of(&mx, t)).collect();
    let phi_y: Vec<f64> = (0..my.len()).map(|t| best_of(&my, t)).collect();

    let mut independence_price = 0.0;
    for (t, &fx) in phi_x.iter().enumerate() {
        let wt = mx.weights()[t];
        for (l, &fy) in phi_y.iter().enumerate() {
            independence_price += wt * my.weights()[l] * fx.min(fy);
        }
    }

    let cx = mx.center();
    let cy = my.center();
    let sx = cx.std_devs();
    let sy = cy.std_devs();
    let sigma_hat = CrossCovariance::from_matrix(DMatrix::from_fn(
        cx.dim(),
        cy.dim(),
        |i, j| spec.cross_corr[(i, j)] * sx[i] * sy[j],
    ));

    let fit = fit_affinity(&cx, &cy, &sigma_hat, fit_opts)?;
    if !fit.converged {
        return Err(FinanceError::InfeasibleGuess {
            fit_error: fit.fit_error,
        });
    }

    let price_of = |probs: &DMatrix<f64>| -> f64 {
        let mut price = 0.0;
        for (t, &fx) in phi_x.iter().enumerate() {
            for (l, &fy) in phi_y.iter().enumerate() {
                let pi = probs[(t, l)];
                if pi > 0.0 {
                    price += pi * fx.min(fy);
                }
            }
        }
        price
    };

    let mut points = Vec::with_capacity(temps.len());
    let mut warm: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut prev_t = 0.0;
    for &t in temps {
        let scaled = warm.as_ref().map(|(u, v)| {
            let ratio = prev_t / t;
            (u * ratio, v * ratio)
        });
        let sol = ipfp_solve_warm(
            &cx,
            &cy,
            &fit.m_hat,
            t,
            opts,
            scaled.as_ref().map(|(u, v)| (u, v)),
        )
        .map_err(|source| {
            FinanceError::Affinity(AffinityError::SolveAtTemperature {
                temperature: t,
                source,
            })
        })?;
        points.push(RainbowPoint {
            temperature: t,
            price: price_of(sol.coupling.probs()),
        });
        let (u, v) = sol.coupling.potentials();
        warm = Some((u.clone_owned(), v.clone_owned()));
        prev_t = t;
    }

    let (_, extreme_coupling) = ot_exact(&cx, &cy, &fit.m_hat)?;
    let extreme_price = price_of(extreme_coupling.probs());

    Ok(RainbowCurve {
        points,
        independence_price,
        extreme_price,
        fit,
    })
}

/// Singular value decomposition of the affinity matrix with the index
/// weights it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyResult {
    /// Left singular vectors, one column per singular value.
    pub u: DMatrix<f64>,
    /// Singular values, descending.
    pub singular_values: DVector<f64>,
    /// Right singular vectors, one column per singular value.
    pub v: DMatrix<f64>,
    /// `sqrt(S) U'`: rows are the X-side index portfolios.
    pub x_weights: DMatrix<f64>,
    /// `sqrt(S) V'`: rows are the Y-side index portfolios.
    pub y_weights: DMatrix<f64>,
}

/// Saliency analysis `M_hat = U S V'`.
///
/// Singular values are sorted descending and each left singular vector's
/// first nonzero entry is made positive (the paired right vector flips with
/// it). The bilinear identity `x' M_hat y = (sqrt(S) U' x) . (sqrt(S) V' y)`
/// holds to rounding.
pub fn saliency(m_hat: &AffinityMatrix) -> Result<SaliencyResult, FinanceError> {
    if m_hat.norm() == 0.0 {
        return Err(FinanceError::ZeroMatrix);
    }
    let svd = m_hat.as_matrix().clone().svd(true, true);
    let u_raw = svd.u.expect("requested");
    let vt_raw = svd.v_t.expect("requested");
    let s_raw = svd.singular_values;

    let r = s_raw.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s_raw[b].partial_cmp(&s_raw[a]).expect("finite"));

    let mut u = DMatrix::zeros(u_raw.nrows(), r);
    let mut v = DMatrix::zeros(vt_raw.ncols(), r);
    let mut s = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        s[dst] = s_raw[src];
        u.set_column(dst, &u_raw.column(src));
        v.set_column(dst, &vt_raw.row(src).transpose());
    }
    for k in 0..r {
        let lead = u.column(k).iter().find(|e| e.abs() > 1e-12).copied();
        if let Some(e) = lead {
            if e < 0.0 {
                for i in 0..u.nrows() {
                    u[(i, k)] = -u[(i, k)];
                }
                for j in 0..v.nrows() {
                    v[(j, k)] = -v[(j, k)];
                }
            }
        }
    }

    let mut x_weights = u.transpose();
    let mut y_weights = v.transpose();
    for k in 0..r {
        let root = fmath::sqrt(s[k].max(0.0));
        for c in 0..x_weights.ncols() {
            x_weights[(k, c)] *= root;
        }
        for c in 0..y_weights.ncols() {
            y_weights[(k, c)] *= root;
        }
    }

    Ok(SaliencyResult {
        u,
        singular_values: s,
        v,
        x_weights,
        y_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn markowitz_equal_weights_for_flat_mu() {
        let mu = DVector::zeros(4);
        let sigma = DMatrix::identity(4, 4);
        let sol = markowitz(&mu, &sigma, 2.5).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(sol.weights[i], 0.25, epsilon = 1e-12);
        }
        assert!(sol.kkt_residual <= 1e-10);
    }

    #[test]
    fn markowitz_matches_hand_kkt_for_identity() {
        // Sigma = I, n = 2: w_i = 1/2 + (mu_i - mean(mu)) / lambda
        let mu = DVector::from_column_slice(&[0.08, 0.02]);
        let sigma = DMatrix::identity(2, 2);
        let lambda = 3.0;
        let sol = markowitz(&mu, &sigma, lambda).unwrap();
        let mean = 0.05;
        assert_abs_diff_eq!(sol.weights[0], 0.5 + (0.08 - mean) / lambda, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.weights[1], 0.5 + (0.02 - mean) / lambda, epsilon = 1e-12);
        assert!(sol.kkt_residual <= 1e-10);
    }

    #[test]
    fn markowitz_invariant_to_constant_mu_shift() {
        let mut rng = StdRng::seed_from_u64(3);
        let raw = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.5..0.5));
        let sigma = &raw * raw.transpose() + DMatrix::identity(3, 3) * 0.1;
        let mu = DVector::from_column_slice(&[0.03, -0.01, 0.05]);
        let shifted = mu.add_scalar(0.7);
        let a = markowitz(&mu, &sigma, 3.0).unwrap();
        let b = markowitz(&shifted, &sigma, 3.0).unwrap();
        assert!((a.weights - b.weights).norm() <= 1e-9);
    }

    #[test]
    fn markowitz_rejects_indefinite_and_singular() {
        let mu = DVector::zeros(2);
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 0)] = -1.0;
        assert!(matches!(
            markowitz(&mu, &bad, 3.0),
            Err(FinanceError::NotPsd { .. })
        ));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            markowitz(&mu, &singular, 3.0),
            Err(FinanceError::Singular)
        ));
    }

    #[test]
    fn flat_rho_bound_values() {
        assert_abs_diff_eq!(flat_rho_bound(3, 4), 1.0 / (2.0 * 3.0f64.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(flat_rho_bound(1, 1), 1.0, epsilon = 1e-15);
        // eigensolve oracle for n = m = 2
        let ones_sx = DVector::from_element(2, 1.0);
        let check = |rho: f64| {
            let cross = flat_rho_cross(&ones_sx, &ones_sx, rho);
            let full = assemble_covariance(
                &DMatrix::identity(2, 2),
                &DMatrix::identity(2, 2),
                &cross,
            );
            full.symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b))
        };
        assert_abs_diff_eq!(flat_rho_bound(2, 2), 0.5, epsilon = 1e-12);
        assert!(check(0.5 - 1e-6) > -1e-12);
        assert!(check(0.5 + 1e-6) < 0.0);
    }

    #[test]
    fn flat_rho_sign_change_at_3x4_bound() {
        let bound = flat_rho_bound(3, 4);
        let sx = DVector::from_element(3, 1.0);
        let sy = DVector::from_element(4, 1.0);
        let min_eig = |rho: f64| {
            let full = assemble_covariance(
                &DMatrix::identity(3, 3),
                &DMatrix::identity(4, 4),
                &flat_rho_cross(&sx, &sy, rho),
            );
            full.symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b))
        };
        assert!(min_eig(bound * 0.999) > 0.0);
        assert!(min_eig(bound * 1.001) < 0.0);
        assert_abs_diff_eq!(min_eig(bound), 0.0, epsilon = 1e-12);
    }

    fn centered_cloud(n: usize, d: usize, scale: f64, rng: &mut StdRng) -> DiscreteMarginal {
        DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(n, d, |_, _| {
            rng.random_range(-scale..scale)
        }))
        .unwrap()
        .center()
    }

    #[test]
    fn stress_baseline_matches_unit_temperature() {
        let mut rng = StdRng::seed_from_u64(11);
        let p = centered_cloud(8, 2, 1.0, &mut rng);
        let q = centered_cloud(8, 2, 1.0, &mut rng);
        let m_hat =
            AffinityMatrix::new(DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.4..0.4)))
                .unwrap();
        let spec = PortfolioSpec {
            mu: DVector::from_column_slice(&[0.05, 0.02, 0.04, 0.01]),
            risk_aversion: 3.0,
            asset_names: Vec::new(),
        };
        let temps = [1.0, 0.5, 0.1, 0.02];
        let report =
            stress_portfolio(&p, &q, &spec, &m_hat, &temps, &IpfpOptions::default()).unwrap();
        // the grid starts at T = 1, so the first row is the baseline itself
        assert_abs_diff_eq!(
            report.rows[0].stressed_variance,
            report.baseline_variance,
            epsilon = 1e-9
        );
        for row in &report.rows {
            assert!(row.min_eigenvalue >= -1e-10, "T={}", row.temperature);
            assert!(row.opportunity_cost >= -1e-10, "T={}", row.temperature);
        }
        assert_abs_diff_eq!(report.baseline_weights.sum(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn stress_requires_centered_marginals() {
        let atoms = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let p = DiscreteMarginal::with_uniform_weights(atoms.clone()).unwrap();
        let q = DiscreteMarginal::with_uniform_weights(atoms).unwrap();
        let spec = PortfolioSpec {
            mu: DVector::zeros(2),
            risk_aversion: 3.0,
            asset_names: Vec::new(),
        };
        let m = AffinityMatrix::zeros(1, 1);
        assert!(matches!(
            stress_portfolio(&p, &q, &spec, &m, &[1.0, 0.5], &IpfpOptions::default()),
            Err(FinanceError::NotCentered)
        ));
    }

    fn rainbow_1d(vol: f64, strike: f64, corr: f64, seed: u64) -> RainbowSpec {
        RainbowSpec {
            x: OptionMarginalSpec::unit_spot(
                alloc::vec![vol],
                DMatrix::identity(1, 1),
                1.0,
                64,
                seed,
            ),
            y: OptionMarginalSpec::unit_spot(
                alloc::vec![vol],
                DMatrix::identity(1, 1),
                1.0,
                64,
                seed,
            ),
            strike,
            cross_corr: DMatrix::from_element(1, 1, corr),
        }
    }

    #[test]
    fn rainbow_worthless_when_strike_unreachable() {
        let spec = rainbow_1d(0.2, 100.0, 0.3, 5);
        let curve = price_rainbow(
            &spec,
            &[2.0, 1.0, 0.5],
            &FitOptions::default(),
            &IpfpOptions::default(),
        )
        .unwrap();
        assert_eq!(curve.independence_price, 0.0);
        assert_eq!(curve.extreme_price, 0.0);
        for p in &curve.points {
            assert_eq!(p.price, 0.0);
        }
    }

    #[test]
    fn rainbow_comonotone_limit_matches_single_leg() {
        // identical discretizations: at T -> 0 the minima coincide and the
        // price is the single best-of price
        let spec = rainbow_1d(0.2, 1.0, 0.5, 9);
        let curve = price_rainbow(
            &spec,
            &[1.0, 0.3, 0.1],
            &FitOptions::default(),
            &IpfpOptions::default(),
        )
        .unwrap();
        assert!(curve.fit.m_hat.as_matrix()[(0, 0)] > 0.0);
        let mx = synthesize_lognormal(&spec.x).unwrap();
        let single_leg: f64 = (0..mx.len())
            .map(|t| mx.weights()[t] * (mx.atoms()[(t, 0)] - 1.0).max(0.0))
            .sum();
        assert_abs_diff_eq!(curve.extreme_price, single_leg, epsilon = 1e-10);
        // prices rise as temperature drops and never exceed the extreme
        for w in curve.points.windows(2) {
            assert!(w[1].price >= w[0].price - 1e-9);
        }
        assert!(curve.points.last().unwrap().price <= curve.extreme_price + 1e-9);
        assert!(curve.independence_price <= curve.points[0].price + 1e-9);
    }

    #[test]
    fn rainbow_determinism() {
        let spec = rainbow_1d(0.15, 1.0, 0.2, 13);
        let temps = [1.0, 0.5];
        let a = price_rainbow(&spec, &temps, &FitOptions::default(), &IpfpOptions::default())
            .unwrap();
        let b = price_rainbow(&spec, &temps, &FitOptions::default(), &IpfpOptions::default())
            .unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.independence_price, b.independence_price);
    }

    #[test]
    fn saliency_diagonal_affinity() {
        let m = AffinityMatrix::new(DMatrix::from_partial_diagonal(
            3,
            3,
            &[0.5, 2.0, 1.0],
        ))
        .unwrap();
        let res = saliency(&m).unwrap();
        assert_abs_diff_eq!(res.singular_values[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.singular_values[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.singular_values[2], 0.5, epsilon = 1e-12);
        // permutation of the identity with positive leading entries
        for k in 0..3 {
            let col = res.u.column(k);
            let lead = col.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
            assert_abs_diff_eq!(lead, 1.0, epsilon = 1e-12);
            assert!(col.iter().all(|&e| e > -1e-12));
        }
    }

    #[test]
    fn saliency_orthogonality_reconstruction_and_bilinear_identity() {
        let mut rng = StdRng::seed_from_u64(17);
        let m = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
        let affinity = AffinityMatrix::new(m.clone()).unwrap();
        let res = saliency(&affinity).unwrap();
        let r = res.singular_values.len();
        let utu = res.u.transpose() * &res.u;
        let vtv = res.v.transpose() * &res.v;
        assert!((utu - DMatrix::identity(r, r)).norm() <= 1e-10);
        assert!((vtv - DMatrix::identity(r, r)).norm() <= 1e-10);
        let recon = &res.u * DMatrix::from_diagonal(&res.singular_values) * res.v.transpose();
        assert!((recon - &m).norm() <= 1e-10);
        for w in res.singular_values.as_slice().windows(2) {
            assert!(w[0] >= w[1] && w[1] >= 0.0);
        }
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let lhs = (x.transpose() * &m * &y)[(0, 0)];
            let rhs = (&res.x_weights * &x).dot(&(&res.y_weights * &y));
            worst = worst.max((lhs - rhs).abs());
        }
        assert!(worst <= 1e-12, "bilinear identity off by {worst}");
    }

    #[test]
    fn saliency_rejects_zero_matrix() {
        assert!(matches!(
            saliency(&AffinityMatrix::zeros(2, 2)),
            Err(FinanceError::ZeroMatrix)
        ));
    }
}
