//! Conic-order maximality of cross-covariance matrices.
//!
//! A compact basis `B` (orthant simplex, Loewner spectrahedron, or a custom
//! generator hull) induces the dual-cone order under which a coupling has
//! positive extreme dependence exactly when
//! `inf over M in B of [h(M) - sigma . M] = 0`, with `h` the covariance-set
//! support function. [`maximality_gap`] minimizes that convex function by
//! conditional-gradient (Frank-Wolfe) steps, needing only the closed-form
//! linear oracle over `B` plus the exact-transport support oracle.
//! [`is_extreme`] answers the weaker boundary question by membership probing.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::affinity::AffinityMatrix;
use crate::covset::{self, Containment, ContainsOptions, CovsetError};
use crate::marginals::DiscreteMarginal;
use crate::transport::{CrossCovariance, TransportError};

/// Generators must stay this far from the zero matrix (`0` must not be in
/// the basis).
pub const MIN_GENERATOR_NORM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum MaximalityError {
    Transport(TransportError),
    Covset(CovsetError),
    ShapeMismatch {
        basis: (usize, usize),
        sigma: (usize, usize),
    },
    EmptyBasis,
    ZeroGenerator {
        index: usize,
    },
    GeneratorShape {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
}

impl fmt::Display for MaximalityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaximalityError::Transport(e) => write!(f, "{e}"),
            MaximalityError::Covset(e) => write!(f, "{e}"),
            MaximalityError::ShapeMismatch { basis, sigma } => write!(
                f,
                "basis is {}x{} but sigma is {}x{}",
                basis.0, basis.1, sigma.0, sigma.1
            ),
            MaximalityError::EmptyBasis => write!(f, "custom basis needs at least one generator"),
            MaximalityError::ZeroGenerator { index } => {
                write!(f, "generator {index} is numerically zero")
            }
            MaximalityError::GeneratorShape { index, expected, got } => write!(
                f,
                "generator {index} is {}x{}, expected {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MaximalityError {}

impl From<TransportError> for MaximalityError {
    fn from(e: TransportError) -> Self {
        MaximalityError::Transport(e)
    }
}

impl From<CovsetError> for MaximalityError {
    fn from(e: CovsetError) -> Self {
        MaximalityError::Covset(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BasisKind {
    /// Entrywise-nonnegative matrices with unit entry sum.
    Orthant,
    /// Positive semi-definite matrices with unit trace (needs square dims).
    Loewner,
    /// Convex hull of explicit generators.
    Custom(Vec<DMatrix<f64>>),
}

/// A compact basis generating the dual-cone order on cross-covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicBasis {
    kind: BasisKind,
    dims: (usize, usize),
}

impl ConicBasis {
    pub fn orthant(rows: usize, cols: usize) -> Self {
        Self {
            kind: BasisKind::Orthant,
            dims: (rows, cols),
        }
    }

    pub fn loewner(n: usize) -> Self {
        Self {
            kind: BasisKind::Loewner,
            dims: (n, n),
        }
    }

    pub fn custom(generators: Vec<DMatrix<f64>>) -> Result<Self, MaximalityError> {
        let first = generators.first().ok_or(MaximalityError::EmptyBasis)?;
        let dims = (first.nrows(), first.ncols());
        for (index, g) in generators.iter().enumerate() {
            if (g.nrows(), g.ncols()) != dims {
                return Err(MaximalityError::GeneratorShape {
                    index,
                    expected: dims,
                    got: (g.nrows(), g.ncols()),
                });
            }
            if g.norm() < MIN_GENERATOR_NORM {
                return Err(MaximalityError::ZeroGenerator { index });
            }
        }
        Ok(Self {
            kind: BasisKind::Custom(generators),
            dims,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// `argmin over M in B of G . M` with its value; closed form for both
    /// paper bases, generator scan for custom hulls.
    pub fn linear_minimize(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
        match &self.kind {
            BasisKind::Orthant => {
                let mut best = (0usize, 0usize);
                let mut val = f64::INFINITY;
                for i in 0..self.dims.0 {
                    for j in 0..self.dims.1 {
                        if g[(i, j)] < val {
                            val = g[(i, j)];
                            best = (i, j);
                        }
                    }
                }
                let mut m = DMatrix::zeros(self.dims.0, self.dims.1);
                m[best] = 1.0;
                (m, val)
            }
            BasisKind::Loewner => {
                // over {S psd, tr S = 1}: G . S = sym(G) . S is minimized by
                // the unit eigenvector of the smallest eigenvalue
                let sym = (g + g.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                let mut k = 0;
                for idx in 1..eig.eigenvalues.len() {
                    if eig.eigenvalues[idx] < eig.eigenvalues[k] {
                        k = idx;
                    }
                }
                let u = eig.eigenvectors.column(k);
                (&u * u.transpose(), eig.eigenvalues[k])
            }
            BasisKind::Custom(gens) => {
                let mut best = 0usize;
                let mut val = f64::INFINITY;
                for (idx, gen) in gens.iter().enumerate() {
                    let v = g.dot(gen);
                    if v < val {
                        val = v;
                        best = idx;
                    }
                }
                (gens[best].clone(), val)
            }
        }
    }

    /// A strictly interior starting point for the conditional-gradient loop.
    pub fn barycenter(&self) -> DMatrix<f64> {
        match &self.kind {
            BasisKind::Orthant => DMatrix::from_element(
                self.dims.0,
                self.dims.1,
                1.0 / (self.dims.0 * self.dims.1) as f64,
            ),
            BasisKind::Loewner => {
                DMatrix::identity(self.dims.0, self.dims.1) / self.dims.0 as f64
            }
            BasisKind::Custom(gens) => {
                let mut acc = DMatrix::zeros(self.dims.0, self.dims.1);
                for g in gens {
                    acc += g;
                }
                acc / gens.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaximalityVerdict {
    /// The infimum is within tolerance of zero: positive extreme dependence
    /// with respect to the basis order, certified by the witness direction.
    Maximal,
    /// The infimum is certified strictly positive.
    NotMaximal,
    /// Iteration budget exhausted with the duality gap still open.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalityReport {
    pub verdict: MaximalityVerdict,
    /// Best value of `h(M) - sigma . M` over the iterates (the achieved
    /// infimum up to the reported duality gap).
    pub gap: f64,
    pub witness: DMatrix<f64>,
    /// Width of the certified bracket around the infimum at exit: `gap`
    /// minus the best subgradient lower bound (the conditional-gradient
    /// duality gap, tightened over every evaluation).
    pub fw_gap: f64,
    pub iterations: usize,
    /// Exact-transport solves spent.
    pub directions_probed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalityOptions {
    pub max_fw_iter: usize,
    /// `None` means `1e-6 * (1 + ||sigma||)`.
    pub gap_tol: Option<f64>,
    /// Golden-section evaluations per line search.
    pub line_search_evals: usize,
}

impl Default for MaximalityOptions {
    fn default() -> Self {
        Self {
            max_fw_iter: 2000,
            gap_tol: None,
            line_search_evals: 20,
        }
    }
}

/// Decide positive extreme dependence of `sigma` with respect to the order
/// induced by `basis`.
///
/// Minimizes `g(M) = h(M) - sigma . M` over the basis by conditional
/// gradient. `g` is nonnegative on all of `B` whenever `sigma` lies in the
/// covariance set, so reaching `g <= gap_tol` certifies maximality; a
/// duality gap smaller than the remaining value certifies the opposite.
pub fn maximality_gap(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    sigma: &CrossCovariance,
    basis: &ConicBasis,
    opts: &MaximalityOptions,
) -> Result<MaximalityReport, MaximalityError> {
    if basis.dims() != (sigma.nrows(), sigma.ncols()) {
        return Err(MaximalityError::ShapeMismatch {
            basis: basis.dims(),
            sigma: (sigma.nrows(), sigma.ncols()),
        });
    }
    let gap_tol = opts.gap_tol.unwrap_or(1e-6 * (1.0 + sigma.norm()));

    // Every evaluation is a (value, subgradient) pair. The subgradient
    // inequality turns each into a lower bound on the infimum over B:
    //   inf g >= g(M) - max_{z in B} grad . (M - z)
    // so both sides of the bracket tighten as evaluations accumulate.
    let mut probes = 0usize;
    let mut best_value = f64::INFINITY;
    let mut best_witness = basis.barycenter();
    let mut lower_bound = f64::NEG_INFINITY;

    let mut eval = |m: &DMatrix<f64>,
                    probes: &mut usize,
                    best_value: &mut f64,
                    best_witness: &mut DMatrix<f64>,
                    lower_bound: &mut f64|
     -> Result<(f64, DMatrix<f64>), MaximalityError> {
        *probes += 1;
        let affinity = AffinityMatrix::new(m.clone()).expect("finite iterate");
        let (h, boundary_sigma) = covset::support(p, q, &affinity)?;
        let value = h - sigma.dot(m);
        let grad = boundary_sigma.as_matrix() - sigma.as_matrix();
        if value < *best_value {
            *best_value = value;
            *best_witness = m.clone();
        }
        let (_, oracle_min) = basis.linear_minimize(&grad);
        let lb = value + oracle_min - grad.dot(m);
        if lb > *lower_bound {
            *lower_bound = lb;
        }
        Ok((value, grad))
    };

    let mut current = basis.barycenter();
    let (mut value, mut grad) = eval(
        &current,
        &mut probes,
        &mut best_value,
        &mut best_witness,
        &mut lower_bound,
    )?;
    let mut iterations = 0usize;
    let verdict;

    loop {
        if best_value <= gap_tol {
            verdict = MaximalityVerdict::Maximal;
            break;
        }
        if lower_bound > gap_tol {
            // the infimum is certified strictly above tolerance
            verdict = MaximalityVerdict::NotMaximal;
            break;
        }
        if iterations >= opts.max_fw_iter {
            verdict = MaximalityVerdict::Inconclusive;
            break;
        }

        let (vertex, _) = basis.linear_minimize(&grad);

        // golden-section line search along the admissible segment
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        let phi = 0.618_033_988_749_894_9_f64;
        let mut g1 = hi - phi * (hi - lo);
        let mut g2 = lo + phi * (hi - lo);
        let blend = |gamma: f64, from: &DMatrix<f64>| from + (&vertex - from) * gamma;
        let mut f1 = eval(
            &blend(g1, &current),
            &mut probes,
            &mut best_value,
            &mut best_witness,
            &mut lower_bound,
        )?
        .0;
        let mut f2 = eval(
            &blend(g2, &current),
            &mut probes,
            &mut best_value,
            &mut best_witness,
            &mut lower_bound,
        )?
        .0;
        for _ in 0..opts.line_search_evals.saturating_sub(2) {
            if f1 <= f2 {
                hi = g2;
                g2 = g1;
                f2 = f1;
                g1 = hi - phi * (hi - lo);
                f1 = eval(
                    &blend(g1, &current),
                    &mut probes,
                    &mut best_value,
                    &mut best_witness,
                    &mut lower_bound,
                )?
                .0;
            } else {
                lo = g1;
                g1 = g2;
                f1 = f2;
                g2 = lo + phi * (hi - lo);
                f2 = eval(
                    &blend(g2, &current),
                    &mut probes,
                    &mut best_value,
                    &mut best_witness,
                    &mut lower_bound,
                )?
                .0;
            }
        }
        let gamma = if f1 <= f2 { g1 } else { g2 };
        // fall back to the classic step when the search made no progress
        let fallback = 2.0 / (iterations as f64 + 2.0);
        let candidate = blend(gamma.max(1e-12), &current);
        let (cand_value, cand_grad) = eval(
            &candidate,
            &mut probes,
            &mut best_value,
            &mut best_witness,
            &mut lower_bound,
        )?;
        if cand_value < value {
            current = candidate;
            value = cand_value;
            grad = cand_grad;
        } else {
            let candidate = blend(fallback, &current);
            let (v, g) = eval(
                &candidate,
                &mut probes,
                &mut best_value,
                &mut best_witness,
                &mut lower_bound,
            )?;
            current = candidate;
            value = v;
            grad = g;
        }
        iterations += 1;
    }

    let fw_gap = (best_value - lower_bound.max(0.0)).max(0.0);
    Ok(MaximalityReport {
        verdict,
        gap: best_value,
        witness: best_witness,
        fw_gap,
        iterations,
        directions_probed: probes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremeVerdict {
    /// On the boundary of the covariance set.
    Extreme,
    /// Strictly interior as far as the probe saw.
    NotExtreme,
    /// The probe separated sigma from the covariance set entirely.
    Outside,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremeReport {
    pub verdict: ExtremeVerdict,
    /// Supporting direction (boundary) or separating certificate (outside).
    pub direction: DMatrix<f64>,
    pub min_slack: f64,
    pub directions_probed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeOptions {
    /// Boundary tolerance; `None` means `1e-8 * (1 + ||sigma||)`.
    pub tol: Option<f64>,
    pub contains: ContainsOptions,
}

impl Default for ExtremeOptions {
    fn default() -> Self {
        Self {
            tol: None,
            contains: ContainsOptions::default(),
        }
    }
}

/// Extreme dependence = boundary of the covariance set, decided by the
/// membership probe of [`covset::contains`].
pub fn is_extreme(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    sigma: &CrossCovariance,
    opts: &ExtremeOptions,
) -> Result<ExtremeReport, MaximalityError> {
    let tol = opts.tol.unwrap_or(1e-8 * (1.0 + sigma.norm()));
    let report = covset::contains(p, q, sigma, tol, &opts.contains)?;
    let verdict = match report.verdict {
        Containment::Boundary => ExtremeVerdict::Extreme,
        Containment::Inside => ExtremeVerdict::NotExtreme,
        Containment::Outside => ExtremeVerdict::Outside,
    };
    Ok(ExtremeReport {
        verdict,
        direction: report.direction,
        min_slack: report.min_slack,
        directions_probed: report.directions_probed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covset::support;
    use crate::transport::testutil::uniform_pm1;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn orthant_oracle_picks_smallest_entry() {
        let basis = ConicBasis::orthant(3, 2);
        let g = DMatrix::from_row_slice(3, 2, &[0.5, 0.2, 0.9, -0.3, -0.7, 0.1]);
        let (m, value) = basis.linear_minimize(&g);
        assert_abs_diff_eq!(value, -0.7);
        assert_abs_diff_eq!(m[(2, 0)], 1.0);
        assert_abs_diff_eq!(m.sum(), 1.0);
    }

    #[test]
    fn loewner_oracle_diagonal_case() {
        let basis = ConicBasis::loewner(2);
        let g = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let (m, value) = basis.linear_minimize(&g);
        assert_abs_diff_eq!(value, -1.0);
        assert_abs_diff_eq!(m[(1, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(0, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn loewner_oracle_nonsymmetric_matches_quadratic_formula() {
        let basis = ConicBasis::loewner(2);
        let g = DMatrix::from_row_slice(2, 2, &[0.4, 1.2, -0.8, -0.1]);
        let (_, value) = basis.linear_minimize(&g);
        // eigenvalues of sym(G) = [[0.4, 0.2], [0.2, -0.1]] by hand
        let (a, b, c) = (0.4f64, 0.2f64, -0.1f64);
        let expected = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
        assert_abs_diff_eq!(value, expected, epsilon = 1e-10);
    }

    #[test]
    fn loewner_oracle_value_is_min_eig_of_symmetric_part() {
        let mut rng = StdRng::seed_from_u64(91);
        let basis = ConicBasis::loewner(3);
        for _ in 0..20 {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let (m, value) = basis.linear_minimize(&g);
            let sym = (&g + g.transpose()) * 0.5;
            let min_eig = sym
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert_abs_diff_eq!(value, min_eig, epsilon = 1e-10);
            // witness is a unit-trace psd rank-1 matrix
            assert_abs_diff_eq!(m.trace(), 1.0, epsilon = 1e-12);
            assert!((&m - m.transpose()).norm() <= 1e-12);
        }
    }

    #[test]
    fn custom_basis_validation() {
        assert!(matches!(
            ConicBasis::custom(Vec::new()),
            Err(MaximalityError::EmptyBasis)
        ));
        let gens = alloc::vec![DMatrix::zeros(2, 2)];
        assert!(matches!(
            ConicBasis::custom(gens),
            Err(MaximalityError::ZeroGenerator { index: 0 })
        ));
        let gens = alloc::vec![DMatrix::identity(2, 2), DMatrix::zeros(3, 2)];
        assert!(matches!(
            ConicBasis::custom(gens),
            Err(MaximalityError::GeneratorShape { index: 1, .. })
        ));
    }

    #[test]
    fn comonotone_is_maximal_antitone_is_not() {
        let p = uniform_pm1();
        let q = uniform_pm1();
        let basis = ConicBasis::orthant(1, 1);
        let opts = MaximalityOptions {
            gap_tol: Some(1e-8),
            ..Default::default()
        };
        let comonotone = CrossCovariance::from_matrix(DMatrix::from_element(1, 1, 1.0));
        let report = maximality_gap(&p, &q, &comonotone, &basis, &opts).unwrap();
        assert_eq!(report.verdict, MaximalityVerdict::Maximal);
        assert!(report.gap <= 1e-8);

        let antitone = CrossCovariance::from_matrix(DMatrix::from_element(1, 1, -1.0));
        let report = maximality_gap(&p, &q, &antitone, &basis, &opts).unwrap();
        assert_eq!(report.verdict, MaximalityVerdict::NotMaximal);
        // h(1) = Var = 1, so the gap is (sigma_tilde - sigma) . 1 = 2 Var
        assert_abs_diff_eq!(report.gap, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn independence_is_not_maximal() {
        let mut rng = StdRng::seed_from_u64(77);
        let p = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(5, 2, |_, _| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap()
        .center();
        let q = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(6, 2, |_, _| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap()
        .center();
        let basis = ConicBasis::orthant(2, 2);
        let sigma = CrossCovariance::zeros(2, 2);
        let report =
            maximality_gap(&p, &q, &sigma, &basis, &MaximalityOptions::default()).unwrap();
        assert_eq!(report.verdict, MaximalityVerdict::NotMaximal);
        // at the witness the gap is exactly the support value
        let (h, _) = support(
            &p,
            &q,
            &AffinityMatrix::new(report.witness.clone()).unwrap(),
        )
        .unwrap();
        assert!(report.gap >= 0.0);
        assert!((report.gap - h).abs() <= 1e-6 * (1.0 + h.abs()));
    }

    #[test]
    fn gap_evaluations_are_nonnegative_for_feasible_sigma() {
        let mut rng = StdRng::seed_from_u64(101);
        let p = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(4, 2, |_, _| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap()
        .center();
        let q = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(4, 2, |_, _| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap()
        .center();
        // feasible sigma from a support point
        let m = AffinityMatrix::new(DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap();
        let (_, sigma) = support(&p, &q, &m).unwrap();
        let basis = ConicBasis::orthant(2, 2);
        for _ in 0..10 {
            let mut dir = DMatrix::from_fn(2, 2, |_, _| rng.random_range(0.0..1.0));
            let total = dir.sum();
            dir /= total;
            let affinity = AffinityMatrix::new(dir.clone()).unwrap();
            let (h, _) = support(&p, &q, &affinity).unwrap();
            assert!(h - sigma.dot(&dir) >= -1e-9);
        }
        let report =
            maximality_gap(&p, &q, &sigma, &basis, &MaximalityOptions::default()).unwrap();
        assert!(report.gap >= -1e-9);
    }

    #[test]
    fn positive_extreme_implies_extreme() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..10 {
            let p = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(4, 2, |_, _| {
                rng.random_range(-1.0..1.0)
            }))
            .unwrap()
            .center();
            let q = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(5, 2, |_, _| {
                rng.random_range(-1.0..1.0)
            }))
            .unwrap()
            .center();
            // positive-extreme by construction: support point of a basis direction
            let mut dir = DMatrix::from_fn(2, 2, |_, _| rng.random_range(0.05..1.0));
            let total = dir.sum();
            dir /= total;
            let (_, sigma) = support(&p, &q, &AffinityMatrix::new(dir).unwrap()).unwrap();
            let basis = ConicBasis::orthant(2, 2);
            let gap =
                maximality_gap(&p, &q, &sigma, &basis, &MaximalityOptions::default()).unwrap();
            assert_eq!(
                gap.verdict,
                MaximalityVerdict::Maximal,
                "trial {trial}: gap {}",
                gap.gap
            );
            let extreme = is_extreme(&p, &q, &sigma, &ExtremeOptions::default()).unwrap();
            assert_eq!(extreme.verdict, ExtremeVerdict::Extreme, "trial {trial}");
        }
    }

    #[test]
    fn interior_points_are_not_extreme() {
        let mut rng = StdRng::seed_from_u64(117);
        let p = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(5, 2, |_, _| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap()
        .center();
        let q = DiscreteMarginal::with_uniform_weights(DMatrix::from_fn(5, 2, |_, _| {
            rng.random_range(-1.0..1.0)
        }))
        .unwrap()
        .center();
        // entropic coupling at moderate temperature: strictly interior
        let m = AffinityMatrix::new(DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)))
            .unwrap();
        let sol = crate::transport::ipfp_solve(
            &p,
            &q,
            &m,
            1.0,
            &crate::transport::IpfpOptions::default(),
        )
        .unwrap();
        let sigma = crate::transport::cross_cov(&sol.coupling, &p, &q);
        let report = is_extreme(&p, &q, &sigma, &ExtremeOptions::default()).unwrap();
        assert_eq!(report.verdict, ExtremeVerdict::NotExtreme);
        // independence too
        let report =
            is_extreme(&p, &q, &CrossCovariance::zeros(2, 2), &ExtremeOptions::default())
                .unwrap();
        assert_eq!(report.verdict, ExtremeVerdict::NotExtreme);
    }
}
