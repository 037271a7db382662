//! Discrete marginal distributions: weighted atom clouds in `R^d`.
//!
//! Everything downstream (coupling solvers, covariance-set geometry, the
//! finance applications) consumes the two marginals `P` and `Q` in this
//! representation. Atoms are rows of an `N x d` matrix, weights a length-`N`
//! probability vector. Zero-weight atoms are dropped at construction.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::fmath;

/// Weights must sum to one within this tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// A marginal counts as centered when every coordinate mean is below this.
pub const CENTERED_TOL: f64 = 1e-10;
/// Correlation matrices are accepted as PSD down to this eigenvalue.
pub const PSD_TOL: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalError {
    Empty,
    ShapeMismatch { atoms: usize, weights: usize },
    NonFiniteAtom { row: usize, col: usize },
    NonFiniteWeight { index: usize },
    NegativeWeight { index: usize, value: f64 },
    WeightSum { sum: f64 },
    NotPsd { eigenvalue: f64 },
    NotSymmetric,
    NotUnitDiagonal { index: usize, value: f64 },
    InvalidSpec(String),
}

impl fmt::Display for MarginalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginalError::Empty => write!(f, "marginal has no atoms with positive weight"),
            MarginalError::ShapeMismatch { atoms, weights } => {
                write!(f, "{atoms} atom rows but {weights} weights")
            }
            MarginalError::NonFiniteAtom { row, col } => {
                write!(f, "non-finite atom entry at row {row}, column {col}")
            }
            MarginalError::NonFiniteWeight { index } => {
                write!(f, "non-finite weight at index {index}")
            }
            MarginalError::NegativeWeight { index, value } => {
                write!(f, "negative weight {value} at index {index}")
            }
            MarginalError::WeightSum { sum } => {
                write!(f, "weights sum to {sum}, expected 1")
            }
            MarginalError::NotPsd { eigenvalue } => {
                write!(
                    f,
                    "correlation matrix is not positive semi-definite (eigenvalue {eigenvalue})"
                )
            }
            MarginalError::NotSymmetric => write!(f, "correlation matrix is not symmetric"),
            MarginalError::NotUnitDiagonal { index, value } => {
                write!(f, "correlation diagonal entry {index} is {value}, expected 1")
            }
            MarginalError::InvalidSpec(msg) => write!(f, "invalid marginal spec: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MarginalError {}

/// A weighted atom cloud in `R^d` representing one marginal distribution.
///
/// Invariants enforced at construction: weights are nonnegative, sum to one
/// within [`WEIGHT_SUM_TOL`], every atom entry is finite, and zero-weight
/// atoms have been removed. `centered` reflects whether every coordinate has
/// weighted mean below [`CENTERED_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMarginal {
    atoms: DMatrix<f64>,
    weights: DVector<f64>,
    centered: bool,
}

impl DiscreteMarginal {
    pub fn new(atoms: DMatrix<f64>, weights: DVector<f64>) -> Result<Self, MarginalError> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(MarginalError::Empty);
        }
        if atoms.nrows() != weights.len() {
            return Err(MarginalError::ShapeMismatch {
                atoms: atoms.nrows(),
                weights: weights.len(),
            });
        }
        for row in 0..atoms.nrows() {
            for col in 0..atoms.ncols() {
                if !atoms[(row, col)].is_finite() {
                    return Err(MarginalError::NonFiniteAtom { row, col });
                }
            }
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(MarginalError::NonFiniteWeight { index });
            }
            if w < 0.0 {
                return Err(MarginalError::NegativeWeight { index, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MarginalError::WeightSum { sum });
        }

        // Zero-weight atoms contribute nothing to any coupling; drop them here
        // so the solvers can assume strictly positive weights.
        let keep: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
        if keep.is_empty() {
            return Err(MarginalError::Empty);
        }
        let (atoms, weights) = if keep.len() == weights.len() {
            (atoms, weights)
        } else {
            let kept_atoms =
                DMatrix::from_fn(keep.len(), atoms.ncols(), |r, c| atoms[(keep[r], c)]);
            let kept_weights = DVector::from_fn(keep.len(), |r, _| weights[keep[r]]);
            (kept_atoms, kept_weights)
        };

        let centered = {
            let mean = weighted_mean(&atoms, &weights);
            mean.iter().all(|m| m.abs() <= CENTERED_TOL)
        };
        Ok(Self {
            atoms,
            weights,
            centered,
        })
    }

    /// Equal weights `1/N` over the given atoms.
    pub fn with_uniform_weights(atoms: DMatrix<f64>) -> Result<Self, MarginalError> {
        let n = atoms.nrows();
        if n == 0 {
            return Err(MarginalError::Empty);
        }
        let weights = DVector::from_element(n, 1.0 / n as f64);
        Self::new(atoms, weights)
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one atom
    }

    pub fn dim(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn mean(&self) -> DVector<f64> {
        weighted_mean(&self.atoms, &self.weights)
    }

    /// Shift atoms so every coordinate has weighted mean zero. Idempotent;
    /// weights are unchanged.
    pub fn center(&self) -> Self {
        let mean = self.mean();
        let mut atoms = self.atoms.clone();
        for r in 0..atoms.nrows() {
            for c in 0..atoms.ncols() {
                atoms[(r, c)] -= mean[c];
            }
        }
        Self {
            atoms,
            weights: self.weights.clone(),
            centered: true,
        }
    }

    /// Weighted covariance matrix of the atoms (mean subtracted).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let d = self.dim();
        let mut cov = DMatrix::zeros(d, d);
        for t in 0..self.len() {
            let w = self.weights[t];
            for i in 0..d {
                let xi = self.atoms[(t, i)] - mean[i];
                for j in 0..d {
                    cov[(i, j)] += w * xi * (self.atoms[(t, j)] - mean[j]);
                }
            }
        }
        cov
    }

    /// Per-coordinate weighted standard deviations.
    pub fn std_devs(&self) -> DVector<f64> {
        let cov = self.covariance();
        DVector::from_fn(self.dim(), |i, _| fmath::sqrt(cov[(i, i)].max(0.0)))
    }
}

fn weighted_mean(atoms: &DMatrix<f64>, weights: &DVector<f64>) -> DVector<f64> {
    let mut mean = DVector::zeros(atoms.ncols());
    for r in 0..atoms.nrows() {
        for c in 0..atoms.ncols() {
            mean[c] += weights[r] * atoms[(r, c)];
        }
    }
    mean
}

/// Parameters of a lognormal terminal law to discretize by Monte Carlo.
///
/// `vols` are annualized volatilities, `corr` the driver correlation matrix,
/// `spot` the initial levels, `maturity` in years. `atom_count` equally
/// weighted atoms are drawn with the ChaCha12 stream seeded by `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionMarginalSpec {
    pub vols: Vec<f64>,
    pub corr: DMatrix<f64>,
    pub spot: Vec<f64>,
    pub maturity: f64,
    pub atom_count: usize,
    pub seed: u64,
}

impl OptionMarginalSpec {
    /// Spec with all spots at 1 (the at-the-money normalization).
    pub fn unit_spot(
        vols: Vec<f64>,
        corr: DMatrix<f64>,
        maturity: f64,
        atom_count: usize,
        seed: u64,
    ) -> Self {
        let spot = alloc::vec![1.0; vols.len()];
        Self {
            vols,
            corr,
            spot,
            maturity,
            atom_count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), MarginalError> {
        let n = self.vols.len();
        if n == 0 {
            return Err(MarginalError::InvalidSpec("no volatilities".into()));
        }
        if self.spot.len() != n {
            return Err(MarginalError::InvalidSpec(format!(
                "{} spots for {} volatilities",
                self.spot.len(),
                n
            )));
        }
        if self.corr.nrows() != n || self.corr.ncols() != n {
            return Err(MarginalError::InvalidSpec(format!(
                "correlation is {}x{}, expected {n}x{n}",
                self.corr.nrows(),
                self.corr.ncols()
            )));
        }
        for (i, &v) in self.vols.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MarginalError::InvalidSpec(format!(
                    "volatility {i} is {v}, expected > 0"
                )));
            }
        }
        for (i, &s) in self.spot.iter().enumerate() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(MarginalError::InvalidSpec(format!(
                    "spot {i} is {s}, expected > 0"
                )));
            }
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(MarginalError::InvalidSpec(format!(
                "maturity is {}, expected > 0",
                self.maturity
            )));
        }
        if self.atom_count < 2 {
            return Err(MarginalError::InvalidSpec(format!(
                "atom_count is {}, expected >= 2",
                self.atom_count
            )));
        }
        for i in 0..n {
            let d = self.corr[(i, i)];
            if (d - 1.0).abs() > 1e-12 {
                return Err(MarginalError::NotUnitDiagonal { index: i, value: d });
            }
            for j in 0..i {
                if (self.corr[(i, j)] - self.corr[(j, i)]).abs() > 1e-12 {
                    return Err(MarginalError::NotSymmetric);
                }
            }
        }
        Ok(())
    }
}

/// Discretize the lognormal terminal law by equal-weight Monte Carlo.
///
/// Each atom is `spot_i * exp(vol_i * sqrt(tau) * z_i - vol_i^2 * tau / 2)`
/// with `z` jointly Gaussian under `corr`. Deterministic given the seed; the
/// martingale property `E[atom_i] = spot_i` holds up to sampling error.
pub fn synthesize_lognormal(spec: &OptionMarginalSpec) -> Result<DiscreteMarginal, MarginalError> {
    spec.validate()?;
    let n = spec.vols.len();

    // Factor the correlation through its eigendecomposition so slightly
    // indefinite inputs (eigenvalues in [PSD_TOL, 0)) still work.
    let eig = spec.corr.clone().symmetric_eigen();
    let mut min_eig = f64::INFINITY;
    for &l in eig.eigenvalues.iter() {
        min_eig = min_eig.min(l);
    }
    if min_eig < PSD_TOL {
        return Err(MarginalError::NotPsd { eigenvalue: min_eig });
    }
    let mut factor = eig.eigenvectors.clone();
    for c in 0..n {
        let s = fmath::sqrt(eig.eigenvalues[c].max(0.0));
        for r in 0..n {
            factor[(r, c)] *= s;
        }
    }

    let sqrt_tau = fmath::sqrt(spec.maturity);
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut atoms = DMatrix::zeros(spec.atom_count, n);
    let mut gauss = DVector::zeros(n);
    for t in 0..spec.atom_count {
        for i in 0..n {
            gauss[i] = StandardNormal.sample(&mut rng);
        }
        let z = &factor * &gauss;
        for i in 0..n {
            let drift = -0.5 * spec.vols[i] * spec.vols[i] * spec.maturity;
            atoms[(t, i)] = spec.spot[i] * fmath::exp(spec.vols[i] * sqrt_tau * z[i] + drift);
        }
    }
    DiscreteMarginal::with_uniform_weights(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn marginal_1d(atoms: &[f64], weights: &[f64]) -> DiscreteMarginal {
        DiscreteMarginal::new(
            DMatrix::from_column_slice(atoms.len(), 1, atoms),
            DVector::from_column_slice(weights),
        )
        .unwrap()
    }

    #[test]
    fn center_shifts_to_zero_mean() {
        let m = marginal_1d(&[2.0, 4.0], &[0.5, 0.5]);
        let c = m.center();
        assert_abs_diff_eq!(c.atoms()[(0, 0)], -1.0);
        assert_abs_diff_eq!(c.atoms()[(1, 0)], 1.0);
        assert!(c.is_centered());
    }

    #[test]
    fn center_weighted_mean() {
        // weights (.25,.75), atoms (0),(4): mean 3, shifted atoms (-3),(1)
        let m = marginal_1d(&[0.0, 4.0], &[0.25, 0.75]);
        assert_abs_diff_eq!(m.mean()[0], 3.0, epsilon = 1e-15);
        let c = m.center();
        assert_abs_diff_eq!(c.atoms()[(0, 0)], -3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.atoms()[(1, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn center_is_idempotent() {
        let m = marginal_1d(&[1.0, 2.0, 7.0], &[0.2, 0.5, 0.3]);
        let once = m.center();
        let twice = once.center();
        for i in 0..3 {
            assert_abs_diff_eq!(once.atoms()[(i, 0)], twice.atoms()[(i, 0)], epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_weight_atoms_are_dropped() {
        let m = marginal_1d(&[1.0, 5.0, 2.0], &[0.5, 0.0, 0.5]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.atoms()[(1, 0)], 2.0);
    }

    #[test]
    fn rejects_bad_weights() {
        let atoms = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let err = DiscreteMarginal::new(atoms.clone(), DVector::from_column_slice(&[0.5, 0.6]))
            .unwrap_err();
        assert!(matches!(err, MarginalError::WeightSum { .. }));
        let err = DiscreteMarginal::new(atoms.clone(), DVector::from_column_slice(&[-0.1, 1.1]))
            .unwrap_err();
        assert!(matches!(err, MarginalError::NegativeWeight { .. }));
        let err = DiscreteMarginal::new(
            DMatrix::from_column_slice(2, 1, &[1.0, f64::NAN]),
            DVector::from_column_slice(&[0.5, 0.5]),
        )
        .unwrap_err();
        assert!(matches!(err, MarginalError::NonFiniteAtom { row: 1, col: 0 }));
    }

    #[test]
    fn weights_always_sum_to_one() {
        let m = marginal_1d(&[1.0, 2.0, 3.0], &[0.25, 0.25, 0.5]);
        assert_abs_diff_eq!(m.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    fn spec_1d(vol: f64, n: usize, seed: u64) -> OptionMarginalSpec {
        OptionMarginalSpec::unit_spot(alloc::vec![vol], DMatrix::identity(1, 1), 1.0, n, seed)
    }

    #[test]
    fn lognormal_martingale_mean() {
        let m = synthesize_lognormal(&spec_1d(0.2, 10_000, 7)).unwrap();
        let mean = m.mean()[0];
        let sd = m.std_devs()[0];
        let stderr = sd / (m.len() as f64).sqrt();
        assert!(
            (mean - 1.0).abs() <= 3.0 * stderr,
            "mean {mean} off 1.0 by more than 3 stderr {stderr}"
        );
    }

    #[test]
    fn lognormal_degenerate_vol_collapses_to_spot() {
        let m = synthesize_lognormal(&spec_1d(1e-12, 16, 3)).unwrap();
        for t in 0..m.len() {
            assert_abs_diff_eq!(m.atoms()[(t, 0)], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn lognormal_independent_components_uncorrelated() {
        let spec = OptionMarginalSpec::unit_spot(
            alloc::vec![0.15, 0.20],
            DMatrix::identity(2, 2),
            1.0,
            10_000,
            11,
        );
        let m = synthesize_lognormal(&spec).unwrap();
        // correlation of the log-atoms; independent-sampling oracle says ~0
        let n = m.len();
        let logs = DMatrix::from_fn(n, 2, |r, c| fmath::ln(m.atoms()[(r, c)]));
        let mean0 = logs.column(0).sum() / n as f64;
        let mean1 = logs.column(1).sum() / n as f64;
        let (mut c00, mut c11, mut c01) = (0.0, 0.0, 0.0);
        for t in 0..n {
            let a = logs[(t, 0)] - mean0;
            let b = logs[(t, 1)] - mean1;
            c00 += a * a;
            c11 += b * b;
            c01 += a * b;
        }
        let corr = c01 / (c00.sqrt() * c11.sqrt());
        let stderr = 1.0 / (n as f64).sqrt();
        assert!(corr.abs() <= 3.0 * stderr, "corr {corr} vs stderr {stderr}");
    }

    #[test]
    fn lognormal_same_seed_is_identical() {
        let a = synthesize_lognormal(&spec_1d(0.3, 64, 99)).unwrap();
        let b = synthesize_lognormal(&spec_1d(0.3, 64, 99)).unwrap();
        assert_eq!(a.atoms(), b.atoms());
    }

    #[test]
    fn lognormal_rejects_non_psd_corr() {
        let mut corr = DMatrix::identity(2, 2);
        corr[(0, 1)] = 1.5;
        corr[(1, 0)] = 1.5;
        let spec = OptionMarginalSpec::unit_spot(alloc::vec![0.1, 0.1], corr, 1.0, 10, 1);
        match synthesize_lognormal(&spec).unwrap_err() {
            MarginalError::NotPsd { eigenvalue } => assert!(eigenvalue < -0.4),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }
}
