//! Geometry of the covariance set: the convex compact set of
//! cross-covariance matrices attainable by couplings of `P` and `Q`.
//!
//! Its support function `h(M) = max over couplings of sigma . M` is an exact
//! optimal transport value, so boundary points come from [`support`],
//! two-dimensional boundary sections from [`section`], interior samples from
//! [`scatter`], and approximate membership from [`contains`] by probing
//! support-function separation over many directions.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::affinity::AffinityMatrix;
use crate::fmath;
use crate::marginals::DiscreteMarginal;
use crate::transport::{
    cross_cov, ipfp_solve, ot_exact, CrossCovariance, IpfpOptions, TransportError,
};

#[derive(Debug, Clone, PartialEq)]
pub enum CovsetError {
    Transport(TransportError),
    ZeroDirection,
    IndexOutOfRange {
        index: (usize, usize),
        dims: (usize, usize),
    },
    TooFewDirections {
        n_dirs: usize,
    },
}

impl fmt::Display for CovsetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovsetError::Transport(e) => write!(f, "{e}"),
            CovsetError::ZeroDirection => write!(f, "direction matrix must be nonzero"),
            CovsetError::IndexOutOfRange { index, dims } => write!(
                f,
                "coordinate ({}, {}) outside the {}x{} cross-covariance",
                index.0, index.1, dims.0, dims.1
            ),
            CovsetError::TooFewDirections { n_dirs } => {
                write!(f, "need at least 8 section directions, got {n_dirs}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CovsetError {}

impl From<TransportError> for CovsetError {
    fn from(e: TransportError) -> Self {
        CovsetError::Transport(e)
    }
}

/// Support value and a boundary point of the covariance set.
///
/// `value = h(M)` is the exact optimal transport value; `sigma` is the
/// cross-covariance of a maximizing coupling and satisfies
/// `sigma . M = h(M)`, so it lies on the boundary.
pub fn support(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    m: &AffinityMatrix,
) -> Result<(f64, CrossCovariance), CovsetError> {
    if m.norm() == 0.0 {
        return Err(CovsetError::ZeroDirection);
    }
    let (value, coupling) = ot_exact(p, q, m)?;
    Ok((value, cross_cov(&coupling, p, q)))
}

/// A two-dimensional boundary section of the covariance set.
///
/// The section fixes two entries of the cross-covariance and collects, for
/// each direction angle, the support point of the set projected onto that
/// coordinate plane. This is the boundary of the projection (shadow) of the
/// covariance set, not a slice at zero off-plane coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSection {
    coord_pair: ((usize, usize), (usize, usize)),
    angles: Vec<f64>,
    directions: Vec<(f64, f64)>,
    boundary: Vec<(f64, f64)>,
}

impl CovSection {
    pub fn coord_pair(&self) -> ((usize, usize), (usize, usize)) {
        self.coord_pair
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Unit direction vectors in the section plane, one per angle.
    pub fn directions(&self) -> &[(f64, f64)] {
        &self.directions
    }

    /// Support points in the section plane, ordered by increasing angle.
    pub fn boundary(&self) -> &[(f64, f64)] {
        &self.boundary
    }

    pub fn len(&self) -> usize {
        self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundary.is_empty()
    }

    /// Check the convex-polygon invariant: consecutive edge cross products
    /// all nonnegative (counterclockwise order) within `tol`.
    pub fn is_convex(&self, tol: f64) -> bool {
        let pts = &self.boundary;
        let n = pts.len();
        if n < 3 {
            return true;
        }
        for k in 0..n {
            let a = pts[k];
            let b = pts[(k + 1) % n];
            let c = pts[(k + 2) % n];
            let e1 = (b.0 - a.0, b.1 - a.1);
            let e2 = (c.0 - b.0, c.1 - b.1);
            let cross = e1.0 * e2.1 - e1.1 * e2.0;
            if cross < -tol {
                return false;
            }
        }
        true
    }

    /// Whether a point of the section plane lies inside the sampled support
    /// hull: `d . point <= d . boundary_point + tol` for every direction.
    pub fn contains_point(&self, point: (f64, f64), tol: f64) -> bool {
        self.directions
            .iter()
            .zip(self.boundary.iter())
            .all(|(d, b)| d.0 * point.0 + d.1 * point.1 <= d.0 * b.0 + d.1 * b.1 + tol)
    }
}

/// Project a cross-covariance onto a coordinate pair plane.
pub fn project(
    sigma: &CrossCovariance,
    coord_pair: ((usize, usize), (usize, usize)),
) -> (f64, f64) {
    let ((i, j), (k, l)) = coord_pair;
    (sigma.as_matrix()[(i, j)], sigma.as_matrix()[(k, l)])
}

/// Exact boundary of the covariance set projected onto two entries.
///
/// For `n_dirs` equally spaced angles, builds the direction matrix with
/// `cos` at the first entry and `sin` at the second (summed if the entries
/// coincide) and records the support point. Support points at coinciding
/// entries degenerate to a segment, which the convexity test tolerates.
pub fn section(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    coord_pair: ((usize, usize), (usize, usize)),
    n_dirs: usize,
) -> Result<CovSection, CovsetError> {
    if n_dirs < 8 {
        return Err(CovsetError::TooFewDirections { n_dirs });
    }
    let dims = (p.dim(), q.dim());
    for &(i, j) in &[coord_pair.0, coord_pair.1] {
        if i >= dims.0 || j >= dims.1 {
            return Err(CovsetError::IndexOutOfRange { index: (i, j), dims });
        }
    }
    let mut angles = Vec::with_capacity(n_dirs);
    let mut directions = Vec::with_capacity(n_dirs);
    let mut boundary = Vec::with_capacity(n_dirs);
    for k in 0..n_dirs {
        let theta = 2.0 * core::f64::consts::PI * k as f64 / n_dirs as f64;
        let (c, s) = (fmath::cos(theta), fmath::sin(theta));
        let mut dir = DMatrix::zeros(dims.0, dims.1);
        dir[(coord_pair.0 .0, coord_pair.0 .1)] += c;
        dir[(coord_pair.1 .0, coord_pair.1 .1)] += s;
        // a coinciding pair can cancel to the zero matrix at two angles;
        // any feasible vertex is a valid support point there
        let m = AffinityMatrix::new(dir).expect("finite direction");
        let (_, coupling) = ot_exact(p, q, &m)?;
        let sigma = cross_cov(&coupling, p, q);
        angles.push(theta);
        directions.push((c, s));
        boundary.push(project(&sigma, coord_pair));
    }
    Ok(CovSection {
        coord_pair,
        angles,
        directions,
        boundary,
    })
}

/// Interior samples: cross-covariances of entropic couplings at uniformly
/// drawn affinity matrices with entries in `[-1, 1]`.
pub fn scatter(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    n_draws: usize,
    t_low: f64,
    seed: u64,
    opts: &IpfpOptions,
) -> Result<Vec<CrossCovariance>, CovsetError> {
    if !(t_low > 0.0) {
        return Err(CovsetError::Transport(
            TransportError::NonPositiveTemperature { temperature: t_low },
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let mut m = DMatrix::zeros(p.dim(), q.dim());
        for i in 0..p.dim() {
            for j in 0..q.dim() {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let affinity = AffinityMatrix::new(m).expect("finite draw");
        let sol = ipfp_solve(p, q, &affinity, t_low, opts)?;
        out.push(cross_cov(&sol.coupling, p, q));
    }
    Ok(out)
}

/// Membership verdict for [`contains`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Report of a membership probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ContainsReport {
    pub verdict: Containment,
    /// Smallest `h(M) - sigma . M` over probed unit directions. Negative
    /// means a separating certificate was found.
    pub min_slack: f64,
    /// The direction achieving `min_slack`: a separating certificate when
    /// outside, a supporting direction when on the boundary.
    pub direction: DMatrix<f64>,
    pub directions_probed: usize,
}

/// Options for the membership probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainsOptions {
    pub random_directions: usize,
    /// Number of best probes used to start the local slack minimization.
    pub refine_starts: usize,
    pub refine_iters: usize,
    /// Seed of the deterministic probe stream.
    pub seed: u64,
}

impl Default for ContainsOptions {
    fn default() -> Self {
        Self {
            random_directions: 256,
            refine_starts: 4,
            refine_iters: 150,
            seed: 0x_c0f5_e7a1,
        }
    }
}

/// Approximate membership of `sigma` in the covariance set.
///
/// Probes canonical, random and locally refined unit directions `M` and
/// measures the slack `h(M) - sigma . M`. A slack below `-tol` certifies
/// `outside` (with certificate direction); a minimum slack within `tol` of 0
/// reads `boundary`; otherwise `inside`. Membership is decided from finitely
/// many directions, so `inside` is a sampled verdict, not a proof.
pub fn contains(
    p: &DiscreteMarginal,
    q: &DiscreteMarginal,
    sigma: &CrossCovariance,
    tol: f64,
    opts: &ContainsOptions,
) -> Result<ContainsReport, CovsetError> {
    let (rows, cols) = (p.dim(), q.dim());
    let slack_of = |dir: &DMatrix<f64>| -> Result<(f64, CrossCovariance), CovsetError> {
        let m = AffinityMatrix::new(dir.clone()).expect("finite direction");
        let (h, boundary_sigma) = support(p, q, &m)?;
        Ok((h - sigma.dot(dir), boundary_sigma))
    };

    let mut probes: Vec<DMatrix<f64>> = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let mut e = DMatrix::zeros(rows, cols);
            e[(i, j)] = 1.0;
            probes.push(e.clone());
            e[(i, j)] = -1.0;
            probes.push(e);
        }
    }
    if sigma.norm() > 0.0 {
        probes.push(sigma.as_matrix() / sigma.norm());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_directions {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let norm = m.norm();
        if norm > 1e-12 {
            probes.push(m / norm);
        }
    }

    let mut evaluated: Vec<(f64, DMatrix<f64>)> = Vec::with_capacity(probes.len());
    let mut directions_probed = 0usize;
    for dir in &probes {
        let (slack, _) = slack_of(dir)?;
        evaluated.push((slack, dir.clone()));
        directions_probed += 1;
    }
    evaluated.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite slacks"));

    let mut best_slack = evaluated[0].0;
    let mut best_dir = evaluated[0].1.clone();

    // Local refinement: projected subgradient descent of the slack on the
    // unit sphere, multistarted from the best probes. The subgradient of
    // h(M) - sigma . M is the support point minus sigma.
    for start in evaluated.iter().take(opts.refine_starts.max(1)) {
        let mut dir = start.1.clone();
        for k in 0..opts.refine_iters {
            let (slack, boundary_sigma) = slack_of(&dir)?;
            if slack < best_slack {
                best_slack = slack;
                best_dir = dir.clone();
            }
            if best_slack < -tol {
                break;
            }
            let grad = boundary_sigma.as_matrix() - sigma.as_matrix();
            // tangent component on the sphere
            let radial = grad.dot(&dir);
            let tangent = &grad - &dir * radial;
            let t_norm = tangent.norm();
            if t_norm <= 1e-14 {
                break;
            }
            let step = 0.5 / fmath::sqrt((k + 1) as f64);
            let next = &dir - tangent * (step / t_norm);
            let n_norm = next.norm();
            if n_norm <= 1e-14 {
                break;
            }
            dir = next / n_norm;
            directions_probed += 1;
        }
        if best_slack < -tol {
            break;
        }
    }

    let verdict = if best_slack < -tol {
        Containment::Outside
    } else if best_slack <= tol {
        Containment::Boundary
    } else {
        Containment::Inside
    };
    Ok(ContainsReport {
        verdict,
        min_slack: best_slack,
        direction: best_dir,
        directions_probed,
    })
}
