//! Zero-mean Gaussian states described by their covariance matrices.
//!
//! Quadratures are ordered `(x_1, p_1, x_2, p_2, ...)` and every mode carries
//! an opaque string label, so reductions and conditionings can be written by
//! name instead of by index.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix2};

use crate::error::{invalid, Error, Result};

/// Tolerance on the uncertainty relation `nu >= 1`.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Symplectic eigenvalues below `1 - ENTROPY_CLAMP_TOL` are rejected by the
/// entropy; those in between are treated as pure.
pub const ENTROPY_CLAMP_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-10;

/// Covariance matrix of an `N`-mode Gaussian state in shot-noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    modes: Vec<String>,
    data: DMatrix<f64>,
}

/// Symplectic spectrum, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticEigenvalues {
    pub values: Vec<f64>,
}

impl SymplecticEigenvalues {
    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn is_physical(&self) -> bool {
        self.min() >= 1.0 - PHYSICALITY_TOL
    }
}

/// `g(nu)`: entropy in bits of a thermal mode with symplectic eigenvalue `nu`.
pub fn thermal_entropy(nu: f64) -> f64 {
    if nu <= 1.0 + 1e-9 {
        return 0.0;
    }
    let plus = (nu + 1.0) / 2.0;
    let minus = (nu - 1.0) / 2.0;
    plus * plus.log2() - minus * minus.log2()
}

fn check_labels_unique(modes: &[String]) -> Result<()> {
    for (i, m) in modes.iter().enumerate() {
        if modes[..i].contains(m) {
            return Err(Error::DuplicateMode(m.clone()));
        }
    }
    Ok(())
}

impl CovMatrix {
    /// Builds a state from labels and a raw matrix, checking shape and symmetry.
    pub fn from_parts<S: AsRef<str>>(modes: &[S], data: DMatrix<f64>) -> Result<Self> {
        let modes: Vec<String> = modes.iter().map(|m| m.as_ref().to_owned()).collect();
        if modes.is_empty() {
            return Err(invalid("state needs at least one mode"));
        }
        check_labels_unique(&modes)?;
        if data.nrows() != 2 * modes.len() || data.ncols() != 2 * modes.len() {
            return Err(invalid("matrix dimension must be 2 x number of modes"));
        }
        let scale = data.amax().max(1.0);
        let asym = (&data - data.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { modes, data })
    }

    /// `n` vacuum modes labelled `"0"`, `"1"`, ...
    pub fn vacuum(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("vacuum needs n >= 1"));
        }
        let labels: Vec<String> = (0..n).map(|i| alloc::format!("{i}")).collect();
        Self::vacuum_labeled(&labels)
    }

    pub fn vacuum_labeled<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let n = labels.len();
        Self::from_parts(labels, DMatrix::identity(2 * n, 2 * n))
    }

    /// Single-mode thermal state `diag(v, v)`.
    pub fn thermal(label: &str, v: f64) -> Result<Self> {
        if !(v >= 1.0) {
            return Err(Error::UnphysicalVariance(v));
        }
        Self::from_parts(&[label], DMatrix::identity(2, 2) * v)
    }

    /// Two-mode squeezed vacuum with quadrature variance `v` in each arm.
    pub fn epr(v: f64, a: &str, b: &str) -> Result<Self> {
        if !(v >= 1.0) || !v.is_finite() {
            return Err(Error::UnphysicalVariance(v));
        }
        let c = (v * v - 1.0).sqrt();
        let mut m = DMatrix::identity(4, 4) * v;
        m[(0, 2)] = c;
        m[(2, 0)] = c;
        m[(1, 3)] = -c;
        m[(3, 1)] = -c;
        Self::from_parts(&[a, b], m)
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn index_of(&self, mode: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == mode)
            .ok_or_else(|| Error::MissingMode(mode.to_owned()))
    }

    pub fn has_mode(&self, mode: &str) -> bool {
        self.modes.iter().any(|m| m == mode)
    }

    /// Entry `(q_i, q_j)` addressed by mode label and quadrature (0 = x, 1 = p).
    pub fn entry(&self, mode_i: &str, quad_i: usize, mode_j: &str, quad_j: usize) -> Result<f64> {
        let i = self.index_of(mode_i)?;
        let j = self.index_of(mode_j)?;
        Ok(self.data[(2 * i + quad_i, 2 * j + quad_j)])
    }

    /// Direct sum: `other`'s modes are appended after `self`'s.
    pub fn append(&self, other: &CovMatrix) -> Result<Self> {
        for m in &other.modes {
            if self.has_mode(m) {
                return Err(Error::DuplicateMode(m.clone()));
            }
        }
        let n1 = self.data.nrows();
        let n2 = other.data.nrows();
        let mut data = DMatrix::zeros(n1 + n2, n1 + n2);
        data.view_mut((0, 0), (n1, n1)).copy_from(&self.data);
        data.view_mut((n1, n1), (n2, n2)).copy_from(&other.data);
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Ok(Self { modes, data })
    }

    /// Mixes `mode_a` and `mode_b` on a beamsplitter of transmittance `t`:
    /// `a' = sqrt(t) a + sqrt(1-t) b`, `b' = -sqrt(1-t) a + sqrt(t) b`.
    pub fn beamsplitter(&self, mode_a: &str, mode_b: &str, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(alloc::format!("beamsplitter transmittance {t} outside [0, 1]")));
        }
        let ia = self.index_of(mode_a)?;
        let ib = self.index_of(mode_b)?;
        if ia == ib {
            return Err(invalid("beamsplitter needs two distinct modes"));
        }
        let dim = self.data.nrows();
        let st = t.sqrt();
        let sr = (1.0 - t).sqrt();
        let mut s = DMatrix::identity(dim, dim);
        for q in 0..2 {
            let (a, b) = (2 * ia + q, 2 * ib + q);
            s[(a, a)] = st;
            s[(a, b)] = sr;
            s[(b, a)] = -sr;
            s[(b, b)] = st;
        }
        let data = &s * &self.data * s.transpose();
        self.with_data(data)
    }

    /// Lossy, noisy channel on `mode`, purified by an EPR pair `(e1, e2)` of
    /// variance `1 + eps/(1-eta)` whose first arm is mixed in at transmittance
    /// `eta`. The output variance of the mode is `eta V + (1 - eta) + eps`.
    ///
    /// At `eta = 1` nothing is appended: the channel is the identity for
    /// `eps = 0` and classical additive noise otherwise, which is the
    /// `eta -> 1` limit of the construction above with the purification left
    /// to the environment.
    pub fn loss_excess_channel(&self, mode: &str, eta: f64, eps: f64, e1: &str, e2: &str) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid(alloc::format!("channel transmittance {eta} outside (0, 1]")));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid(alloc::format!("excess noise {eps} must be >= 0")));
        }
        self.index_of(mode)?;
        if eta == 1.0 {
            return self.add_noise(mode, eps);
        }
        let v_e = 1.0 + eps / (1.0 - eta);
        self.append(&CovMatrix::epr(v_e, e1, e2)?)?
            .beamsplitter(mode, e1, eta)
    }

    /// Adds `eps` SNU of classical Gaussian noise to both quadratures of
    /// `mode`.
    pub fn add_noise(&self, mode: &str, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(invalid(alloc::format!("added noise {eps} must be >= 0")));
        }
        let i = self.index_of(mode)?;
        let mut data = self.data.clone();
        data[(2 * i, 2 * i)] += eps;
        data[(2 * i + 1, 2 * i + 1)] += eps;
        self.with_data(data)
    }

    /// Reduced state on `keep`, in the requested order.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|m| self.index_of(m.as_ref()))
            .collect::<Result<_>>()?;
        if idx.is_empty() {
            return Err(invalid("partial trace must keep at least one mode"));
        }
        let modes: Vec<String> = keep.iter().map(|m| m.as_ref().to_owned()).collect();
        check_labels_unique(&modes)?;
        let n = idx.len();
        let data = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            self.data[(2 * idx[r / 2] + r % 2, 2 * idx[c / 2] + c % 2)]
        });
        Ok(Self { modes, data })
    }

    /// State of the remaining modes after heterodyne detection of
    /// `measured`: `gamma_K - C (gamma_M + 1)^-1 C^T`. Independent of the
    /// measurement outcome.
    pub fn heterodyne_condition(&self, measured: &str) -> Result<Self> {
        let im = self.index_of(measured)?;
        if self.modes.len() < 2 {
            return Err(invalid("conditioning needs at least one remaining mode"));
        }
        let kept: Vec<&str> = self
            .modes
            .iter()
            .filter(|m| *m != measured)
            .map(String::as_str)
            .collect();
        let kidx: Vec<usize> = kept.iter().map(|m| self.index_of(m)).collect::<Result<_>>()?;
        let nk = 2 * kidx.len();
        let at = |r: usize, c: usize| self.data[(r, c)];
        let mut g_m = Matrix2::new(
            at(2 * im, 2 * im),
            at(2 * im, 2 * im + 1),
            at(2 * im + 1, 2 * im),
            at(2 * im + 1, 2 * im + 1),
        );
        g_m += Matrix2::identity();
        let det = g_m.determinant();
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return Err(Error::NumericallySingular);
        }
        let inv = g_m.try_inverse().ok_or(Error::NumericallySingular)?;
        let row = |r: usize| 2 * kidx[r / 2] + r % 2;
        let corr = DMatrix::from_fn(nk, 2, |r, c| at(row(r), 2 * im + c));
        let inv = DMatrix::from_fn(2, 2, |r, c| inv[(r, c)]);
        let kept_block = DMatrix::from_fn(nk, nk, |r, c| at(row(r), row(c)));
        let mut data = kept_block - &corr * inv * corr.transpose();
        symmetrize(&mut data);
        let out = Self {
            modes: kept.iter().map(|m| (*m).to_owned()).collect(),
            data,
        };
        out.checked()
    }

    /// Symplectic eigenvalues, i.e. the moduli of the eigenvalues of
    /// `i Omega gamma`.
    ///
    /// Computed from the symmetric matrix `gamma^1/2 Omega^T gamma Omega
    /// gamma^1/2`, whose spectrum is `nu_k^2`, each twice.
    pub fn symplectic_eigenvalues(&self) -> Result<SymplecticEigenvalues> {
        let n = self.modes.len();
        let mut g = self.data.clone();
        symmetrize(&mut g);
        let eig = g.clone().symmetric_eigen();
        let lmin = eig.eigenvalues.min();
        if !lmin.is_finite() {
            return Err(Error::Numerical("non-finite covariance eigenvalues".into()));
        }
        if lmin <= 0.0 {
            return Err(Error::UnphysicalState(0.0));
        }
        let sqrt_diag = eig.eigenvalues.map(|l| l.sqrt());
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&sqrt_diag)
            * eig.eigenvectors.transpose();
        // Omega^T gamma Omega: per-mode (x, p) -> (p, -x) on rows and columns.
        let omega = symplectic_form(n);
        let mut m = &root * omega.transpose() * &g * &omega * &root;
        symmetrize(&mut m);
        let sq = m.symmetric_eigen().eigenvalues;
        let mut vals: Vec<f64> = Vec::with_capacity(2 * n);
        for &l in sq.iter() {
            if !l.is_finite() {
                return Err(Error::Numerical("non-finite symplectic spectrum".into()));
            }
            vals.push(l.max(0.0).sqrt());
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        let values = vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        Ok(SymplecticEigenvalues { values })
    }

    /// Von Neumann entropy in bits.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let spectrum = self.symplectic_eigenvalues()?;
        let mut s = 0.0;
        for &nu in &spectrum.values {
            if nu < 1.0 - ENTROPY_CLAMP_TOL {
                return Err(Error::UnphysicalState(nu));
            }
            s += thermal_entropy(nu.max(1.0));
        }
        Ok(s)
    }

    /// Checks the uncertainty relation at [`PHYSICALITY_TOL`].
    pub fn check_physical(&self) -> Result<()> {
        let nu = self.symplectic_eigenvalues()?.min();
        if nu < 1.0 - PHYSICALITY_TOL {
            return Err(Error::UnphysicalState(nu));
        }
        Ok(())
    }

    fn with_data(&self, mut data: DMatrix<f64>) -> Result<Self> {
        symmetrize(&mut data);
        Self {
            modes: self.modes.clone(),
            data,
        }
        .checked()
    }

    #[cfg(feature = "strict-physicality")]
    fn checked(self) -> Result<Self> {
        self.check_physical()?;
        Ok(self)
    }

    #[cfg(not(feature = "strict-physicality"))]
    #[inline]
    fn checked(self) -> Result<Self> {
        Ok(self)
    }
}

/// Block-diagonal `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
