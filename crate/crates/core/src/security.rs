//! Key-rate analysis of the coherent-state heterodyne protocol with a
//! leaking suppressed sideband.
//!
//! The leakage is modelled as Alice's modulation being shared between the
//! signal mode `B` and an Eve-held mode `L` on a beamsplitter of
//! transmittance `1/(1+k^2)`; the source variance is raised to
//! `1 + (1+k^2) V_M` so that Bob still sees modulation `V_M`. Trusted noise
//! (preparation, leakage-mode, detection) is added through purified couplings
//! whose purifications stay with Alice and Bob. Every mode is kept, so the
//! global state is pure and Eve's entropy equals the entropy of the trusted
//! modes.

use alloc::string::String;
use alloc::vec::Vec;


use crate::error::{invalid, Result};
use crate::gaussian::CovMatrix;
use crate::optimize::{bisect_crossing, golden_section_max, log_grid};

/// Transmittance of the strongly unbalanced beamsplitters that inject
/// trusted preparation noise.
pub const PREP_COUPLING: f64 = 0.999;
/// Failure probability inside the finite-size penalty.
pub const FINITE_SIZE_EPSILON: f64 = 1e-10;
pub const VM_MIN: f64 = 0.01;
pub const VM_MAX: f64 = 100.0;
pub const VM_GRID_POINTS: usize = 40;
/// Relative tolerance on the optimal modulation variance.
pub const VM_REL_TOL: f64 = 1e-3;
pub const MAX_ADDITIONAL_LOSS_DB: f64 = 60.0;
pub const LOSS_TOL_DB: f64 = 0.01;
/// Noise levels (SNU) scanned by [`trusted_noise_viability`].
pub const TRUSTED_NOISE_GRID: [f64; 6] = [0.0, 0.01, 0.05, 0.1, 0.5, 1.0];
pub const VIABILITY_THRESHOLD: f64 = 1e-6;

/// Mode labels used by [`build_scheme`].
pub mod labels {
    pub const A: &str = "A";
    pub const B: &str = "B";
    pub const L: &str = "L";
    pub const E1: &str = "E1";
    pub const E2: &str = "E2";
    pub const D1: &str = "D1";
    pub const D2: &str = "D2";
    pub const P1: &str = "P1";
    pub const P1B: &str = "P1b";
    pub const P2: &str = "P2";
    pub const P2B: &str = "P2b";
    pub const LB: &str = "Lb";
    /// Modes held by Eve.
    pub const UNTRUSTED: [&str; 3] = [L, E1, E2];
}

/// Scalar parameters of one protocol instance. Variances and noises in SNU.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolParams {
    /// Modulation variance seen in the desired sideband.
    pub v_m: f64,
    /// Leakage ratio (suppressed over desired sideband amplitude).
    pub k: f64,
    pub eta_ch: f64,
    /// Untrusted excess noise referred to the channel output.
    pub eps_ch: f64,
    pub eta_d: f64,
    pub eps_d: f64,
    /// Trusted preparation noise leaked along with the modulation.
    pub eps_p1: f64,
    /// Trusted preparation noise on the signal only.
    pub eps_p2: f64,
    /// Trusted noise in the leakage mode.
    pub eps_l: f64,
    pub beta: f64,
    /// Symbols per block; 0 means asymptotic.
    pub block_size: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            v_m: 5.0,
            k: 0.0,
            eta_ch: 1.0,
            eps_ch: 0.0,
            eta_d: 1.0,
            eps_d: 0.0,
            eps_p1: 0.0,
            eps_p2: 0.0,
            eps_l: 0.0,
            beta: 0.96,
            block_size: 0,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.v_m, self.k, self.eta_ch, self.eps_ch, self.eta_d, self.eps_d, self.eps_p1,
            self.eps_p2, self.eps_l, self.beta,
        ];
        if !finite.iter().all(|v| v.is_finite()) {
            return Err(invalid("protocol parameters must be finite"));
        }
        if !(self.v_m > 0.0) {
            return Err(invalid("v_m must be > 0"));
        }
        if !(self.k >= 0.0) {
            return Err(invalid("k must be >= 0"));
        }
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0) {
            return Err(invalid("eta_ch must be in (0, 1]"));
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(invalid("eta_d must be in (0, 1]"));
        }
        for (name, v) in [
            ("eps_ch", self.eps_ch),
            ("eps_d", self.eps_d),
            ("eps_p1", self.eps_p1),
            ("eps_p2", self.eps_p2),
            ("eps_l", self.eps_l),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(alloc::format!("{name} must be >= 0")));
            }
        }
        if self.eta_d == 1.0 && self.eps_d > 0.0 {
            return Err(invalid("eps_d > 0 requires eta_d < 1"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn with_v_m(self, v_m: f64) -> Self {
        Self { v_m, ..self }
    }

    pub fn with_k(self, k: f64) -> Self {
        Self { k, ..self }
    }

    pub fn with_eta_ch(self, eta_ch: f64) -> Self {
        Self { eta_ch, ..self }
    }

    /// Source variance `1 + (1 + k^2) V_M`.
    pub fn source_variance(&self) -> f64 {
        1.0 + (1.0 + self.k * self.k) * self.v_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Direction {
    /// Direct reconciliation: Alice's data is the reference.
    #[cfg_attr(feature = "serde", serde(rename = "dr"))]
    Direct,
    /// Reverse reconciliation: Bob's data is the reference.
    #[cfg_attr(feature = "serde", serde(rename = "rr"))]
    Reverse,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Direct, Direction::Reverse];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Direct => "dr",
            Direction::Reverse => "rr",
        }
    }
}

/// Global pure state of the purification scheme with its trust partition.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub state: CovMatrix,
    pub trusted: Vec<String>,
    pub untrusted: Vec<String>,
}

impl Scheme {
    pub fn trusted_state(&self) -> Result<CovMatrix> {
        self.state.partial_trace(&self.trusted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HolevoBounds {
    pub chi_dr: f64,
    pub chi_rr: f64,
}

impl HolevoBounds {
    pub fn get(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Direct => self.chi_dr,
            Direction::Reverse => self.chi_rr,
        }
    }
}

/// Mutual information, Holevo bounds and key fractions at one parameter
/// point, in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KeyRateReport {
    pub i_ab: f64,
    pub chi_dr: f64,
    pub chi_rr: f64,
    pub r_dr: f64,
    pub r_rr: f64,
    pub r_dr_clamped: f64,
    pub r_rr_clamped: f64,
    pub finite_size_penalty: f64,
    pub mode_count: usize,
}

impl KeyRateReport {
    /// Unclamped key fraction.
    pub fn rate(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Direct => self.r_dr,
            Direction::Reverse => self.r_rr,
        }
    }

    pub fn clamped(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Direct => self.r_dr_clamped,
            Direction::Reverse => self.r_rr_clamped,
        }
    }

    pub fn chi(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Direct => self.chi_dr,
            Direction::Reverse => self.chi_rr,
        }
    }
}

/// Penalty `7 sqrt(log2(2/eps)/n)` for a block of `n` symbols; zero for the
/// asymptotic case `n = 0`.
pub fn finite_size_penalty(block_size: u64) -> f64 {
    if block_size == 0 {
        return 0.0;
    }
    7.0 * ((2.0 / FINITE_SIZE_EPSILON).log2() / block_size as f64).sqrt()
}

/// Scheme construction and entropy evaluation with a configurable
/// preparation-noise coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityModel {
    pub prep_coupling: f64,
}

impl Default for SecurityModel {
    fn default() -> Self {
        Self {
            prep_coupling: PREP_COUPLING,
        }
    }
}

impl SecurityModel {
    /// Adds trusted noise `eps` to `mode` through an EPR pair `(arm, purifier)`
    /// coupled at the preparation transmittance.
    fn couple_trusted_noise(&self, state: CovMatrix, mode: &str, eps: f64, arm: &str, purifier: &str) -> Result<CovMatrix> {
        if eps == 0.0 {
            return Ok(state);
        }
        let eta = self.prep_coupling;
        if !(eta > 0.0 && eta < 1.0) {
            return Err(invalid("preparation coupling must be in (0, 1)"));
        }
        let v = 1.0 + eps / (1.0 - eta);
        state
            .append(&CovMatrix::epr(v, arm, purifier)?)?
            .beamsplitter(mode, arm, eta)
    }

    pub fn build_scheme(&self, p: &ProtocolParams) -> Result<Scheme> {
        use labels::*;
        p.validate()?;

        let mut state = CovMatrix::epr(p.source_variance(), A, B)?;
        state = self.couple_trusted_noise(state, B, p.eps_p1, P1, P1B)?;

        let leak_input = if p.eps_l > 0.0 {
            CovMatrix::epr(1.0 + p.eps_l, L, LB)?
        } else {
            CovMatrix::vacuum_labeled(&[L])?
        };
        state = state
            .append(&leak_input)?
            .beamsplitter(B, L, 1.0 / (1.0 + p.k * p.k))?;

        state = self.couple_trusted_noise(state, B, p.eps_p2, P2, P2B)?;
        state = state.loss_excess_channel(B, p.eta_ch, p.eps_ch, E1, E2)?;

        if p.eta_d < 1.0 {
            let v_d = 1.0 + p.eps_d / (1.0 - p.eta_d);
            state = state
                .append(&CovMatrix::epr(v_d, D1, D2)?)?
                .beamsplitter(B, D1, p.eta_d)?;
        }

        let (untrusted, trusted): (Vec<String>, Vec<String>) = state
            .modes()
            .iter()
            .cloned()
            .partition(|m| UNTRUSTED.contains(&m.as_str()));
        Ok(Scheme {
            state,
            trusted,
            untrusted,
        })
    }

    pub fn mutual_information(&self, p: &ProtocolParams) -> Result<f64> {
        let trusted = self.build_scheme(p)?.trusted_state()?;
        mutual_information_from(&trusted)
    }

    pub fn holevo_bounds(&self, p: &ProtocolParams) -> Result<HolevoBounds> {
        let trusted = self.build_scheme(p)?.trusted_state()?;
        holevo_from(&trusted)
    }

    pub fn key_rate(&self, p: &ProtocolParams) -> Result<KeyRateReport> {
        let scheme = self.build_scheme(p)?;
        let trusted = scheme.trusted_state()?;
        let i_ab = mutual_information_from(&trusted)?;
        let chi = holevo_from(&trusted)?;
        let penalty = finite_size_penalty(p.block_size);
        let r_dr = p.beta * i_ab - chi.chi_dr - penalty;
        let r_rr = p.beta * i_ab - chi.chi_rr - penalty;
        Ok(KeyRateReport {
            i_ab,
            chi_dr: chi.chi_dr,
            chi_rr: chi.chi_rr,
            r_dr,
            r_rr,
            r_dr_clamped: r_dr.max(0.0),
            r_rr_clamped: r_rr.max(0.0),
            finite_size_penalty: penalty,
            mode_count: scheme.state.mode_count(),
        })
    }
}

/// Heterodyne-heterodyne mutual information from the trusted state:
/// per quadrature `1/2 log2[(V_B + 1)/(V_B|A + 1)]`.
fn mutual_information_from(trusted: &CovMatrix) -> Result<f64> {
    use labels::{A, B};
    let ab = trusted.partial_trace(&[A, B])?;
    let b_given_a = ab.heterodyne_condition(A)?;
    let mut info = 0.0;
    for q in 0..2 {
        let v_b = ab.entry(B, q, B, q)?;
        let v_b_a = b_given_a.entry(B, q, B, q)?;
        info += 0.5 * ((v_b + 1.0) / (v_b_a + 1.0)).log2();
    }
    Ok(info)
}

fn holevo_from(trusted: &CovMatrix) -> Result<HolevoBounds> {
    use labels::{A, B};
    let s_total = trusted.von_neumann_entropy()?;
    let s_given_a = trusted.heterodyne_condition(A)?.von_neumann_entropy()?;
    let s_given_b = trusted.heterodyne_condition(B)?.von_neumann_entropy()?;
    Ok(HolevoBounds {
        chi_dr: s_total - s_given_a,
        chi_rr: s_total - s_given_b,
    })
}

pub fn build_scheme(p: &ProtocolParams) -> Result<Scheme> {
    SecurityModel::default().build_scheme(p)
}

pub fn mutual_information(p: &ProtocolParams) -> Result<f64> {
    SecurityModel::default().mutual_information(p)
}

pub fn holevo_bounds(p: &ProtocolParams) -> Result<HolevoBounds> {
    SecurityModel::default().holevo_bounds(p)
}

pub fn key_rate(p: &ProtocolParams) -> Result<KeyRateReport> {
    SecurityModel::default().key_rate(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VmOptimum {
    pub v_m: f64,
    pub rate: f64,
    /// No grid point gave a positive key.
    pub no_positive_key: bool,
    /// The best grid point was not on the edge of the search range.
    pub interior: bool,
}

/// Maximizes the key fraction over `V_M in [0.01, 100]`: a 40-point log grid
/// locates the peak, then golden-section search on `ln V_M` refines it.
/// `p.v_m` is ignored.
pub fn optimize_vm(p: &ProtocolParams, dir: Direction) -> Result<VmOptimum> {
    let rate_at = |v_m: f64| -> Result<f64> { Ok(key_rate(&p.with_v_m(v_m))?.rate(dir)) };
    let grid = log_grid(VM_MIN, VM_MAX, VM_GRID_POINTS);
    let mut rates = Vec::with_capacity(grid.len());
    for &v in &grid {
        rates.push(rate_at(v)?);
    }
    let mut best = 0;
    for (i, &r) in rates.iter().enumerate() {
        if r > rates[best] {
            best = i;
        }
    }
    let no_positive_key = rates.iter().all(|&r| r <= 0.0);
    let interior = best > 0 && best + 1 < grid.len();

    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (ln_v, refined) = golden_section_max(|x| rate_at(x.exp()), lo, hi, VM_REL_TOL)?;
    let (v_m, rate) = if refined > rates[best] {
        (ln_v.exp(), refined)
    } else {
        (grid[best], rates[best])
    };
    Ok(VmOptimum {
        v_m,
        rate,
        no_positive_key,
        interior,
    })
}

/// Whether the modulation variance is held at `p.v_m` or re-optimized at
/// each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmPolicy {
    Fixed,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossStatus {
    Found,
    /// No positive key even without additional loss.
    NoKeyAtZero,
    /// Still positive at the upper end of the search range.
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossMargin {
    pub db: f64,
    pub status: LossStatus,
}

fn rate_with_policy(p: &ProtocolParams, dir: Direction, policy: VmPolicy) -> Result<f64> {
    match policy {
        VmPolicy::Fixed => Ok(key_rate(p)?.rate(dir)),
        VmPolicy::Optimized => Ok(optimize_vm(p, dir)?.rate),
    }
}

/// Largest extra attenuation (dB, on top of `p.eta_ch`) that still leaves a
/// positive key, by bisection over `[0, 60]` dB to 0.01 dB.
pub fn max_additional_loss(p: &ProtocolParams, dir: Direction, policy: VmPolicy) -> Result<LossMargin> {
    let rate_at = |a_db: f64| -> Result<f64> {
        let eta = p.eta_ch * 10f64.powf(-a_db / 10.0);
        rate_with_policy(&p.with_eta_ch(eta), dir, policy)
    };
    if rate_at(0.0)? <= 0.0 {
        return Ok(LossMargin {
            db: 0.0,
            status: LossStatus::NoKeyAtZero,
        });
    }
    if rate_at(MAX_ADDITIONAL_LOSS_DB)? > 0.0 {
        return Ok(LossMargin {
            db: MAX_ADDITIONAL_LOSS_DB,
            status: LossStatus::Saturated,
        });
    }
    let db = bisect_crossing(|a| Ok(rate_at(a)? > 0.0), 0.0, MAX_ADDITIONAL_LOSS_DB, LOSS_TOL_DB)?;
    Ok(LossMargin {
        db,
        status: LossStatus::Found,
    })
}

/// `R(k = 0) - R(k)` on unclamped rates, other parameters unchanged.
pub fn leakage_penalty(p: &ProtocolParams, dir: Direction) -> Result<f64> {
    let with_leak = key_rate(p)?.rate(dir);
    let without = key_rate(&p.with_k(0.0))?.rate(dir);
    Ok(without - with_leak)
}

/// Where trusted noise is injected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NoisePoint {
    /// Preparation noise leaked along with the modulation.
    P1,
    /// Preparation noise on the signal only.
    P2,
    /// Noise in the leakage mode.
    L,
    /// Detection noise.
    D,
}

impl NoisePoint {
    pub const ALL: [NoisePoint; 4] = [NoisePoint::P1, NoisePoint::P2, NoisePoint::L, NoisePoint::D];

    pub fn apply(self, p: &ProtocolParams, eps: f64) -> ProtocolParams {
        let mut q = *p;
        match self {
            NoisePoint::P1 => q.eps_p1 = eps,
            NoisePoint::P2 => q.eps_p2 = eps,
            NoisePoint::L => q.eps_l = eps,
            NoisePoint::D => q.eps_d = eps,
        }
        q
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoisePoint::P1 => "P1",
            NoisePoint::P2 => "P2",
            NoisePoint::L => "L",
            NoisePoint::D => "D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Viability {
    Helpful,
    Harmful,
    Neutral,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViabilityReport {
    pub point: NoisePoint,
    pub direction: Direction,
    pub verdict: Viability,
    /// `(noise, key fraction)` pairs; the first entry is the noiseless baseline.
    pub grid: Vec<(f64, f64)>,
}

/// Scans trusted noise at `point` over [`TRUSTED_NOISE_GRID`].
pub fn trusted_noise_viability(p: &ProtocolParams, point: NoisePoint, dir: Direction) -> Result<ViabilityReport> {
    let mut grid = Vec::with_capacity(TRUSTED_NOISE_GRID.len());
    for &eps in &TRUSTED_NOISE_GRID {
        grid.push((eps, key_rate(&point.apply(p, eps))?.rate(dir)));
    }
    let baseline = grid[0].1;
    let rest = &grid[1..];
    let verdict = if rest.iter().any(|&(_, r)| r > baseline + VIABILITY_THRESHOLD) {
        Viability::Helpful
    } else if rest.iter().all(|&(_, r)| r < baseline - VIABILITY_THRESHOLD) {
        Viability::Harmful
    } else {
        Viability::Neutral
    };
    Ok(ViabilityReport {
        point,
        direction: dir,
        verdict,
        grid,
    })
}
