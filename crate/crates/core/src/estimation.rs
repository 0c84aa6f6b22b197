//! Monte-Carlo heterodyne sampling and moment-based parameter estimation.
//!
//! Heterodyne outcomes of a set of modes with covariance `gamma` are drawn
//! from a zero-mean Gaussian with covariance `(gamma + I)/2`, so a vacuum
//! input gives unit outcome variance. The estimators invert the analytic
//! second moments of the leakage scheme: Alice's variance fixes the source,
//! the Alice-Eve correlation fixes the leaked modulation, the Alice-Bob
//! correlation fixes the channel transmittance and Bob's residual variance the
//! excess noise. Detector efficiency and noise are taken as calibrated.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::gaussian::CovMatrix;
use crate::security::{self, labels, Direction, ProtocolParams};

/// Identifier of the random generator, recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20";

pub const MIN_SAMPLES: usize = 1000;

/// Number of sub-batches used for standard errors.
pub const SUB_BATCHES: usize = 10;

/// Width of the consistency window in standard errors.
pub const CONSISTENCY_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

impl Party {
    pub const ALL: [Party; 3] = [Party::Alice, Party::Bob, Party::Eve];

    /// Mode measured by this party in the leakage scheme. Eve measures the
    /// leakage mode directly, with perfect efficiency.
    pub fn mode(self) -> &'static str {
        match self {
            Party::Alice => labels::A,
            Party::Bob => labels::B,
            Party::Eve => labels::L,
        }
    }
}

/// Heterodyne record of one mode.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Channel {
    pub mode: String,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleBatch {
    pub n: usize,
    pub seed: u64,
    pub channels: Vec<Channel>,
}

impl SampleBatch {
    pub fn channel(&self, mode: &str) -> Result<&Channel> {
        self.channels
            .iter()
            .find(|c| c.mode == mode)
            .ok_or_else(|| Error::MissingMode(mode.into()))
    }

    pub fn party(&self, party: Party) -> Result<&Channel> {
        self.channel(party.mode())
    }
}

/// Outcome covariance `(gamma + I)/2` of heterodyning `modes`.
pub fn outcome_covariance(state: &CovMatrix, modes: &[&str]) -> Result<DMatrix<f64>> {
    let reduced = state.partial_trace(modes)?;
    let dim = reduced.matrix().nrows();
    Ok((reduced.matrix() + DMatrix::identity(dim, dim)) * 0.5)
}

/// Draws `n` joint heterodyne outcomes of `modes`.
pub fn sample(state: &CovMatrix, modes: &[&str], n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(invalid("sample count must be >= 1"));
    }
    if modes.is_empty() {
        return Err(invalid("no modes to measure"));
    }
    let cov = outcome_covariance(state, modes)?;
    let chol = cov.cholesky().ok_or(Error::NumericallySingular)?;
    let l = chol.l();
    let dim = l.nrows();

    let mut columns = vec![Vec::with_capacity(n); dim];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut z = vec![0.0; dim];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        for (i, col) in columns.iter_mut().enumerate() {
            let mut v = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                v += l[(i, j)] * zj;
            }
            col.push(v);
        }
    }

    let mut it = columns.into_iter();
    let channels = modes
        .iter()
        .map(|m| Channel {
            mode: (*m).into(),
            x: it.next().unwrap_or_default(),
            p: it.next().unwrap_or_default(),
        })
        .collect();
    Ok(SampleBatch { n, seed, channels })
}

/// Sample covariance of two equally long series.
pub fn sample_covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return f64::NAN;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let s: f64 = a[..n].iter().zip(&b[..n]).map(|(x, y)| (x - ma) * (y - mb)).sum();
    s / (n - 1) as f64
}

/// Whether the estimator is told the modulation variance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum VmKnowledge {
    Known(f64),
    Unknown,
}

/// Detector calibration and options shared by all estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub v_m: VmKnowledge,
    pub eta_d: f64,
    pub eps_d: f64,
    /// Force `k = 0`, as a receiver ignoring leakage would.
    pub assume_no_leakage: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            v_m: VmKnowledge::Unknown,
            eta_d: 1.0,
            eps_d: 0.0,
            assume_no_leakage: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Whether `truth` lies within `sigmas` standard errors.
    pub fn covers(&self, truth: f64, sigmas: f64) -> bool {
        (self.value - truth).abs() <= sigmas * self.se
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub v_m: Estimate,
    pub k: Estimate,
    pub eta: Estimate,
    pub eps: Estimate,
    pub n: usize,
    /// Names of estimates that were clamped into the physical range.
    pub clamped: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct RawEstimate {
    v_m: f64,
    k: f64,
    eta: f64,
    eps: f64,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    var_a: f64,
    var_b: f64,
    c_ab: f64,
    c_al: f64,
}

fn mean2(a: f64, b: f64) -> f64 {
    0.5 * (a + b)
}

/// Second moments over `range`, converted from outcome to state units.
fn moments(alice: &Channel, bob: &Channel, eve: &Channel, range: core::ops::Range<usize>) -> Moments {
    let r = || range.clone();
    let (ax, ap) = (&alice.x[r()], &alice.p[r()]);
    let (bx, bp) = (&bob.x[r()], &bob.p[r()]);
    let (ex, ep) = (&eve.x[r()], &eve.p[r()]);
    Moments {
        var_a: 2.0 * mean2(sample_covariance(ax, ax), sample_covariance(ap, ap)) - 1.0,
        var_b: 2.0 * mean2(sample_covariance(bx, bx), sample_covariance(bp, bp)) - 1.0,
        c_ab: 2.0 * mean2(sample_covariance(ax, bx), -sample_covariance(ap, bp)),
        c_al: 2.0 * mean2(sample_covariance(ax, ex), -sample_covariance(ap, ep)),
    }
}

fn invert(m: Moments, cfg: &EstimatorConfig) -> RawEstimate {
    let s = m.var_a - 1.0;
    let k_sqrt_vm = if cfg.assume_no_leakage {
        0.0
    } else {
        -m.c_al / (2.0 + s).sqrt()
    };
    let v_m = match cfg.v_m {
        VmKnowledge::Known(v) => v,
        VmKnowledge::Unknown => s - k_sqrt_vm * k_sqrt_vm,
    };
    let k = k_sqrt_vm / v_m.sqrt();
    let eta = m.c_ab * m.c_ab / (cfg.eta_d * v_m * (2.0 + s));
    let eps = (m.var_b - 1.0 - cfg.eps_d) / cfg.eta_d - eta * v_m;
    RawEstimate { v_m, k, eta, eps }
}

fn raw_estimate(batch: &SampleBatch, cfg: &EstimatorConfig, range: core::ops::Range<usize>) -> Result<RawEstimate> {
    let alice = batch.party(Party::Alice)?;
    let bob = batch.party(Party::Bob)?;
    let eve = batch.party(Party::Eve)?;
    Ok(invert(moments(alice, bob, eve, range), cfg))
}

fn sub_ranges(n: usize) -> impl Iterator<Item = core::ops::Range<usize>> {
    let size = n / SUB_BATCHES;
    (0..SUB_BATCHES).map(move |i| i * size..(i + 1) * size)
}

fn standard_error(values: &[f64]) -> f64 {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (var / m).sqrt()
}

fn check_config(cfg: &EstimatorConfig) -> Result<()> {
    if !(cfg.eta_d > 0.0 && cfg.eta_d <= 1.0) || !(cfg.eps_d >= 0.0) {
        return Err(invalid("detector calibration out of range"));
    }
    if let VmKnowledge::Known(v) = cfg.v_m {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid("known V_M must be > 0"));
        }
    }
    Ok(())
}

/// Moment estimates of `V_M`, `k`, `eta_ch` and `eps_ch` from Alice, Bob
/// and Eve heterodyne records.
pub fn estimate_params(batch: &SampleBatch, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    check_config(cfg)?;
    if batch.n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: batch.n,
            min: MIN_SAMPLES,
        });
    }
    let full = raw_estimate(batch, cfg, 0..batch.n)?;
    let subs = sub_ranges(batch.n)
        .map(|r| raw_estimate(batch, cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let se = |f: fn(&RawEstimate) -> f64| standard_error(&subs.iter().map(f).collect::<Vec<_>>());

    let mut clamped = Vec::new();
    let mut clamp_low = |name: &str, v: f64| {
        if v < 0.0 {
            clamped.push(name.into());
            0.0
        } else {
            v
        }
    };
    let v_m = clamp_low("v_m", full.v_m);
    let k = clamp_low("k", full.k);
    let eps = clamp_low("eps", full.eps);
    let mut eta = clamp_low("eta", full.eta);
    if eta > 1.0 {
        clamped.push("eta".into());
        eta = 1.0;
    }

    let report = EstimateReport {
        v_m: Estimate { value: v_m, se: se(|r| r.v_m) },
        k: Estimate { value: k, se: se(|r| r.k) },
        eta: Estimate { value: eta, se: se(|r| r.eta) },
        eps: Estimate { value: eps, se: se(|r| r.eps) },
        n: batch.n,
        clamped,
    };
    let all = [report.v_m, report.k, report.eta, report.eps];
    if !all.iter().all(|e| e.value.is_finite() && e.se.is_finite()) {
        return Err(Error::Numerical("non-finite estimate".into()));
    }
    Ok(report)
}

impl EstimateReport {
    /// Protocol parameters with the estimated quantities substituted.
    pub fn apply_to(&self, base: &ProtocolParams) -> ProtocolParams {
        ProtocolParams {
            v_m: self.v_m.value,
            k: self.k.value,
            eta_ch: self.eta.value,
            eps_ch: self.eps.value,
            ..*base
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Consistent,
    OverestimatesKey,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectionCheck {
    pub direction: Direction,
    pub r_true: f64,
    pub r_est: f64,
    /// Standard error of `r_est` from the sub-batch estimates.
    pub se: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl DirectionCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.r_est - self.r_true).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConsistencyOptions {
    /// Force `k = 0` and take `V_M` from calibration. (Estimating `V_M`
    /// from Alice's variance while ignoring leakage is self-consistent: the
    /// leaked fraction then appears as channel loss.)
    pub assume_no_leakage: bool,
    pub v_m_known: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConsistencyReport {
    pub params: ProtocolParams,
    pub estimates: EstimateReport,
    pub estimated_params: ProtocolParams,
    pub seed: u64,
    pub rng: String,
    pub checks: Vec<DirectionCheck>,
}

impl ConsistencyReport {
    pub fn check(&self, dir: Direction) -> Option<&DirectionCheck> {
        self.checks.iter().find(|c| c.direction == dir)
    }

    /// Overestimation in any of `dirs` wins.
    pub fn verdict(&self, dirs: &[Direction]) -> Verdict {
        let bad = self
            .checks
            .iter()
            .any(|c| dirs.contains(&c.direction) && c.verdict == Verdict::OverestimatesKey);
        if bad {
            Verdict::OverestimatesKey
        } else {
            Verdict::Consistent
        }
    }
}

/// Samples the scheme of `p`, re-estimates the channel and leakage, and
/// compares the key fraction computed from the estimates with the true one.
pub fn end_to_end_consistency(p: &ProtocolParams, n: usize, seed: u64, opts: ConsistencyOptions) -> Result<ConsistencyReport> {
    let scheme = security::build_scheme(p)?;
    let modes: Vec<&str> = Party::ALL.iter().map(|q| q.mode()).collect();
    let batch = sample(&scheme.state, &modes, n, seed)?;
    let cfg = EstimatorConfig {
        v_m: if opts.v_m_known || opts.assume_no_leakage {
            VmKnowledge::Known(p.v_m)
        } else {
            VmKnowledge::Unknown
        },
        eta_d: p.eta_d,
        eps_d: p.eps_d,
        assume_no_leakage: opts.assume_no_leakage,
    };
    let estimates = estimate_params(&batch, &cfg)?;
    let estimated_params = estimates.apply_to(p);

    let truth = security::key_rate(p)?;
    let est = security::key_rate(&estimated_params)?;
    let mut sub_rates: Vec<[f64; 2]> = Vec::with_capacity(SUB_BATCHES);
    for r in sub_ranges(n) {
        let sub = EstimateReport::from_raw(raw_estimate(&batch, &cfg, r)?);
        let rep = security::key_rate(&sub.apply_to(p))?;
        sub_rates.push([rep.r_dr, rep.r_rr]);
    }

    let checks = Direction::BOTH
        .iter()
        .enumerate()
        .map(|(i, &dir)| {
            let se = standard_error(&sub_rates.iter().map(|r| r[i]).collect::<Vec<_>>());
            let tolerance = CONSISTENCY_SIGMAS * se;
            let (r_true, r_est) = (truth.rate(dir), est.rate(dir));
            let verdict = if r_est - r_true > tolerance {
                Verdict::OverestimatesKey
            } else {
                Verdict::Consistent
            };
            DirectionCheck {
                direction: dir,
                r_true,
                r_est,
                se,
                tolerance,
                verdict,
            }
        })
        .collect();

    Ok(ConsistencyReport {
        params: *p,
        estimates,
        estimated_params,
        seed,
        rng: RNG_ALGORITHM.into(),
        checks,
    })
}

impl EstimateReport {
    /// Clamped point estimates without standard errors.
    fn from_raw(r: RawEstimate) -> Self {
        let pos = |v: f64| Estimate { value: v.max(0.0), se: 0.0 };
        EstimateReport {
            v_m: pos(r.v_m),
            k: pos(r.k),
            eta: Estimate { value: r.eta.clamp(0.0, 1.0), se: 0.0 },
            eps: pos(r.eps),
            n: 0,
            clamped: Vec::new(),
        }
    }
}
