//! Command implementations. Every number comes from `cvleak_core`; this
//! module only selects parameters, orders results and packages them.

use std::collections::BTreeMap;

use cvleak_core::estimation::{self, ConsistencyOptions, ConsistencyReport, Verdict};
use cvleak_core::security::{
    key_rate, leakage_penalty, max_additional_loss, optimize_vm, trusted_noise_viability, LossMargin, NoisePoint,
    Viability, ViabilityReport, VmOptimum, VmPolicy, PREP_COUPLING, TRUSTED_NOISE_GRID,
};
use cvleak_core::{Direction, KeyRateReport, ProtocolParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DirectionSel, McBlock, RunConfig, SweepSpec};
use crate::error::CliError;
use crate::output::SweepRow;

/// Process exit status of a successful computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Secure,
    NoSecurity,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Secure => 0,
            Outcome::NoSecurity => 2,
        }
    }
}

impl DirectionSel {
    pub fn directions(self) -> &'static [Direction] {
        match self {
            DirectionSel::Dr => &[Direction::Direct],
            DirectionSel::Rr => &[Direction::Reverse],
            DirectionSel::Both => &Direction::BOTH,
        }
    }

    /// Direction used to optimize `V_M` when one value serves both.
    pub fn primary(self) -> Direction {
        match self {
            DirectionSel::Dr => Direction::Direct,
            DirectionSel::Rr | DirectionSel::Both => Direction::Reverse,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DirectionSel::Dr => "dr",
            DirectionSel::Rr => "rr",
            DirectionSel::Both => "both",
        }
    }
}

/// Flags that may come from the command line or the `[outputs]` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub direction: DirectionSel,
    pub optimize_vm: bool,
    pub with_eta_max: bool,
    pub assume_no_leakage: bool,
    pub seed: Option<u64>,
}

impl RunOptions {
    fn policy(&self) -> VmPolicy {
        if self.optimize_vm {
            VmPolicy::Optimized
        } else {
            VmPolicy::Fixed
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepInfo {
    pub key: &'static str,
    #[serde(flatten)]
    pub spec: SweepSpec,
}

/// Conventions and settings recorded with every output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub direction: &'static str,
    pub optimize_vm: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_m_optimized_for: Option<Direction>,
    pub with_eta_max: bool,
    pub loss_convention: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_convention: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_floor: Option<f64>,
    pub prep_coupling: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: RunConfig,
}

fn metadata(command: &'static str, cfg: &RunConfig, opts: &RunOptions) -> Metadata {
    Metadata {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        direction: opts.direction.as_str(),
        optimize_vm: opts.optimize_vm,
        v_m_optimized_for: opts.optimize_vm.then(|| opts.direction.primary()),
        with_eta_max: opts.with_eta_max,
        loss_convention: "eta = 10^(-attenuation_dB/10); eta_max columns are extra attenuation beyond eta_ch",
        rho_convention: cfg.modulator.as_ref().map(|m| m.rho_convention.as_str()),
        k_floor: cfg.modulator.as_ref().map(|m| m.k_floor),
        prep_coupling: PREP_COUPLING,
        sweep: cfg.sweep_axis().map(|a| SweepInfo {
            key: a.key,
            spec: a.spec,
        }),
        rng: None,
        seed: None,
        config: cfg.clone(),
    }
}

fn select_v_m(p: &ProtocolParams, opts: &RunOptions) -> Result<(ProtocolParams, Option<VmOptimum>), CliError> {
    if opts.optimize_vm {
        let best = optimize_vm(p, opts.direction.primary())?;
        Ok((p.with_v_m(best.v_m), Some(best)))
    } else {
        Ok((*p, None))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossComparison {
    pub with_leakage: LossMargin,
    pub without_leakage: LossMargin,
    /// `without_leakage.db - with_leakage.db`.
    pub reduction_db: f64,
}

fn loss_comparison(p: &ProtocolParams, dir: Direction, policy: VmPolicy) -> Result<LossComparison, CliError> {
    let with_leakage = max_additional_loss(p, dir, policy)?;
    let without_leakage = max_additional_loss(&p.with_k(0.0), dir, policy)?;
    Ok(LossComparison {
        with_leakage,
        without_leakage,
        reduction_db: without_leakage.db - with_leakage.db,
    })
}

/// Evaluates one sweep point.
pub fn evaluate_point(coordinate: Option<f64>, p: &ProtocolParams, opts: &RunOptions) -> Result<SweepRow, CliError> {
    let (q, _) = select_v_m(p, opts)?;
    let rep = key_rate(&q)?;
    let mut row = SweepRow {
        sweep_var: coordinate,
        v_m: q.v_m,
        k: q.k,
        i_ab: rep.i_ab,
        chi_dr: rep.chi_dr,
        chi_rr: rep.chi_rr,
        r_dr: rep.r_dr,
        r_rr: rep.r_rr,
        r_dr_clamped: rep.r_dr_clamped,
        r_rr_clamped: rep.r_rr_clamped,
        dr_dr: leakage_penalty(&q, Direction::Direct)?,
        dr_rr: leakage_penalty(&q, Direction::Reverse)?,
        eta_max_dr_db: None,
        eta_max_rr_db: None,
        d_eta_dr_db: None,
        d_eta_rr_db: None,
    };
    if opts.with_eta_max {
        for &dir in opts.direction.directions() {
            let c = loss_comparison(&q, dir, opts.policy())?;
            match dir {
                Direction::Direct => {
                    row.eta_max_dr_db = Some(c.with_leakage.db);
                    row.d_eta_dr_db = Some(c.reduction_db);
                }
                Direction::Reverse => {
                    row.eta_max_rr_db = Some(c.with_leakage.db);
                    row.d_eta_rr_db = Some(c.reduction_db);
                }
            }
        }
    }
    Ok(row)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub metadata: Metadata,
    pub rows: Vec<SweepRow>,
}

pub fn sweep(cfg: &RunConfig, opts: &RunOptions) -> Result<SweepOutput, CliError> {
    if cfg.sweep_axis().is_none() {
        return Err(CliError::Usage("sweep needs exactly one sweep axis in the config".into()));
    }
    let points = cfg.points()?;
    let rows = points
        .par_iter()
        .map(|pt| evaluate_point(pt.coordinate, &pt.params, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepOutput {
        metadata: metadata("sweep", cfg, opts),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyRateOutput {
    pub params: ProtocolParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_m_optimum: Option<VmOptimum>,
    pub report: KeyRateReport,
    pub leakage_penalty: BTreeMap<Direction, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub loss_margin: BTreeMap<Direction, LossComparison>,
    pub secure: bool,
    pub metadata: Metadata,
}

pub fn keyrate(cfg: &RunConfig, opts: &RunOptions) -> Result<(KeyRateOutput, Outcome), CliError> {
    let (p, v_m_optimum) = select_v_m(&cfg.fixed_params()?, opts)?;
    let report = key_rate(&p)?;
    let mut penalty = BTreeMap::new();
    let mut loss_margin = BTreeMap::new();
    for &dir in opts.direction.directions() {
        penalty.insert(dir, leakage_penalty(&p, dir)?);
        if opts.with_eta_max {
            loss_margin.insert(dir, loss_comparison(&p, dir, opts.policy())?);
        }
    }
    let secure = opts.direction.directions().iter().any(|&d| report.rate(d) > 0.0);
    let out = KeyRateOutput {
        params: p,
        v_m_optimum,
        report,
        leakage_penalty: penalty,
        loss_margin,
        secure,
        metadata: metadata("keyrate", cfg, opts),
    };
    Ok((out, if secure { Outcome::Secure } else { Outcome::NoSecurity }))
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Output {
    pub params: ProtocolParams,
    pub noise_grid: [f64; 6],
    pub matrix: BTreeMap<NoisePoint, BTreeMap<Direction, Viability>>,
    pub scans: Vec<ViabilityReport>,
    pub metadata: Metadata,
}

pub fn table1(cfg: &RunConfig, opts: &RunOptions) -> Result<Table1Output, CliError> {
    let (p, _) = select_v_m(&cfg.fixed_params()?, opts)?;
    key_rate(&p)?;
    let cells: Vec<(NoisePoint, Direction)> = NoisePoint::ALL
        .iter()
        .flat_map(|&pt| opts.direction.directions().iter().map(move |&d| (pt, d)))
        .collect();
    let scans = cells
        .par_iter()
        .map(|&(pt, d)| trusted_noise_viability(&p, pt, d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut matrix: BTreeMap<NoisePoint, BTreeMap<Direction, Viability>> = BTreeMap::new();
    for s in &scans {
        matrix.entry(s.point).or_default().insert(s.direction, s.verdict);
    }
    Ok(Table1Output {
        params: p,
        noise_grid: TRUSTED_NOISE_GRID,
        matrix,
        scans,
        metadata: metadata("table1", cfg, opts),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct McOutput {
    pub verdict: Verdict,
    pub consistency: ConsistencyReport,
    pub metadata: Metadata,
}

pub fn mc(cfg: &RunConfig, opts: &RunOptions) -> Result<(McOutput, Outcome), CliError> {
    let p = cfg.fixed_params()?;
    let block = cfg.mc.clone().unwrap_or_default();
    let McBlock {
        n,
        seed,
        v_m_known,
        assume_no_leakage,
    } = block;
    let seed = opts.seed.unwrap_or(seed);
    let copts = ConsistencyOptions {
        assume_no_leakage: assume_no_leakage || opts.assume_no_leakage,
        v_m_known,
    };
    let consistency = estimation::end_to_end_consistency(&p, n, seed, copts)?;
    let verdict = consistency.verdict(opts.direction.directions());
    let mut metadata = metadata("mc", cfg, opts);
    metadata.rng = Some(estimation::RNG_ALGORITHM);
    metadata.seed = Some(seed);
    let outcome = match verdict {
        Verdict::Consistent => Outcome::Secure,
        Verdict::OverestimatesKey => Outcome::NoSecurity,
    };
    Ok((
        McOutput {
            verdict,
            consistency,
            metadata,
        },
        outcome,
    ))
}
