//! Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{oracle, Draw};
use cvleak::config::DirectionSel;
use cvleak::{run, CliError, RunConfig, RunOptions};
use cvleak_core::estimation::{end_to_end_consistency, ConsistencyOptions, Verdict};
use cvleak_core::modulator::{rho_to_k, spectrum};
use cvleak_core::security::{
    build_scheme, key_rate, labels, max_additional_loss, optimize_vm, trusted_noise_viability, LossStatus,
    NoisePoint, Viability, VmPolicy,
};
use cvleak_core::{CovMatrix, Direction, Error, ModulatorConfig, ProtocolParams, RhoConvention};

const PHYS_TOL: f64 = 1e-9;

#[derive(Debug)]
enum Failure {
    Core(Error),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        match e {
            CliError::Core(e) => Failure::Core(e),
            other => Failure::Other(other.to_string()),
        }
    }
}

struct Check {
    pass: bool,
    detail: String,
}

type Outcome = Result<Check, Failure>;

fn verdict(pass: bool, detail: String) -> Outcome {
    Ok(Check { pass, detail })
}

fn shipped(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn random_channel(d: &mut Draw) -> ProtocolParams {
    ProtocolParams {
        v_m: d.uniform(0.01, 50.0),
        k: d.uniform(0.0, 2.0),
        eta_ch: d.uniform(1e-4, 0.999),
        eps_ch: d.uniform(0.0, 0.5),
        ..Default::default()
    }
}

fn ab_oracle() -> Outcome {
    let mut d = Draw::new(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = random_channel(&mut d);
        let ab = build_scheme(&p)?.state.partial_trace(&[labels::A, labels::B])?;
        let want = oracle::ab_matrix(p.v_m, p.k, p.eta_ch, p.eps_ch);
        for (r, row) in want.iter().enumerate() {
            for (c, w) in row.iter().enumerate() {
                worst = worst.max((ab.matrix()[(r, c)] - w).abs());
            }
        }
    }
    verdict(worst <= 1e-10, format!("200 tuples, max entry error {worst:.1e}"))
}

fn two_mode_oracle() -> Outcome {
    let mut d = Draw::new(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = ProtocolParams {
            v_m: d.log_uniform(0.01, 50.0),
            eta_ch: d.uniform(1e-3, 0.999),
            eps_ch: d.uniform(0.0, 0.5),
            beta: d.uniform(0.8, 1.0),
            ..Default::default()
        };
        let got = key_rate(&p)?;
        let want = oracle::no_leakage_rates(p.v_m, p.eta_ch, p.eps_ch, p.beta);
        for (g, w) in [
            (got.i_ab, want.i_ab),
            (got.chi_dr, want.chi_dr),
            (got.chi_rr, want.chi_rr),
            (got.r_dr, want.r_dr),
            (got.r_rr, want.r_rr),
        ] {
            worst = worst.max((g - w).abs());
        }
    }
    verdict(worst <= 1e-8, format!("100 tuples, max error {worst:.1e} bits"))
}

fn full_leakage_direct() -> Outcome {
    let mut best = f64::NEG_INFINITY;
    let mut points = 0;
    for i in 0..25 {
        let eta_ch = 1e-3 * (0.999f64 / 1e-3).powf(i as f64 / 24.0);
        for eps_ch in [0.0, 0.02] {
            let p = ProtocolParams {
                k: 1.0,
                eta_ch,
                eps_ch,
                beta: 0.96,
                ..Default::default()
            };
            best = best.max(optimize_vm(&p, Direction::Direct)?.rate);
            points += 1;
        }
    }
    verdict(best <= 0.0, format!("{points} points, max optimized R_DR {best:.3e}"))
}

fn loss_curves() -> Outcome {
    let base = ProtocolParams {
        eta_ch: 1.0,
        eps_ch: 0.02,
        beta: 0.96,
        ..Default::default()
    };
    let rate = |k: f64, db: f64, dir: Direction| -> Result<f64, Error> {
        Ok(optimize_vm(&base.with_k(k).with_eta_ch(10f64.powf(-db / 10.0)), dir)?.rate)
    };
    let mut pass = true;
    let mut detail = Vec::new();
    for (dir, ks, step) in [
        (Direction::Reverse, &[0.0, 0.2, 0.5, 1.0][..], 0.5),
        (Direction::Direct, &[0.0, 0.2, 0.3][..], 0.05),
    ] {
        let mut crossings = Vec::new();
        for &k in ks {
            let m = max_additional_loss(&base.with_k(k), dir, VmPolicy::Optimized)?;
            pass &= m.status == LossStatus::Found;
            crossings.push(m.db);
        }
        pass &= crossings.windows(2).all(|w| w[0] - w[1] > 0.01);

        let mut below = true;
        let mut db = 0.0;
        while db <= crossings[0] + step {
            let clean = rate(0.0, db, dir)?;
            for &k in &ks[1..] {
                let r = rate(k, db, dir)?;
                below &= r <= clean && (clean <= 0.0 || r < clean);
            }
            db += step;
        }
        pass &= below;
        let list: Vec<String> = ks.iter().zip(&crossings).map(|(k, c)| format!("k={k}:{c:.3}")).collect();
        detail.push(format!("{dir:?} zero crossings dB [{}], pointwise below: {below}", list.join(" ")));
    }
    verdict(pass, detail.join("; "))
}

fn viability_matrix() -> Outcome {
    let p = ProtocolParams {
        v_m: 5.0,
        k: 0.3,
        eta_ch: 0.2,
        eps_ch: 0.02,
        eta_d: 0.85,
        eps_d: 0.01,
        beta: 0.96,
        ..Default::default()
    };
    let mut matched = 0;
    let mut cells = Vec::new();
    for point in NoisePoint::ALL {
        for dir in Direction::BOTH {
            let v = trusted_noise_viability(&p, point, dir)?.verdict;
            let check = matches!(
                (point, dir),
                (NoisePoint::P1, Direction::Direct)
                    | (NoisePoint::P2, Direction::Direct)
                    | (NoisePoint::L, _)
                    | (NoisePoint::D, Direction::Reverse)
            );
            if check == (v == Viability::Helpful) {
                matched += 1;
            }
            cells.push(format!("{point:?}/{dir:?}={v:?}"));
        }
    }
    verdict(matched == 8, format!("{matched}/8 cells at k=0.3, eta_ch=0.2, V_M=5 [{}]", cells.join(" ")))
}

fn rho_sweep() -> Outcome {
    let cfg = RunConfig::load(&shipped("rho_sweep.toml"))?;
    let opts = RunOptions {
        direction: DirectionSel::Both,
        optimize_vm: cfg.outputs.optimize_vm,
        with_eta_max: true,
        assume_no_leakage: false,
        seed: None,
    };
    let out = run::sweep(&cfg, &opts)?;
    let mut worst = f64::INFINITY;
    let mut missing = 0;
    for row in &out.rows {
        for v in [row.dr_dr, row.dr_rr] {
            worst = worst.min(v);
        }
        for v in [row.d_eta_dr_db, row.d_eta_rr_db] {
            match v {
                Some(v) => worst = worst.min(v),
                None => missing += 1,
            }
        }
    }
    verdict(
        worst >= -1e-9 && missing == 0 && out.rows.len() == 21,
        format!("{} rows, min dR/d_eta {worst:.3e}", out.rows.len()),
    )
}

fn monte_carlo() -> Outcome {
    let cfg = RunConfig::load(&shipped("mc.toml"))?;
    let p = cfg.fixed_params()?;
    let rep = end_to_end_consistency(&p, 1_000_000, cfg.mc.unwrap_or_default().seed, ConsistencyOptions::default())?;
    let e = &rep.estimates;
    let covered = e.v_m.covers(p.v_m, 5.0) && e.k.covers(p.k, 5.0) && e.eta.covers(p.eta_ch, 5.0) && e.eps.covers(p.eps_ch, 5.0);
    let worst = rep.checks.iter().map(|c| c.discrepancy()).fold(0.0, f64::max);
    let consistent = rep.verdict(&Direction::BOTH) == Verdict::Consistent;

    let dir = tempfile::tempdir().map_err(|e| Failure::Other(e.to_string()))?;
    let misuse = dir.path().join("misuse.toml");
    let text = std::fs::read_to_string(shipped("mc.toml")).map_err(|e| Failure::Other(e.to_string()))?;
    std::fs::write(&misuse, text.replace("k = 0.2", "k = 0.5")).map_err(|e| Failure::Other(e.to_string()))?;
    let status = Command::new(env!("CARGO_BIN_EXE_cvleak"))
        .args(["mc", "--config", misuse.to_str().unwrap(), "--assume-no-leakage"])
        .output()
        .map_err(|e| Failure::Other(e.to_string()))?
        .status
        .code();

    verdict(
        covered && consistent && worst < 0.02 && status == Some(2),
        format!(
            "n=1e6: estimates within 5 SE: {covered}, consistent: {consistent}, max |dR| {worst:.4} bits; \
             misuse at k=0.5 exit code {status:?}"
        ),
    )
}

fn physicality(earlier_violations: &[String]) -> Outcome {
    let probe = CovMatrix::from_parts(&["a"], CovMatrix::vacuum(1)?.matrix() * 0.5)?.add_noise("a", 0.0);
    let strict = matches!(probe, Err(Error::UnphysicalState(_)));

    let mut d = Draw::new(108);
    let mut worst_nu = f64::INFINITY;
    let mut worst_s = 0.0f64;
    for i in 0..200 {
        let mut p = random_channel(&mut d);
        if i % 2 == 1 {
            p.eps_p1 = d.uniform(0.0, 1.0);
            p.eps_p2 = d.uniform(0.0, 1.0);
            p.eps_l = d.uniform(0.0, 1.0);
            p.eta_d = d.uniform(0.5, 0.99);
            p.eps_d = d.uniform(0.0, 1.0);
        }
        let state = build_scheme(&p)?.state;
        worst_nu = worst_nu.min(state.symplectic_eigenvalues()?.min());
        worst_s = worst_s.max(state.von_neumann_entropy()?);
        let ab = state.partial_trace(&[labels::A, labels::B])?;
        worst_nu = worst_nu.min(ab.symplectic_eigenvalues()?.min());
    }
    let pass = strict && earlier_violations.is_empty() && worst_nu >= 1.0 - PHYS_TOL && worst_s < 1e-6;
    let mut detail = format!(
        "strict checks active: {strict}, violations in 1-7: {}, 200 schemes min nu {worst_nu:.12}, max entropy {worst_s:.1e} bits",
        earlier_violations.len()
    );
    if !earlier_violations.is_empty() {
        detail.push_str(&format!(" [{}]", earlier_violations.join(", ")));
    }
    verdict(pass, detail)
}

fn modulator_mapping() -> Outcome {
    let mut d = Draw::new(109);
    let mut worst = 0.0f64;
    let mut tuples = 0;
    while tuples < 20 {
        let mu1 = d.uniform(0.02, 0.2);
        let mu2 = d.uniform(0.02, 0.2);
        let s1 = if d.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
        let s2 = if d.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
        let d1 = s1 * d.uniform(0.002, 0.05);
        let d2 = s2 * d.uniform(0.002, 0.05);
        if (mu2 - mu1).abs() < 0.008 {
            continue;
        }
        tuples += 1;
        let (up, low, car) = oracle::field_line_powers(mu1, mu2, d1, d2, 512);
        let s = spectrum(&ModulatorConfig::new(mu1, mu2, d1, d2)?)?;
        let rel = |model: f64, exact: f64| (model - exact).abs() / exact;
        worst = worst.max(rel(s.p_suppressed.sqrt(), (low / up).sqrt()));
        worst = worst.max(rel(s.p_carrier.sqrt(), (car / up).sqrt()));
        for (conv, scale) in [(RhoConvention::Amplitude10, 10.0), (RhoConvention::Amplitude20, 20.0)] {
            let k = rho_to_k(scale * (mu1 / mu2).log10(), 0.0, conv)?;
            worst = worst.max(rel(k, (low / up).sqrt()));
        }
    }
    verdict(worst < 0.01, format!("{tuples} tuples, max relative line amplitude error {:.3}%", 100.0 * worst))
}

fn report(id: u8, name: &str, limit: Duration, f: impl FnOnce() -> Outcome, violations: &mut Vec<String>) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(c) => (c.pass && elapsed <= limit, c.detail),
        Err(Failure::Core(Error::UnphysicalState(nu))) => {
            violations.push(format!("criterion {id}: nu_min {nu}"));
            (false, format!("unphysical state, nu_min {nu}"))
        }
        Err(Failure::Core(e)) => (false, format!("error: {e}")),
        Err(Failure::Other(e)) => (false, format!("error: {e}")),
    };
    println!(
        "{} criterion {id}: {name}: {detail} ({:.2}s, limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut violations = Vec::new();
    let mut all = true;
    all &= report(1, "A/B covariance closed form", secs(5), ab_oracle, &mut violations);
    all &= report(2, "no-leakage two-mode rates", secs(10), two_mode_oracle, &mut violations);
    all &= report(3, "DR collapse at k=1", secs(60), full_leakage_direct, &mut violations);
    all &= report(4, "loss tolerance ordering in k", secs(120), loss_curves, &mut violations);
    all &= report(5, "trusted-noise viability matrix", secs(120), viability_matrix, &mut violations);
    all &= report(6, "rho sweep penalties non-negative", secs(300), rho_sweep, &mut violations);
    all &= report(7, "Monte-Carlo closure and misuse", secs(180), monte_carlo, &mut violations);
    let earlier = violations.clone();
    all &= report(8, "physicality", secs(600), || physicality(&earlier), &mut violations);
    all &= report(9, "modulator line mapping", secs(30), modulator_mapping, &mut violations);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
