mod common;

use common::{oracle, Draw};
use cvleak_core::modulator::{rho_to_k, spectrum, suppression_db, ModulatorConfig, RhoConvention};

fn tuples() -> Vec<(f64, f64, f64, f64)> {
    let mut d = Draw::new(9);
    let mut out = Vec::new();
    while out.len() < 20 {
        let mu1 = d.uniform(0.02, 0.2);
        let mu2 = d.uniform(0.02, 0.2);
        let sign = |d: &mut Draw| if d.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
        let d1 = sign(&mut d) * d.uniform(0.002, 0.05);
        let d2 = sign(&mut d) * d.uniform(0.002, 0.05);
        if (mu2 - mu1).abs() >= 0.008 {
            out.push((mu1, mu2, d1, d2));
        }
    }
    out
}

#[test]
fn line_amplitudes_match_exact_field() {
    for (mu1, mu2, d1, d2) in tuples() {
        let (up, low, car) = oracle::field_line_powers(mu1, mu2, d1, d2, 512);
        let s = spectrum(&ModulatorConfig::new(mu1, mu2, d1, d2).unwrap()).unwrap();
        for (model, exact) in [(s.p_suppressed, low / up), (s.p_carrier, car / up)] {
            let rel = (model.sqrt() - exact.sqrt()).abs() / exact.sqrt();
            assert!(rel < 0.01, "({mu1}, {mu2}, {d1}, {d2}): {model} vs {exact}");
        }
    }
}

#[test]
fn leakage_ratio_matches_exact_field() {
    for (mu1, mu2, d1, d2) in tuples() {
        let (up, low, _) = oracle::field_line_powers(mu1, mu2, d1, d2, 512);
        let exact_k = (low / up).sqrt();
        for (conv, scale) in [(RhoConvention::Amplitude10, 10.0), (RhoConvention::Amplitude20, 20.0)] {
            let rho = scale * (mu1 / mu2).log10();
            let k = rho_to_k(rho, 0.0, conv).unwrap();
            assert!((k - exact_k).abs() / exact_k < 0.01, "({mu1}, {mu2}): {k} vs {exact_k}");
        }
    }
}

#[test]
fn suppression_of_balanced_arms() {
    let (up, low, car) = oracle::field_line_powers(0.1, 0.1, 0.0, 0.0, 256);
    assert!(low / up < 1e-20 && car / up < 1e-20);
    let s = spectrum(&ModulatorConfig::ideal(0.1).unwrap()).unwrap();
    assert_eq!(s.suppression_db(), None);
    assert_eq!(suppression_db(rho_to_k(0.0, 0.0, RhoConvention::Amplitude10).unwrap()).unwrap(), None);
}
