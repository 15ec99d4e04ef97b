mod common;

use common::{close, mean_sd, t_cdf_exact};
use hornforge::eval::{marginal_contribution, non_inferiority, AblationTable, Component, NON_INFERIORITY_MARGIN};
use hornforge::rng::stream;
use hornforge::stats::t_cdf;
use rand::Rng;

#[test]
fn closed_form_matches_known_values() {
    // df = 1 is Cauchy; df = 2 has F(t) = 1/2 + t / (2 sqrt(2 + t²)).
    for t in [-3.0, -0.5, 0.0, 0.7, 4.0] {
        assert!((t_cdf_exact(t, 1) - (0.5 + f64::atan(t) / std::f64::consts::PI)).abs() < 1e-15);
        assert!((t_cdf_exact(t, 2) - (0.5 + t / (2.0 * (2.0 + t * t).sqrt()))).abs() < 1e-15);
    }
    // Two-tailed 5% critical value for df = 7.
    assert!((2.0 * (1.0 - t_cdf_exact(2.364624251592785, 7)) - 0.05).abs() < 1e-12);
}

#[test]
fn library_cdf_matches_closed_form() {
    let mut rng = stream(0, 0);
    for _ in 0..2000 {
        let nu = rng.random_range(1..40u32);
        let t = rng.random_range(-12.0..12.0);
        let (got, want) = (t_cdf(t, f64::from(nu)), t_cdf_exact(t, nu));
        assert!((got - want).abs() < 1e-9, "t={t} nu={nu}: {got} vs {want}");
    }
}

#[test]
fn marginal_contribution_matches_reference() {
    let mut rng = stream(1, 0);
    for _ in 0..100 {
        let table = AblationTable {
            cells: vec!["a".into(), "b".into()],
            accuracy: (0u8..16).map(|c| (c, vec![rng.random_range(40.0..100.0), rng.random_range(40.0..100.0)])).collect(),
        };
        for comp in Component::ALL {
            let got = marginal_contribution(&table, comp).unwrap();
            for (cell, m) in got.iter().enumerate() {
                let diffs: Vec<f64> = (0u8..16)
                    .filter(|c| c & comp.bit() == 0)
                    .map(|c| table.accuracy[&(c | comp.bit())][cell] - table.accuracy[&c][cell])
                    .collect();
                let (mean, sd) = mean_sd(&diffs);
                let t = mean / (sd / 8f64.sqrt());
                let p = 2.0 * t_cdf_exact(-t.abs(), 7);
                assert!(close(m.delta, mean, 1e-9));
                assert!(close(m.stdev, sd, 1e-9));
                assert!(close(m.t, t, 1e-9));
                assert!((m.p - p).abs() <= 1e-9);
                assert_eq!(m.significant, p < 0.05);
            }
            // Swapping with/without labels negates delta.
            let flipped = AblationTable {
                cells: table.cells.clone(),
                accuracy: table.accuracy.iter().map(|(&c, v)| (c ^ comp.bit(), v.clone())).collect(),
            };
            let back = marginal_contribution(&flipped, comp).unwrap();
            for (a, b) in got.iter().zip(&back) {
                assert!(close(a.delta, -b.delta, 1e-12));
                assert!((a.p - b.p).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn non_inferiority_matches_reference() {
    let mut rng = stream(2, 0);
    for _ in 0..100 {
        let n = rng.random_range(2..13);
        let direct: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
        let shift = rng.random_range(-0.05..0.08);
        let cot: Vec<f64> = direct.iter().map(|d| d + shift + rng.random_range(-0.02..0.02)).collect();
        let got = non_inferiority(&direct, &cot, NON_INFERIORITY_MARGIN).unwrap();
        let diffs: Vec<f64> = cot.iter().zip(&direct).map(|(c, d)| c - d).collect();
        let (mean, sd) = mean_sd(&diffs);
        let t = (mean - NON_INFERIORITY_MARGIN) / (sd / (n as f64).sqrt());
        let p = t_cdf_exact(t, n as u32 - 1);
        assert!(close(got.t, t, 1e-9));
        assert!((got.p - p).abs() <= 1e-9);
        assert_eq!(got.non_inferior, p < 0.05);
    }
}
