use lama_core::harness::{run_ensemble, EnsembleConfig, GainCurve, PriorSpec};
use lama_core::protocols::{ProtocolConfig, ProtocolKind};
use lama_core::DecoherenceParams;

fn prior() -> PriorSpec {
    PriorSpec { grid_points: 2048, ..PriorSpec::default() }
}

fn ensemble(protocol: ProtocolConfig, n: usize, seed: u64) -> GainCurve {
    run_ensemble(&EnsembleConfig { protocol, n_experiments: n, prior: prior(), seed }).unwrap()
}

#[test]
fn same_config_same_curve() {
    let p = ProtocolConfig::new(ProtocolKind::Lama, 12);
    assert_eq!(ensemble(p.clone(), 20, 4), ensemble(p, 20, 4));
}

#[test]
fn classical_increments_shrink() {
    let curve = ensemble(ProtocolConfig::new(ProtocolKind::Classical, 50), 200, 1);
    let inc = curve.mean_increments();
    assert!(inc[39] < inc[1], "step 40 {} vs step 2 {}", inc[39], inc[1]);
    assert!(curve.points.windows(2).all(|w| w[1].mean_gain_bits > w[0].mean_gain_bits));
}

#[test]
fn stderr_falls_as_inverse_root_n() {
    let p = ProtocolConfig::new(ProtocolKind::Lama, 20);
    let small = ensemble(p.clone(), 50, 11);
    let large = ensemble(p, 200, 11);
    // Mean ratio over steps past the first, whose spread is set by a single outcome.
    let ratios: Vec<f64> = small.points[1..].iter().zip(&large.points[1..]).map(|(a, b)| a.stderr / b.stderr).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - 2.0).abs() <= 0.6, "stderr ratio {mean}");
}

#[test]
fn mean_curves_never_decrease() {
    let dec = DecoherenceParams::from_coherence_time(5e-6).unwrap();
    for kind in ProtocolKind::ALL {
        let p = ProtocolConfig::new(kind, 12).with_decoherence(dec).with_t1(if kind.is_fourier() { 2.4e-6 } else { 15e-9 });
        let curve = ensemble(p, 40, 2);
        assert!(!curve.points.is_empty());
        for w in curve.points.windows(2) {
            assert!(w[1].t_phi > w[0].t_phi);
            // Kitaev delays far past T_c are fully dephased: zero gain up to
            // round-off in the entropy sums.
            assert!(w[1].mean_gain_bits >= w[0].mean_gain_bits - 1e-9, "{}: {:?}", kind.name(), curve.points);
        }
    }
}
