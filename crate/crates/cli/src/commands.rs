//! One function per subcommand. Each computes every output in memory and
//! hands back the files; nothing touches the disk here.

use lama_core::bayes::{entropy, posterior_stats, FieldDistribution};
use lama_core::harness::{
    oscillation_study, run_ensemble, sliding_alpha, window_center, EnsembleConfig, GainCurve, OscillationKind,
};
use lama_core::optimizer::{gain_landscape, optimize_step_params, OptimizerSettings, PrepChoice};
use lama_core::protocols::{run_protocol, OutcomeMode, ProtocolConfig, ProtocolKind};
use lama_core::qudit::{gauge_free_spin_xy, spin_xy_projection};
use serde_json::{json, Value};
use toml::Table;

use crate::config::{
    decoherence, CompareConfig, GainCurveConfig, LamaTraceConfig, OptimizeConfig, OscillationsConfig,
};
use crate::output::{Csv, Field, Int, Num, Outputs};

/// ħ / (10⁵ μ_B) in T·s: the display factor from ω to a field value.
const TESLA_PER_RAD_PER_S: f64 = 1.054_571_817e-34 / (1e5 * 9.274_010_078_3e-24);

pub struct CommandOutput {
    pub seed: u64,
    pub config: Table,
    pub files: Outputs,
    pub results: Value,
}

pub fn gain_curve(cfg: &GainCurveConfig) -> lama_core::Result<CommandOutput> {
    let prior = cfg.prior.spec().build()?;
    let ts = cfg.sweep();
    let curve = gain_landscape(&prior, &ts, cfg.prep, &decoherence(cfg.coherence_time))?;

    let mut csv = Csv::new(&["t_ns", "gain_bits"]);
    for &(t, g) in &curve {
        csv.row(&[Num(t * 1e9), Num(g)]);
    }
    let gains: Vec<f64> = curve.iter().map(|c| c.1).collect();
    // Plateau: mean over the last quarter of the sweep.
    let tail = &gains[gains.len() - gains.len().div_ceil(4)..];
    let plateau = (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64);

    let mut files = Outputs::default();
    files.add("gain_curve.csv".into(), csv.into_string());
    Ok(CommandOutput {
        seed: cfg.seed,
        config: cfg.render(),
        files,
        results: json!({
            "prep": prep_label(cfg.prep),
            "plateau_bits": plateau,
            "final_bits": gains.last(),
            "max_bits": gains.iter().cloned().reduce(f64::max),
        }),
    })
}

fn prep_label(p: PrepChoice) -> &'static str {
    match p {
        PrepChoice::Balanced => "balanced",
        PrepChoice::Xy { .. } => "xy",
    }
}

struct CompareRun {
    label: String,
    protocol: ProtocolConfig,
    coherence_time: Option<f64>,
    /// Position within its coherence-time block. Runs that differ only in
    /// T_c share a seed, so their curves differ by decoherence, not sampling.
    slot: usize,
}

fn compare_runs(cfg: &CompareConfig) -> Vec<CompareRun> {
    let mut runs = vec![];
    for &tc in &cfg.coherence_times {
        let block_start = runs.len();
        let tc_label = match tc {
            Some(t) => format!("tc{}ns", fmt_label(t * 1e9)),
            None => "coherent".to_string(),
        };
        for &kind in &cfg.protocols {
            let base = ProtocolConfig::new(kind, cfg.n_steps)
                .with_t1(cfg.t1)
                .with_dt(cfg.dt)
                .with_decoherence(decoherence(tc))
                .with_delay_floor(cfg.delay_floor);
            match kind {
                ProtocolKind::Fourier | ProtocolKind::FourierModified => {
                    for &t1 in &cfg.fourier_t1 {
                        runs.push(CompareRun {
                            label: format!("{}_t1_{}ns_{tc_label}", kind.name(), fmt_label(t1 * 1e9)),
                            protocol: base.clone().with_t1(t1),
                            coherence_time: tc,
                            slot: 0,
                        });
                    }
                }
                ProtocolKind::Kitaev => {
                    let mut p = base;
                    p.n_steps = cfg.kitaev_steps_for(tc);
                    runs.push(CompareRun { label: format!("kitaev_{tc_label}"), protocol: p, coherence_time: tc, slot: 0 });
                }
                _ => runs.push(CompareRun {
                    label: format!("{}_{tc_label}", kind.name()),
                    protocol: base,
                    coherence_time: tc,
                    slot: 0,
                }),
            }
        }
        for (slot, run) in runs[block_start..].iter_mut().enumerate() {
            run.slot = slot;
        }
    }
    runs
}

/// Compact file-name form of a number: integers print bare, others use `p`
/// for the decimal point.
fn fmt_label(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    if r.fract() == 0.0 {
        format!("{}", r as i64)
    } else {
        format!("{r}").replace('.', "p")
    }
}

pub fn compare(cfg: &CompareConfig) -> lama_core::Result<CommandOutput> {
    let mut files = Outputs::default();
    let mut summaries = vec![];
    for (j, run) in compare_runs(cfg).into_iter().enumerate() {
        let seed = cfg.seed.wrapping_add((run.slot as u64) << 32);
        let ensemble = EnsembleConfig {
            protocol: run.protocol.clone(),
            n_experiments: cfg.n_experiments,
            prior: cfg.prior.spec(),
            seed,
        };
        let curve = run_ensemble(&ensemble)?;
        let name = format!("compare_{:02}_{}.csv", j, run.label);
        files.add(name.clone(), curve_csv(&curve));
        let alphas: Vec<Value> = sliding_alpha(&curve, cfg.alpha_window_decades)
            .iter()
            .map(|e| {
                json!({
                    "window_s": [e.window.0, e.window.1],
                    "center_s": window_center(e),
                    "alpha": e.alpha,
                    "fit_residual": e.fit_residual,
                    "n_points": e.n_points,
                })
            })
            .collect();
        summaries.push(json!({
            "label": run.label,
            "file": name,
            "protocol": run.protocol.kind.name(),
            "t1_s": run.protocol.t1,
            "dt_s": run.protocol.dt,
            "steps": curve.points.len(),
            "coherence_time_s": run.coherence_time,
            "seed": seed,
            "final_t_phi_s": curve.points.last().map(|p| p.t_phi),
            "final_gain_bits": curve.points.last().map(|p| p.mean_gain_bits),
            "alpha_windows": alphas,
        }));
    }
    Ok(CommandOutput { seed: cfg.seed, config: cfg.render(), files, results: json!({ "runs": summaries }) })
}

fn curve_csv(curve: &GainCurve) -> String {
    let mut csv = Csv::new(&["step", "t_phi_us", "mean_gain_bits", "stderr"]);
    for p in &curve.points {
        csv.row(&[Int(p.step as u64), Num(p.t_phi * 1e6), Num(p.mean_gain_bits), Num(p.stderr)]);
    }
    csv.into_string()
}

pub fn lama_trace(cfg: &LamaTraceConfig, flux_axis: bool) -> lama_core::Result<CommandOutput> {
    let prior = cfg.prior.spec().build()?;
    let dec = decoherence(cfg.coherence_time);
    let protocol = ProtocolConfig::new(ProtocolKind::Lama, cfg.outcomes.len())
        .with_t1(cfg.t1)
        .with_dt(cfg.dt)
        .with_decoherence(dec);
    let trajectory = run_protocol(&protocol, &prior, cfg.seed, OutcomeMode::Scripted(cfg.outcomes.clone()))?;

    let mut posteriors: Vec<&FieldDistribution> = vec![&prior];
    posteriors.extend(trajectory.steps.iter().map(|s| &s.posterior));

    let axis = if flux_axis { "field_tesla" } else { "omega_rad_per_s" };
    let scale = if flux_axis { TESLA_PER_RAD_PER_S } else { 1.0 };
    let mut post_csv = Csv::new(&["step", axis, "probability"]);
    for (step, dist) in posteriors.iter().enumerate() {
        for (w, p) in dist.grid().points().zip(dist.weights()) {
            post_csv.row(&[Int(step as u64), Num(w * scale), Num(*p)]);
        }
    }

    // Expected first-step gain of the next LAMA measurement under each posterior.
    let ts = crate::config::linspace(cfg.t_stop / cfg.t_points.max(1) as f64, cfg.t_stop, cfg.t_points);
    let prep = PrepChoice::Xy { alpha: 0.0, beta: 0.0 };
    let mut gain_csv = Csv::new(&["step", "t_ns", "gain_bits"]);
    for (step, dist) in posteriors.iter().enumerate() {
        for (t, g) in gain_landscape(dist, &ts, prep, &dec)? {
            gain_csv.row(&[Int(step as u64), Num(t * 1e9), Num(g)]);
        }
    }

    let mut steps = vec![];
    for (k, dist) in posteriors.iter().enumerate() {
        let (mean, std) = posterior_stats(dist);
        let mut s = json!({
            "step": k,
            "mean_rad_per_s": mean,
            "std_rad_per_s": std,
            "entropy_nats": entropy(dist),
        });
        if k > 0 {
            let r = &trajectory.steps[k - 1].summary;
            s["outcome"] = json!(r.outcome);
            s["delay_s"] = json!(r.plan.delay);
            s["t_phi_s"] = json!(r.t_phi);
            s["expected_gain_bits"] = json!(r.expected_gain_bits);
            s["gain_bits"] = json!(r.gain.gain_bits);
        }
        steps.push(s);
    }

    let mut files = Outputs::default();
    files.add("lama_trace_posterior.csv".into(), post_csv.into_string());
    files.add("lama_trace_gain.csv".into(), gain_csv.into_string());
    Ok(CommandOutput {
        seed: cfg.seed,
        config: cfg.render(),
        files,
        results: json!({ "axis": axis, "steps": steps, "total_gain_bits": trajectory.total_gain_bits() }),
    })
}

pub fn oscillations(cfg: &OscillationsConfig) -> lama_core::Result<CommandOutput> {
    let results = oscillation_study(cfg.kind, &cfg.variants, &cfg.settings())?;
    let variant_col = match cfg.kind {
        OscillationKind::Discreteness => "grid_points",
        _ => "variant_rad_per_s",
    };
    let mut csv = Csv::new(&[variant_col, "t_ns", "gain_bits"]);
    for r in &results {
        for &(t, g) in &r.curve {
            let v = match cfg.kind {
                OscillationKind::Discreteness => Int(r.variant as u64),
                _ => Num(r.variant),
            };
            csv.row(&[v, Num(t * 1e9), Num(g)]);
        }
    }
    let first = results.first().and_then(|r| r.period);
    let summaries: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "variant": r.variant,
                "characteristic_period_s": r.characteristic_period,
                "period_s": r.period,
                "extrema_s": r.extrema,
                "period_ratio_to_first": match (first, r.period) {
                    (Some(a), Some(b)) => Some(a / b),
                    _ => None,
                },
            })
        })
        .collect();
    let mut files = Outputs::default();
    files.add(format!("oscillations_{}.csv", cfg.kind.name()), csv.into_string());
    Ok(CommandOutput {
        seed: cfg.seed,
        config: cfg.render(),
        files,
        results: json!({ "kind": cfg.kind.name(), "variants": summaries }),
    })
}

pub fn optimize(cfg: &OptimizeConfig) -> lama_core::Result<CommandOutput> {
    let prior = cfg.prior.spec().build()?;
    let dec = decoherence(cfg.coherence_time);
    let settings = OptimizerSettings { starts: cfg.starts, budget: cfg.budget, seed: cfg.seed, bound: cfg.bound };
    let header = [
        "t_ns",
        "best_gain_bits",
        "eps_p",
        "delta1_p",
        "delta2_p",
        "eps_r",
        "delta1_r",
        "delta2_r",
        "j_xy_gauge_free",
        "j_xy_raw",
        "n_evaluations",
        "budget_exhausted",
    ];
    let mut csv = Csv::new(&header);
    let mut summaries = vec![];
    for &t in &cfg.delays {
        let r = optimize_step_params(&prior, t, &dec, &settings)?;
        let prep = r.best_params.prep_state();
        let j_free = gauge_free_spin_xy(&prep)?;
        let j_raw = spin_xy_projection(&prep)?.j_xy;
        let mut row: Vec<Field> = vec![Num(t * 1e9), Num(r.best_gain)];
        row.extend(r.best_params.to_array().iter().map(|&x| Num(x)));
        row.extend([Num(j_free), Num(j_raw), Int(r.n_evaluations as u64), Int(r.budget_exhausted as u64)]);
        csv.row(&row);
        summaries.push(json!({
            "t_s": t,
            "best_gain_bits": r.best_gain,
            "best_params": r.best_params,
            "j_xy_gauge_free": j_free,
            "j_xy_raw": j_raw,
            "n_evaluations": r.n_evaluations,
            "budget_exhausted": r.budget_exhausted,
            "start_bests_bits": r.start_bests,
        }));
    }
    let mut files = Outputs::default();
    files.add("optimize.csv".into(), csv.into_string());
    Ok(CommandOutput { seed: cfg.seed, config: cfg.render(), files, results: json!({ "delays": summaries }) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_document, Overrides};

    fn cfg<T>(text: &str, parse: fn(&Table, Overrides) -> Result<T, crate::config::ConfigError>) -> T {
        parse(&parse_document(text).unwrap(), Overrides::default()).unwrap()
    }

    #[test]
    fn labels_are_file_safe() {
        assert_eq!(fmt_label(2400.0), "2400");
        assert_eq!(fmt_label(2.5), "2p5");
    }

    #[test]
    fn compare_expands_fourier_delays() {
        let c: CompareConfig = cfg("[compare]\nprotocols = [\"fourier\", \"kitaev\"]\n", CompareConfig::parse);
        let labels: Vec<String> = compare_runs(&c).into_iter().map(|r| r.label).collect();
        assert_eq!(
            labels,
            ["fourier_t1_500ns_tc5000ns", "fourier_t1_2400ns_tc5000ns", "fourier_t1_5000ns_tc5000ns", "kitaev_tc5000ns"]
        );
        let k = compare_runs(&c).pop().unwrap();
        assert_eq!(k.protocol.n_steps, 8);
    }

    #[test]
    fn tesla_factor() {
        // ħ/μ_B ≈ 1.1371e-11 T·s, divided by the 10⁵ enhancement.
        assert!((TESLA_PER_RAD_PER_S - 1.137_126_02e-16).abs() < 1e-24);
    }

    #[test]
    fn empty_sweep_has_header_only() {
        let c: GainCurveConfig = cfg("[gain_curve]\nt_points = 0\n[prior]\ngrid_points = 64\n", GainCurveConfig::parse);
        let out = gain_curve(&c).unwrap();
        assert_eq!(out.results["plateau_bits"], Value::Null);
        assert_eq!(out.files.names(), ["gain_curve.csv"]);
    }
}
