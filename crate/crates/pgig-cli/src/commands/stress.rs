//! `pgig stress`: run the signal/distractor stress comparison and emit one
//! CSV per figure panel plus a pass/fail property report.

use std::path::Path;

use pgig_core::stress::{ramp_correlation, run_stress_comparison, StressComparison, StressConfig};

use crate::config::{section_or_empty, ConfigDoc};
use crate::csvio::write_csv;
use crate::errors::CliResult;
use crate::manifest::Manifest;

const KEYS: [&str; 7] = [
    "z_start", "z_end", "z_step", "noise_mu", "noise_sigma", "steps", "seed",
];

fn resolve(doc: &ConfigDoc) -> CliResult<StressConfig> {
    let section = section_or_empty(doc, "stress");
    section.ensure_known_keys(&KEYS)?;
    let defaults = StressConfig::default();
    Ok(StressConfig {
        z_start: section.get_f64("z_start", defaults.z_start)?,
        z_end: section.get_f64("z_end", defaults.z_end)?,
        z_step: section.get_f64("z_step", defaults.z_step)?,
        noise_mu: section.get_f64("noise_mu", defaults.noise_mu)?,
        noise_sigma: section.get_f64("noise_sigma", defaults.noise_sigma)?,
        steps: section.get_usize("steps", defaults.steps)?,
        seed: section.get_u64("seed", defaults.seed)?,
    })
}

pub fn run(doc: &ConfigDoc, out: &Path) -> CliResult<Manifest> {
    let cfg = resolve(doc)?;
    let comparison = run_stress_comparison(&cfg)?;
    write_panels(&comparison, out)?;
    let report = property_report(&comparison, &cfg);
    std::fs::write(out.join("report.txt"), &report)?;
    print!("{report}");
    Ok(Manifest {
        command: "stress".into(),
        out_dir: out.display().to_string(),
        sections: vec![(
            "stress".into(),
            vec![
                ("z_start".into(), cfg.z_start.to_string()),
                ("z_end".into(), cfg.z_end.to_string()),
                ("z_step".into(), cfg.z_step.to_string()),
                ("noise_mu".into(), cfg.noise_mu.to_string()),
                ("noise_sigma".into(), cfg.noise_sigma.to_string()),
                ("steps".into(), cfg.steps.to_string()),
                ("seed".into(), cfg.seed.to_string()),
            ],
        )],
    })
}

fn write_panels(comparison: &StressComparison, out: &Path) -> CliResult<()> {
    let points = comparison.dataset.points();
    let two_col = |value: &dyn Fn(usize) -> f64| -> Vec<Vec<String>> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| vec![p.z.to_string(), value(i).to_string()])
            .collect()
    };

    write_csv(
        &out.join("target.csv"),
        &["z", "y"],
        &two_col(&|i| points[i].y),
    )?;
    write_csv(
        &out.join("signal.csv"),
        &["z", "value"],
        &two_col(&|i| points[i].signal.get(0)),
    )?;
    write_csv(
        &out.join("distractor.csv"),
        &["z", "value"],
        &two_col(&|i| points[i].eps),
    )?;
    let input_rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.z.to_string(),
                p.input.get(0).to_string(),
                p.input.get(1).to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("input.csv"), &["z", "x1", "x2"], &input_rows)?;

    let series = [
        ("ig_signal.csv", &comparison.ig.signal),
        ("ig_distractor.csv", &comparison.ig.distractor),
        ("pa_signal.csv", &comparison.pa.signal),
        ("pa_distractor.csv", &comparison.pa.distractor),
        ("pgig_signal.csv", &comparison.pgig.signal),
        ("pgig_distractor.csv", &comparison.pgig.distractor),
    ];
    for (name, values) in series {
        write_csv(
            &out.join(name),
            &["z", "value"],
            &two_col(&|i| values[i]),
        )?;
    }
    Ok(())
}

fn property_report(comparison: &StressComparison, cfg: &StressConfig) -> String {
    let points = comparison.dataset.points();
    let mut lines: Vec<String> = Vec::new();

    let plateau: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.z > 1.05)
        .map(|(i, _)| i)
        .collect();
    let pa_max = plateau
        .iter()
        .map(|i| comparison.pa.signal[*i].abs())
        .fold(0.0f64, f64::max);
    push_verdict(
        &mut lines,
        "pa_saturates_at_plateau",
        pa_max < 1e-9,
        format!("max |pa_1| over z > 1.05 is {pa_max:e}"),
    );

    let pgig_min = plateau
        .iter()
        .map(|i| comparison.pgig.signal[*i])
        .fold(f64::INFINITY, f64::min);
    push_verdict(
        &mut lines,
        "pgig_survives_plateau",
        pgig_min > 0.0,
        format!("min pgig_1 over z > 1.05 is {pgig_min}"),
    );

    let pgig_dis_max = comparison
        .pgig
        .distractor
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    push_verdict(
        &mut lines,
        "pgig_ignores_distractor",
        pgig_dis_max == 0.0,
        format!("max |pgig_2| is {pgig_dis_max:e}"),
    );

    if cfg.noise_sigma > 0.0 {
        let ig_leak = comparison.ig.mean_abs_distractor();
        let pgig_leak = comparison.pgig.mean_abs_distractor();
        push_verdict(
            &mut lines,
            "ig_leaks_distractor",
            ig_leak > 10.0 * pgig_leak,
            format!("mean |ig_2| = {ig_leak:.4}, mean |pgig_2| = {pgig_leak:.4}"),
        );

        let ramp: Vec<usize> = points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.z > -1.0 && p.z < 1.0)
            .map(|(i, _)| i)
            .collect();
        let mean_abs = |values: &[f64]| -> f64 {
            let selected: Vec<f64> = ramp.iter().map(|i| values[*i].abs()).collect();
            selected.iter().sum::<f64>() / selected.len() as f64
        };
        let pa_sig = mean_abs(&comparison.pa.signal);
        let pa_dis = mean_abs(&comparison.pa.distractor);
        push_verdict(
            &mut lines,
            "pa_rejects_noise",
            pa_dis < 0.05 * pa_sig,
            format!("ramp mean |pa_2| = {pa_dis:.4}, mean |pa_1| = {pa_sig:.4}"),
        );
    } else {
        verdict_skipped(&mut lines, "ig_leaks_distractor");
        verdict_skipped(&mut lines, "pa_rejects_noise");
        let corr = ramp_correlation(comparison);
        push_verdict(
            &mut lines,
            "pgig_tracks_signal",
            corr > 0.99,
            format!("ramp correlation {corr:.6}"),
        );
    }

    lines.push(String::new());
    lines.join("\n")
}

fn push_verdict(lines: &mut Vec<String>, name: &str, pass: bool, detail: String) {
    lines.push(format!(
        "{name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    ));
}

fn verdict_skipped(lines: &mut Vec<String>, name: &str) {
    lines.push(format!("{name}: SKIPPED (noiseless run)"));
}
