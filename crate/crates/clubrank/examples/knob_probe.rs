// Scratch probe: drift/seasons knobs and h-slice of the loss; not a test.
use std::collections::BTreeSet;

use clubrank::dataset::{split, SeasonIndex, SplitSpec};
use clubrank::params::ParamVector;
use clubrank::replay::ReplayOptions;
use clubrank::synth::{generate, SynthConfig};
use clubrank::trainer::{evaluate_on_test, FitOptions, Fitter};

fn run(tag: &str, cfg: &SynthConfig, probe_h_slice: bool) {
    let out = generate(cfg);
    let index = SeasonIndex::from_records(&out.matches);
    let ordered: Vec<String> = index.ordered().iter().map(|s| s.to_string()).collect();
    let n = ordered.len();
    let cut = n - 2 * cfg.countries.min(2);
    let test_seasons: BTreeSet<String> = ordered[cut..].iter().cloned().collect();
    let train_seasons: BTreeSet<String> = ordered[..cut].iter().cloned().collect();
    let (train, test) = split(&out.matches, &SplitSpec { train_seasons, test_seasons }).unwrap();

    let test_labels: BTreeSet<&str> = test.0.iter().map(|m| m.season.as_str()).collect();
    let (mut gen_loss, mut count) = (0.0, 0usize);
    for (m, p) in out.matches.iter().zip(&out.truth) {
        if test_labels.contains(m.season.as_str()) {
            gen_loss -= m.outcome().probability(p).max(1e-12).ln();
            count += 1;
        }
    }
    let gen_loss = gen_loss / count as f64;

    let fitter = Fitter::new(&train, &out.tiers).unwrap();
    let initial = ParamVector::for_leagues(out.tiers.covered_leagues());
    let fit = fitter
        .fit(&initial, &FitOptions { budget: 1200, ..FitOptions::default() })
        .unwrap();
    let held = evaluate_on_test(&fit.params, &train, &test, &out.tiers, ReplayOptions::default()).unwrap();
    let hs: Vec<f64> = fit.params.per_league.values().map(|l| l.h).collect();
    let mean_h = hs.iter().sum::<f64>() / hs.len() as f64;
    println!(
        "{tag}: matches {} gen {gen_loss:.4} held {held:.4} gap {:.4} mean_h {mean_h:.3} h={:?}",
        out.matches.len(),
        held - gen_loss,
        hs.iter().map(|h| (h * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );

    if probe_h_slice {
        // Slice the train loss in h (all leagues together) around the fit.
        for h in [0.15, 0.20, 0.25, 0.30] {
            let mut p = fit.params.clone();
            for lp in p.per_league.values_mut() {
                lp.h = h;
            }
            let train_loss = fitter.replay_log_loss(&p, 0).unwrap();
            let held_h = evaluate_on_test(&p, &train, &test, &out.tiers, ReplayOptions::default()).unwrap();
            println!("   h={h:.2}: train {train_loss:.5} held {held_h:.5}");
        }
        // Restart from a high-h initial vector.
        let mut high = initial.clone();
        for lp in high.per_league.values_mut() {
            lp.h = 0.6;
        }
        let refit = fitter
            .fit(&high, &FitOptions { budget: 1200, ..FitOptions::default() })
            .unwrap();
        let hs2: Vec<f64> = refit.params.per_league.values().map(|l| l.h).collect();
        println!("   refit from h=0.6: h={hs2:?} train {:.5}", refit.loss);
    }
}

fn main() {
    // Acceptance-7 shape: 2 countries x 2 tiers x 20 teams x 6 seasons.
    let acc = SynthConfig::default();
    run("acc drift.02", &acc, false);
    run("acc drift0  ", &SynthConfig { strength_drift: 0.0, ..acc.clone() }, false);
    run("acc drift0 s2", &SynthConfig { strength_drift: 0.0, seed: 2, ..acc.clone() }, false);
    run("acc d.02 s2  ", &SynthConfig { seed: 2, ..acc.clone() }, false);
    // Trainer-example shape: two leagues, ~5000 matches.
    let tr = SynthConfig { countries: 1, double_round_robin: true, seasons: 7, strength_drift: 0.0, ..SynthConfig::default() };
    run("tr drift0 s7", &tr, false);
    run("tr drift0 s7 seed2", &SynthConfig { seed: 2, ..tr.clone() }, false);
}
