// Scratch probe for fit-budget tuning; not part of the test suite.
use std::collections::BTreeSet;
use std::time::Instant;

use clubrank::dataset::{split, SeasonIndex, SplitSpec};
use clubrank::params::ParamVector;
use clubrank::replay::ReplayOptions;
use clubrank::synth::{generate, SynthConfig};
use clubrank::trainer::{evaluate_on_test, FitOptions, Fitter};

fn main() {
    let cfg = SynthConfig::default();
    let t0 = Instant::now();
    let out = generate(&cfg);
    println!("generated {} matches in {:?}", out.matches.len(), t0.elapsed());

    let index = SeasonIndex::from_records(&out.matches);
    let ordered: Vec<String> = index.ordered().iter().map(|s| s.to_string()).collect();
    println!("seasons: {ordered:?}");
    // Last two seasons per calendar convention = last 4 labels by start.
    let n = ordered.len();
    let test_seasons: BTreeSet<String> = ordered[n - 4..].iter().cloned().collect();
    let train_seasons: BTreeSet<String> = ordered[..n - 4].iter().cloned().collect();
    let (train, test) = split(
        &out.matches,
        &SplitSpec {
            train_seasons,
            test_seasons,
        },
    )
    .unwrap();
    println!("train {} test {}", train.0.len(), test.0.len());

    let leagues: Vec<&str> = out.tiers.covered_leagues();
    let initial = ParamVector::for_leagues(leagues);
    let fitter = Fitter::new(&train, &out.tiers).unwrap();

    let t1 = Instant::now();
    let loss0 = fitter.replay_log_loss(&initial, 0).unwrap();
    println!("one replay eval: {:?}, initial loss {loss0:.4}", t1.elapsed());

    for budget in [400usize, 900] {
        let t2 = Instant::now();
        let fit = fitter
            .fit(&initial, &FitOptions { budget, ..FitOptions::default() })
            .unwrap();
        println!(
            "budget {budget}: loss {:.4} (from {:.4}), evals {}, {:?}",
            fit.loss, fit.initial_loss, fit.evaluations, t2.elapsed()
        );
        for (league, lp) in &fit.params.per_league {
            println!("  {league}: h={:.3} h_p={:.3} mu_init={:.3} phi_s={:.3}", lp.h, lp.h_p, lp.mu_init, lp.phi_s);
        }
        println!("  globals: phi0={:.3} sigma0={:.4} tau={:.3} d={:.3}", fit.params.globals.phi0, fit.params.globals.sigma0, fit.params.globals.tau, fit.params.globals.d);
        let held = evaluate_on_test(&fit.params, &train, &test, &out.tiers, ReplayOptions::default()).unwrap();
        println!("  held-out loss {held:.4}");

        let t3 = Instant::now();
        let ablation = fitter
            .fit(&initial, &FitOptions { budget, ablate_original: true, ..FitOptions::default() })
            .unwrap();
        let held_ab = evaluate_on_test(&ablation.params, &train, &test, &out.tiers, ReplayOptions::default()).unwrap();
        println!(
            "  ablation: train {:.4}, held-out {held_ab:.4} ({:?}); gap {:.4}",
            ablation.loss,
            t3.elapsed(),
            held_ab - held
        );
    }

    // Generator's own loss on the test window.
    let test_labels: BTreeSet<&str> = test.0.iter().map(|m| m.season.as_str()).collect();
    let mut gen_loss = 0.0;
    let mut count = 0;
    for (m, p) in out.matches.iter().zip(&out.truth) {
        if test_labels.contains(m.season.as_str()) {
            gen_loss -= m.outcome().probability(p).max(1e-12).ln();
            count += 1;
        }
    }
    println!("generator held-out loss {:.4} over {count}", gen_loss / count as f64);
}
