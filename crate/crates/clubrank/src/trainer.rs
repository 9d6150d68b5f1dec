//! Parameter fitting by log-loss minimization over a full replay.
//!
//! The loss is a black box of the chronological replay (the volatility
//! root-finder alone rules out clean gradients), so fitting is cyclic
//! coordinate descent: globals first, then each league's block in
//! alphabetical order, every coordinate minimized by a golden-section line
//! search on a pinned feasible interval. Constraints are re-projected after
//! every move, descent is monotone, and the best vector seen is returned.

use thiserror::Error;

use crate::dataset::{global_goal_mean, TestSet, TierTable, TrainSet};
use crate::glicko::MatchOutcome;
use crate::params::{ParamVector, HOME_GAP};
use crate::replay::{run, ReplayEngine, ReplayError, ReplayOptions, PROB_FLOOR};
use crate::skellam::OutcomeProbs;

/// A full coordinate cycle that improves the loss by less than this stops
/// the descent.
const CYCLE_TOLERANCE: f64 = 1e-5;
/// Evaluations spent per coordinate line search.
const EVALS_PER_COORDINATE: usize = 14;
const GOLDEN_RATIO: f64 = 0.618_033_988_749_894_9;

/// Frozen values realizing the "original Glicko-2" ablation: the draw term
/// is pushed to exp(d + s) ≤ e⁻²⁹ ≈ 0 and the home shift to ~0.2 display
/// points, while staying inside the feasible region.
pub const ABLATION_D: f64 = -30.0;
pub const ABLATION_H_P: f64 = 0.0;
pub const ABLATION_H: f64 = HOME_GAP;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("predictions and outcomes differ in length: {predictions} vs {outcomes}")]
    LengthMismatch {
        predictions: usize,
        outcomes: usize,
    },
    #[error("no matches to score")]
    Empty,
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Mean negative log-probability of the observed classes, with each class
/// probability floored at 1e-12.
pub fn log_loss(
    predictions: &[OutcomeProbs],
    outcomes: &[MatchOutcome],
) -> Result<f64, TrainError> {
    if predictions.len() != outcomes.len() {
        return Err(TrainError::LengthMismatch {
            predictions: predictions.len(),
            outcomes: outcomes.len(),
        });
    }
    if predictions.is_empty() {
        return Err(TrainError::Empty);
    }
    let total: f64 = predictions
        .iter()
        .zip(outcomes)
        .map(|(p, o)| -o.probability(p).max(PROB_FLOOR).ln())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Everything a fit needs besides the parameters themselves.
pub struct Fitter<'a> {
    train: &'a TrainSet,
    tiers: &'a TierTable,
    options: ReplayOptions,
    default_goal_rate: f64,
}

/// Fit settings.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Total replay evaluations allowed.
    pub budget: usize,
    /// Freeze d, h and h_p at the ablation values and skip their
    /// coordinates, fitting the original two-outcome Glicko-2.
    pub ablate_original: bool,
    /// Fit on the loss of the last `holdout_seasons` train seasons only
    /// (state is still built from the full training stream). Zero fits on
    /// the full train loss.
    pub holdout_seasons: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            budget: 500,
            ablate_original: false,
            holdout_seasons: 0,
        }
    }
}

/// Outcome of a fit: the best vector, its loss, the projected starting
/// loss, and how many replay evaluations were spent.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ParamVector,
    pub loss: f64,
    pub initial_loss: f64,
    pub evaluations: usize,
}

impl<'a> Fitter<'a> {
    pub fn new(train: &'a TrainSet, tiers: &'a TierTable) -> Result<Self, TrainError> {
        let default_goal_rate = global_goal_mean(&train.0).map_err(ReplayError::Data)?;
        Ok(Fitter {
            train,
            tiers,
            options: ReplayOptions::default(),
            default_goal_rate,
        })
    }

    pub fn with_options(mut self, options: ReplayOptions) -> Self {
        self.options = options;
        self
    }

    pub fn default_goal_rate(&self) -> f64 {
        self.default_goal_rate
    }

    /// Mean log loss of a full train replay under `params`, optionally
    /// restricted to the trailing holdout seasons.
    pub fn replay_log_loss(
        &self,
        params: &ParamVector,
        holdout_seasons: usize,
    ) -> Result<f64, TrainError> {
        let scored = scored_seasons(&self.train.0, holdout_seasons);
        let mut engine = ReplayEngine::new(
            params,
            self.tiers,
            &self.train.0,
            self.default_goal_rate,
            self.options.clone(),
        )?;
        let mut total = 0.0;
        let mut count = 0usize;
        run(&mut engine, &self.train.0, |m, probs| {
            if scored.as_ref().is_none_or(|s| s.contains(&m.season)) {
                total -= m.outcome().probability(probs).max(PROB_FLOOR).ln();
                count += 1;
            }
        })?;
        if count == 0 {
            return Err(TrainError::Empty);
        }
        Ok(total / count as f64)
    }

    /// Coordinate-descent fit. The initial vector is projected into the
    /// feasible region before the first evaluation (with a diagnostic when
    /// that moved anything).
    pub fn fit(&self, initial: &ParamVector, options: &FitOptions) -> Result<FitResult, TrainError> {
        let mut current = initial.clone();
        if options.ablate_original {
            freeze_ablation(&mut current);
        }
        if current.project() {
            log::warn!("initial parameter vector was infeasible; projected before fitting");
        }

        let mut evals = 0usize;
        let budget = options.budget.max(1);
        let mut current_loss = self.replay_log_loss(&current, options.holdout_seasons)?;
        evals += 1;
        let initial_loss = current_loss;
        let mut best = current.clone();
        let mut best_loss = current_loss;

        let coords = coordinates(&current, options.ablate_original);
        'outer: loop {
            let cycle_start = current_loss;
            for coord in &coords {
                if evals >= budget {
                    break 'outer;
                }
                let (lo, hi) = coord.bounds(&current);
                if hi - lo < 1e-9 {
                    continue;
                }
                let remaining = budget - evals;
                let searched = self.golden_section(
                    &current,
                    coord,
                    lo,
                    hi,
                    EVALS_PER_COORDINATE.min(remaining),
                    options.holdout_seasons,
                )?;
                evals += searched.evals;
                if searched.loss + 1e-12 < current_loss {
                    coord.apply(&mut current, searched.x);
                    current.project();
                    current_loss = searched.loss;
                    if current_loss < best_loss {
                        best = current.clone();
                        best_loss = current_loss;
                    }
                }
            }
            if cycle_start - current_loss < CYCLE_TOLERANCE {
                break;
            }
        }

        Ok(FitResult {
            params: best,
            loss: best_loss,
            initial_loss,
            evaluations: evals,
        })
    }

    fn golden_section(
        &self,
        base: &ParamVector,
        coord: &Coordinate,
        lo: f64,
        hi: f64,
        max_evals: usize,
        holdout: usize,
    ) -> Result<Search, TrainError> {
        let mut best = Search {
            x: coord.read(base),
            loss: f64::INFINITY,
            evals: 0,
        };
        let eval_at = |x: f64, best: &mut Search| -> Result<f64, TrainError> {
            let mut candidate = base.clone();
            coord.apply(&mut candidate, x);
            candidate.project();
            let loss = self.replay_log_loss(&candidate, holdout)?;
            best.evals += 1;
            if loss < best.loss {
                best.x = x;
                best.loss = loss;
            }
            Ok(loss)
        };

        let (mut a, mut b) = (lo, hi);
        let mut c = b - GOLDEN_RATIO * (b - a);
        let mut d = a + GOLDEN_RATIO * (b - a);
        if max_evals < 2 {
            if max_evals == 1 {
                eval_at(0.5 * (a + b), &mut best)?;
            }
            return Ok(best);
        }
        let mut fc = eval_at(c, &mut best)?;
        let mut fd = eval_at(d, &mut best)?;
        while best.evals < max_evals {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN_RATIO * (b - a);
                fc = eval_at(c, &mut best)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN_RATIO * (b - a);
                fd = eval_at(d, &mut best)?;
            }
        }
        Ok(best)
    }
}

struct Search {
    x: f64,
    loss: f64,
    evals: usize,
}

/// Seasons whose matches are scored, or None for all of them.
fn scored_seasons(
    records: &[crate::dataset::MatchRecord],
    holdout_seasons: usize,
) -> Option<std::collections::BTreeSet<String>> {
    if holdout_seasons == 0 {
        return None;
    }
    let index = crate::dataset::SeasonIndex::from_records(records);
    let ordered = index.ordered();
    let keep = ordered.len().saturating_sub(holdout_seasons);
    Some(ordered[keep..].iter().map(|s| s.to_string()).collect())
}

/// Pins the ablation values into a vector.
pub fn freeze_ablation(params: &mut ParamVector) {
    params.globals.d = ABLATION_D;
    for league in params.per_league.values_mut() {
        league.h = ABLATION_H;
        league.h_p = ABLATION_H_P;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GlobalCoord {
    Phi0,
    Sigma0,
    Tau,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LeagueCoord {
    MuInit,
    MuNew,
    MuPromoted,
    MuRelegated,
    PhiS,
    H,
    HP,
}

enum Coordinate {
    Global(GlobalCoord),
    League(String, LeagueCoord),
}

impl Coordinate {
    fn read(&self, p: &ParamVector) -> f64 {
        match self {
            Coordinate::Global(which) => match which {
                GlobalCoord::Phi0 => p.globals.phi0,
                GlobalCoord::Sigma0 => p.globals.sigma0,
                GlobalCoord::Tau => p.globals.tau,
                GlobalCoord::D => p.globals.d,
            },
            Coordinate::League(id, which) => {
                let lp = &p.per_league[id];
                match which {
                    LeagueCoord::MuInit => lp.mu_init,
                    LeagueCoord::MuNew => lp.mu_new,
                    LeagueCoord::MuPromoted => lp.mu_promoted,
                    LeagueCoord::MuRelegated => lp.mu_relegated,
                    LeagueCoord::PhiS => lp.phi_s,
                    LeagueCoord::H => lp.h,
                    LeagueCoord::HP => lp.h_p,
                }
            }
        }
    }

    fn apply(&self, p: &mut ParamVector, value: f64) {
        match self {
            Coordinate::Global(which) => match which {
                GlobalCoord::Phi0 => p.globals.phi0 = value,
                GlobalCoord::Sigma0 => p.globals.sigma0 = value,
                GlobalCoord::Tau => p.globals.tau = value,
                GlobalCoord::D => p.globals.d = value,
            },
            Coordinate::League(id, which) => {
                let lp = p.per_league.get_mut(id).expect("league exists");
                match which {
                    LeagueCoord::MuInit => lp.mu_init = value,
                    LeagueCoord::MuNew => lp.mu_new = value,
                    LeagueCoord::MuPromoted => lp.mu_promoted = value,
                    LeagueCoord::MuRelegated => lp.mu_relegated = value,
                    LeagueCoord::PhiS => lp.phi_s = value,
                    LeagueCoord::H => lp.h = value,
                    LeagueCoord::HP => lp.h_p = value,
                }
            }
        }
    }

    /// Feasible search interval, tightened by the current vector where the
    /// constraints couple parameters (h against h_p).
    fn bounds(&self, p: &ParamVector) -> (f64, f64) {
        match self {
            Coordinate::Global(which) => match which {
                GlobalCoord::Phi0 => (0.3, 3.5),
                GlobalCoord::Sigma0 => (0.005, 0.3),
                GlobalCoord::Tau => (0.05, 1.5),
                GlobalCoord::D => (-3.0, 1.0),
            },
            Coordinate::League(id, which) => {
                let lp = &p.per_league[id];
                match which {
                    LeagueCoord::MuInit => (-2.0, 2.0),
                    LeagueCoord::MuNew => (-1.5, -1e-3),
                    LeagueCoord::MuPromoted => (0.0, 0.8),
                    LeagueCoord::MuRelegated => (-0.8, 0.0),
                    LeagueCoord::PhiS => (1e-3, 1.2),
                    LeagueCoord::H => (lp.h_p + HOME_GAP, 1.2f64.max(lp.h_p + 2.0 * HOME_GAP)),
                    LeagueCoord::HP => (0.0, (lp.h - HOME_GAP).max(0.0)),
                }
            }
        }
    }
}

/// The fixed coordinate schedule: globals, then each league alphabetically.
fn coordinates(p: &ParamVector, ablate: bool) -> Vec<Coordinate> {
    let mut coords = vec![
        Coordinate::Global(GlobalCoord::Phi0),
        Coordinate::Global(GlobalCoord::Sigma0),
        Coordinate::Global(GlobalCoord::Tau),
    ];
    if !ablate {
        coords.push(Coordinate::Global(GlobalCoord::D));
    }
    for league in p.per_league.keys() {
        let league_coords: &[LeagueCoord] = if ablate {
            &[
                LeagueCoord::MuInit,
                LeagueCoord::MuNew,
                LeagueCoord::MuPromoted,
                LeagueCoord::MuRelegated,
                LeagueCoord::PhiS,
            ]
        } else {
            &[
                LeagueCoord::MuInit,
                LeagueCoord::MuNew,
                LeagueCoord::MuPromoted,
                LeagueCoord::MuRelegated,
                LeagueCoord::PhiS,
                LeagueCoord::H,
                LeagueCoord::HP,
            ]
        };
        for c in league_coords {
            coords.push(Coordinate::League(league.clone(), *c));
        }
    }
    coords
}

/// Replays the train stream to build state, then scores the test matches.
/// Train and test interleave chronologically (continental calendars
/// overlap), so the merged stream is replayed in date order and only test
/// matches contribute to the loss.
pub fn evaluate_on_test(
    params: &ParamVector,
    train: &TrainSet,
    test: &TestSet,
    tiers: &TierTable,
    options: ReplayOptions,
) -> Result<f64, TrainError> {
    if test.0.is_empty() {
        return Err(TrainError::Empty);
    }
    let default_rate = global_goal_mean(&train.0).map_err(ReplayError::Data)?;
    let test_seasons: std::collections::BTreeSet<&str> =
        test.0.iter().map(|m| m.season.as_str()).collect();
    let mut merged: Vec<crate::dataset::MatchRecord> = Vec::with_capacity(train.0.len() + test.0.len());
    merged.extend(train.0.iter().cloned());
    merged.extend(test.0.iter().cloned());
    merged.sort_by(|a, b| a.key().cmp(&b.key()));

    let mut engine = ReplayEngine::new(params, tiers, &merged, default_rate, options)?;
    let mut total = 0.0;
    let mut count = 0usize;
    run(&mut engine, &merged, |m, probs| {
        if test_seasons.contains(m.season.as_str()) {
            total -= m.outcome().probability(probs).max(PROB_FLOOR).ln();
            count += 1;
        }
    })?;
    if count == 0 {
        return Err(TrainError::Empty);
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{MatchRecord, TierTable};
    use chrono::NaiveDate;

    #[test]
    fn log_loss_perfect_predictions() {
        let preds = vec![OutcomeProbs {
            p_win: 1.0,
            p_draw: 0.0,
            p_loss: 0.0,
        }];
        let loss = log_loss(&preds, &[MatchOutcome::HomeWin]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn log_loss_uniform_thirds() {
        let preds = vec![
            OutcomeProbs {
                p_win: 1.0 / 3.0,
                p_draw: 1.0 / 3.0,
                p_loss: 1.0 / 3.0,
            };
            9
        ];
        let outcomes = vec![
            MatchOutcome::HomeWin,
            MatchOutcome::Draw,
            MatchOutcome::AwayWin,
            MatchOutcome::HomeWin,
            MatchOutcome::Draw,
            MatchOutcome::AwayWin,
            MatchOutcome::HomeWin,
            MatchOutcome::Draw,
            MatchOutcome::AwayWin,
        ];
        let loss = log_loss(&preds, &outcomes).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_loss_single_match() {
        let preds = vec![OutcomeProbs {
            p_win: 0.5,
            p_draw: 0.3,
            p_loss: 0.2,
        }];
        let loss = log_loss(&preds, &[MatchOutcome::HomeWin]).unwrap();
        assert!((loss - 0.6931).abs() < 1e-4);
    }

    #[test]
    fn log_loss_paper_style_draw() {
        let preds = vec![OutcomeProbs {
            p_win: 0.357,
            p_draw: 0.286,
            p_loss: 0.357,
        }];
        let loss = log_loss(&preds, &[MatchOutcome::Draw]).unwrap();
        // -ln 0.286, checked by direct arithmetic.
        assert!((loss - 1.2518).abs() < 1e-4);
    }

    #[test]
    fn log_loss_rejects_mismatched_lengths() {
        let preds = vec![OutcomeProbs {
            p_win: 0.5,
            p_draw: 0.3,
            p_loss: 0.2,
        }];
        assert!(matches!(
            log_loss(&preds, &[]),
            Err(TrainError::LengthMismatch { .. })
        ));
    }

    fn tiers() -> TierTable {
        TierTable::from_rows([("E.First", "Eastland", 1u8)])
    }

    /// Neutral-ground draws between level teams with c forced to 0 give
    /// exactly (1/3, 1/3, 1/3) at every match: all matches are 0-0, so the
    /// draw signal is 1 and d = -1 cancels it; the draw score 0.5 equals
    /// the expected score, so ratings never move.
    fn all_draw_corpus(n: u32) -> TrainSet {
        let records: Vec<MatchRecord> = (0..n)
            .map(|i| MatchRecord {
                date: NaiveDate::from_ymd_opt(2015, 8, 1).unwrap() + chrono::Days::new(u64::from(i)),
                season: "2015/2016".to_string(),
                competition: "E.First".to_string(),
                home_team: if i % 2 == 0 { "A" } else { "B" }.to_string(),
                away_team: if i % 2 == 0 { "B" } else { "A" }.to_string(),
                home_goals: 0,
                away_goals: 0,
                is_pandemic: false,
                is_neutral: true,
                is_forfeit: false,
                home_league: "E.First".to_string(),
                away_league: "E.First".to_string(),
            })
            .collect();
        TrainSet(records)
    }

    #[test]
    fn uniform_predictor_scores_ln_three() {
        let train = all_draw_corpus(12);
        let mut params = ParamVector::for_leagues(["E.First"]);
        params.globals.d = -1.0;
        let t = tiers();
        let fitter = Fitter::new(&train, &t).unwrap();
        let loss = fitter.replay_log_loss(&params, 0).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn replay_loss_is_reproducible() {
        let train = all_draw_corpus(8);
        let params = ParamVector::for_leagues(["E.First"]);
        let t = tiers();
        let fitter = Fitter::new(&train, &t).unwrap();
        let a = fitter.replay_log_loss(&params, 0).unwrap();
        let b = fitter.replay_log_loss(&params, 0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn budget_one_returns_projected_initial() {
        let train = all_draw_corpus(8);
        let mut initial = ParamVector::for_leagues(["E.First"]);
        initial.per_league.get_mut("E.First").unwrap().mu_new = 0.4; // infeasible
        let t = tiers();
        let fitter = Fitter::new(&train, &t).unwrap();
        let result = fitter
            .fit(
                &initial,
                &FitOptions {
                    budget: 1,
                    ..FitOptions::default()
                },
            )
            .unwrap();
        assert_eq!(result.evaluations, 1);
        let mut projected = initial.clone();
        projected.project();
        assert_eq!(result.params, projected);
    }

    #[test]
    fn fit_never_regresses() {
        // A corpus with real signal: A beats B at home repeatedly.
        let mut records = Vec::new();
        for i in 0..30u32 {
            records.push(MatchRecord {
                date: NaiveDate::from_ymd_opt(2015, 8, 1).unwrap() + chrono::Days::new(u64::from(i)),
                season: "2015/2016".to_string(),
                competition: "E.First".to_string(),
                home_team: if i % 2 == 0 { "A" } else { "B" }.to_string(),
                away_team: if i % 2 == 0 { "B" } else { "A" }.to_string(),
                home_goals: if i % 2 == 0 { 2 } else { 0 },
                away_goals: if i % 2 == 0 { 0 } else { 1 },
                is_pandemic: false,
                is_neutral: false,
                is_forfeit: false,
                home_league: "E.First".to_string(),
                away_league: "E.First".to_string(),
            });
        }
        let train = TrainSet(records);
        let initial = ParamVector::for_leagues(["E.First"]);
        let t = tiers();
        let fitter = Fitter::new(&train, &t).unwrap();
        let result = fitter
            .fit(
                &initial,
                &FitOptions {
                    budget: 120,
                    ..FitOptions::default()
                },
            )
            .unwrap();
        assert!(result.loss <= result.initial_loss);
        assert!(result.evaluations <= 120);
        assert!(result.params.validate().is_ok());
    }

    #[test]
    fn ablation_freezes_draw_and_home_terms() {
        let train = all_draw_corpus(8);
        let initial = ParamVector::for_leagues(["E.First"]);
        let t = tiers();
        let fitter = Fitter::new(&train, &t).unwrap();
        let result = fitter
            .fit(
                &initial,
                &FitOptions {
                    budget: 40,
                    ablate_original: true,
                    ..FitOptions::default()
                },
            )
            .unwrap();
        assert_eq!(result.params.globals.d, ABLATION_D);
        let lp = result.params.league("E.First").unwrap();
        assert_eq!(lp.h, ABLATION_H);
        assert_eq!(lp.h_p, ABLATION_H_P);
    }
}
