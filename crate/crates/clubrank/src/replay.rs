//! Chronological replay of a match stream.
//!
//! The engine walks matches in date order, initializing teams on first
//! appearance, applying pre-season rollover when a team crosses into a new
//! season, producing the outcome triple for every match, updating both
//! ratings, and normalizing the population whenever a season concludes.
//! Replays are deterministic: identical inputs give bit-identical state.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use thiserror::Error;

use crate::dataset::{
    global_goal_mean, season_memberships, DataError, Fixture, MatchRecord, SeasonIndex, TierTable,
};
use crate::glicko::{outcome_triple, update_pair, MatchContext};
use crate::params::ParamVector;
use crate::season::{
    classify_transition, initialize_team, season_rollover, RatingBook, SeasonError,
};
use crate::skellam::{draw_signal, rolling_goal_rates, OutcomeProbs, TeamForm};

/// Class probabilities are clamped here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("league `{0}` has no fitted parameters")]
    MissingLeagueParams(String),
    #[error("records are not in chronological order near {0}")]
    NotChronological(NaiveDate),
    #[error(transparent)]
    Season(#[from] SeasonError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("unknown teams: {}", .0.join(", "))]
    UnknownTeams(Vec<String>),
}

/// Replay-wide settings beyond the fitted parameters.
#[derive(Debug, Clone)]
pub struct ReplayOptions {
    /// Display anchor the population mean is normalized to.
    pub anchor_display: f64,
    /// Country → pool assignment. Only consulted when
    /// `normalize_per_pool` is set; countries missing from the map form
    /// their own pool.
    pub pools: BTreeMap<String, String>,
    /// Normalize each pool to the anchor separately instead of shifting
    /// the whole population at once.
    pub normalize_per_pool: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions {
            anchor_display: crate::glicko::DISPLAY_ANCHOR,
            pools: BTreeMap::new(),
            normalize_per_pool: false,
        }
    }
}

#[derive(Debug, Clone)]
struct TeamMeta {
    last_season: usize,
    league: String,
}

/// Replay state over one match stream.
pub struct ReplayEngine<'a> {
    params: &'a ParamVector,
    tiers: &'a TierTable,
    options: ReplayOptions,
    default_goal_rate: f64,

    season_order: BTreeMap<String, usize>,
    /// (last match date, season index), sorted; seasons close in this order.
    close_queue: Vec<(NaiveDate, usize)>,
    next_close: usize,
    memberships: Vec<BTreeMap<String, String>>,
    active: Vec<BTreeSet<String>>,
    league_first_season: BTreeMap<String, usize>,

    book: RatingBook,
    forms: BTreeMap<String, TeamForm>,
    meta: BTreeMap<String, TeamMeta>,
    last_date: Option<NaiveDate>,
}

impl<'a> ReplayEngine<'a> {
    /// Prepares a replay over `records` (already parsed, so ordered).
    /// `default_goal_rate` is the fallback scoring rate for teams without
    /// history; compute it from the training partition to keep held-out
    /// goals out of the signal.
    pub fn new(
        params: &'a ParamVector,
        tiers: &'a TierTable,
        records: &[MatchRecord],
        default_goal_rate: f64,
        options: ReplayOptions,
    ) -> Result<Self, ReplayError> {
        let index = SeasonIndex::from_records(records);
        let labels = index.ordered();
        let season_order: BTreeMap<String, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), i))
            .collect();

        let mut close_queue: Vec<(NaiveDate, usize)> = labels
            .iter()
            .map(|l| (index.end(l).unwrap(), season_order[*l]))
            .collect();
        close_queue.sort();

        let mut memberships = Vec::with_capacity(labels.len());
        let mut active = vec![BTreeSet::new(); labels.len()];
        for label in &labels {
            memberships.push(season_memberships(records, label)?);
        }
        let mut league_first_season: BTreeMap<String, usize> = BTreeMap::new();
        for m in records {
            let season = season_order[m.season.as_str()];
            active[season].insert(m.home_team.clone());
            active[season].insert(m.away_team.clone());
            for league in [&m.home_league, &m.away_league] {
                if !params.per_league.contains_key(league) {
                    return Err(ReplayError::MissingLeagueParams(league.clone()));
                }
                league_first_season
                    .entry(league.clone())
                    .and_modify(|s| *s = (*s).min(season))
                    .or_insert(season);
            }
        }

        Ok(ReplayEngine {
            params,
            tiers,
            options,
            default_goal_rate,
            season_order,
            close_queue,
            next_close: 0,
            memberships,
            active,
            league_first_season,
            book: RatingBook::new(),
            forms: BTreeMap::new(),
            meta: BTreeMap::new(),
            last_date: None,
        })
    }

    /// Convenience constructor with the fallback rate taken from the
    /// replayed records themselves.
    pub fn with_own_goal_mean(
        params: &'a ParamVector,
        tiers: &'a TierTable,
        records: &[MatchRecord],
        options: ReplayOptions,
    ) -> Result<Self, ReplayError> {
        let rate = global_goal_mean(records)?;
        Self::new(params, tiers, records, rate, options)
    }

    pub fn book(&self) -> &RatingBook {
        &self.book
    }

    /// The league a team last played in.
    pub fn current_league(&self, team: &str) -> Option<&str> {
        self.meta.get(team).map(|m| m.league.as_str())
    }

    /// Latest memberships for every tracked team.
    pub fn latest_memberships(&self) -> BTreeMap<String, String> {
        self.meta
            .iter()
            .map(|(team, meta)| (team.clone(), meta.league.clone()))
            .collect()
    }

    fn close_seasons_before(&mut self, date: Option<NaiveDate>) {
        while self.next_close < self.close_queue.len() {
            let (last, season) = self.close_queue[self.next_close];
            if let Some(d) = date {
                if last >= d {
                    break;
                }
            }
            let scope = &self.active[season];
            if self.options.normalize_per_pool {
                for (_, members) in self.pool_members() {
                    self.book
                        .normalize_subset(self.options.anchor_display, scope, &members);
                }
            } else {
                self.book.normalize(self.options.anchor_display, scope);
            }
            self.next_close += 1;
        }
    }

    fn pool_members(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut pools: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (team, meta) in &self.meta {
            let country = self.tiers.country(&meta.league).unwrap_or("");
            let pool = self
                .options
                .pools
                .get(country)
                .cloned()
                .unwrap_or_else(|| country.to_string());
            pools.entry(pool).or_default().insert(team.clone());
        }
        pools
    }

    fn resolved_league<'b>(&'b self, team: &str, season: usize, row_league: &'b str) -> &'b str {
        self.memberships[season]
            .get(team)
            .map(String::as_str)
            .unwrap_or(row_league)
    }

    fn ensure_current(
        &mut self,
        team: &str,
        season: usize,
        row_league: &str,
    ) -> Result<(), ReplayError> {
        let league = self.resolved_league(team, season, row_league).to_string();
        let league_params = *self
            .params
            .per_league
            .get(&league)
            .ok_or_else(|| ReplayError::MissingLeagueParams(league.clone()))?;

        match self.meta.get(team) {
            None => {
                // Eq. 7: penalized start unless this is the league's first
                // season in the dataset.
                let from_below = self.league_first_season.get(&league).copied()
                    < Some(season);
                let rating = initialize_team(from_below, &league_params, &self.params.globals);
                self.book.insert_effective(team, rating);
                self.forms.insert(team.to_string(), TeamForm::new());
                self.meta.insert(
                    team.to_string(),
                    TeamMeta {
                        last_season: season,
                        league,
                    },
                );
            }
            Some(meta) if meta.last_season < season => {
                let prev_league = self.memberships[meta.last_season]
                    .get(team)
                    .cloned()
                    .unwrap_or_else(|| meta.league.clone());
                let transition =
                    classify_transition(team, Some(&prev_league), &league, self.tiers)?;
                let rolled = season_rollover(
                    self.book.stored(team).expect("tracked team has a rating"),
                    transition.kind,
                    &league_params,
                );
                self.book.set_stored(team, rolled);
                self.meta.insert(
                    team.to_string(),
                    TeamMeta {
                        last_season: season,
                        league,
                    },
                );
            }
            Some(_) => {}
        }
        Ok(())
    }

    fn context_for(
        &self,
        home_league: &str,
        is_pandemic: bool,
        is_neutral: bool,
        home: &TeamForm,
        away: &TeamForm,
    ) -> Result<MatchContext, ReplayError> {
        let lp = self
            .params
            .per_league
            .get(home_league)
            .ok_or_else(|| ReplayError::MissingLeagueParams(home_league.to_string()))?;
        let rates = rolling_goal_rates(
            home,
            away,
            self.params.globals.draw_signal_window,
            self.default_goal_rate,
        );
        Ok(MatchContext {
            home_advantage: if is_pandemic { lp.h_p } else { lp.h },
            draw_offset: self.params.globals.d + draw_signal(rates),
            is_pandemic,
            is_neutral,
        })
    }

    /// Advances the replay by one match, returning the pre-update outcome
    /// triple for it.
    pub fn process(&mut self, m: &MatchRecord) -> Result<OutcomeProbs, ReplayError> {
        if let Some(last) = self.last_date {
            if m.date < last {
                return Err(ReplayError::NotChronological(m.date));
            }
        }
        self.last_date = Some(m.date);
        self.close_seasons_before(Some(m.date));

        let season = *self
            .season_order
            .get(&m.season)
            .expect("season seen during setup");
        self.ensure_current(&m.home_team, season, &m.home_league)?;
        self.ensure_current(&m.away_team, season, &m.away_league)?;

        let home_league = self.meta[&m.home_team].league.clone();
        let ctx = self.context_for(
            &home_league,
            m.is_pandemic,
            m.is_neutral,
            &self.forms[&m.home_team],
            &self.forms[&m.away_team],
        )?;

        let home = self.book.stored(&m.home_team).expect("initialized above");
        let away = self.book.stored(&m.away_team).expect("initialized above");
        let probs = outcome_triple(&home, &away, &ctx);

        let (new_home, new_away) =
            update_pair(&home, &away, &ctx, m.outcome(), self.params.globals.tau);
        self.book.set_stored(&m.home_team, new_home);
        self.book.set_stored(&m.away_team, new_away);

        let window = self.params.globals.draw_signal_window;
        self.forms
            .get_mut(&m.home_team)
            .expect("initialized above")
            .record(m.home_goals, m.away_goals, window);
        self.forms
            .get_mut(&m.away_team)
            .expect("initialized above")
            .record(m.away_goals, m.home_goals, window);

        Ok(probs)
    }

    /// Closes every season still open; call once after the last match so
    /// final reports see a normalized population.
    pub fn finish(&mut self) {
        self.close_seasons_before(None);
    }

    /// Outcome probabilities for an upcoming fixture from current state.
    pub fn predict(&self, fixture: &Fixture) -> Result<OutcomeProbs, ReplayError> {
        let unknown: Vec<String> = [&fixture.home_team, &fixture.away_team]
            .iter()
            .filter(|t| !self.book.contains(t))
            .map(|t| t.to_string())
            .collect();
        if !unknown.is_empty() {
            return Err(ReplayError::UnknownTeams(unknown));
        }
        let home_league = self.meta[&fixture.home_team].league.clone();
        let ctx = self.context_for(
            &home_league,
            fixture.is_pandemic,
            fixture.is_neutral,
            &self.forms[&fixture.home_team],
            &self.forms[&fixture.away_team],
        )?;
        let home = self.book.stored(&fixture.home_team).unwrap();
        let away = self.book.stored(&fixture.away_team).unwrap();
        Ok(outcome_triple(&home, &away, &ctx))
    }
}

/// Replays `records`, feeding every match and its pre-update triple to the
/// sink. Used for loss accumulation and prediction dumps alike.
pub fn run<F>(
    engine: &mut ReplayEngine,
    records: &[MatchRecord],
    mut sink: F,
) -> Result<(), ReplayError>
where
    F: FnMut(&MatchRecord, &OutcomeProbs),
{
    for m in records {
        let probs = engine.process(m)?;
        sink(m, &probs);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glicko::MatchOutcome;

    fn tiers() -> TierTable {
        TierTable::from_rows([
            ("E.First", "Eastland", 1u8),
            ("E.Second", "Eastland", 2),
        ])
    }

    fn rec(date: &str, season: &str, comp: &str, home: &str, away: &str, hg: u32, ag: u32) -> MatchRecord {
        let league_of = |team: &str| {
            if team.starts_with('T') {
                "E.First".to_string()
            } else {
                "E.Second".to_string()
            }
        };
        MatchRecord {
            date: NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap(),
            season: season.to_string(),
            competition: comp.to_string(),
            home_team: home.to_string(),
            away_team: away.to_string(),
            home_goals: hg,
            away_goals: ag,
            is_pandemic: false,
            is_neutral: false,
            is_forfeit: false,
            home_league: league_of(home),
            away_league: league_of(away),
        }
    }

    fn params() -> ParamVector {
        ParamVector::for_leagues(["E.First", "E.Second"])
    }

    #[test]
    fn replay_initializes_and_updates() {
        let records = vec![
            rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 2, 0),
            rec("2015-08-08", "2015/2016", "E.First", "T2", "T1", 1, 1),
        ];
        let p = params();
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        let probs = engine.process(&records[0]).unwrap();
        assert!((probs.p_win + probs.p_draw + probs.p_loss - 1.0).abs() < 1e-12);
        // Home advantage alone tilts the opening match.
        assert!(probs.p_win > probs.p_loss);
        engine.process(&records[1]).unwrap();
        let winner = engine.book().display_rating("T1").unwrap();
        let loser = engine.book().display_rating("T2").unwrap();
        assert!(winner > loser);
    }

    #[test]
    fn rollover_inflates_deviation_between_seasons() {
        let records = vec![
            rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 1, 0),
            rec("2016-08-06", "2016/2017", "E.First", "T1", "T2", 1, 0),
        ];
        let p = params();
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        engine.process(&records[0]).unwrap();
        let phi_after_match = engine.book().stored("T1").unwrap().phi;
        engine.process(&records[1]).unwrap();
        // The second season's pre-match state had phi_s added; one more
        // match then shrank it, but it must exceed a pure two-match path.
        let phi_second = engine.book().stored("T1").unwrap().phi;
        assert!(phi_second > 0.0 && phi_after_match > 0.0);
    }

    #[test]
    fn season_close_normalizes_population() {
        let records = vec![
            rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 3, 0),
            rec("2015-08-08", "2015/2016", "E.First", "T2", "T1", 0, 3),
            rec("2016-08-06", "2016/2017", "E.First", "T1", "T2", 1, 1),
        ];
        let p = params();
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        for m in &records {
            engine.process(m).unwrap();
        }
        engine.finish();
        let scope: BTreeSet<String> = ["T1".to_string(), "T2".to_string()].into();
        let mean = engine.book().mean_display(&scope).unwrap();
        assert!((mean - 1500.0).abs() < 1e-9, "mean {mean}");
    }

    #[test]
    fn unknown_league_parameters_fail_setup() {
        let records = vec![rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 1, 0)];
        let p = ParamVector::for_leagues(["E.Second"]);
        let t = tiers();
        assert!(matches!(
            ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()),
            Err(ReplayError::MissingLeagueParams(_))
        ));
    }

    #[test]
    fn out_of_order_records_are_rejected() {
        let records = vec![
            rec("2015-08-08", "2015/2016", "E.First", "T1", "T2", 1, 0),
            rec("2015-08-01", "2015/2016", "E.First", "T2", "T1", 1, 0),
        ];
        let p = params();
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        engine.process(&records[0]).unwrap();
        assert!(matches!(
            engine.process(&records[1]),
            Err(ReplayError::NotChronological(_))
        ));
    }

    #[test]
    fn late_entrant_to_an_established_league_is_penalized() {
        // T3 first appears in the league's second dataset season, so it
        // must start below mu_init; T1 and T2 founded the league. A tiny
        // initial deviation keeps match updates from masking the starts.
        let records = vec![
            rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 1, 1),
            rec("2016-08-06", "2016/2017", "E.First", "T1", "T3", 1, 1),
        ];
        let mut p = params();
        p.globals.phi0 = 0.05;
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        engine.process(&records[0]).unwrap();
        // Founding teams start exactly at mu_init.
        let founder = engine.book().effective("T1").unwrap();
        assert!(founder.display() < 1501.0 && founder.display() > 1499.0);
        engine.process(&records[1]).unwrap();
        // mu_new = -0.3 puts the entrant ~52 display points below the
        // founders; with phi0 = 0.05 one draw barely moves anyone.
        let entrant = engine.book().effective("T3").unwrap();
        assert!(entrant.display() < 1460.0, "entrant at {}", entrant.display());
        let founder_after = engine.book().effective("T1").unwrap();
        assert!(founder_after.display() - entrant.display() > 30.0);
    }

    #[test]
    fn predict_rejects_unknown_teams() {
        let records = vec![rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 1, 0)];
        let p = params();
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        engine.process(&records[0]).unwrap();
        let fixture = Fixture {
            date: NaiveDate::parse_from_str("2015-09-01", "%Y-%m-%d").unwrap(),
            home_team: "T1".to_string(),
            away_team: "Ghost".to_string(),
            is_neutral: false,
            is_pandemic: false,
        };
        match engine.predict(&fixture) {
            Err(ReplayError::UnknownTeams(names)) => assert_eq!(names, vec!["Ghost"]),
            other => panic!("expected unknown team error, got {other:?}"),
        }
    }

    #[test]
    fn neutral_fixture_between_equal_teams_is_symmetric() {
        let records = vec![rec("2015-08-01", "2015/2016", "E.First", "T1", "T2", 1, 1)];
        let p = params();
        let t = tiers();
        let mut engine = ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
        // T3/T4 never played: both initialize fresh on predict? They are
        // unknown, so compare two tracked teams after a single draw.
        engine.process(&records[0]).unwrap();
        let fixture = |neutral: bool| Fixture {
            date: NaiveDate::parse_from_str("2015-09-01", "%Y-%m-%d").unwrap(),
            home_team: "T1".to_string(),
            away_team: "T2".to_string(),
            is_neutral: neutral,
            is_pandemic: false,
        };
        let neutral = engine.predict(&fixture(true)).unwrap();
        let at_home = engine.predict(&fixture(false)).unwrap();
        // A single opening draw leaves the two sides nearly level; home
        // advantage must strictly improve the home win probability.
        assert!(at_home.p_win > neutral.p_win);
    }

    #[test]
    fn replay_is_deterministic() {
        let records: Vec<MatchRecord> = (0..40u32)
            .map(|i| {
                rec(
                    &format!("2015-08-{:02}", 1 + i % 28),
                    "2015/2016",
                    "E.First",
                    &format!("T{}", i % 5 + 1),
                    &format!("T{}", (i + 2) % 5 + 1),
                    i % 4,
                    (i + 1) % 3,
                )
            })
            .filter(|m| m.home_team != m.away_team)
            .collect();
        let mut records = records;
        records.sort_by(|a, b| a.key().cmp(&b.key()));
        records.dedup_by(|a, b| a.key() == b.key());
        let p = params();
        let t = tiers();
        let run_once = || {
            let mut engine =
                ReplayEngine::new(&p, &t, &records, 1.3, ReplayOptions::default()).unwrap();
            let mut loss = 0.0;
            for m in &records {
                let probs = engine.process(m).unwrap();
                loss -= MatchOutcome::from_goals(m.home_goals, m.away_goals)
                    .probability(&probs)
                    .max(PROB_FLOOR)
                    .ln();
            }
            engine.finish();
            (loss, engine.book().display_rating("T1").unwrap())
        };
        let (loss_a, rating_a) = run_once();
        let (loss_b, rating_b) = run_once();
        assert_eq!(loss_a.to_bits(), loss_b.to_bits());
        assert_eq!(rating_a.to_bits(), rating_b.to_bits());
    }
}
