//! Seed-controlled synthetic corpora.
//!
//! Real match data cannot ship with the repository, so tests and the
//! acceptance experiments run against corpora sampled from a known inverse
//! model: latent team strengths evolve across seasons with promotion and
//! relegation, and every match outcome is drawn from the same three-way
//! expectation the engine fits. The generator's own per-match probabilities
//! are retained, making it an oracle for achievable log loss.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{MatchRecord, TierTable};
use crate::skellam::OutcomeProbs;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub countries: usize,
    pub teams_per_league: usize,
    pub seasons: usize,
    /// Single round robin by default; double plays every pairing twice.
    pub double_round_robin: bool,
    /// Teams swapped between the two tiers of a country per boundary.
    pub swap: usize,
    /// True home advantage on the internal scale.
    pub h_star: f64,
    /// True pandemic home advantage.
    pub hp_star: f64,
    /// True draw offset (constant; the generator does not use a per-match
    /// draw signal).
    pub c_star: f64,
    /// Add a 16-team national cup (top 8 of each tier) per season.
    pub with_cup: bool,
    /// Matches dated inside this window carry the pandemic flag and are
    /// sampled with `hp_star`.
    pub pandemic_window: Option<(NaiveDate, NaiveDate)>,
    /// New below-coverage teams entering each country's second tier per
    /// boundary, replacing its weakest teams.
    pub fresh_entrants: usize,
    /// Standard deviation of every team's between-season strength walk.
    pub strength_drift: f64,
    /// Strength gained on promotion and lost on relegation.
    pub promotion_boost: f64,
    pub first_year: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            countries: 2,
            teams_per_league: 20,
            seasons: 6,
            double_round_robin: false,
            swap: 2,
            h_star: 0.25,
            hp_star: 0.08,
            c_star: -0.2,
            with_cup: true,
            pandemic_window: None,
            fresh_entrants: 0,
            strength_drift: 0.02,
            promotion_boost: 0.12,
            first_year: 2015,
        }
    }
}

impl SynthConfig {
    /// Paper-scale corpus: ~370k matches across 24 countries and 20
    /// seasons, double round robin plus cups.
    pub fn paper_scale(seed: u64) -> Self {
        SynthConfig {
            seed,
            countries: 24,
            teams_per_league: 20,
            seasons: 20,
            double_round_robin: true,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug)]
pub struct SynthOutput {
    /// Sorted like parser output: by (date, home team, away team).
    pub matches: Vec<MatchRecord>,
    /// Generator probabilities, aligned with `matches`.
    pub truth: Vec<OutcomeProbs>,
    pub tiers: TierTable,
}

impl SynthOutput {
    /// Truth probabilities as CSV, row-aligned with the match CSV.
    pub fn truth_csv(&self) -> String {
        let mut out = String::from("p_home_win,p_draw,p_away_win\n");
        for p in &self.truth {
            out.push_str(&format!("{},{},{}\n", p.p_win, p.p_draw, p.p_loss));
        }
        out
    }
}

const COUNTRY_NAMES: [&str; 12] = [
    "Eastland", "Sudovia", "Norvia", "Westmark", "Arelia", "Bravena", "Costara", "Drelon",
    "Ferrovia", "Galdia", "Hestia", "Istria",
];

fn country_name(i: usize) -> String {
    COUNTRY_NAMES
        .get(i)
        .map(|n| n.to_string())
        .unwrap_or_else(|| format!("Land{i:02}"))
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    // Box-Muller; u clamped away from zero for the log.
    let u = uniform01(rng).max(1e-12);
    let v = uniform01(rng);
    mean + sd * (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u32 {
    let limit = (-lambda).exp();
    let mut k = 0u32;
    let mut p = 1.0;
    loop {
        p *= uniform01(rng);
        if p <= limit || k > 30 {
            return k;
        }
        k += 1;
    }
}

fn triple(x: f64, c: f64) -> OutcomeProbs {
    let m = x.max(c).max(0.0);
    let ew = (x - m).exp();
    let ed = (c - m).exp();
    let el = (-m).exp();
    let z = ew + ed + el;
    OutcomeProbs {
        p_win: ew / z,
        p_draw: ed / z,
        p_loss: el / z,
    }
}

#[derive(Debug, Clone)]
struct Team {
    name: String,
    strength: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    points: u32,
    goal_diff: i64,
    scored: u32,
}

struct Country {
    name: String,
    /// European-style split-year calendar when true, calendar-year
    /// otherwise; the corpus mixes both label conventions.
    split_year: bool,
    tier1: Vec<Team>,
    tier2: Vec<Team>,
    fresh_counter: usize,
}

impl Country {
    fn season_label(&self, year: i32) -> String {
        if self.split_year {
            format!("{}/{}", year, year + 1)
        } else {
            // Calendar-year seasons start the following February.
            format!("{}", year + 1)
        }
    }

    fn season_start(&self, year: i32) -> NaiveDate {
        if self.split_year {
            NaiveDate::from_ymd_opt(year, 8, 10).unwrap()
        } else {
            NaiveDate::from_ymd_opt(year + 1, 2, 10).unwrap()
        }
    }
}

struct Generator {
    cfg: SynthConfig,
    rng: ChaCha8Rng,
    countries: Vec<Country>,
    rows: Vec<(MatchRecord, OutcomeProbs)>,
}

pub fn generate(cfg: &SynthConfig) -> SynthOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut countries = Vec::new();
    for ci in 0..cfg.countries {
        let name = country_name(ci);
        let make_teams = |rng: &mut ChaCha8Rng, mean: f64| -> Vec<Team> {
            (0..cfg.teams_per_league)
                .map(|ti| Team {
                    name: format!("{name}-{:02}", ti + 1 + if mean < 0.0 { cfg.teams_per_league } else { 0 }),
                    strength: normal(rng, mean, 0.3),
                })
                .collect()
        };
        let tier1 = make_teams(&mut rng, 0.6);
        let tier2 = make_teams(&mut rng, -0.2);
        countries.push(Country {
            name,
            split_year: ci % 2 == 0,
            tier1,
            tier2,
            fresh_counter: 0,
        });
    }

    let mut generator = Generator {
        cfg: cfg.clone(),
        rng,
        countries,
        rows: Vec::new(),
    };
    for season in 0..cfg.seasons {
        let year = cfg.first_year + season as i32;
        generator.play_season(year);
        if season + 1 < cfg.seasons {
            generator.season_boundary();
        }
    }

    let tiers = TierTable::from_rows(generator.countries.iter().flat_map(|c| {
        [
            (format!("{}.First", c.name), c.name.clone(), 1u8),
            (format!("{}.Second", c.name), c.name.clone(), 2u8),
        ]
    }));

    let mut rows = generator.rows;
    rows.sort_by(|(a, _), (b, _)| a.key().cmp(&b.key()));
    let (matches, truth) = rows.into_iter().unzip();
    SynthOutput {
        matches,
        truth,
        tiers,
    }
}

impl Generator {
    fn play_season(&mut self, year: i32) {
        for ci in 0..self.countries.len() {
            let label = self.countries[ci].season_label(year);
            let start = self.countries[ci].season_start(year);
            for tier in [1u8, 2] {
                self.play_league(ci, tier, &label, start);
            }
            if self.cfg.with_cup {
                self.play_cup(ci, &label, start);
            }
        }
    }

    fn league_id(&self, ci: usize, tier: u8) -> String {
        let c = &self.countries[ci];
        if tier == 1 {
            format!("{}.First", c.name)
        } else {
            format!("{}.Second", c.name)
        }
    }

    fn play_league(&mut self, ci: usize, tier: u8, label: &str, start: NaiveDate) {
        let league = self.league_id(ci, tier);
        let teams: Vec<Team> = if tier == 1 {
            self.countries[ci].tier1.clone()
        } else {
            self.countries[ci].tier2.clone()
        };
        let n = teams.len();
        // Circle method: fix one slot, rotate the rest.
        let mut order: Vec<usize> = (0..n).collect();
        let rounds = n - 1;
        let legs = if self.cfg.double_round_robin { 2 } else { 1 };
        let mut round_no = 0u64;
        for leg in 0..legs {
            for _ in 0..rounds {
                let date = start + Days::new(7 * round_no);
                for i in 0..n / 2 {
                    let (a, b) = (order[i], order[n - 1 - i]);
                    // Alternate slots between rounds so home games spread out.
                    let (hi, ai) = if (round_no + i as u64 + leg) % 2 == 0 {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    self.play_match(
                        &teams[hi].name,
                        &teams[ai].name,
                        ci,
                        date,
                        label,
                        &league,
                        &league,
                        &league,
                        false,
                    );
                }
                order[1..].rotate_right(1);
                round_no += 1;
            }
        }
    }

    fn play_cup(&mut self, ci: usize, label: &str, start: NaiveDate) {
        // Top eight of each tier by latent strength enter a knockout cup;
        // the final is on neutral ground. A drawn tie is recorded as a
        // draw and the advancing side decided by lot, mirroring shootouts.
        let mut entrants: Vec<(String, u8)> = Vec::new();
        for (tier, list) in [(1u8, &self.countries[ci].tier1), (2u8, &self.countries[ci].tier2)] {
            let mut sorted = list.clone();
            sorted.sort_by(|a, b| b.strength.partial_cmp(&a.strength).unwrap());
            entrants.extend(sorted.iter().take(8).map(|t| (t.name.clone(), tier)));
        }
        entrants.sort();
        // Knockout brackets need a power-of-two field; tiny test leagues
        // would otherwise leave a bye.
        let mut field_size = 1;
        while field_size * 2 <= entrants.len() {
            field_size *= 2;
        }
        entrants.truncate(field_size);
        let competition = format!("{}.Cup", self.countries[ci].name);
        // Offsets avoid the weekly league grid so no (date, pairing) can
        // repeat a league fixture.
        let round_dates = [41u64, 69, 97, 125];
        let mut field = entrants;
        for (round, offset) in round_dates.iter().enumerate() {
            let date = start + Days::new(*offset);
            let is_final = field.len() == 2;
            let mut next = Vec::new();
            for pair in field.chunks(2) {
                let (home, away) = (&pair[0], &pair[1]);
                let leagues = (
                    self.league_id(ci, home.1),
                    self.league_id(ci, away.1),
                );
                let outcome = self.play_match(
                    &home.0,
                    &away.0,
                    ci,
                    date + Days::new(round as u64),
                    label,
                    &competition,
                    &leagues.0,
                    &leagues.1,
                    is_final,
                );
                let advance_home = match outcome {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => uniform01(&mut self.rng) < 0.5,
                };
                next.push(if advance_home {
                    pair[0].clone()
                } else {
                    pair[1].clone()
                });
            }
            field = next;
            if field.len() == 1 {
                break;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn play_match(
        &mut self,
        home: &str,
        away: &str,
        ci: usize,
        date: NaiveDate,
        season: &str,
        competition: &str,
        home_league: &str,
        away_league: &str,
        is_neutral: bool,
    ) -> std::cmp::Ordering {
        let is_pandemic = self
            .cfg
            .pandemic_window
            .is_some_and(|(from, to)| date >= from && date <= to);
        let strength = |name: &str| -> f64 {
            let c = &self.countries[ci];
            c.tier1
                .iter()
                .chain(c.tier2.iter())
                .find(|t| t.name == name)
                .expect("team exists")
                .strength
        };
        let shift = if is_neutral {
            0.0
        } else if is_pandemic {
            self.cfg.hp_star
        } else {
            self.cfg.h_star
        };
        let x = strength(home) + shift - strength(away);
        let probs = triple(x, self.cfg.c_star);

        let u = uniform01(&mut self.rng);
        let ordering = if u < probs.p_win {
            std::cmp::Ordering::Greater
        } else if u < probs.p_win + probs.p_draw {
            std::cmp::Ordering::Equal
        } else {
            std::cmp::Ordering::Less
        };

        let lambda_home = 1.35 * (0.25 * x).exp();
        let lambda_away = 1.35 * (-0.25 * x).exp();
        let mut goals = None;
        for _ in 0..64 {
            let gh = poisson(&mut self.rng, lambda_home);
            let ga = poisson(&mut self.rng, lambda_away);
            if gh.cmp(&ga) == ordering {
                goals = Some((gh, ga));
                break;
            }
        }
        let (home_goals, away_goals) = goals.unwrap_or(match ordering {
            std::cmp::Ordering::Greater => (1, 0),
            std::cmp::Ordering::Equal => (1, 1),
            std::cmp::Ordering::Less => (0, 1),
        });

        self.rows.push((
            MatchRecord {
                date,
                season: season.to_string(),
                competition: competition.to_string(),
                home_team: home.to_string(),
                away_team: away.to_string(),
                home_goals,
                away_goals,
                is_pandemic,
                is_neutral,
                is_forfeit: false,
                home_league: home_league.to_string(),
                away_league: away_league.to_string(),
            },
            probs,
        ));
        ordering
    }

    fn season_boundary(&mut self) {
        // Standings decide promotion and relegation; strengths then drift,
        // with promoted sides gaining budget and relegated sides losing it.
        let season_rows = &self.rows;
        for ci in 0..self.countries.len() {
            for tier in [1u8, 2] {
                let league = self.league_id(ci, tier);
                let teams: Vec<String> = if tier == 1 {
                    self.countries[ci].tier1.iter().map(|t| t.name.clone()).collect()
                } else {
                    self.countries[ci].tier2.iter().map(|t| t.name.clone()).collect()
                };
                let label = latest_label(season_rows, &league);
                let mut tally: BTreeMap<String, Tally> = teams
                    .iter()
                    .map(|t| (t.clone(), Tally::default()))
                    .collect();
                for (m, _) in season_rows {
                    if m.competition != league || Some(m.season.as_str()) != label.as_deref() {
                        continue;
                    }
                    let diff = i64::from(m.home_goals) - i64::from(m.away_goals);
                    if let Some(t) = tally.get_mut(&m.home_team) {
                        t.points += match diff.cmp(&0) {
                            std::cmp::Ordering::Greater => 3,
                            std::cmp::Ordering::Equal => 1,
                            std::cmp::Ordering::Less => 0,
                        };
                        t.goal_diff += diff;
                        t.scored += m.home_goals;
                    }
                    if let Some(t) = tally.get_mut(&m.away_team) {
                        t.points += match diff.cmp(&0) {
                            std::cmp::Ordering::Less => 3,
                            std::cmp::Ordering::Equal => 1,
                            std::cmp::Ordering::Greater => 0,
                        };
                        t.goal_diff -= diff;
                        t.scored += m.away_goals;
                    }
                }
                let mut standing: Vec<String> = teams.clone();
                standing.sort_by(|a, b| {
                    let (ta, tb) = (&tally[a], &tally[b]);
                    tb.points
                        .cmp(&ta.points)
                        .then(tb.goal_diff.cmp(&ta.goal_diff))
                        .then(tb.scored.cmp(&ta.scored))
                        .then(a.cmp(b))
                });
                if tier == 1 {
                    self.countries[ci].tier1 = reorder(&self.countries[ci].tier1, &standing);
                } else {
                    self.countries[ci].tier2 = reorder(&self.countries[ci].tier2, &standing);
                }
            }

            let swap = self.cfg.swap.min(self.countries[ci].tier1.len());
            let relegated: Vec<Team> = {
                let t1 = &mut self.countries[ci].tier1;
                t1.split_off(t1.len() - swap)
            };
            let promoted: Vec<Team> = self.countries[ci].tier2.drain(..swap).collect();
            for mut team in promoted {
                team.strength += self.cfg.promotion_boost;
                self.countries[ci].tier1.push(team);
            }
            for mut team in relegated {
                team.strength -= self.cfg.promotion_boost;
                self.countries[ci].tier2.insert(0, team);
            }

            if self.cfg.fresh_entrants > 0 {
                let n = self.cfg.fresh_entrants.min(self.countries[ci].tier2.len());
                let len = self.countries[ci].tier2.len();
                self.countries[ci].tier2.truncate(len - n);
                for _ in 0..n {
                    self.countries[ci].fresh_counter += 1;
                    let fresh_id = self.countries[ci].fresh_counter;
                    let name = format!("{}-N{:02}", self.countries[ci].name, fresh_id);
                    let strength = normal(&mut self.rng, -0.6, 0.2);
                    self.countries[ci].tier2.push(Team { name, strength });
                }
            }

            let drift = self.cfg.strength_drift;
            let country = &mut self.countries[ci];
            for team in country.tier1.iter_mut().chain(country.tier2.iter_mut()) {
                team.strength += normal(&mut self.rng, 0.0, drift);
            }
        }
    }
}

fn latest_label(rows: &[(MatchRecord, OutcomeProbs)], league: &str) -> Option<String> {
    rows.iter()
        .rev()
        .find(|(m, _)| m.competition == league)
        .map(|(m, _)| m.season.clone())
}

fn reorder(teams: &[Team], order: &[String]) -> Vec<Team> {
    order
        .iter()
        .map(|name| {
            teams
                .iter()
                .find(|t| &t.name == name)
                .expect("standing covers the league")
                .clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_matches, serialize_matches};

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            countries: 1,
            teams_per_league: 6,
            seasons: 2,
            swap: 1,
            ..SynthConfig::default()
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.matches, b.matches);
        assert_eq!(a.truth_csv(), b.truth_csv());
    }

    #[test]
    fn seeds_differ() {
        let base = SynthConfig {
            countries: 1,
            teams_per_league: 6,
            seasons: 1,
            with_cup: false,
            ..SynthConfig::default()
        };
        let other = SynthConfig { seed: 8, ..base.clone() };
        assert_ne!(generate(&base).matches, generate(&other).matches);
    }

    #[test]
    fn output_parses_cleanly() {
        let cfg = SynthConfig {
            countries: 2,
            teams_per_league: 6,
            seasons: 2,
            swap: 1,
            fresh_entrants: 1,
            ..SynthConfig::default()
        };
        let out = generate(&cfg);
        let text = serialize_matches(&out.matches);
        let (parsed, report) = parse_matches(text.as_bytes(), &out.tiers).unwrap();
        assert_eq!(parsed.len(), out.matches.len());
        assert_eq!(report.dropped(), 0);
        assert_eq!(parsed, out.matches);
    }

    #[test]
    fn match_count_matches_schedule() {
        let cfg = SynthConfig {
            countries: 2,
            teams_per_league: 20,
            seasons: 6,
            with_cup: true,
            ..SynthConfig::default()
        };
        let out = generate(&cfg);
        // Single round robin: 20 choose 2 = 190 per league per season, two
        // leagues per country, plus a 15-match cup per country per season.
        let expected = 2 * 6 * (2 * 190 + 15);
        assert_eq!(out.matches.len(), expected);
        assert_eq!(out.truth.len(), expected);
    }

    #[test]
    fn truth_probabilities_are_consistent() {
        let cfg = SynthConfig {
            countries: 1,
            teams_per_league: 6,
            seasons: 1,
            with_cup: false,
            ..SynthConfig::default()
        };
        let out = generate(&cfg);
        for p in &out.truth {
            assert!((p.p_win + p.p_draw + p.p_loss - 1.0).abs() < 1e-12);
        }
        // Home advantage shows up in the sampled outcome frequencies.
        let home_wins = out
            .matches
            .iter()
            .filter(|m| m.home_goals > m.away_goals)
            .count();
        let away_wins = out
            .matches
            .iter()
            .filter(|m| m.home_goals < m.away_goals)
            .count();
        assert!(home_wins > away_wins);
    }

    #[test]
    fn labels_mix_calendar_conventions() {
        let cfg = SynthConfig {
            countries: 2,
            teams_per_league: 6,
            seasons: 1,
            with_cup: false,
            ..SynthConfig::default()
        };
        let out = generate(&cfg);
        let labels: std::collections::BTreeSet<&str> =
            out.matches.iter().map(|m| m.season.as_str()).collect();
        assert!(labels.contains("2015/2016"));
        assert!(labels.contains("2016"));
    }

    #[test]
    fn goals_match_outcomes() {
        let cfg = SynthConfig {
            countries: 1,
            teams_per_league: 8,
            seasons: 2,
            swap: 1,
            ..SynthConfig::default()
        };
        let out = generate(&cfg);
        for (m, p) in out.matches.iter().zip(&out.truth) {
            // The recorded score always agrees with the sampled outcome
            // class, whose probability must be positive under the truth.
            let prob = m.outcome().probability(p);
            assert!(prob > 0.0);
        }
    }
}
