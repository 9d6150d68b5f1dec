//! Match corpus ingestion: parsing, validation, ordering and splitting.
//!
//! The corpus is a plain CSV of played matches plus a tier table mapping
//! league ids to country and tier number. Forfeits and matches involving
//! teams below the second tier are dropped up front; everything downstream
//! sees a chronologically ordered, validated record list.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use chrono::NaiveDate;
use thiserror::Error;

use crate::glicko::MatchOutcome;

pub const MATCHES_HEADER: [&str; 12] = [
    "date",
    "season",
    "competition",
    "home_team",
    "away_team",
    "home_goals",
    "away_goals",
    "is_pandemic",
    "is_neutral",
    "is_forfeit",
    "home_league",
    "away_league",
];

pub const TIERS_HEADER: [&str; 3] = ["league", "country", "tier"];

pub const FIXTURES_HEADER: [&str; 5] = [
    "date",
    "home_team",
    "away_team",
    "is_neutral",
    "is_pandemic",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: unknown league `{league}` (not in the tier table)")]
    UnknownLeague { line: u64, league: String },
    #[error("duplicate match on lines {first_line} and {line}: {date} {home} vs {away}")]
    DuplicateMatch {
        first_line: u64,
        line: u64,
        date: NaiveDate,
        home: String,
        away: String,
    },
    #[error("expected header `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },
    #[error("team `{team}` has domestic matches in both `{a}` and `{b}` in season {season}")]
    TwoLeagues {
        team: String,
        season: String,
        a: String,
        b: String,
    },
    #[error("season sets overlap on {0}")]
    OverlappingSplit(String),
    #[error("test season {test} does not start after train season {train}")]
    UnorderedSplit { train: String, test: String },
    #[error("no matches to compute a goal mean from")]
    EmptyCorpus,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// One played match as stored in the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub date: NaiveDate,
    pub season: String,
    pub competition: String,
    pub home_team: String,
    pub away_team: String,
    pub home_goals: u32,
    pub away_goals: u32,
    pub is_pandemic: bool,
    pub is_neutral: bool,
    pub is_forfeit: bool,
    pub home_league: String,
    pub away_league: String,
}

impl MatchRecord {
    /// Natural identity of a match; duplicates are a data fault.
    pub fn key(&self) -> (NaiveDate, &str, &str) {
        (self.date, &self.home_team, &self.away_team)
    }

    pub fn outcome(&self) -> MatchOutcome {
        MatchOutcome::from_goals(self.home_goals, self.away_goals)
    }

    /// Domestic league matches (competition is the league itself) define
    /// season membership; cups and internationals do not.
    pub fn is_domestic_league(&self) -> bool {
        self.competition == self.home_league && self.competition == self.away_league
    }
}

/// League directory: league id → (country, tier number).
#[derive(Debug, Clone, Default)]
pub struct TierTable {
    leagues: BTreeMap<String, (String, u8)>,
}

impl TierTable {
    pub fn from_rows<I, L, C>(rows: I) -> Self
    where
        I: IntoIterator<Item = (L, C, u8)>,
        L: Into<String>,
        C: Into<String>,
    {
        TierTable {
            leagues: rows
                .into_iter()
                .map(|(l, c, t)| (l.into(), (c.into(), t)))
                .collect(),
        }
    }

    pub fn parse<R: io::Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut rows = rdr.records();
        let header = match rows.next() {
            Some(record) => record?,
            None => {
                return Err(DataError::BadHeader {
                    expected: TIERS_HEADER.join(","),
                    got: String::new(),
                })
            }
        };
        check_header(&header, &TIERS_HEADER)?;
        let mut leagues = BTreeMap::new();
        for record in rows {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != 3 {
                return Err(DataError::MalformedRow {
                    line,
                    reason: format!("expected 3 fields, got {}", record.len()),
                });
            }
            let league = record[0].trim().to_string();
            let country = record[1].trim().to_string();
            if league.is_empty() || country.is_empty() {
                return Err(DataError::MalformedRow {
                    line,
                    reason: "league and country must be nonempty".into(),
                });
            }
            let tier: u8 = record[2].trim().parse().map_err(|_| DataError::MalformedRow {
                line,
                reason: format!("tier `{}` is not a small integer", &record[2]),
            })?;
            if tier == 0 {
                return Err(DataError::MalformedRow {
                    line,
                    reason: "tier numbers start at 1".into(),
                });
            }
            leagues.insert(league, (country, tier));
        }
        Ok(TierTable { leagues })
    }

    pub fn contains(&self, league: &str) -> bool {
        self.leagues.contains_key(league)
    }

    pub fn country(&self, league: &str) -> Option<&str> {
        self.leagues.get(league).map(|(c, _)| c.as_str())
    }

    pub fn tier(&self, league: &str) -> Option<u8> {
        self.leagues.get(league).map(|&(_, t)| t)
    }

    /// Leagues inside dataset coverage (tier 1 and 2), sorted.
    pub fn covered_leagues(&self) -> Vec<&str> {
        self.leagues
            .iter()
            .filter(|(_, &(_, t))| t <= 2)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = TIERS_HEADER.join(",");
        out.push('\n');
        for (league, (country, tier)) in &self.leagues {
            out.push_str(&format!("{league},{country},{tier}\n"));
        }
        out
    }
}

/// Counts of rows kept and dropped during parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub kept: usize,
    pub dropped_forfeit: usize,
    pub dropped_below_tier: usize,
}

impl ParseReport {
    pub fn dropped(&self) -> usize {
        self.dropped_forfeit + self.dropped_below_tier
    }
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<(), DataError> {
    let got: Vec<&str> = record.iter().map(str::trim).collect();
    if got != expected {
        return Err(DataError::BadHeader {
            expected: expected.join(","),
            got: got.join(","),
        });
    }
    Ok(())
}

fn parse_bool(s: &str, line: u64, field: &str) -> Result<bool, DataError> {
    match s.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(DataError::MalformedRow {
            line,
            reason: format!("{field} must be `true` or `false`, got `{other}`"),
        }),
    }
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate, DataError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| DataError::MalformedRow {
        line,
        reason: format!("date `{s}` is not ISO-8601 (YYYY-MM-DD)"),
    })
}

/// Parses, validates and orders the match corpus.
///
/// Forfeit rows and rows involving a league below the second tier are
/// dropped and counted; malformed rows, unknown leagues and duplicate
/// matches abort with the offending line number. The result is sorted by
/// (date, home team, away team).
pub fn parse_matches<R: io::Read>(
    reader: R,
    tiers: &TierTable,
) -> Result<(Vec<MatchRecord>, ParseReport), DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(record) => record?,
        None => {
            return Err(DataError::BadHeader {
                expected: MATCHES_HEADER.join(","),
                got: String::new(),
            })
        }
    };
    check_header(&header, &MATCHES_HEADER)?;

    let mut report = ParseReport::default();
    let mut parsed: Vec<(u64, MatchRecord)> = Vec::new();
    for record in rows {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != MATCHES_HEADER.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!(
                    "expected {} fields, got {}",
                    MATCHES_HEADER.len(),
                    record.len()
                ),
            });
        }
        let goals = |idx: usize, field: &str| -> Result<u32, DataError> {
            record[idx].trim().parse().map_err(|_| DataError::MalformedRow {
                line,
                reason: format!("{field} `{}` is not a nonnegative integer", &record[idx]),
            })
        };
        let m = MatchRecord {
            date: parse_date(&record[0], line)?,
            season: record[1].trim().to_string(),
            competition: record[2].trim().to_string(),
            home_team: record[3].trim().to_string(),
            away_team: record[4].trim().to_string(),
            home_goals: goals(5, "home_goals")?,
            away_goals: goals(6, "away_goals")?,
            is_pandemic: parse_bool(&record[7], line, "is_pandemic")?,
            is_neutral: parse_bool(&record[8], line, "is_neutral")?,
            is_forfeit: parse_bool(&record[9], line, "is_forfeit")?,
            home_league: record[10].trim().to_string(),
            away_league: record[11].trim().to_string(),
        };
        if m.season.is_empty() || m.home_team.is_empty() || m.away_team.is_empty() {
            return Err(DataError::MalformedRow {
                line,
                reason: "season and team names must be nonempty".into(),
            });
        }
        if m.home_team == m.away_team {
            return Err(DataError::MalformedRow {
                line,
                reason: format!("a team cannot play itself (`{}`)", m.home_team),
            });
        }
        let mut below_tier = false;
        for league in [&m.home_league, &m.away_league] {
            match tiers.tier(league) {
                None => {
                    return Err(DataError::UnknownLeague {
                        line,
                        league: league.clone(),
                    })
                }
                Some(t) if t > 2 => below_tier = true,
                Some(_) => {}
            }
        }
        if m.is_forfeit {
            report.dropped_forfeit += 1;
            continue;
        }
        if below_tier {
            report.dropped_below_tier += 1;
            continue;
        }
        parsed.push((line, m));
    }

    parsed.sort_by(|(_, a), (_, b)| a.key().cmp(&b.key()));
    for pair in parsed.windows(2) {
        if pair[0].1.key() == pair[1].1.key() {
            return Err(DataError::DuplicateMatch {
                first_line: pair[0].0,
                line: pair[1].0,
                date: pair[0].1.date,
                home: pair[0].1.home_team.clone(),
                away: pair[0].1.away_team.clone(),
            });
        }
    }
    report.kept = parsed.len();
    Ok((parsed.into_iter().map(|(_, m)| m).collect(), report))
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes records back in the corpus schema; inverse of [`parse_matches`]
/// for valid record lists.
pub fn serialize_matches(records: &[MatchRecord]) -> String {
    let mut out = MATCHES_HEADER.join(",");
    out.push('\n');
    for m in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            m.date.format("%Y-%m-%d"),
            csv_field(&m.season),
            csv_field(&m.competition),
            csv_field(&m.home_team),
            csv_field(&m.away_team),
            m.home_goals,
            m.away_goals,
            m.is_pandemic,
            m.is_neutral,
            m.is_forfeit,
            csv_field(&m.home_league),
            csv_field(&m.away_league),
        ));
    }
    out
}

/// An upcoming match to predict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub date: NaiveDate,
    pub home_team: String,
    pub away_team: String,
    pub is_neutral: bool,
    pub is_pandemic: bool,
}

pub fn parse_fixtures<R: io::Read>(reader: R) -> Result<Vec<Fixture>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(record) => record?,
        None => {
            return Err(DataError::BadHeader {
                expected: FIXTURES_HEADER.join(","),
                got: String::new(),
            })
        }
    };
    check_header(&header, &FIXTURES_HEADER)?;
    let mut fixtures = Vec::new();
    for record in rows {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != FIXTURES_HEADER.len() {
            return Err(DataError::MalformedRow {
                line,
                reason: format!(
                    "expected {} fields, got {}",
                    FIXTURES_HEADER.len(),
                    record.len()
                ),
            });
        }
        let f = Fixture {
            date: parse_date(&record[0], line)?,
            home_team: record[1].trim().to_string(),
            away_team: record[2].trim().to_string(),
            is_neutral: parse_bool(&record[3], line, "is_neutral")?,
            is_pandemic: parse_bool(&record[4], line, "is_pandemic")?,
        };
        if f.home_team.is_empty() || f.away_team.is_empty() || f.home_team == f.away_team {
            return Err(DataError::MalformedRow {
                line,
                reason: "fixture needs two distinct nonempty team names".into(),
            });
        }
        fixtures.push(f);
    }
    Ok(fixtures)
}

/// Chronological ordering of season labels by first match date.
///
/// European split-year labels and South American calendar-year labels mix
/// freely; the data itself defines the order.
#[derive(Debug, Clone, Default)]
pub struct SeasonIndex {
    spans: BTreeMap<String, (NaiveDate, NaiveDate)>,
}

impl SeasonIndex {
    pub fn from_records(records: &[MatchRecord]) -> Self {
        let mut spans: BTreeMap<String, (NaiveDate, NaiveDate)> = BTreeMap::new();
        for m in records {
            spans
                .entry(m.season.clone())
                .and_modify(|(first, last)| {
                    *first = (*first).min(m.date);
                    *last = (*last).max(m.date);
                })
                .or_insert((m.date, m.date));
        }
        SeasonIndex { spans }
    }

    pub fn start(&self, season: &str) -> Option<NaiveDate> {
        self.spans.get(season).map(|&(first, _)| first)
    }

    pub fn end(&self, season: &str) -> Option<NaiveDate> {
        self.spans.get(season).map(|&(_, last)| last)
    }

    /// Season labels ordered by (first match date, label).
    pub fn ordered(&self) -> Vec<&str> {
        let mut labels: Vec<&str> = self.spans.keys().map(String::as_str).collect();
        labels.sort_by_key(|l| (self.spans[*l].0, l.to_string()));
        labels
    }

    /// All seasons starting no later than `through` does.
    pub fn through(&self, through: &str) -> Option<BTreeSet<String>> {
        let cutoff = self.start(through)?;
        Some(
            self.spans
                .iter()
                .filter(|(_, &(first, _))| first <= cutoff)
                .map(|(label, _)| label.clone())
                .collect(),
        )
    }
}

/// Which seasons form the training and test partitions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_seasons: BTreeSet<String>,
    pub test_seasons: BTreeSet<String>,
}

/// Training partition. Fitting code accepts only this type, so test
/// records cannot reach the optimizer by construction.
#[derive(Debug, Clone)]
pub struct TrainSet(pub Vec<MatchRecord>);

/// Held-out partition, scored but never fitted on.
#[derive(Debug, Clone)]
pub struct TestSet(pub Vec<MatchRecord>);

/// Partitions records by season label. Records in neither set are
/// excluded. Every train season must start before every test season.
pub fn split(records: &[MatchRecord], spec: &SplitSpec) -> Result<(TrainSet, TestSet), DataError> {
    if let Some(overlap) = spec.train_seasons.intersection(&spec.test_seasons).next() {
        return Err(DataError::OverlappingSplit(overlap.clone()));
    }
    let index = SeasonIndex::from_records(records);
    for train in &spec.train_seasons {
        for test in &spec.test_seasons {
            if let (Some(ts), Some(vs)) = (index.start(train), index.start(test)) {
                if ts >= vs {
                    return Err(DataError::UnorderedSplit {
                        train: train.clone(),
                        test: test.clone(),
                    });
                }
            }
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for m in records {
        if spec.train_seasons.contains(&m.season) {
            train.push(m.clone());
        } else if spec.test_seasons.contains(&m.season) {
            test.push(m.clone());
        }
    }
    Ok((TrainSet(train), TestSet(test)))
}

/// Maps every team to the league it played its domestic matches in during
/// `season`. Cup-only appearances are absent from the map.
pub fn season_memberships(
    records: &[MatchRecord],
    season: &str,
) -> Result<BTreeMap<String, String>, DataError> {
    let mut memberships: BTreeMap<String, String> = BTreeMap::new();
    for m in records {
        if m.season != season || !m.is_domestic_league() {
            continue;
        }
        for (team, league) in [
            (&m.home_team, &m.home_league),
            (&m.away_team, &m.away_league),
        ] {
            match memberships.get(team) {
                None => {
                    memberships.insert(team.clone(), league.clone());
                }
                Some(existing) if existing != league => {
                    return Err(DataError::TwoLeagues {
                        team: team.clone(),
                        season: season.to_string(),
                        a: existing.clone(),
                        b: league.clone(),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(memberships)
}

/// Mean goals per team per match over the corpus; the fallback scoring
/// rate for teams without history.
pub fn global_goal_mean(records: &[MatchRecord]) -> Result<f64, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let goals: u64 = records
        .iter()
        .map(|m| u64::from(m.home_goals) + u64::from(m.away_goals))
        .sum();
    Ok(goals as f64 / (2.0 * records.len() as f64))
}
