//! Tabular outputs: club tables, league tables averaged over each league's
//! top clubs, the rating-interpretation table, and model comparison rows.
//!
//! Every table has a CSV form with a fixed header and a round-trip parser;
//! floats are written with shortest round-trip formatting except where a
//! table's presentation contract fixes the precision.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dataset::TierTable;
use crate::glicko::{from_display, g, GLICKO2_SCALE};
use crate::skellam::OutcomeProbs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("line {line}: malformed table row")]
    Malformed { line: usize },
    #[error("expected header `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },
}

/// One club in a rating table.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRow {
    pub rank: usize,
    pub team: String,
    pub rating: f64,
    pub league: String,
}

/// One league in a league-strength table.
#[derive(Debug, Clone, PartialEq)]
pub struct LeagueRow {
    pub rank: usize,
    pub league: String,
    pub rating: f64,
}

/// One row of the rating-interpretation table; percentages carry one
/// decimal place.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpretationRow {
    pub diff: f64,
    pub win: f64,
    pub draw: f64,
    pub loss: f64,
}

/// One model in a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub log_loss: f64,
}

/// Top `n` clubs by display rating, optionally restricted to a pool of
/// countries. Ties break by team id.
pub fn club_table(
    ratings: &BTreeMap<String, (f64, String)>,
    pool: Option<(&BTreeSet<String>, &TierTable)>,
    n: usize,
) -> Vec<RatingRow> {
    let mut rows: Vec<(&String, &(f64, String))> = ratings
        .iter()
        .filter(|(_, (_, league))| match pool {
            Some((countries, tiers)) => tiers
                .country(league)
                .is_some_and(|c| countries.contains(c)),
            None => true,
        })
        .collect();
    rows.sort_by(|(team_a, (rating_a, _)), (team_b, (rating_b, _))| {
        rating_b
            .partial_cmp(rating_a)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| team_a.cmp(team_b))
    });
    rows.truncate(n);
    rows.into_iter()
        .enumerate()
        .map(|(i, (team, (rating, league)))| RatingRow {
            rank: i + 1,
            team: team.clone(),
            rating: *rating,
            league: league.clone(),
        })
        .collect()
}

/// League strength as the mean rating of each league's `k` best teams.
/// Leagues fielding fewer than `k` rated teams are omitted; the second
/// return value names them.
pub fn league_table(
    ratings: &BTreeMap<String, (f64, String)>,
    k: usize,
) -> (Vec<LeagueRow>, Vec<String>) {
    let mut by_league: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (_, (rating, league)) in ratings {
        by_league.entry(league).or_default().push(*rating);
    }
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    for (league, mut values) in by_league {
        if values.len() < k {
            log::warn!("league {league} has only {} rated teams, need {k}; omitted", values.len());
            omitted.push(league.to_string());
            continue;
        }
        values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let mean = values[..k].iter().sum::<f64>() / k as f64;
        rows.push(LeagueRow {
            rank: 0,
            league: league.to_string(),
            rating: mean,
        });
    }
    rows.sort_by(|a, b| {
        b.rating
            .partial_cmp(&a.rating)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.league.cmp(&b.league))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    (rows, omitted)
}

fn percent(p: f64) -> f64 {
    (p * 1000.0).round() / 10.0
}

/// Win/draw/loss percentages for a list of display-rating differences,
/// computed from the three-way expectation with an effective weighting
/// `g_eff` and draw offset `c`. The real per-match parameters vary by
/// league, so both are report inputs.
pub fn interpretation_table(diffs: &[f64], g_eff: f64, c: f64) -> Vec<InterpretationRow> {
    assert!(
        g_eff > 0.0 && g_eff <= 1.0,
        "g_eff must lie in (0, 1], got {g_eff}"
    );
    diffs
        .iter()
        .map(|&diff| {
            let x = g_eff * (diff / GLICKO2_SCALE);
            let p = triple_from_x(x, c);
            InterpretationRow {
                diff,
                win: percent(p.p_win),
                draw: percent(p.p_draw),
                loss: percent(p.p_loss),
            }
        })
        .collect()
}

fn triple_from_x(x: f64, c: f64) -> OutcomeProbs {
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

/// Draw offset that reproduces an equal-ratings row with the given win and
/// draw percentages: exp(c) = draw/win.
pub fn draw_offset_from_row(win_percent: f64, draw_percent: f64) -> f64 {
    (draw_percent / win_percent).ln()
}

/// Comparison rows sorted ascending by loss (stable, so equal losses keep
/// their input order).
pub fn comparison_table(named_losses: &[(String, f64)]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = named_losses
        .iter()
        .map(|(model, loss)| ComparisonRow {
            model: model.clone(),
            log_loss: *loss,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.log_loss
            .partial_cmp(&b.log_loss)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows
}

pub const CLUB_TABLE_HEADER: &str = "rank,team,rating,league";
pub const LEAGUE_TABLE_HEADER: &str = "rank,league,rating";
pub const INTERPRETATION_HEADER: &str = "diff,win,draw,loss";
pub const COMPARISON_HEADER: &str = "model,log_loss";

fn quoted(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn club_table_csv(rows: &[RatingRow]) -> String {
    let mut out = String::from(CLUB_TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.rank,
            quoted(&r.team),
            r.rating,
            quoted(&r.league)
        ));
    }
    out
}

pub fn league_table_csv(rows: &[LeagueRow]) -> String {
    let mut out = String::from(LEAGUE_TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.rank, quoted(&r.league), r.rating));
    }
    out
}

pub fn interpretation_table_csv(rows: &[InterpretationRow]) -> String {
    let mut out = String::from(INTERPRETATION_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.diff, r.win, r.draw, r.loss));
    }
    out
}

/// Four-decimal loss formatting, matching the comparison table's
/// presentation.
pub fn comparison_table_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{:.4}\n", quoted(&r.model), r.log_loss));
    }
    out
}

fn parse_csv(text: &str, header: &str) -> Result<Vec<csv::StringRecord>, ReportError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|_| ReportError::Malformed { line: i + 1 })?;
        if i == 0 {
            let got = record.iter().collect::<Vec<_>>().join(",");
            if got != header {
                return Err(ReportError::BadHeader {
                    expected: header.to_string(),
                    got,
                });
            }
            continue;
        }
        rows.push(record);
    }
    Ok(rows)
}

pub fn club_table_from_csv(text: &str) -> Result<Vec<RatingRow>, ReportError> {
    parse_csv(text, CLUB_TABLE_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if r.len() != 4 {
                return Err(ReportError::Malformed { line });
            }
            Ok(RatingRow {
                rank: r[0].parse().map_err(|_| ReportError::Malformed { line })?,
                team: r[1].to_string(),
                rating: r[2].parse().map_err(|_| ReportError::Malformed { line })?,
                league: r[3].to_string(),
            })
        })
        .collect()
}

pub fn league_table_from_csv(text: &str) -> Result<Vec<LeagueRow>, ReportError> {
    parse_csv(text, LEAGUE_TABLE_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if r.len() != 3 {
                return Err(ReportError::Malformed { line });
            }
            Ok(LeagueRow {
                rank: r[0].parse().map_err(|_| ReportError::Malformed { line })?,
                league: r[1].to_string(),
                rating: r[2].parse().map_err(|_| ReportError::Malformed { line })?,
            })
        })
        .collect()
}

pub fn interpretation_table_from_csv(text: &str) -> Result<Vec<InterpretationRow>, ReportError> {
    parse_csv(text, INTERPRETATION_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if r.len() != 4 {
                return Err(ReportError::Malformed { line });
            }
            let field = |idx: usize| -> Result<f64, ReportError> {
                r[idx].parse().map_err(|_| ReportError::Malformed { line })
            };
            Ok(InterpretationRow {
                diff: field(0)?,
                win: field(1)?,
                draw: field(2)?,
                loss: field(3)?,
            })
        })
        .collect()
}

pub fn comparison_table_from_csv(text: &str) -> Result<Vec<ComparisonRow>, ReportError> {
    parse_csv(text, COMPARISON_HEADER)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i + 2;
            if r.len() != 2 {
                return Err(ReportError::Malformed { line });
            }
            Ok(ComparisonRow {
                model: r[0].to_string(),
                log_loss: r[1].parse().map_err(|_| ReportError::Malformed { line })?,
            })
        })
        .collect()
}

/// Plain-text rendering with aligned columns for terminals.
pub fn render_text(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<String>, out: &mut String| {
        let formatted: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(formatted.join("  ").trim_end());
        out.push('\n');
    };
    line(headers.iter().map(|h| h.to_string()).collect(), &mut out);
    for row in rows {
        line(row.clone(), &mut out);
    }
    out
}

/// Effective g for the interpretation table at a representative deviation.
pub fn g_eff_for_display_deviation(display_deviation: f64) -> f64 {
    g(from_display(crate::glicko::DISPLAY_ANCHOR + display_deviation))
}
