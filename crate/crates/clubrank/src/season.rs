//! Between-season rules: first-appearance initialization, pre-season
//! rollover with league-change drift and deviation inflation, and
//! post-season mean normalization.
//!
//! Normalization must not disturb predictions: the three-way expectation
//! depends only on rating differences, so [`RatingBook`] keeps a shared
//! baseline offset and normalizes by moving the baseline instead of every
//! stored rating. Stored ratings stay bit-identical across a normalization,
//! and so does every pairwise outcome triple computed from them.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dataset::TierTable;
use crate::glicko::{from_display, to_display, TeamRating, GLICKO2_SCALE};
use crate::params::{GlobalParams, LeagueParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeasonError {
    #[error("league `{0}` is missing from the tier table")]
    LeagueNotInTierTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    FirstAppearance,
    Promoted,
    Relegated,
    Stayed,
}

/// One team's movement between consecutive active seasons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeasonTransition {
    pub team: String,
    pub from_league: Option<String>,
    pub to_league: String,
    pub kind: TransitionKind,
    /// Set when the move crossed countries; no tier relation exists, so the
    /// transition is classified as stayed.
    pub cross_country: bool,
}

/// Classifies one team's move. Promotion and relegation are within-country
/// concepts: a lower tier number in the same country is a promotion, a
/// higher one a relegation, and any cross-country move counts as stayed.
pub fn classify_transition(
    team: &str,
    from_league: Option<&str>,
    to_league: &str,
    tiers: &TierTable,
) -> Result<SeasonTransition, SeasonError> {
    let to_tier = tiers
        .tier(to_league)
        .ok_or_else(|| SeasonError::LeagueNotInTierTable(to_league.to_string()))?;
    let (kind, cross_country) = match from_league {
        None => (TransitionKind::FirstAppearance, false),
        Some(from) => {
            let from_tier = tiers
                .tier(from)
                .ok_or_else(|| SeasonError::LeagueNotInTierTable(from.to_string()))?;
            if tiers.country(from) != tiers.country(to_league) {
                (TransitionKind::Stayed, true)
            } else if to_tier < from_tier {
                (TransitionKind::Promoted, false)
            } else if to_tier > from_tier {
                (TransitionKind::Relegated, false)
            } else {
                (TransitionKind::Stayed, false)
            }
        }
    };
    Ok(SeasonTransition {
        team: team.to_string(),
        from_league: from_league.map(str::to_string),
        to_league: to_league.to_string(),
        kind,
        cross_country,
    })
}

/// Classifies every team present in `next` against its league in `prev`.
pub fn detect_transitions(
    prev: &BTreeMap<String, String>,
    next: &BTreeMap<String, String>,
    tiers: &TierTable,
) -> Result<Vec<SeasonTransition>, SeasonError> {
    next.iter()
        .map(|(team, league)| {
            classify_transition(team, prev.get(team).map(String::as_str), league, tiers)
        })
        .collect()
}

/// First-appearance rating. Teams known to arrive from below dataset
/// coverage start at `μ_init + μ_new`; teams first observed in a league's
/// inaugural dataset season start at `μ_init` unpenalized. Deviation and
/// volatility always start at the global initials.
pub fn initialize_team(
    from_below_coverage: bool,
    league: &LeagueParams,
    globals: &GlobalParams,
) -> TeamRating {
    let mu = if from_below_coverage {
        league.mu_init + league.mu_new
    } else {
        league.mu_init
    };
    TeamRating {
        mu,
        phi: globals.phi0,
        sigma: globals.sigma0,
    }
}

/// Pre-season rollover: deviation inflates by the destination league's
/// φ_s, and league changers drift by the destination's promotion or
/// relegation constant.
pub fn season_rollover(
    rating: TeamRating,
    kind: TransitionKind,
    destination: &LeagueParams,
) -> TeamRating {
    let drift = match kind {
        TransitionKind::Promoted => destination.mu_promoted,
        TransitionKind::Relegated => destination.mu_relegated,
        TransitionKind::Stayed | TransitionKind::FirstAppearance => 0.0,
    };
    TeamRating {
        mu: rating.mu + drift,
        phi: rating.phi + destination.phi_s,
        sigma: rating.sigma,
    }
}

/// All tracked team ratings plus the shared normalization baseline.
///
/// Stored ratings live in a common internal frame; the baseline shifts the
/// whole population at once. Match computations take stored ratings (the
/// baseline cancels out of every difference); displayed ratings add it back.
#[derive(Debug, Clone, Default)]
pub struct RatingBook {
    ratings: BTreeMap<String, TeamRating>,
    baseline: f64,
}

impl RatingBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn contains(&self, team: &str) -> bool {
        self.ratings.contains_key(team)
    }

    /// Stored-frame rating, the form match computations consume.
    pub fn stored(&self, team: &str) -> Option<TeamRating> {
        self.ratings.get(team).copied()
    }

    pub fn set_stored(&mut self, team: &str, rating: TeamRating) {
        self.ratings.insert(team.to_string(), rating);
    }

    /// Inserts a first appearance; `rating` is interpreted on the effective
    /// (displayed) scale and rebased into the stored frame.
    pub fn insert_effective(&mut self, team: &str, rating: TeamRating) {
        self.ratings.insert(
            team.to_string(),
            TeamRating {
                mu: rating.mu - self.baseline,
                ..rating
            },
        );
    }

    /// Effective rating: stored plus baseline.
    pub fn effective(&self, team: &str) -> Option<TeamRating> {
        self.ratings.get(team).map(|r| TeamRating {
            mu: r.mu + self.baseline,
            ..*r
        })
    }

    pub fn display_rating(&self, team: &str) -> Option<f64> {
        self.effective(team).map(|r| r.display())
    }

    pub fn teams(&self) -> impl Iterator<Item = &str> {
        self.ratings.keys().map(String::as_str)
    }

    pub fn mean_display(&self, scope: &BTreeSet<String>) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (team, rating) in &self.ratings {
            if scope.contains(team) {
                sum += rating.mu;
                count += 1;
            }
        }
        if count == 0 {
            None
        } else {
            Some(to_display(sum / count as f64 + self.baseline))
        }
    }

    /// Shifts every effective rating by the same constant so the mean
    /// display rating over `scope` lands on `anchor`. Stored ratings are
    /// untouched, so pairwise differences and outcome triples are preserved
    /// bit for bit. Returns the applied display-scale shift, or None (with
    /// a diagnostic) when the scope is empty.
    pub fn normalize(&mut self, anchor_display: f64, scope: &BTreeSet<String>) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for (team, rating) in &self.ratings {
            if scope.contains(team) {
                sum += rating.mu;
                count += 1;
            }
        }
        if count == 0 {
            log::warn!("normalization scope is empty; ratings left unchanged");
            return None;
        }
        let mean_stored = sum / count as f64;
        let new_baseline = from_display(anchor_display) - mean_stored;
        let shift = (new_baseline - self.baseline) * GLICKO2_SCALE;
        self.baseline = new_baseline;
        Some(shift)
    }

    /// Eager per-pool variant: shifts the stored ratings of `members` so
    /// their mean display rating lands on `anchor`. Used when continental
    /// pools are normalized separately; unlike [`RatingBook::normalize`]
    /// this re-anchors the pool relative to everyone else.
    pub fn normalize_subset(
        &mut self,
        anchor_display: f64,
        scope: &BTreeSet<String>,
        members: &BTreeSet<String>,
    ) -> Option<f64> {
        let in_scope: Vec<&String> = members.iter().filter(|t| scope.contains(*t)).collect();
        let mut sum = 0.0;
        let mut count = 0usize;
        for team in &in_scope {
            if let Some(r) = self.ratings.get(*team) {
                sum += r.mu;
                count += 1;
            }
        }
        if count == 0 {
            log::warn!("per-pool normalization scope is empty; pool left unchanged");
            return None;
        }
        let delta = from_display(anchor_display) - self.baseline - sum / count as f64;
        for team in members {
            if let Some(r) = self.ratings.get_mut(team) {
                r.mu += delta;
            }
        }
        Some(delta * GLICKO2_SCALE)
    }
}
