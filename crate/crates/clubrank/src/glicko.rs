//! Glicko-2 machinery with a three-way expectation.
//!
//! The classic two-outcome expectation is replaced by a softmax over
//! {home win, draw, home loss} in which the draw receives a log-weight
//! `c = d + s` (a fitted constant plus a per-match draw signal) and the home
//! side's rating is shifted by a home-advantage constant before comparison.
//! Updates run one match at a time: every match is its own rating period.

use thiserror::Error;

use crate::skellam::OutcomeProbs;

/// Conversion between the internal scale and the familiar display scale:
/// display = 1500 + 173.7178 · μ.
pub const GLICKO2_SCALE: f64 = 173.7178;
pub const DISPLAY_ANCHOR: f64 = 1500.0;

/// Expected scores are clamped away from {0, 1} before forming the
/// estimated variance `v = 1 / (g² E (1 − E))`.
const EXPECTATION_CLAMP: f64 = 1e-10;

/// Convergence tolerance of the volatility root-finder, applied to the
/// bracket width in log-volatility space.
const VOLATILITY_EPS: f64 = 1e-6;
/// Residual polish target; iteration continues past bracket convergence
/// until the defining equation is satisfied this tightly.
const VOLATILITY_RESIDUAL: f64 = 1e-9;
const VOLATILITY_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatingError {
    #[error("rating deviation must be positive and finite, got {0}")]
    InvalidDeviation(f64),
    #[error("volatility must be positive and finite, got {0}")]
    InvalidVolatility(f64),
    #[error("rating must be finite, got {0}")]
    InvalidRating(f64),
}

/// One team's rating state on the internal Glicko-2 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeamRating {
    /// Rating (strength estimate).
    pub mu: f64,
    /// Rating deviation (uncertainty), > 0.
    pub phi: f64,
    /// Volatility (expected drift of true strength), > 0.
    pub sigma: f64,
}

impl TeamRating {
    pub fn new(mu: f64, phi: f64, sigma: f64) -> Result<Self, RatingError> {
        if !mu.is_finite() {
            return Err(RatingError::InvalidRating(mu));
        }
        if !phi.is_finite() || phi <= 0.0 {
            return Err(RatingError::InvalidDeviation(phi));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(RatingError::InvalidVolatility(sigma));
        }
        Ok(TeamRating { mu, phi, sigma })
    }

    /// Display-scale rating, anchored at 1500.
    pub fn display(&self) -> f64 {
        to_display(self.mu)
    }

    pub fn from_display(rating: f64, phi: f64, sigma: f64) -> Result<Self, RatingError> {
        TeamRating::new(from_display(rating), phi, sigma)
    }
}

pub fn to_display(mu: f64) -> f64 {
    DISPLAY_ANCHOR + GLICKO2_SCALE * mu
}

pub fn from_display(rating: f64) -> f64 {
    (rating - DISPLAY_ANCHOR) / GLICKO2_SCALE
}

/// Per-match context: resolved home shift and draw offset.
#[derive(Debug, Clone, Copy)]
pub struct MatchContext {
    /// Home-advantage shift on the internal scale (the pandemic constant
    /// when the match falls inside the pandemic window). Ignored on
    /// neutral ground.
    pub home_advantage: f64,
    /// Draw log-weight c = d + s.
    pub draw_offset: f64,
    pub is_pandemic: bool,
    pub is_neutral: bool,
}

impl MatchContext {
    pub fn effective_home_shift(&self) -> f64 {
        if self.is_neutral {
            0.0
        } else {
            self.home_advantage
        }
    }
}

/// Full-time result from the home team's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    HomeWin,
    Draw,
    AwayWin,
}

impl MatchOutcome {
    pub fn from_goals(home: u32, away: u32) -> Self {
        match home.cmp(&away) {
            std::cmp::Ordering::Greater => MatchOutcome::HomeWin,
            std::cmp::Ordering::Equal => MatchOutcome::Draw,
            std::cmp::Ordering::Less => MatchOutcome::AwayWin,
        }
    }

    /// Score value s_j for the home team: 1 for a win, 0.5 for a draw,
    /// 0 for a loss.
    pub fn home_score(self) -> f64 {
        match self {
            MatchOutcome::HomeWin => 1.0,
            MatchOutcome::Draw => 0.5,
            MatchOutcome::AwayWin => 0.0,
        }
    }

    /// Probability this outcome was assigned by the given triple.
    pub fn probability(self, probs: &OutcomeProbs) -> f64 {
        match self {
            MatchOutcome::HomeWin => probs.p_win,
            MatchOutcome::Draw => probs.p_draw,
            MatchOutcome::AwayWin => probs.p_loss,
        }
    }
}

/// The Glicko-2 weighting function g(φ) = 1/√(1 + 3φ²/π²).
///
/// Strictly decreasing in φ with g(0) = 1. Panics on a negative deviation.
pub fn g(phi: f64) -> f64 {
    assert!(phi >= 0.0, "deviation must be nonnegative, got {phi}");
    1.0 / (1.0 + 3.0 * phi * phi / (std::f64::consts::PI * std::f64::consts::PI)).sqrt()
}

/// Two-outcome Glicko-2 expectation 1/(1 + exp(−g(φ_j)(μ − μ_j))).
pub fn expectation_original(mu: f64, mu_j: f64, phi_j: f64) -> f64 {
    1.0 / (1.0 + (-g(phi_j) * (mu - mu_j)).exp())
}

/// Three-outcome home-win expectation exp(x)/(1 + exp(x) + exp(c)) with
/// x = g(φ_j)(μ − μ_j). As c → −∞ this recovers the two-outcome form.
pub fn expectation_modified(mu: f64, mu_j: f64, phi_j: f64, c: f64) -> f64 {
    softmax_triple(g(phi_j) * (mu - mu_j), c).p_win
}

fn softmax_triple(x: f64, c: f64) -> OutcomeProbs {
    // exp(x), exp(c) and exp(0) rescaled by the max exponent so the
    // normalizer cannot overflow.
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

/// Win/draw/loss triple for one match.
///
/// Both teams share this triple (the away side's win probability is
/// `p_loss`), so the two perspectives are always consistent. The weighting
/// uses the combined deviation √(φ_home² + φ_away²).
pub fn outcome_triple(home: &TeamRating, away: &TeamRating, ctx: &MatchContext) -> OutcomeProbs {
    let x = g(home.phi.hypot(away.phi)) * (home.mu + ctx.effective_home_shift() - away.mu);
    softmax_triple(x, ctx.draw_offset)
}

/// Applies a one-match rating period to both teams.
///
/// The expected score `E = p_win + 0.5·p_draw` comes from the shared match
/// triple, which already contains the home shift; the away side uses
/// `1 − E`. Per-team variance and rating steps use the opponent's own
/// deviation.
pub fn update_pair(
    home: &TeamRating,
    away: &TeamRating,
    ctx: &MatchContext,
    outcome: MatchOutcome,
    tau: f64,
) -> (TeamRating, TeamRating) {
    update_pair_scored(home, away, ctx, outcome.home_score(), tau)
}

/// [`update_pair`] with an arbitrary home score value in [0, 1]; the away
/// side receives `1 − score`. Setting the score equal to the expected score
/// leaves both ratings unchanged.
pub fn update_pair_scored(
    home: &TeamRating,
    away: &TeamRating,
    ctx: &MatchContext,
    home_score: f64,
    tau: f64,
) -> (TeamRating, TeamRating) {
    let probs = outcome_triple(home, away, ctx);
    let expected_home = probs.p_win + 0.5 * probs.p_draw;
    let new_home = update_single(home, away.phi, expected_home, home_score, tau);
    let new_away = update_single(away, home.phi, 1.0 - expected_home, 1.0 - home_score, tau);
    (new_home, new_away)
}

fn update_single(
    rating: &TeamRating,
    opponent_phi: f64,
    expected: f64,
    score: f64,
    tau: f64,
) -> TeamRating {
    let gj = g(opponent_phi);
    let e = expected.clamp(EXPECTATION_CLAMP, 1.0 - EXPECTATION_CLAMP);
    let v = 1.0 / (gj * gj * e * (1.0 - e));
    let delta = v * gj * (score - e);
    let sigma_prime = volatility_update(rating.phi, v, delta, rating.sigma, tau);
    let phi_star = rating.phi.hypot(sigma_prime);
    let phi_prime = 1.0 / (1.0 / (phi_star * phi_star) + 1.0 / v).sqrt();
    let mu_prime = rating.mu + phi_prime * phi_prime * gj * (score - e);
    TeamRating {
        mu: mu_prime,
        phi: phi_prime,
        sigma: sigma_prime,
    }
}

/// Solves for the new volatility σ'.
///
/// Root of `f(x) = e^x(Δ² − φ² − v − e^x) / 2(φ² + v + e^x)² − (x − ln σ²)/τ²`
/// in x = ln σ'², found by the Illinois (regula falsi with halving) bracket
/// iteration. Converges on the bracket width first and then keeps polishing
/// until the residual at the returned point is negligible. If 100 iterations
/// do not suffice the bracket midpoint is returned with a diagnostic.
pub fn volatility_update(phi: f64, v: f64, delta: f64, sigma: f64, tau: f64) -> f64 {
    let a = (sigma * sigma).ln();
    let phi2 = phi * phi;
    let d2 = delta * delta;
    let f = |x: f64| {
        let ex = x.exp();
        ex * (d2 - phi2 - v - ex) / (2.0 * (phi2 + v + ex) * (phi2 + v + ex))
            - (x - a) / (tau * tau)
    };

    let mut xa = a;
    let mut xb = if d2 > phi2 + v {
        (d2 - phi2 - v).ln()
    } else {
        let mut k = 1.0;
        while f(a - k * tau) < 0.0 {
            k += 1.0;
        }
        a - k * tau
    };
    let mut fa = f(xa);
    let mut fb = f(xb);

    for _ in 0..VOLATILITY_MAX_ITER {
        if (xb - xa).abs() <= VOLATILITY_EPS && fa.abs().min(fb.abs()) <= VOLATILITY_RESIDUAL {
            let x = if fa.abs() <= fb.abs() { xa } else { xb };
            return (x / 2.0).exp();
        }
        let xc = xa + (xa - xb) * fa / (fb - fa);
        let fc = f(xc);
        if fc * fb <= 0.0 {
            xa = xb;
            fa = fb;
        } else {
            fa /= 2.0;
        }
        xb = xc;
        fb = fc;
    }
    log::warn!(
        "volatility iteration did not converge (phi={phi}, v={v}, delta={delta}, \
         sigma={sigma}, tau={tau}); returning bracket midpoint"
    );
    ((xa + xb) / 4.0).exp()
}
