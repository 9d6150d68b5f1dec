//! Goal-difference probabilities via the Skellam distribution.
//!
//! Scores of the two sides are modelled as independent Poisson variables, so
//! the goal difference follows a Skellam distribution. The draw probability
//! extracted here doubles as the per-match draw signal consumed by the
//! three-way expectation in [`crate::glicko`].

use std::collections::VecDeque;

use thiserror::Error;

/// Truncation point for the goal-difference sums: for realistic scoring
/// rates (≤ 6 goals per side) the mass beyond |k| = 30 is below 1e-10.
pub const MAX_GOAL_DIFF: i32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkellamError {
    #[error("goal rate must be a finite nonnegative number, got {0}")]
    InvalidRate(f64),
    #[error("bessel argument must be nonnegative, got {0}")]
    NegativeArgument(f64),
}

/// Expected goals for the two sides of one match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRates {
    mu_home: f64,
    mu_away: f64,
}

impl GoalRates {
    pub fn new(mu_home: f64, mu_away: f64) -> Result<Self, SkellamError> {
        for mu in [mu_home, mu_away] {
            if !mu.is_finite() || mu < 0.0 {
                return Err(SkellamError::InvalidRate(mu));
            }
        }
        Ok(GoalRates { mu_home, mu_away })
    }

    pub fn mu_home(&self) -> f64 {
        self.mu_home
    }

    pub fn mu_away(&self) -> f64 {
        self.mu_away
    }
}

/// Win/draw/loss probabilities from the home team's perspective.
///
/// Components are each in [0, 1] and sum to 1 within 1e-12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbs {
    pub p_win: f64,
    pub p_draw: f64,
    pub p_loss: f64,
}

/// Modified Bessel function of the first kind, I_order(x).
///
/// Series summation `Σ_m (x/2)^(2m+order) / (m! (m+order)!)`, truncated once
/// the next term drops below 1e-15 of the running sum (at least one term is
/// always taken). Accurate to ~1e-15 relative for the argument range reached
/// by football scoring rates.
pub fn bessel_i(order: u32, x: f64) -> Result<f64, SkellamError> {
    if !x.is_finite() || x < 0.0 {
        return Err(SkellamError::NegativeArgument(x));
    }
    let half = x / 2.0;
    // First term: (x/2)^order / order!
    let mut term = 1.0;
    for m in 1..=order {
        term *= half / m as f64;
    }
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= half * half / (m * (m + order as f64));
        sum += term;
        if term < 1e-15 * sum || term == 0.0 {
            break;
        }
        m += 1.0;
    }
    Ok(sum)
}

fn poisson_pmf(n: i64, mu: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let mut p = (-mu).exp();
    for i in 1..=n {
        p *= mu / i as f64;
    }
    p
}

/// P(goal difference = k) for the given rates.
///
/// Uses the closed Bessel form when both rates are positive. When either
/// rate is zero the ratio `(μ1/μ2)^(k/2)` is undefined, so the probability
/// is evaluated by direct convolution of the two Poisson mass functions.
pub fn skellam_pmf(k: i32, rates: GoalRates) -> f64 {
    let (mu1, mu2) = (rates.mu_home, rates.mu_away);
    if mu1 == 0.0 || mu2 == 0.0 {
        // Σ_n P(X1 = n + k) P(X2 = n); degenerate rates collapse the sum.
        let start = (-k).max(0) as i64;
        let mut total = 0.0;
        for n in start..start + 64 {
            let term = poisson_pmf(n + k as i64, mu1) * poisson_pmf(n, mu2);
            total += term;
            if n as f64 > mu2 && term < 1e-18 * total.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        return total;
    }
    let bessel = bessel_i(k.unsigned_abs(), 2.0 * (mu1 * mu2).sqrt())
        .expect("argument is nonnegative by construction");
    (-(mu1 + mu2)).exp() * (mu1 / mu2).powf(k as f64 / 2.0) * bessel
}

/// Collapses the goal-difference distribution into a win/draw/loss triple.
///
/// Sums the pmf over k in [-30, 30] and renormalizes so the triple sums
/// to one; the truncated tail mass is below 1e-10 for rates up to 6.
pub fn outcome_probs_from_goals(rates: GoalRates) -> OutcomeProbs {
    let mut p_win = 0.0;
    let mut p_loss = 0.0;
    for k in 1..=MAX_GOAL_DIFF {
        p_win += skellam_pmf(k, rates);
        p_loss += skellam_pmf(-k, rates);
    }
    let p_draw = skellam_pmf(0, rates);
    let total = p_win + p_draw + p_loss;
    OutcomeProbs {
        p_win: p_win / total,
        p_draw: p_draw / total,
        p_loss: p_loss / total,
    }
}

/// The draw signal `s` fed into the draw offset `c = d + s`.
pub fn draw_signal(rates: GoalRates) -> f64 {
    outcome_probs_from_goals(rates).p_draw
}

/// Recent scoring record of one team, oldest first.
#[derive(Debug, Clone, Default)]
pub struct TeamForm {
    scored: VecDeque<u32>,
    conceded: VecDeque<u32>,
}

impl TeamForm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a played match, keeping at most `cap` entries.
    pub fn record(&mut self, scored: u32, conceded: u32, cap: usize) {
        self.scored.push_back(scored);
        self.conceded.push_back(conceded);
        while self.scored.len() > cap {
            self.scored.pop_front();
            self.conceded.pop_front();
        }
    }

    pub fn matches(&self) -> usize {
        self.scored.len()
    }

    fn mean_of(window: usize, values: &VecDeque<u32>) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        let take = window.min(values.len());
        let sum: u32 = values.iter().rev().take(take).sum();
        Some(f64::from(sum) / take as f64)
    }

    pub fn mean_scored(&self, window: usize) -> Option<f64> {
        Self::mean_of(window, &self.scored)
    }

    pub fn mean_conceded(&self, window: usize) -> Option<f64> {
        Self::mean_of(window, &self.conceded)
    }
}

/// Expected goals from rolling form: a side's attack mean blended 50/50
/// with the opposition's defensive mean over the last `window` matches.
/// Teams with fewer matches use what exists; teams with none fall back to
/// `default_rate`, the corpus-wide mean goals per team per match.
pub fn rolling_goal_rates(
    home: &TeamForm,
    away: &TeamForm,
    window: usize,
    default_rate: f64,
) -> GoalRates {
    let attack_home = home.mean_scored(window).unwrap_or(default_rate);
    let defence_away = away.mean_conceded(window).unwrap_or(default_rate);
    let attack_away = away.mean_scored(window).unwrap_or(default_rate);
    let defence_home = home.mean_conceded(window).unwrap_or(default_rate);
    GoalRates {
        mu_home: 0.5 * (attack_home + defence_away),
        mu_away: 0.5 * (attack_away + defence_home),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: fixed-length series with no adaptive truncation.
    fn bessel_reference(order: u32, x: f64, terms: u32) -> f64 {
        let half = x / 2.0;
        let mut sum = 0.0;
        for m in 0..terms {
            let mut term = 1.0;
            for i in 1..=m {
                term *= half / i as f64;
            }
            for i in 1..=(m + order) {
                term *= half / i as f64;
            }
            sum += term;
        }
        sum
    }

    /// Independent oracle: brute-force double sum over the Poisson grid.
    fn grid_oracle(k: i32, mu1: f64, mu2: f64, n: i64) -> f64 {
        let mut total = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                if i - j == k as i64 {
                    total += poisson_pmf(i, mu1) * poisson_pmf(j, mu2);
                }
            }
        }
        total
    }

    fn rates(mu1: f64, mu2: f64) -> GoalRates {
        GoalRates::new(mu1, mu2).unwrap()
    }

    #[test]
    fn bessel_order_zero_at_origin() {
        assert_eq!(bessel_i(0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn bessel_positive_order_at_origin() {
        assert_eq!(bessel_i(1, 0.0).unwrap(), 0.0);
        assert_eq!(bessel_i(7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn bessel_i0_of_two() {
        // Frozen from the 30-term reference series.
        let expected = bessel_reference(0, 2.0, 30);
        assert!((expected - 2.2795853).abs() < 1e-7);
        assert!((bessel_i(0, 2.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn bessel_rejects_negative_argument() {
        assert!(matches!(
            bessel_i(0, -1.0),
            Err(SkellamError::NegativeArgument(_))
        ));
        assert!(bessel_i(3, f64::NAN).is_err());
    }

    #[test]
    fn bessel_matches_reference_series() {
        for order in [0u32, 1, 2, 5, 10] {
            let mut x = 0.0;
            while x <= 20.0 {
                let got = bessel_i(order, x).unwrap();
                let want = bessel_reference(order, x, 40);
                assert!(
                    (got - want).abs() <= 1e-12 * want.max(1.0),
                    "I_{order}({x}): {got} vs {want}"
                );
                x += 0.5;
            }
        }
    }

    #[test]
    fn pmf_unit_rates() {
        // Frozen from grid_oracle(·, 1, 1, 40).
        assert!((skellam_pmf(0, rates(1.0, 1.0)) - 0.3085083).abs() < 1e-7);
        assert!((skellam_pmf(2, rates(1.0, 1.0)) - 0.0932390).abs() < 1e-7);
        assert!((skellam_pmf(0, rates(1.0, 1.0)) - grid_oracle(0, 1.0, 1.0, 40)).abs() < 1e-12);
    }

    #[test]
    fn pmf_zero_away_rate_is_pure_poisson() {
        let got = skellam_pmf(3, rates(2.0, 0.0));
        let want = (-2.0f64).exp() * 8.0 / 6.0;
        assert!((got - want).abs() < 1e-12);
        assert!((want - 0.1804470).abs() < 1e-7);
        // Negative differences are impossible without away goals.
        assert_eq!(skellam_pmf(-1, rates(2.0, 0.0)), 0.0);
    }

    #[test]
    fn pmf_both_rates_zero() {
        assert!((skellam_pmf(0, rates(0.0, 0.0)) - 1.0).abs() < 1e-15);
        assert_eq!(skellam_pmf(1, rates(0.0, 0.0)), 0.0);
    }

    #[test]
    fn pmf_total_mass_on_grid() {
        for &mu1 in &[0.1, 0.5, 1.0, 2.0, 5.0] {
            for &mu2 in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                let total: f64 = (-MAX_GOAL_DIFF..=MAX_GOAL_DIFF)
                    .map(|k| skellam_pmf(k, rates(mu1, mu2)))
                    .sum();
                assert!((total - 1.0).abs() < 1e-9, "mass {total} at ({mu1},{mu2})");
            }
        }
    }

    #[test]
    fn outcome_probs_unit_rates() {
        let probs = outcome_probs_from_goals(rates(1.0, 1.0));
        assert!((probs.p_win - 0.3457459).abs() < 1e-7);
        assert!((probs.p_draw - 0.3085083).abs() < 1e-7);
        assert!((probs.p_loss - 0.3457459).abs() < 1e-7);
        assert!((probs.p_win - probs.p_loss).abs() < 1e-12);
    }

    #[test]
    fn outcome_probs_goalless() {
        let probs = outcome_probs_from_goals(rates(0.0, 0.0));
        assert_eq!(probs.p_win, 0.0);
        assert_eq!(probs.p_draw, 1.0);
        assert_eq!(probs.p_loss, 0.0);
    }

    #[test]
    fn draw_signal_examples() {
        assert!((draw_signal(rates(1.0, 1.0)) - 0.3085083).abs() < 1e-7);
        assert_eq!(draw_signal(rates(0.0, 0.0)), 1.0);
        // A high-scoring mismatch makes draws rare.
        let s = draw_signal(rates(5.0, 0.1));
        assert!(s < 0.05, "draw signal {s}");
        assert!((s - grid_oracle(0, 5.0, 0.1, 40)).abs() < 1e-9);
    }

    #[test]
    fn rolling_rates_window_mean() {
        let mut home = TeamForm::new();
        for (s, c) in [(2, 1), (1, 1), (0, 1)] {
            home.record(s, c, 30);
        }
        let mut away = TeamForm::new();
        for _ in 0..3 {
            away.record(0, 1, 30);
        }
        let r = rolling_goal_rates(&home, &away, 3, 1.3);
        assert!((r.mu_home() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rolling_rates_fallback() {
        let empty = TeamForm::new();
        let r = rolling_goal_rates(&empty, &empty, 5, 1.3);
        assert_eq!(r.mu_home(), 1.3);
        assert_eq!(r.mu_away(), 1.3);
    }

    #[test]
    fn rolling_rates_window_one() {
        let mut home = TeamForm::new();
        home.record(1, 3, 30);
        home.record(4, 0, 30);
        let mut away = TeamForm::new();
        away.record(2, 5, 30);
        away.record(1, 0, 30);
        let r = rolling_goal_rates(&home, &away, 1, 1.3);
        assert!((r.mu_home() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn form_is_capped() {
        let mut form = TeamForm::new();
        for i in 0..50 {
            form.record(i, 0, 10);
        }
        assert_eq!(form.matches(), 10);
        assert!((form.mean_scored(10).unwrap() - 44.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_rates_rejected() {
        assert!(GoalRates::new(-0.1, 1.0).is_err());
        assert!(GoalRates::new(1.0, f64::INFINITY).is_err());
        assert!(GoalRates::new(f64::NAN, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn pmf_swap_symmetry(mu1 in 0.0f64..5.0, mu2 in 0.0f64..5.0, k in -10i32..=10) {
            let a = skellam_pmf(k, rates(mu1, mu2));
            let b = skellam_pmf(-k, rates(mu2, mu1));
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn pmf_matches_grid_oracle(mu1 in 0.05f64..5.0, mu2 in 0.05f64..5.0, k in -8i32..=8) {
            let got = skellam_pmf(k, rates(mu1, mu2));
            let want = grid_oracle(k, mu1, mu2, 40);
            prop_assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }

        #[test]
        fn outcome_probs_form_a_distribution(mu1 in 0.0f64..6.0, mu2 in 0.0f64..6.0) {
            let p = outcome_probs_from_goals(rates(mu1, mu2));
            prop_assert!((p.p_win + p.p_draw + p.p_loss - 1.0).abs() < 1e-12);
            for v in [p.p_win, p.p_draw, p.p_loss] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn outcome_probs_relabel_symmetry(mu1 in 0.0f64..6.0, mu2 in 0.0f64..6.0) {
            let ab = outcome_probs_from_goals(rates(mu1, mu2));
            let ba = outcome_probs_from_goals(rates(mu2, mu1));
            prop_assert!((ab.p_win - ba.p_loss).abs() < 1e-12);
        }
    }
}
