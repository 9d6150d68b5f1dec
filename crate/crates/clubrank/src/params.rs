//! Fitted parameters: one global block plus one block per league.
//!
//! Vectors are serialized as a plain key-value file, one parameter per line
//! (`scope.param = value`), which round-trips exactly because values are
//! written with Rust's shortest round-trip float formatting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Feasibility margins keeping the strict parameter inequalities testable.
pub const HOME_GAP: f64 = 1e-3;
pub const MU_NEW_MAX: f64 = -1e-3;
pub const PHI_S_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("line {line}: expected `scope.param = value`")]
    Malformed { line: usize },
    #[error("line {line}: unknown parameter `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate parameter `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}`")]
    BadValue { line: usize, value: String },
    #[error("league `{league}`: missing parameter `{param}`")]
    MissingLeagueParam { league: String, param: String },
    #[error("missing global parameter `{0}`")]
    MissingGlobal(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
}

/// Per-league constants: initial rating, below-coverage penalty, league
/// change drifts, pre-season deviation inflation and the two home-advantage
/// constants. All on the internal scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeagueParams {
    /// Rating assigned to a league's newly observed teams.
    pub mu_init: f64,
    /// Penalty for teams entering from below dataset coverage, < 0.
    pub mu_new: f64,
    /// Rating drift on promotion into a league, ≥ 0.
    pub mu_promoted: f64,
    /// Rating drift on relegation into a league, ≤ 0.
    pub mu_relegated: f64,
    /// Pre-season deviation inflation, > 0.
    pub phi_s: f64,
    /// Home advantage, > h_p.
    pub h: f64,
    /// Pandemic-window home advantage, ≥ 0.
    pub h_p: f64,
}

impl Default for LeagueParams {
    fn default() -> Self {
        LeagueParams {
            mu_init: 0.0,
            mu_new: -0.3,
            mu_promoted: 0.1,
            mu_relegated: -0.1,
            phi_s: 0.3,
            h: 0.3,
            h_p: 0.1,
        }
    }
}

impl LeagueParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let all = [
            self.mu_init,
            self.mu_new,
            self.mu_promoted,
            self.mu_relegated,
            self.phi_s,
            self.h,
            self.h_p,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ParamError::Infeasible("non-finite league parameter".into()));
        }
        if self.mu_new >= 0.0 {
            return Err(ParamError::Infeasible(format!(
                "mu_new must be negative, got {}",
                self.mu_new
            )));
        }
        if self.phi_s <= 0.0 {
            return Err(ParamError::Infeasible(format!(
                "phi_s must be positive, got {}",
                self.phi_s
            )));
        }
        if self.mu_promoted < 0.0 || self.mu_relegated > 0.0 {
            return Err(ParamError::Infeasible(
                "league drifts must satisfy mu_promoted >= 0 >= mu_relegated".into(),
            ));
        }
        if !(self.h > self.h_p && self.h_p >= 0.0) {
            return Err(ParamError::Infeasible(format!(
                "home advantage must satisfy h > h_p >= 0, got h={} h_p={}",
                self.h, self.h_p
            )));
        }
        Ok(())
    }

    /// Clamps the block into the feasible region. Returns true if anything
    /// moved.
    pub fn project(&mut self) -> bool {
        let before = *self;
        self.mu_new = self.mu_new.min(MU_NEW_MAX);
        self.phi_s = self.phi_s.max(PHI_S_MIN);
        self.mu_promoted = self.mu_promoted.max(0.0);
        self.mu_relegated = self.mu_relegated.min(0.0);
        self.h_p = self.h_p.max(0.0);
        self.h = self.h.max(self.h_p + HOME_GAP);
        *self != before
    }
}

/// Cross-league constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalParams {
    /// Initial rating deviation, > 0.
    pub phi0: f64,
    /// Initial volatility, > 0.
    pub sigma0: f64,
    /// Fitted draw offset; the per-match draw weight is c = d + s.
    pub d: f64,
    /// Volatility system constant, > 0.
    pub tau: f64,
    /// Rolling window (in matches) for the goal-rate draw signal.
    pub draw_signal_window: usize,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            phi0: 350.0 / crate::glicko::GLICKO2_SCALE,
            sigma0: 0.06,
            d: -0.2,
            tau: 0.5,
            draw_signal_window: 10,
        }
    }
}

impl GlobalParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if ![self.phi0, self.sigma0, self.d, self.tau]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(ParamError::Infeasible("non-finite global parameter".into()));
        }
        if self.phi0 <= 0.0 || self.sigma0 <= 0.0 || self.tau <= 0.0 {
            return Err(ParamError::Infeasible(
                "phi0, sigma0 and tau must be positive".into(),
            ));
        }
        if self.draw_signal_window == 0 {
            return Err(ParamError::Infeasible(
                "draw_signal_window must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn project(&mut self) -> bool {
        let before = *self;
        self.phi0 = self.phi0.max(1e-3);
        self.sigma0 = self.sigma0.max(1e-4);
        self.tau = self.tau.max(1e-3);
        self.draw_signal_window = self.draw_signal_window.max(1);
        *self != before
    }
}

/// The complete fitted state of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub globals: GlobalParams,
    pub per_league: BTreeMap<String, LeagueParams>,
}

impl ParamVector {
    /// Default parameters for the given leagues.
    pub fn for_leagues<I, S>(leagues: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ParamVector {
            globals: GlobalParams::default(),
            per_league: leagues
                .into_iter()
                .map(|l| (l.into(), LeagueParams::default()))
                .collect(),
        }
    }

    pub fn league(&self, id: &str) -> Option<&LeagueParams> {
        self.per_league.get(id)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        self.globals.validate()?;
        for params in self.per_league.values() {
            params.validate()?;
        }
        Ok(())
    }

    pub fn project(&mut self) -> bool {
        let mut moved = self.globals.project();
        for params in self.per_league.values_mut() {
            moved |= params.project();
        }
        moved
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let g = &self.globals;
        let _ = writeln!(out, "global.phi0 = {}", g.phi0);
        let _ = writeln!(out, "global.sigma0 = {}", g.sigma0);
        let _ = writeln!(out, "global.d = {}", g.d);
        let _ = writeln!(out, "global.tau = {}", g.tau);
        let _ = writeln!(out, "global.draw_signal_window = {}", g.draw_signal_window);
        for (league, p) in &self.per_league {
            let _ = writeln!(out, "league.{league}.mu_init = {}", p.mu_init);
            let _ = writeln!(out, "league.{league}.mu_new = {}", p.mu_new);
            let _ = writeln!(out, "league.{league}.mu_promoted = {}", p.mu_promoted);
            let _ = writeln!(out, "league.{league}.mu_relegated = {}", p.mu_relegated);
            let _ = writeln!(out, "league.{league}.phi_s = {}", p.phi_s);
            let _ = writeln!(out, "league.{league}.h = {}", p.h);
            let _ = writeln!(out, "league.{league}.h_p = {}", p.h_p);
        }
        out
    }

    /// Parses the key-value form. Blank lines and `#` comments are allowed.
    /// Every league block must be complete; the result is validated.
    pub fn from_text(text: &str) -> Result<Self, ParamError> {
        let mut globals: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut leagues: BTreeMap<String, BTreeMap<&str, (usize, &str)>> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or(ParamError::Malformed { line })?;
            let key = key.trim();
            let value = value.trim();
            if let Some(param) = key.strip_prefix("global.") {
                if !GLOBAL_KEYS.contains(&param) {
                    return Err(ParamError::UnknownKey {
                        line,
                        key: key.to_string(),
                    });
                }
                if globals.insert(param, (line, value)).is_some() {
                    return Err(ParamError::DuplicateKey {
                        line,
                        key: key.to_string(),
                    });
                }
            } else if let Some(rest) = key.strip_prefix("league.") {
                // League ids contain dots, so the parameter name is the
                // segment after the last dot.
                let (league, param) = rest
                    .rsplit_once('.')
                    .ok_or(ParamError::Malformed { line })?;
                if !LEAGUE_KEYS.contains(&param) {
                    return Err(ParamError::UnknownKey {
                        line,
                        key: key.to_string(),
                    });
                }
                if league.is_empty() {
                    return Err(ParamError::Malformed { line });
                }
                let param = LEAGUE_KEYS.iter().find(|k| **k == param).unwrap();
                if leagues
                    .entry(league.to_string())
                    .or_default()
                    .insert(param, (line, value))
                    .is_some()
                {
                    return Err(ParamError::DuplicateKey {
                        line,
                        key: key.to_string(),
                    });
                }
            } else {
                return Err(ParamError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
        }

        let f = |entry: Option<&(usize, &str)>, name: &str| -> Result<f64, ParamError> {
            let (line, value) = entry.ok_or_else(|| ParamError::MissingGlobal(name.into()))?;
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ParamError::BadValue {
                    line: *line,
                    value: value.to_string(),
                })
        };

        let window = {
            let (line, value) = globals
                .get("draw_signal_window")
                .ok_or_else(|| ParamError::MissingGlobal("draw_signal_window".into()))?;
            value.parse::<usize>().map_err(|_| ParamError::BadValue {
                line: *line,
                value: value.to_string(),
            })?
        };
        let global_params = GlobalParams {
            phi0: f(globals.get("phi0"), "phi0")?,
            sigma0: f(globals.get("sigma0"), "sigma0")?,
            d: f(globals.get("d"), "d")?,
            tau: f(globals.get("tau"), "tau")?,
            draw_signal_window: window,
        };

        let mut per_league = BTreeMap::new();
        for (league, entries) in leagues {
            let lf = |name: &str| -> Result<f64, ParamError> {
                let (line, value) =
                    entries
                        .get(name)
                        .ok_or_else(|| ParamError::MissingLeagueParam {
                            league: league.clone(),
                            param: name.into(),
                        })?;
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ParamError::BadValue {
                        line: *line,
                        value: value.to_string(),
                    })
            };
            let params = LeagueParams {
                mu_init: lf("mu_init")?,
                mu_new: lf("mu_new")?,
                mu_promoted: lf("mu_promoted")?,
                mu_relegated: lf("mu_relegated")?,
                phi_s: lf("phi_s")?,
                h: lf("h")?,
                h_p: lf("h_p")?,
            };
            per_league.insert(league, params);
        }

        let vector = ParamVector {
            globals: global_params,
            per_league,
        };
        vector.validate()?;
        Ok(vector)
    }
}

const GLOBAL_KEYS: [&str; 5] = ["phi0", "sigma0", "d", "tau", "draw_signal_window"];
const LEAGUE_KEYS: [&str; 7] = [
    "mu_init",
    "mu_new",
    "mu_promoted",
    "mu_relegated",
    "phi_s",
    "h",
    "h_p",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_feasible() {
        let v = ParamVector::for_leagues(["Eastland.First", "Eastland.Second"]);
        assert!(v.validate().is_ok());
    }

    #[test]
    fn round_trip_is_stable() {
        let mut v = ParamVector::for_leagues(["Eastland.First", "Westria.Second"]);
        v.globals.d = -0.21739130434782608;
        v.per_league.get_mut("Eastland.First").unwrap().h = 0.2500000000001;
        let text = v.to_text();
        let parsed = ParamVector::from_text(&text).unwrap();
        assert_eq!(parsed, v);
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn league_ids_with_dots_parse() {
        let v = ParamVector::for_leagues(["Bosnia And Herzegovina.First"]);
        let parsed = ParamVector::from_text(&v.to_text()).unwrap();
        assert!(parsed.league("Bosnia And Herzegovina.First").is_some());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let v = ParamVector::for_leagues(["L.First"]);
        let text = format!("# fitted on synth corpus\n\n{}", v.to_text());
        assert!(ParamVector::from_text(&text).is_ok());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ParamVector::from_text("global.k_factor = 32\n").unwrap_err();
        assert!(matches!(err, ParamError::UnknownKey { .. }));
    }

    #[test]
    fn incomplete_league_block_is_rejected() {
        let err = ParamVector::from_text(
            "global.phi0 = 2.0\nglobal.sigma0 = 0.06\nglobal.d = -0.2\nglobal.tau = 0.5\n\
             global.draw_signal_window = 10\nleague.X.First.h = 0.3\n",
        )
        .unwrap_err();
        assert!(matches!(err, ParamError::MissingLeagueParam { .. }));
    }

    #[test]
    fn infeasible_vector_is_rejected() {
        let mut v = ParamVector::for_leagues(["L.First"]);
        v.per_league.get_mut("L.First").unwrap().mu_new = 0.2;
        assert!(v.validate().is_err());
        assert!(ParamVector::from_text(&v.to_text()).is_err());
    }

    #[test]
    fn projection_restores_feasibility() {
        let mut v = ParamVector::for_leagues(["L.First"]);
        {
            let p = v.per_league.get_mut("L.First").unwrap();
            p.mu_new = 0.5;
            p.phi_s = -1.0;
            p.h = 0.05;
            p.h_p = 0.2;
        }
        assert!(v.project());
        assert!(v.validate().is_ok());
        let p = v.league("L.First").unwrap();
        assert!(p.h > p.h_p && p.h_p >= 0.0);
        assert!(!v.project(), "projection must be idempotent");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = ParamVector::from_text("global.d = -0.2\nglobal.d = -0.3\n").unwrap_err();
        assert!(matches!(err, ParamError::DuplicateKey { .. }));
    }
}
