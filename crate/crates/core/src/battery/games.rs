use std::fmt;

use serde::{Deserialize, Serialize};

use super::{invalid, BatteryError};
use crate::corpus::AnswerValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameId {
    Dictator,
    TrustP1,
    TrustP2,
    PublicGoods,
    PrisonersDilemma,
}

impl GameId {
    pub const ALL: [GameId; 5] =
        [GameId::Dictator, GameId::TrustP1, GameId::TrustP2, GameId::PublicGoods, GameId::PrisonersDilemma];

    pub fn as_str(self) -> &'static str {
        match self {
            GameId::Dictator => "dictator",
            GameId::TrustP1 => "trust_p1",
            GameId::TrustP2 => "trust_p2",
            GameId::PublicGoods => "public_goods",
            GameId::PrisonersDilemma => "prisoners_dilemma",
        }
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdMove {
    Cooperate,
    Defect,
}

impl PdMove {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cooperate" => Some(PdMove::Cooperate),
            "defect" => Some(PdMove::Defect),
            _ => None,
        }
    }
}

/// Parameters of one game as offered to participants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub game_id: GameId,
    pub endowment: f64,
    /// Multiplier on money passed on (trust) or pooled (public goods).
    pub multiplier: f64,
    pub players: usize,
    /// Normalization bounds: the offered response range.
    pub min: f64,
    pub max: f64,
}

impl GameSpec {
    pub fn standard(game_id: GameId) -> Self {
        let (endowment, multiplier, players, min, max) = match game_id {
            GameId::Dictator => (5.0, 1.0, 2, 0.0, 5.0),
            GameId::TrustP1 => (3.0, 3.0, 2, 0.0, 3.0),
            // the second mover can return at most the tripled full endowment
            GameId::TrustP2 => (3.0, 3.0, 2, 0.0, 9.0),
            GameId::PublicGoods => (4.0, 2.0, 4, 0.0, 4.0),
            GameId::PrisonersDilemma => (0.0, 1.0, 2, 0.0, 1.0),
        };
        Self { game_id, endowment, multiplier, players, min, max }
    }
}

/// Actions of all players in one round.
#[derive(Debug, Clone, PartialEq)]
pub enum GameActions {
    Dictator { give: f64 },
    Trust { send: f64, returned: f64 },
    PublicGoods { contributions: [f64; 4] },
    PrisonersDilemma { first: PdMove, second: PdMove },
}

fn in_range(name: &str, x: f64, lo: f64, hi: f64) -> Result<(), BatteryError> {
    if x.is_finite() && (lo..=hi).contains(&x) {
        Ok(())
    } else {
        Err(invalid(format!("{name} {x} is outside [{lo}, {hi}]")))
    }
}

/// Dollars earned by each player.
pub fn game_payoff(game_id: GameId, actions: &GameActions) -> Result<Vec<f64>, BatteryError> {
    match (game_id, actions) {
        (GameId::Dictator, GameActions::Dictator { give }) => {
            in_range("dictator give", *give, 0.0, 5.0)?;
            Ok(vec![5.0 - give, *give])
        }
        (GameId::TrustP1 | GameId::TrustP2, GameActions::Trust { send, returned }) => {
            in_range("trust send", *send, 0.0, 3.0)?;
            in_range("trust return", *returned, 0.0, 3.0 * send)?;
            Ok(vec![3.0 - send + returned, 3.0 * send - returned])
        }
        (GameId::PublicGoods, GameActions::PublicGoods { contributions }) => {
            for c in contributions {
                in_range("public goods contribution", *c, 0.0, 4.0)?;
            }
            let share = 2.0 * contributions.iter().sum::<f64>() / 4.0;
            Ok(contributions.iter().map(|c| 4.0 - c + share).collect())
        }
        (GameId::PrisonersDilemma, GameActions::PrisonersDilemma { first, second }) => {
            use PdMove::*;
            let (a, b) = match (first, second) {
                (Cooperate, Cooperate) => (6.0, 6.0),
                (Cooperate, Defect) => (2.0, 8.0),
                (Defect, Cooperate) => (8.0, 2.0),
                (Defect, Defect) => (4.0, 4.0),
            };
            Ok(vec![a, b])
        }
        (g, a) => Err(invalid(format!("actions {a:?} do not belong to game `{g}`"))),
    }
}

/// Maps a response onto [0, 1] using the offered range; cooperation is 1.
pub fn normalize_game_response(game_id: GameId, raw: &AnswerValue) -> Result<f64, BatteryError> {
    let spec = GameSpec::standard(game_id);
    match (game_id, raw) {
        (GameId::PrisonersDilemma, AnswerValue::Choice(s)) => match PdMove::parse(s) {
            Some(PdMove::Cooperate) => Ok(1.0),
            Some(PdMove::Defect) => Ok(0.0),
            None => Err(invalid(format!("`{s}` is not a prisoner's dilemma move"))),
        },
        (GameId::PrisonersDilemma, _) => Err(invalid("prisoner's dilemma expects cooperate or defect")),
        (_, AnswerValue::Number(x)) => {
            in_range(game_id.as_str(), *x, spec.min, spec.max)?;
            Ok((x - spec.min) / (spec.max - spec.min))
        }
        (_, other) => Err(invalid(format!("game `{game_id}` expects a dollar amount, got {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pd_matrix() {
        use PdMove::*;
        let pay = |a, b| {
            game_payoff(GameId::PrisonersDilemma, &GameActions::PrisonersDilemma { first: a, second: b }).unwrap()
        };
        assert_eq!(pay(Cooperate, Cooperate), vec![6.0, 6.0]);
        assert_eq!(pay(Cooperate, Defect), vec![2.0, 8.0]);
        assert_eq!(pay(Defect, Cooperate), vec![8.0, 2.0]);
        assert_eq!(pay(Defect, Defect), vec![4.0, 4.0]);
    }

    #[test]
    fn public_goods_examples() {
        let pay = |c| game_payoff(GameId::PublicGoods, &GameActions::PublicGoods { contributions: c }).unwrap();
        assert_eq!(pay([4.0; 4]), vec![8.0; 4]);
        assert_eq!(pay([4.0, 0.0, 0.0, 0.0]), vec![2.0, 6.0, 6.0, 6.0]);
    }

    #[test]
    fn trust_and_dictator() {
        let t = game_payoff(GameId::TrustP2, &GameActions::Trust { send: 2.0, returned: 3.0 }).unwrap();
        assert_eq!(t, vec![4.0, 3.0]);
        assert!(game_payoff(GameId::TrustP1, &GameActions::Trust { send: 1.0, returned: 3.5 }).is_err());
        assert!(game_payoff(GameId::Dictator, &GameActions::Dictator { give: 5.5 }).is_err());
        assert!(game_payoff(GameId::Dictator, &GameActions::Trust { send: 1.0, returned: 0.0 }).is_err());
    }

    #[test]
    fn normalization_examples() {
        let n = |g, x| normalize_game_response(g, &AnswerValue::Number(x)).unwrap();
        assert_eq!(n(GameId::Dictator, 2.0), 0.4);
        assert_eq!(n(GameId::TrustP1, 0.0), 0.0);
        assert_eq!(n(GameId::TrustP2, 9.0), 1.0);
        assert_eq!(
            normalize_game_response(GameId::PrisonersDilemma, &AnswerValue::Choice("defect".into())).unwrap(),
            0.0
        );
        assert_eq!(
            normalize_game_response(GameId::PrisonersDilemma, &AnswerValue::Choice("Cooperate".into())).unwrap(),
            1.0
        );
        assert!(normalize_game_response(GameId::PublicGoods, &AnswerValue::Number(4.5)).is_err());
        assert!(normalize_game_response(GameId::PrisonersDilemma, &AnswerValue::Number(1.0)).is_err());
    }

    #[test]
    fn public_goods_closed_form_over_grid() {
        let grid = [0.0, 1.0, 2.5, 4.0];
        for a in grid {
            for b in grid {
                for c in grid {
                    for d in grid {
                        let cs = [a, b, c, d];
                        let pay =
                            game_payoff(GameId::PublicGoods, &GameActions::PublicGoods { contributions: cs }).unwrap();
                        let total: f64 = pay.iter().sum();
                        assert!((total - (16.0 + cs.iter().sum::<f64>())).abs() < 1e-12);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn dictator_conserves_endowment(g in 0.0f64..=5.0) {
            let pay = game_payoff(GameId::Dictator, &GameActions::Dictator { give: g }).unwrap();
            prop_assert!((pay[0] + pay[1] - 5.0).abs() < 1e-12);
        }

        #[test]
        fn normalization_strictly_monotone(game in 0usize..4, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let g = GameId::ALL[game];
            let spec = GameSpec::standard(g);
            let (x, y) = (spec.min + a * (spec.max - spec.min), spec.min + b * (spec.max - spec.min));
            let nx = normalize_game_response(g, &AnswerValue::Number(x)).unwrap();
            let ny = normalize_game_response(g, &AnswerValue::Number(y)).unwrap();
            prop_assert!((0.0..=1.0).contains(&nx));
            if x < y { prop_assert!(nx < ny); }
            if x == y { prop_assert_eq!(nx, ny); }
        }
    }

    #[test]
    fn bounds_hit_zero_and_one() {
        for g in &GameId::ALL[..4] {
            let s = GameSpec::standard(*g);
            assert_eq!(normalize_game_response(*g, &AnswerValue::Number(s.min)).unwrap(), 0.0);
            assert_eq!(normalize_game_response(*g, &AnswerValue::Number(s.max)).unwrap(), 1.0);
        }
    }
}
