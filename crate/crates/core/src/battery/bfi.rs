use serde::{Deserialize, Serialize};

use super::{invalid, BatteryError};
use crate::corpus::{AnswerValue, ResponseSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BigFiveDim {
    O,
    C,
    E,
    A,
    N,
}

impl BigFiveDim {
    pub const ALL: [BigFiveDim; 5] = [BigFiveDim::O, BigFiveDim::C, BigFiveDim::E, BigFiveDim::A, BigFiveDim::N];

    pub fn name(self) -> &'static str {
        match self {
            BigFiveDim::O => "openness",
            BigFiveDim::C => "conscientiousness",
            BigFiveDim::E => "extraversion",
            BigFiveDim::A => "agreeableness",
            BigFiveDim::N => "neuroticism",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfiKeyEntry {
    pub item_id: String,
    pub dimension: BigFiveDim,
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfiSpec {
    pub entries: Vec<BfiKeyEntry>,
}

impl BfiSpec {
    pub fn validate(&self) -> Result<(), BatteryError> {
        if self.entries.len() != 44 {
            return Err(invalid(format!("BFI key has {} entries, expected 44", self.entries.len())));
        }
        for dim in BigFiveDim::ALL {
            let n = self.entries.iter().filter(|e| e.dimension == dim).count();
            if !(8..=10).contains(&n) {
                return Err(invalid(format!("BFI dimension {} has {n} items", dim.name())));
            }
        }
        Ok(())
    }
}

/// Dimension means on the 1..5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BigFiveScores {
    pub openness: f64,
    pub conscientiousness: f64,
    pub extraversion: f64,
    pub agreeableness: f64,
    pub neuroticism: f64,
}

impl BigFiveScores {
    fn from_array(v: [f64; 5]) -> Self {
        Self { openness: v[0], conscientiousness: v[1], extraversion: v[2], agreeableness: v[3], neuroticism: v[4] }
    }

    pub fn get(&self, dim: BigFiveDim) -> f64 {
        self.to_array()[dim.index()]
    }

    /// Scores in O, C, E, A, N order.
    pub fn to_array(&self) -> [f64; 5] {
        [self.openness, self.conscientiousness, self.extraversion, self.agreeableness, self.neuroticism]
    }
}

/// Likert value of a recorded answer: option index `i` is `i + 1`, a number
/// must be an integer in 1..5.
pub fn likert_value(answer: &AnswerValue) -> Option<f64> {
    match answer {
        AnswerValue::Option(i) if *i < 5 => Some(*i as f64 + 1.0),
        AnswerValue::Number(x) if x.fract() == 0.0 && (1.0..=5.0).contains(x) => Some(*x),
        _ => None,
    }
}

/// Reverse-codes flagged items (x to 6 - x) and averages each dimension.
pub fn score_bfi(responses: &ResponseSet, spec: &BfiSpec) -> Result<BigFiveScores, BatteryError> {
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    for e in &spec.entries {
        let answer =
            responses.get(&e.item_id).ok_or_else(|| invalid(format!("missing BFI answer for `{}`", e.item_id)))?;
        let x = likert_value(answer)
            .ok_or_else(|| invalid(format!("BFI answer for `{}` is not on the 1..5 scale", e.item_id)))?;
        let i = e.dimension.index();
        sums[i] += if e.reversed { 6.0 - x } else { x };
        counts[i] += 1;
    }
    let mut means = [0.0; 5];
    for i in 0..5 {
        if counts[i] == 0 {
            return Err(invalid(format!("BFI key has no items for {}", BigFiveDim::ALL[i].name())));
        }
        means[i] = sums[i] / counts[i] as f64;
    }
    Ok(BigFiveScores::from_array(means))
}
