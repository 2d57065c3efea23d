use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{invalid, Battery, BatteryError};
use crate::corpus::AnswerValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Ames2015,
    Cooney2016,
    Halevy2015,
    Rai2017,
    Schilke2015,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Ames2015 => "ames2015",
            ExperimentId::Cooney2016 => "cooney2016",
            ExperimentId::Halevy2015 => "halevy2015",
            ExperimentId::Rai2017 => "rai2017",
            ExperimentId::Schilke2015 => "schilke2015",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[serde(rename = "chi2_equal_prop")]
    Chi2EqualProp,
    TInd,
    #[serde(rename = "anova2x2_interaction")]
    Anova2x2Interaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub label: String,
    pub stimulus: String,
    /// Cell coordinates for 2x2 designs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeSpec {
    /// Multiple choice coded 1 when the chosen index is in `positive`.
    Choice {
        question: String,
        options: Vec<String>,
        positive: Vec<usize>,
    },
    Scale {
        question: String,
        min: f64,
        max: f64,
    },
}

impl OutcomeSpec {
    pub fn question(&self) -> &str {
        match self {
            OutcomeSpec::Choice { question, .. } | OutcomeSpec::Scale { question, .. } => question,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub exp_id: ExperimentId,
    pub title: String,
    /// Stimulus text is a paraphrase of the original materials.
    #[serde(default)]
    pub paraphrased: bool,
    pub test: TestKind,
    pub conditions: Vec<ConditionSpec>,
    pub outcome: OutcomeSpec,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), BatteryError> {
        let id = self.exp_id;
        match self.test {
            TestKind::Anova2x2Interaction => {
                if self.conditions.len() != 4 {
                    return Err(invalid(format!("{id}: a 2x2 design needs four conditions")));
                }
                let mut cells: Vec<_> = self.conditions.iter().map(|c| c.factors).collect();
                cells.sort();
                if cells != [Some([0, 0]), Some([0, 1]), Some([1, 0]), Some([1, 1])] {
                    return Err(invalid(format!("{id}: conditions must cover the four 2x2 cells")));
                }
            }
            _ if self.conditions.len() != 2 => {
                return Err(invalid(format!("{id}: two-group tests need exactly two conditions")));
            }
            _ => {}
        }
        match (&self.outcome, self.test) {
            (OutcomeSpec::Choice { options, positive, .. }, TestKind::Chi2EqualProp) => {
                if options.len() < 2 || positive.is_empty() || positive.iter().any(|p| *p >= options.len()) {
                    return Err(invalid(format!("{id}: malformed choice outcome")));
                }
            }
            (OutcomeSpec::Scale { min, max, .. }, TestKind::TInd | TestKind::Anova2x2Interaction) => {
                if !(min < max) {
                    return Err(invalid(format!("{id}: scale needs min < max")));
                }
            }
            _ => return Err(invalid(format!("{id}: outcome coding does not fit the test"))),
        }
        Ok(())
    }

    pub fn condition(&self, label: &str) -> Result<&ConditionSpec, BatteryError> {
        self.conditions
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| invalid(format!("{}: unknown condition `{label}`", self.exp_id)))
    }

    /// Binary outcomes code to 0/1, scales to their raw value.
    pub fn code_outcome(&self, answer: &AnswerValue) -> Result<f64, BatteryError> {
        match (&self.outcome, answer) {
            (OutcomeSpec::Choice { options, positive, .. }, AnswerValue::Option(i)) if *i < options.len() => {
                Ok(if positive.contains(i) { 1.0 } else { 0.0 })
            }
            (OutcomeSpec::Scale { min, max, .. }, AnswerValue::Number(x)) if (*min..=*max).contains(x) => Ok(*x),
            _ => Err(invalid(format!("{}: answer {answer:?} does not fit the outcome", self.exp_id))),
        }
    }

    /// Condition for `participant_id`: SHA-256 of `seed:exp:participant`, reduced mod the condition count.
    pub fn assign(&self, participant_id: &str, seed: u64) -> &ConditionSpec {
        let digest = Sha256::digest(format!("{seed}:{}:{participant_id}", self.exp_id).as_bytes());
        let word = u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
        &self.conditions[(word % self.conditions.len() as u64) as usize]
    }
}

/// Deterministic condition assignment against the bundled experiment set.
pub fn assign_condition(participant_id: &str, exp_id: &str, seed: u64) -> Result<String, BatteryError> {
    let battery = Battery::experiments();
    let spec = battery.experiment(exp_id)?;
    Ok(spec.assign(participant_id, seed).label.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn assignment_is_deterministic() {
        let a = assign_condition("p0042", "rai2017", 7).unwrap();
        assert_eq!(a, assign_condition("p0042", "rai2017", 7).unwrap());
        assert!(matches!(assign_condition("p1", "milgram1963", 7), Err(BatteryError::InvalidArgument(_))));
    }

    #[test]
    fn assignment_is_balanced() {
        let battery = Battery::experiments();
        for spec in &battery.experiments {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for i in 0..10_000 {
                *counts.entry(&spec.assign(&format!("synthetic-{i}"), 3).label).or_default() += 1;
            }
            let expected = 1.0 / spec.conditions.len() as f64;
            for (label, n) in counts {
                let share = n as f64 / 10_000.0;
                assert!((share - expected).abs() < 0.02, "{} {label}: {share}", spec.exp_id);
            }
        }
    }

    #[test]
    fn bundled_designs() {
        let battery = Battery::experiments();
        let tests: Vec<_> = battery.experiments.iter().map(|e| (e.exp_id.as_str(), e.test)).collect();
        assert_eq!(
            tests,
            vec![
                ("ames2015", TestKind::Chi2EqualProp),
                ("cooney2016", TestKind::Anova2x2Interaction),
                ("halevy2015", TestKind::TInd),
                ("rai2017", TestKind::TInd),
                ("schilke2015", TestKind::Chi2EqualProp),
            ]
        );
        assert!(battery.experiments.iter().all(|e| e.paraphrased));
    }

    #[test]
    fn outcome_coding() {
        let battery = Battery::experiments();
        let ames = battery.experiment("ames2015").unwrap();
        assert_eq!(ames.code_outcome(&AnswerValue::Option(0)).unwrap(), 1.0);
        assert_eq!(ames.code_outcome(&AnswerValue::Option(3)).unwrap(), 0.0);
        assert!(ames.code_outcome(&AnswerValue::Option(5)).is_err());
        let rai = battery.experiment("rai2017").unwrap();
        assert_eq!(rai.code_outcome(&AnswerValue::Number(4.0)).unwrap(), 4.0);
        assert!(rai.code_outcome(&AnswerValue::Number(8.0)).is_err());
    }

    #[test]
    fn malformed_design_rejected() {
        let mut spec = Battery::experiments().experiment("halevy2015").unwrap().clone();
        spec.conditions.pop();
        assert!(spec.validate().is_err());
        let mut spec = Battery::experiments().experiment("cooney2016").unwrap().clone();
        spec.conditions[0].factors = Some([1, 1]);
        assert!(spec.validate().is_err());
    }
}
