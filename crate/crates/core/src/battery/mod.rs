//! Instrument definitions and scoring.
//!
//! A [`Battery`] is a typed list of items loaded from `battery/*.json` (schema
//! in `docs/battery.md`). Four standard instruments ship with the crate: a
//! synthetic GSS-style attitude bank, the BFI-44, five economic games and five
//! replication experiments.

mod bfi;
mod experiments;
mod games;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, AnswerValue, CorpusError, ResponseSet};

pub use bfi::{score_bfi, BfiKeyEntry, BfiSpec, BigFiveDim, BigFiveScores};
pub use experiments::{assign_condition, ConditionSpec, ExperimentId, ExperimentSpec, OutcomeSpec, TestKind};
pub use games::{game_payoff, normalize_game_response, GameActions, GameId, GameSpec, PdMove};

/// Categorical items with more options than this are not part of the core bank.
pub const MAX_CORE_OPTIONS: usize = 25;

#[derive(Debug, Error)]
pub enum BatteryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Load(#[from] CorpusError),
}

pub(crate) fn invalid(msg: impl Into<String>) -> BatteryError {
    BatteryError::InvalidArgument(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Categorical {
        options: Vec<String>,
        #[serde(default)]
        ordinal: bool,
    },
    Numeric {
        hist_min: f64,
        hist_max: f64,
    },
    Game {
        game_id: GameId,
    },
    Experiment {
        exp_id: ExperimentId,
        condition: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryItem {
    pub item_id: String,
    pub text: String,
    /// Taxonomy label used by composite-material exclusion.
    pub category: String,
    pub kind: ItemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional_on: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub free_form: bool,
}

impl BatteryItem {
    pub fn categorical(id: &str, category: &str, text: &str, options: &[&str], ordinal: bool) -> Self {
        Self {
            item_id: id.into(),
            text: text.into(),
            category: category.into(),
            kind: ItemKind::Categorical { options: options.iter().map(|s| s.to_string()).collect(), ordinal },
            conditional_on: None,
            free_form: false,
        }
    }

    pub fn numeric(id: &str, category: &str, text: &str, hist_min: f64, hist_max: f64) -> Self {
        Self {
            item_id: id.into(),
            text: text.into(),
            category: category.into(),
            kind: ItemKind::Numeric { hist_min, hist_max },
            conditional_on: None,
            free_form: false,
        }
    }

    pub fn options(&self) -> Option<&[String]> {
        match &self.kind {
            ItemKind::Categorical { options, .. } => Some(options),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        match &self.kind {
            ItemKind::Categorical { options, .. } if options.len() < 2 => {
                Err(invalid(format!("item `{}` needs at least two options", self.item_id)))
            }
            ItemKind::Numeric { hist_min, hist_max } if !(hist_min < hist_max) => {
                Err(invalid(format!("item `{}` needs hist_min < hist_max", self.item_id)))
            }
            _ => Ok(()),
        }
    }

    /// Checks that `answer` lies in this item's response domain.
    pub fn check_answer(&self, answer: &AnswerValue) -> Result<(), BatteryError> {
        let ok = match (&self.kind, answer) {
            (ItemKind::Categorical { options, .. }, AnswerValue::Option(i)) => *i < options.len(),
            (ItemKind::Numeric { .. }, AnswerValue::Number(x)) => x.is_finite(),
            (ItemKind::Game { game_id }, a) => normalize_game_response(*game_id, a).is_ok(),
            (ItemKind::Experiment { .. }, AnswerValue::Option(_) | AnswerValue::Number(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("answer {answer:?} is outside the domain of item `{}`", self.item_id)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Gss,
    Bfi44,
    Games,
    Experiments,
}

/// Fidelity construct an item is scored under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construct {
    GssCat,
    GssNum,
    Bfi,
    Games,
}

impl Construct {
    pub fn as_str(self) -> &'static str {
        match self {
            Construct::GssCat => "gss_cat",
            Construct::GssNum => "gss_num",
            Construct::Bfi => "bfi",
            Construct::Games => "games",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub battery_id: String,
    pub instrument: Instrument,
    pub items: Vec<BatteryItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bfi_key: Vec<BfiKeyEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentSpec>,
}

macro_rules! fixture {
    ($name:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/battery/", $name))
    };
}

impl Battery {
    pub fn from_json_str(text: &str) -> Result<Self, BatteryError> {
        let b: Battery = corpus::from_json_str(text)?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self, BatteryError> {
        let b: Battery = corpus::load_json(path)?;
        b.validate()?;
        Ok(b)
    }

    /// Synthetic 30-item GSS-style bank (24 categorical, 6 numeric).
    pub fn synthetic_gss() -> Self {
        Self::from_json_str(fixture!("gss_synthetic.json")).expect("bundled GSS bank is valid")
    }

    pub fn bfi44() -> Self {
        Self::from_json_str(fixture!("bfi44.json")).expect("bundled BFI-44 is valid")
    }

    pub fn games() -> Self {
        Self::from_json_str(fixture!("games.json")).expect("bundled games are valid")
    }

    pub fn experiments() -> Self {
        Self::from_json_str(fixture!("experiments.json")).expect("bundled experiments are valid")
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        let mut seen = BTreeSet::new();
        for item in &self.items {
            item.validate()?;
            if !seen.insert(item.item_id.as_str()) {
                return Err(invalid(format!("duplicate item id `{}`", item.item_id)));
            }
        }
        if self.instrument == Instrument::Bfi44 {
            let spec = self.bfi_spec()?;
            for e in &spec.entries {
                if !seen.contains(e.item_id.as_str()) {
                    return Err(invalid(format!("BFI key names unknown item `{}`", e.item_id)));
                }
            }
        }
        for exp in &self.experiments {
            exp.validate()?;
        }
        Ok(())
    }

    pub fn item(&self, item_id: &str) -> Option<&BatteryItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Distinct category labels in first-appearance order.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for item in &self.items {
            if !out.contains(&item.category.as_str()) {
                out.push(&item.category);
            }
        }
        out
    }

    pub fn bfi_spec(&self) -> Result<BfiSpec, BatteryError> {
        let spec = BfiSpec { entries: self.bfi_key.clone() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn experiment(&self, exp_id: &str) -> Result<&ExperimentSpec, BatteryError> {
        self.experiments
            .iter()
            .find(|e| e.exp_id.as_str() == exp_id)
            .ok_or_else(|| invalid(format!("unknown experiment `{exp_id}`")))
    }

    /// Construct under which `item` is scored, if any.
    pub fn construct_of(&self, item: &BatteryItem) -> Option<Construct> {
        match (self.instrument, &item.kind) {
            (Instrument::Gss, ItemKind::Categorical { .. }) => Some(Construct::GssCat),
            (Instrument::Gss, ItemKind::Numeric { .. }) => Some(Construct::GssNum),
            (Instrument::Bfi44, _) => Some(Construct::Bfi),
            (Instrument::Games, _) => Some(Construct::Games),
            _ => None,
        }
    }

    /// Every answer must name a known item and lie in its domain.
    pub fn validate_responses(&self, set: &ResponseSet) -> Result<(), BatteryError> {
        for (item_id, answer) in &set.answers {
            let item = self.item(item_id).ok_or_else(|| invalid(format!("response names unknown item `{item_id}`")))?;
            item.check_answer(answer)?;
        }
        Ok(())
    }
}

/// Keeps unconditional, closed-form items with at most 25 options; order preserved.
pub fn filter_gss_core(items: &[BatteryItem]) -> Vec<BatteryItem> {
    items
        .iter()
        .filter(|item| {
            item.conditional_on.is_none()
                && !item.free_form
                && item.options().is_none_or(|o| o.len() <= MAX_CORE_OPTIONS)
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Phase;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bundled_instruments_load() {
        let gss = Battery::synthetic_gss();
        assert_eq!(gss.len(), 30);
        let numeric = gss.items.iter().filter(|i| matches!(i.kind, ItemKind::Numeric { .. })).count();
        assert_eq!(numeric, 6);
        assert_eq!(filter_gss_core(&gss.items).len(), 30);
        assert_eq!(Battery::bfi44().len(), 44);
        assert_eq!(Battery::games().len(), 5);
        let exps = Battery::experiments();
        assert_eq!(exps.experiments.len(), 5);
        assert_eq!(exps.len(), 12);
    }

    #[test]
    fn filter_drops_wide_conditional_and_free_form() {
        let wide: Vec<String> = (0..30).map(|i| format!("o{i}")).collect();
        let wide: Vec<&str> = wide.iter().map(String::as_str).collect();
        let mut cond = BatteryItem::categorical("c", "x", "t", &["a", "b"], false);
        cond.conditional_on = Some("a".into());
        let mut free = BatteryItem::categorical("f", "x", "t", &["a", "b"], false);
        free.free_form = true;
        let items = vec![
            BatteryItem::categorical("wide", "x", "t", &wide, false),
            BatteryItem::categorical("four", "x", "t", &["a", "b", "c", "d"], false),
            cond,
            free,
            BatteryItem::categorical("edge", "x", "t", &wide[..25], false),
        ];
        let kept: Vec<_> = filter_gss_core(&items).into_iter().map(|i| i.item_id).collect();
        assert_eq!(kept, vec!["four", "edge"]);
    }

    #[test]
    fn filter_matches_direct_scan_on_generated_bank() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut items = Vec::new();
        let mut violating = 0;
        for i in 0..200 {
            let k = if i % 23 == 5 { 26 + rng.gen_range(0..10) } else { rng.gen_range(2..=25) };
            let opts: Vec<String> = (0..k).map(|j| format!("o{j}")).collect();
            let opts: Vec<&str> = opts.iter().map(String::as_str).collect();
            let mut item = BatteryItem::categorical(&format!("q{i}"), "x", "t", &opts, false);
            if i % 50 == 3 {
                item.conditional_on = Some("q0".into());
            }
            if i % 50 == 7 {
                item.free_form = true;
            }
            if k > 25 || item.conditional_on.is_some() || item.free_form {
                violating += 1;
            }
            items.push(item);
        }
        assert_eq!(violating, 17);
        let kept = filter_gss_core(&items);
        assert_eq!(kept.len(), 183);
        // order preserved
        let ids: Vec<_> = kept.iter().map(|i| i.item_id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort_by_key(|s| s[1..].parse::<u32>().unwrap());
        assert_eq!(ids, sorted);
    }

    #[test]
    fn degenerate_items_rejected() {
        assert!(BatteryItem::categorical("a", "x", "t", &["only"], false).validate().is_err());
        assert!(BatteryItem::numeric("n", "x", "t", 5.0, 5.0).validate().is_err());
        let json = r#"{"battery_id":"b","instrument":"gss","items":[
            {"item_id":"a","text":"t","category":"c","kind":{"categorical":{"options":["x","y"]}}},
            {"item_id":"a","text":"t","category":"c","kind":{"numeric":{"hist_min":0,"hist_max":1}}}]}"#;
        assert!(Battery::from_json_str(json).is_err());
    }

    #[test]
    fn bad_kind_reports_field_path() {
        let json = r#"{"battery_id":"b","instrument":"gss","items":[
            {"item_id":"a","text":"t","category":"c","kind":{"slider":{}}}]}"#;
        match Battery::from_json_str(json) {
            Err(BatteryError::Load(CorpusError::SchemaViolation { field, .. })) => {
                assert_eq!(field, "items[0].kind")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn response_validation() {
        let gss = Battery::synthetic_gss();
        let mut set = ResponseSet::new("p1", Phase::Phase1, "human");
        set.answers.insert("sex".into(), AnswerValue::Option(1));
        set.answers.insert("age".into(), AnswerValue::Number(40.0));
        gss.validate_responses(&set).unwrap();
        set.answers.insert("sex".into(), AnswerValue::Option(2));
        assert!(gss.validate_responses(&set).is_err());
        set.answers.remove("sex");
        set.answers.insert("nope".into(), AnswerValue::Option(0));
        assert!(gss.validate_responses(&set).is_err());
    }

    #[test]
    fn constructs_by_instrument() {
        let gss = Battery::synthetic_gss();
        assert_eq!(gss.construct_of(gss.item("sex").unwrap()), Some(Construct::GssCat));
        assert_eq!(gss.construct_of(gss.item("age").unwrap()), Some(Construct::GssNum));
        let exps = Battery::experiments();
        assert_eq!(exps.construct_of(&exps.items[0]), None);
        assert_eq!(gss.categories()[0], "politics");
    }
}
