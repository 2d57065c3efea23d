use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompts::{DEMOGRAPHIC_TEMPLATE, SUMMARY_TEMPLATE};
use super::{fill_template, invalid, AgentError, ConditioningMaterial, Variant};
use crate::battery::{Battery, BatteryItem, ItemKind, OutcomeSpec};
use crate::corpus::{render_turns, AnswerValue, InterviewTranscript, ResponseSet};
use crate::llm::{ChatBackend, ChatRequest};

/// Inputs of the first-person demographic descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub ideology: String,
    pub party: String,
    pub race: String,
    pub gender: String,
    pub age: f64,
}

impl Demographics {
    /// Reads `polviews`, `partyid`, `race`, `sex` and `age` from GSS answers.
    pub fn from_gss(answers: &ResponseSet, gss: &Battery) -> Result<Self, AgentError> {
        let label = |attr: &str, item_id: &str| -> Result<String, AgentError> {
            let missing = || invalid(format!("missing demographic attribute `{attr}` (item `{item_id}`)"));
            let item = gss.item(item_id).ok_or_else(missing)?;
            let answer = answers.get(item_id).ok_or_else(missing)?;
            answer_text(item, gss, answer).ok_or_else(missing)
        };
        let age = answers
            .get("age")
            .and_then(AnswerValue::as_number)
            .ok_or_else(|| invalid("missing demographic attribute `age` (item `age`)"))?;
        Ok(Self {
            ideology: label("ideology", "polviews")?,
            party: label("party", "partyid")?,
            race: label("race", "race")?,
            gender: label("gender", "sex")?,
            age,
        })
    }
}

fn with_article(noun: &str) -> String {
    let vowel = noun.chars().next().is_some_and(|c| "aeiouAEIOU".contains(c));
    format!("{} {noun}", if vowel { "an" } else { "a" })
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

pub fn build_demographic_material(d: &Demographics) -> Result<ConditioningMaterial, AgentError> {
    for (name, v) in [("ideology", &d.ideology), ("party", &d.party), ("race", &d.race), ("gender", &d.gender)] {
        if v.trim().is_empty() {
            return Err(invalid(format!("missing demographic attribute `{name}`")));
        }
    }
    if !d.age.is_finite() || d.age < 0.0 {
        return Err(invalid("missing demographic attribute `age`"));
    }
    let text = fill_template(
        DEMOGRAPHIC_TEMPLATE,
        &[
            ("ideology", &d.ideology),
            ("party", &with_article(&d.party)),
            ("race", &d.race),
            ("gender", &d.gender),
            ("age", &format_number(d.age)),
        ],
    );
    ConditioningMaterial::new(Variant::Demographic, text, vec![])
}

/// Which question/response pairs survive a lesion: a seeded permutation
/// decides the removal order, so kept sets are nested as the fraction grows.
pub fn lesion_keep(pairs: usize, fifths: u8, seed: u64) -> Vec<bool> {
    let remove = (fifths as usize * pairs * 2 + 5) / 10;
    let mut order: Vec<usize> = (0..pairs).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = vec![true; pairs];
    for &i in &order[..remove] {
        keep[i] = false;
    }
    keep
}

/// Removes `round(fraction * N)` of the N question/response pairs, in order.
pub fn lesion_transcript(
    t: &InterviewTranscript,
    fraction: f64,
    seed: u64,
) -> Result<ConditioningMaterial, AgentError> {
    let variant = Variant::lesioned(fraction)?;
    let Variant::Lesioned(fifths) = variant else { unreachable!() };
    let blocks = t.question_blocks();
    let keep = lesion_keep(blocks.len(), fifths, seed);
    let text: String = blocks.iter().zip(&keep).filter(|(_, k)| **k).map(|(b, _)| render_turns(b)).collect();
    Ok(ConditioningMaterial { variant, text, provenance: vec![t.participant_id.clone()] })
}

pub fn summarize_material<B: ChatBackend>(
    t: &InterviewTranscript,
    backend: &B,
) -> Result<ConditioningMaterial, AgentError> {
    if t.is_empty() {
        return Err(invalid("transcript is empty"));
    }
    let rendered = t.render();
    let prompt = fill_template(SUMMARY_TEMPLATE, &[("transcript", rendered.trim_end())]);
    let reply = backend.complete(&ChatRequest::user("summarize", prompt))?;
    ConditioningMaterial::new(Variant::Summary, reply.trim(), vec![t.participant_id.clone()])
}

/// Human-readable text of an answer.
pub(crate) fn answer_text(item: &BatteryItem, battery: &Battery, answer: &AnswerValue) -> Option<String> {
    match (&item.kind, answer) {
        (ItemKind::Categorical { options, .. }, AnswerValue::Option(i)) => options.get(*i).cloned(),
        (ItemKind::Experiment { exp_id, .. }, AnswerValue::Option(i)) => {
            match &battery.experiment(exp_id.as_str()).ok()?.outcome {
                OutcomeSpec::Choice { options, .. } => options.get(*i).cloned(),
                OutcomeSpec::Scale { .. } => None,
            }
        }
        (_, AnswerValue::Number(x)) => Some(format_number(*x)),
        (_, AnswerValue::Choice(c)) => Some(c.clone()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeLine {
    pub category: String,
    pub item_id: String,
    pub line: String,
}

/// Survey answers as `Q: ... A: ...` lines, rendered per query so that the
/// queried item's category can be left out.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Composite {
    pub lines: Vec<CompositeLine>,
}

impl Composite {
    pub fn from_responses(responses: &[&ResponseSet], batteries: &[&Battery]) -> Self {
        let mut lines = Vec::new();
        for b in batteries {
            for item in &b.items {
                let Some(answer) = responses.iter().find_map(|r| r.get(&item.item_id)) else { continue };
                let Some(text) = answer_text(item, b, answer) else { continue };
                lines.push(CompositeLine {
                    category: item.category.clone(),
                    item_id: item.item_id.clone(),
                    line: format!("Q: {} A: {text}", item.text),
                });
            }
        }
        Self { lines }
    }

    pub fn render(&self, exclude_category: Option<&str>) -> String {
        self.lines
            .iter()
            .filter(|l| Some(l.category.as_str()) != exclude_category)
            .map(|l| l.line.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Share of lines dropped when excluding `category`.
    pub fn excluded_fraction(&self, category: &str) -> f64 {
        if self.lines.is_empty() {
            return 0.0;
        }
        self.lines.iter().filter(|l| l.category == category).count() as f64 / self.lines.len() as f64
    }
}

/// Composite material without `exclude_category`, plus the excluded share.
pub fn build_composite_material(
    responses: &[&ResponseSet],
    batteries: &[&Battery],
    exclude_category: &str,
) -> Result<(ConditioningMaterial, f64), AgentError> {
    if !batteries.iter().any(|b| b.categories().contains(&exclude_category)) {
        return Err(invalid(format!("unknown category `{exclude_category}`")));
    }
    let c = Composite::from_responses(responses, batteries);
    let provenance = responses.iter().map(|r| format!("{}.{}", r.subject_id, r.phase.as_str())).collect();
    let m = ConditioningMaterial { variant: Variant::Composite, text: c.render(Some(exclude_category)), provenance };
    Ok((m, c.excluded_fraction(exclude_category)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Phase, Speaker};
    use crate::llm::{MockRule, ScriptedMock};

    fn demo(ideology: &str, party: &str, race: &str, gender: &str, age: f64) -> Demographics {
        Demographics { ideology: ideology.into(), party: party.into(), race: race.into(), gender: gender.into(), age }
    }

    #[test]
    fn demographic_sample_paragraph() {
        let m = build_demographic_material(&demo("conservative", "strong Republican", "white", "male", 50.0)).unwrap();
        assert_eq!(
            m.text,
            "Ideologically, I describe myself as conservative. Politically, I am a strong Republican. Racially, I am white. I am male. In terms of age, I am 50 years old."
        );
        let m = build_demographic_material(&demo("liberal", "strong Democrat", "black", "female", 30.0)).unwrap();
        assert!(m.text.contains("as liberal.") && m.text.contains("a strong Democrat") && m.text.contains("30 years"));
        let m = build_demographic_material(&demo("moderate", "independent", "other", "female", 41.0)).unwrap();
        assert!(m.text.contains("I am an independent."));
    }

    #[test]
    fn demographics_from_gss_answers() {
        let gss = Battery::synthetic_gss();
        let mut r = ResponseSet::new("p", Phase::Phase1, "human");
        r.answers.insert("polviews".into(), AnswerValue::Option(5));
        r.answers.insert("partyid".into(), AnswerValue::Option(6));
        r.answers.insert("race".into(), AnswerValue::Option(0));
        r.answers.insert("sex".into(), AnswerValue::Option(0));
        let err = Demographics::from_gss(&r, &gss).unwrap_err();
        assert!(err.to_string().contains("age"));
        r.answers.insert("age".into(), AnswerValue::Number(50.0));
        let d = Demographics::from_gss(&r, &gss).unwrap();
        assert_eq!(d, demo("conservative", "strong Republican", "white", "male", 50.0));
    }

    fn transcript(pairs: usize) -> InterviewTranscript {
        let mut t = InterviewTranscript::new("p1");
        for i in 0..pairs {
            t.push(Speaker::Interviewer, Some(format!("q{i}")), format!("Question {i}?"));
            t.push(Speaker::Participant, Some(format!("q{i}")), format!("Answer {i}."));
            t.push(Speaker::Interviewer, Some(format!("q{i}")), format!("Follow-up {i}?"));
            t.push(Speaker::Participant, Some(format!("q{i}")), format!("More {i}."));
        }
        t
    }

    #[test]
    fn lesion_counts_and_determinism() {
        let t = transcript(10);
        assert_eq!(lesion_transcript(&t, 0.0, 1).unwrap().text, t.render());
        let m = lesion_transcript(&t, 0.8, 1).unwrap();
        assert_eq!(m.text.matches("Question").count(), 2);
        // follow-ups travel with their question
        assert_eq!(m.text.matches("Follow-up").count(), 2);
        assert_eq!(m, lesion_transcript(&t, 0.8, 1).unwrap());
        assert!(lesion_transcript(&t, 0.3, 1).is_err());
    }

    #[test]
    fn lesion_is_nested_in_fraction() {
        for seed in 0..20 {
            let sets: Vec<Vec<bool>> = (0..5).map(|f| lesion_keep(13, f, seed)).collect();
            for w in sets.windows(2) {
                let removed = |k: &Vec<bool>| k.iter().filter(|x| !**x).count();
                assert!(removed(&w[0]) <= removed(&w[1]));
                assert!(w[0].iter().zip(&w[1]).all(|(a, b)| *a || !*b));
            }
        }
    }

    #[test]
    fn summary_passthrough_and_guard() {
        let mock = ScriptedMock::new(vec![MockRule::contains("bulleted list", "- job: nurse")]).unwrap();
        let m = summarize_material(&transcript(3), &mock).unwrap();
        assert_eq!((m.variant, m.text.as_str()), (Variant::Summary, "- job: nurse"));
        assert!(summarize_material(&InterviewTranscript::new("x"), &mock).is_err());
    }

    #[test]
    fn composite_exclusion() {
        let items: Vec<BatteryItem> = (0..10)
            .map(|i| {
                BatteryItem::categorical(
                    &format!("i{i}"),
                    if i < 2 { "target" } else { "other" },
                    &format!("Item {i}?"),
                    &["a", "b"],
                    false,
                )
            })
            .collect();
        let b = Battery { items, ..Battery::synthetic_gss() };
        let mut r = ResponseSet::new("p", Phase::Phase1, "human");
        for i in 0..10 {
            r.answers.insert(format!("i{i}"), AnswerValue::Option(i % 2));
        }
        let (m, frac) = build_composite_material(&[&r], &[&b], "target").unwrap();
        assert_eq!(m.text.lines().count(), 8);
        assert_eq!(frac, 0.2);
        assert!(m.text.starts_with("Q: Item 2? A: a"));
        assert!(matches!(build_composite_material(&[&r], &[&b], "nope"), Err(AgentError::InvalidArgument(_))));
        let gss = Battery::synthetic_gss();
        let (m, frac) = build_composite_material(&[&r], &[&b, &gss], "religion").unwrap();
        assert_eq!((m.text.lines().count(), frac), (10, 0.0));
    }
}
