use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActionKind, InterviewError, InterviewScript, Interviewer, SessionState};
use crate::llm::ChatBackend;

/// A scripted interviewee for headless runs. Answers for a question are used
/// in order; once exhausted (or for unlisted questions) `default_answer` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedInterviewee {
    pub participant_id: String,
    #[serde(default)]
    pub answers: BTreeMap<String, Vec<String>>,
    pub default_answer: String,
    /// Seconds attributed to each answer.
    pub answer_seconds: f64,
}

impl SimulatedInterviewee {
    fn answer(&self, question_id: &str, nth: usize) -> &str {
        self.answers.get(question_id).and_then(|v| v.get(nth)).map(String::as_str).unwrap_or(&self.default_answer)
    }
}

/// Drives a whole interview with a simulated interviewee. `max_turns` bounds
/// the number of answers in case a backend never lets a block close.
pub fn run_simulated<B: ChatBackend>(
    interviewer: &Interviewer<B>,
    script: InterviewScript,
    who: &SimulatedInterviewee,
    max_turns: usize,
) -> Result<SessionState, InterviewError> {
    let (mut s, mut action) = interviewer.begin_session(script, &who.participant_id)?;
    let mut per_question: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..max_turns {
        match action.kind {
            ActionKind::Finish => return Ok(s),
            ActionKind::Advance => {
                action = interviewer.next_action(&mut s)?;
                continue;
            }
            ActionKind::AskScripted | ActionKind::FollowUp => {}
        }
        let qid = s.current_question().expect("open block").id.clone();
        let nth = per_question.entry(qid.clone()).or_default();
        let text = who.answer(&qid, *nth).to_string();
        *nth += 1;
        action = interviewer.submit_answer(&mut s, &text, who.answer_seconds)?;
    }
    if s.finished {
        Ok(s)
    } else {
        Err(InterviewError::InvalidArgument(format!("interview did not finish within {max_turns} answers")))
    }
}
