//! Interviewer prompt templates. The template bodies are kept verbatim; only
//! the `<...>` slots are filled.

pub const REFLECTION_TEMPLATE: &str = "Here is a conversation between an interviewer and an interviewee.
{transcript}

Task: Succinctly summarize the facts about the interviewee based on the conversation above in a few bullet points -- again, think short, concise bullet points.";

pub const ACTION_TEMPLATE: &str = "Meta info:
Language: English
Description of the interviewer ({interviewer}): {description}
Notes on the interviewee: {notes}

Context:
This is a hypothetical interview between the interviewer and an interviewee. In this conversation, the interviewer is trying to ask the following question: \"{question}\"

Current conversation:

{transcript}

=*=*=*

Task Description:

Interview objective: By the end of this conversation, the interviewer has to learn the following: {objective}

Safety note: In an extreme case where the interviewee **explicitly** refuses to answer the question for privacy reasons, do not force the interviewee to answer by pivoting to other relevant topics.

Output the following:

1) Assess the interview progress by reasoning step by step -- what did the interviewee say so far, and in your view, what would count as the interview objective being achieved? Write a short (3~4 sentences) assessment on whether the interview objective is being achieved. While staying on the current topic, what kind of follow-up questions should the interviewer further ask the interviewee to better achieve your interview objective?

2) Author the interviewer's next utterance. To not go too far astray from the interview objective, author a follow-up question that would better achieve the interview objective.";

/// Appended to the action prompt so the reply carries an explicit move-on signal.
pub const DECISION_SUFFIX: &str = "

Finish your output with exactly these two lines:
OBJECTIVE_MET: yes or no
UTTERANCE: <the interviewer's next utterance>";

pub const OBJECTIVE_MARKER: &str = "OBJECTIVE_MET:";
pub const UTTERANCE_MARKER: &str = "UTTERANCE:";

pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    // single pass so slot values containing `{...}` are never re-expanded
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        let hit = slots.iter().find(|(k, _)| {
            tail.len() > k.len() + 1 && tail[1..].starts_with(k) && tail.as_bytes()[k.len() + 1] == b'}'
        });
        match hit {
            Some((k, v)) => {
                out.push_str(v);
                rest = &tail[k.len() + 2..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_does_not_reexpand_values() {
        let s = fill("a {x} b {y}", &[("x", "{y}"), ("y", "Y")]);
        assert_eq!(s, "a {y} b Y");
    }

    #[test]
    fn unknown_slots_are_left_alone() {
        assert_eq!(fill("{z} {x}", &[("x", "1")]), "{z} 1");
    }
}
