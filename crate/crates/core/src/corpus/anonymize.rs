use regex::RegexBuilder;

use super::{CorpusError, InterviewTranscript};

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Replaces every case-insensitive whole-word occurrence of `needle` in `text`.
pub fn replace_whole_word(text: &str, needle: &str, replacement: &str) -> String {
    let re = RegexBuilder::new(&regex::escape(needle))
        .case_insensitive(true)
        .build()
        .expect("escaped literal is a valid pattern");
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in re.find_iter(text) {
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        let bounded = !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char);
        if bounded {
            out.push_str(&text[last..m.start()]);
            out.push_str(replacement);
            last = m.end();
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Replaces the participant's name with a pseudonym in every turn.
pub fn anonymize_transcript(
    transcript: &InterviewTranscript,
    real_name: &str,
    pseudonym: &str,
) -> Result<InterviewTranscript, CorpusError> {
    if pseudonym.trim().is_empty() {
        return Err(CorpusError::InvalidArgument("pseudonym must be non-empty".into()));
    }
    if real_name.chars().count() < 2 {
        return Err(CorpusError::InvalidArgument("real name must be at least two characters".into()));
    }
    // a pseudonym that still contains the name would never converge
    if replace_whole_word(pseudonym, real_name, "") != pseudonym {
        return Err(CorpusError::InvalidArgument("pseudonym contains the real name".into()));
    }
    let mut out = transcript.clone();
    for turn in &mut out.turns {
        turn.text = replace_whole_word(&turn.text, real_name, pseudonym);
    }
    out.reindex();
    Ok(out)
}
