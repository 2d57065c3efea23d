//! Agent prompt templates. Template bodies are verbatim; the suffixes ask for
//! a machine-readable final line.

pub const SEPARATOR: &str = "=====";

pub const TASK_INTRO: &str = "Task: What you see above is an interview transcript. Based on the interview transcript, I want you to predict the participant's survey responses. All questions are multiple choice, and you must guess from one of the options presented.";

pub const CATEGORICAL_STEPS: &str = "As you answer, I want you to take the following steps:

Step 1) Describe in a few sentences the kind of person that would choose each of the response options. (\"Option Interpretation\")

Step 2) For each response option, reason about why the Participant might answer with that particular option. (\"Option Choice\")

Step 3) Write a few sentences reasoning on which of the options best predicts the participant's response. (\"Reasoning\")

Step 4) Predict how the participant will actually respond in the survey. Predict based on the interview and your thoughts. (\"Response\")";

pub const NUMERIC_STEPS: &str = "As you answer, I want you to take the following steps:

Step 1) Describe in a few sentences the kind of person that would choose each end of the range. (\"Range Interpretation\")

Step 2) Write a few sentences reasoning on which option best predicts the participant's response. (\"Reasoning\")

Step 3) Predict how the participant will actually respond. Predict based on the interview and your thoughts. (\"Response\")";

pub const QUESTIONS_HEADER: &str = "Here are the questions:";

pub const CATEGORICAL_SUFFIX: &str =
    "Label each step by its name. On the last line write \"Response: \" followed by the text of the chosen option.";

pub const NUMERIC_SUFFIX: &str =
    "Label each step by its name. On the last line write \"Response: \" followed by a single number within the range.";

pub const OPEN_TASK: &str = "Task: What you see above is an interview transcript. Based on the interview transcript, I want you to predict how the participant would respond to the prompt below, in their own voice.";

pub const OPEN_SUFFIX: &str =
    "Briefly reason about the participant first. On the last line write \"Response: \" followed by the participant's reply.";

pub const REFLECTION_TEMPLATE: &str = "{transcript}

=====

Imagine you are an expert {expert} (with a PhD) taking notes while observing this interview. Write observations/reflections about the interviewee's {topic}. (You should make more than 5 observations and fewer than 20. Choose the number that makes sense given the depth of the interview content above.)";

pub const CLASSIFY_TEMPLATE: &str = "Question: {question}

Which domain expert (demographer, psychologist, behavioral economist, or political scientist) would best answer the question above about a participant? Reply with the expert's name only.";

pub const SUMMARY_TEMPLATE: &str = "{transcript}

=====

Task: Rewrite the interview above as a bulleted list of short facts about the participant, one `- key: value` line per fact. Keep the information and drop the conversational wording.";

pub const DEMOGRAPHIC_TEMPLATE: &str = "Ideologically, I describe myself as {ideology}. Politically, I am {party}. Racially, I am {race}. I am {gender}. In terms of age, I am {age} years old.";
