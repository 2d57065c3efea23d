"""Writes the instrument definitions under fixtures/battery/."""
import json

LIKERT = ["Disagree strongly", "Disagree a little", "Neither agree nor disagree",
          "Agree a little", "Agree strongly"]
BFI = [
    ("Is talkative", "E", False), ("Tends to find fault with others", "A", True),
    ("Does a thorough job", "C", False), ("Is depressed, blue", "N", False),
    ("Is original, comes up with new ideas", "O", False), ("Is reserved", "E", True),
    ("Is helpful and unselfish with others", "A", False), ("Can be somewhat careless", "C", True),
    ("Is relaxed, handles stress well", "N", True), ("Is curious about many different things", "O", False),
    ("Is full of energy", "E", False), ("Starts quarrels with others", "A", True),
    ("Is a reliable worker", "C", False), ("Can be tense", "N", False),
    ("Is ingenious, a deep thinker", "O", False), ("Generates a lot of enthusiasm", "E", False),
    ("Has a forgiving nature", "A", False), ("Tends to be disorganized", "C", True),
    ("Worries a lot", "N", False), ("Has an active imagination", "O", False),
    ("Tends to be quiet", "E", True), ("Is generally trusting", "A", False),
    ("Tends to be lazy", "C", True), ("Is emotionally stable, not easily upset", "N", True),
    ("Is inventive", "O", False), ("Has an assertive personality", "E", False),
    ("Can be cold and aloof", "A", True), ("Perseveres until the task is finished", "C", False),
    ("Can be moody", "N", False), ("Values artistic, aesthetic experiences", "O", False),
    ("Is sometimes shy, inhibited", "E", True), ("Is considerate and kind to almost everyone", "A", False),
    ("Does things efficiently", "C", False), ("Remains calm in tense situations", "N", True),
    ("Prefers work that is routine", "O", True), ("Is outgoing, sociable", "E", False),
    ("Is sometimes rude to others", "A", True), ("Makes plans and follows through with them", "C", False),
    ("Gets nervous easily", "N", False), ("Likes to reflect, play with ideas", "O", False),
    ("Has few artistic interests", "O", True), ("Likes to cooperate with others", "A", False),
    ("Is easily distracted", "C", True), ("Is sophisticated in art, music, or literature", "O", False),
]
DIM = {"O": "openness", "C": "conscientiousness", "E": "extraversion", "A": "agreeableness", "N": "neuroticism"}
assert len(BFI) == 44

bfi_items = []
bfi_key = []
for i, (text, dim, rev) in enumerate(BFI, 1):
    iid = f"bfi{i:02d}"
    bfi_items.append({
        "item_id": iid,
        "text": f"I see myself as someone who... {text.lower() if not text.startswith('Is ') else text[0].lower() + text[1:]}",
        "category": DIM[dim],
        "kind": {"categorical": {"options": LIKERT, "ordinal": True}},
    })
    bfi_key.append({"item_id": iid, "dimension": dim, "reversed": rev})
json.dump({"battery_id": "bfi44", "instrument": "bfi44", "items": bfi_items, "bfi_key": bfi_key},
          open("fixtures/battery/bfi44.json", "w"), indent=2)

games = {
    "battery_id": "games",
    "instrument": "games",
    "items": [
        {"item_id": "dictator", "category": "dictator", "kind": {"game": {"game_id": "dictator"}},
         "text": "You have been given $5. You may split it between yourself and another participant in this study, "
                 "who cannot affect your decision. How many dollars (0 to 5) do you give to the other participant?"},
        {"item_id": "trust_p1", "category": "trust_p1", "kind": {"game": {"game_id": "trust_p1"}},
         "text": "You are Player 1 and have been given $3. Any amount you send to Player 2, another participant, is tripled. "
                 "Player 2 may then return any part of what they received. How many dollars (0 to 3) do you send?"},
        {"item_id": "trust_p2", "category": "trust_p2", "kind": {"game": {"game_id": "trust_p2"}},
         "text": "You are Player 2. Player 1 started with $3 and sent you all of it, which was tripled, so you received $9. "
                 "How many dollars (0 to 9) do you return to Player 1?"},
        {"item_id": "public_goods", "category": "public_goods", "kind": {"game": {"game_id": "public_goods"}},
         "text": "You are in a group of four participants and each of you has $4. Each person decides how much to put into a "
                 "common pool. The pool is doubled and split equally among all four members regardless of who contributed. "
                 "How many dollars (0 to 4) do you contribute?"},
        {"item_id": "prisoners_dilemma", "category": "prisoners_dilemma",
         "kind": {"game": {"game_id": "prisoners_dilemma"}},
         "text": "You and another participant each choose to cooperate or defect. If you both cooperate, you each get $6. "
                 "If one defects and the other cooperates, the defector gets $8 and the cooperator gets $2. "
                 "If you both defect, you each get $4. Do you cooperate or defect?"},
    ],
}
json.dump(games, open("fixtures/battery/games.json", "w"), indent=2)

A = ["too little", "about right", "too much"]
def cat(iid, cat_, text, options, ordinal=False):
    return {"item_id": iid, "text": text, "category": cat_,
            "kind": {"categorical": {"options": options, "ordinal": ordinal}}}
def num(iid, cat_, text, lo, hi):
    return {"item_id": iid, "text": text, "category": cat_, "kind": {"numeric": {"hist_min": lo, "hist_max": hi}}}

nat = [("natspac", "space exploration"), ("natenvir", "improving and protecting the environment"),
       ("natheal", "improving and protecting the nation's health"), ("natcity", "solving the problems of the big cities"),
       ("natdrug", "dealing with drug addiction"), ("nateduc", "improving the nation's education system"),
       ("natrace", "improving the conditions of Black people"), ("natarms", "the military, armaments and defense")]
gss = [
    cat("polviews", "politics", "Where would you place yourself on a seven-point scale from extremely liberal to extremely conservative?",
        ["extremely liberal", "liberal", "slightly liberal", "moderate", "slightly conservative", "conservative", "extremely conservative"], True),
    cat("partyid", "politics", "Generally speaking, do you usually think of yourself as a Republican, Democrat, Independent, or what?",
        ["strong Democrat", "not very strong Democrat", "independent, close to Democrat", "independent",
         "independent, close to Republican", "not very strong Republican", "strong Republican", "other party"]),
    cat("race", "demographics", "What race do you consider yourself?", ["white", "black", "other"]),
    cat("sex", "demographics", "What is your sex?", ["male", "female"]),
    num("age", "demographics", "What is your age in years?", 18, 89),
    num("childs", "demographics", "How many children have you ever had?", 0, 8),
    num("educ", "demographics", "What is the highest year of school or college you have finished?", 0, 20),
    num("sibs", "demographics", "How many brothers and sisters did you have?", 0, 30),
    num("hrs1", "work", "Last week, how many hours did you work?", 0, 89),
    num("tvhours", "social_trust", "On the average day, about how many hours do you personally watch television?", 0, 24),
]
for iid, topic in nat:
    gss.append(cat(iid, "national_spending",
                   f"Are we spending too much money, too little money, or about the right amount on {topic}?", A, True))
gss += [
    cat("cappun", "civil_liberties", "Do you favor or oppose the death penalty for persons convicted of murder?", ["favor", "oppose"]),
    cat("gunlaw", "civil_liberties", "Would you favor or oppose a law requiring a police permit before a person could buy a gun?", ["favor", "oppose"]),
    cat("grass", "civil_liberties", "Do you think the use of marijuana should be made legal or not?", ["should be legal", "should not be legal"]),
    cat("happy", "social_trust", "Taken all together, how would you say things are these days?", ["very happy", "pretty happy", "not too happy"], True),
    cat("trust", "social_trust", "Generally speaking, would you say that most people can be trusted or that you can't be too careful?",
        ["most people can be trusted", "can't be too careful", "depends"]),
    cat("fair", "social_trust", "Do you think most people would try to take advantage of you if they got a chance, or would they try to be fair?",
        ["would take advantage of you", "would try to be fair", "depends"]),
    cat("helpful", "social_trust", "Would you say that most of the time people try to be helpful, or are they mostly just looking out for themselves?",
        ["try to be helpful", "looking out for themselves", "depends"]),
    cat("god", "religion", "Which statement comes closest to expressing what you believe about God?",
        ["don't believe", "no way to find out", "some higher power", "believe sometimes", "believe but have doubts", "know God exists"]),
    cat("attend", "religion", "How often do you attend religious services?",
        ["never", "less than once a year", "about once or twice a year", "several times a year", "about once a month",
         "2-3 times a month", "nearly every week", "every week", "several times a week"], True),
    cat("postlife", "religion", "Do you believe there is a life after death?", ["yes", "no"]),
    cat("confinan", "confidence", "How much confidence do you have in banks and financial institutions?",
        ["a great deal", "only some", "hardly any"], True),
    cat("conpress", "confidence", "How much confidence do you have in the press?", ["a great deal", "only some", "hardly any"], True),
]
assert len(gss) == 30, len(gss)
json.dump({"battery_id": "gss_synthetic", "instrument": "gss", "items": gss}, open("fixtures/battery/gss_synthetic.json", "w"), indent=2)
print("ok", len(gss), sum(1 for g in gss if "numeric" in g["kind"]))

def exp_item(exp_id, cond):
    return {"item_id": f"{exp_id}:{cond}", "text": f"{exp_id} ({cond})", "category": exp_id,
            "kind": {"experiment": {"exp_id": exp_id, "condition": cond}}}

NURSE = ("A staff member at a nursing home switched the medications of several residents. "
         "Some residents suffered side effects and needed extra care, which was costly for the home. ")
experiments = [
    {"exp_id": "ames2015", "title": "Perceived intent and magnified harm", "paraphrased": True,
     "test": "chi2_equal_prop",
     "conditions": [
         {"label": "intentional", "stimulus": NURSE + "The staff member made the switch on purpose, "
          "because they wanted to get back at the residents and the home."},
         {"label": "unintentional", "stimulus": NURSE + "The staff member made the switch by accident, "
          "because two labels looked alike."}],
     "outcome": {"choice": {
         "question": "You may now pick one short follow-up task. Which one do you choose?",
         "options": ["Give your opinion on how the staff member should be blamed and punished",
                     "Take a short quiz about the cost of healthcare in the U.S.",
                     "Rate a set of photographs of landscapes",
                     "Answer questions about your media habits",
                     "Solve a short set of word puzzles"],
         "positive": [0]}}},
    {"exp_id": "cooney2016", "title": "Fair procedures and anticipated feelings", "paraphrased": True,
     "test": "anova2x2_interaction",
     "conditions": [
         {"label": "fair_bonus", "factors": [0, 0], "stimulus":
          "Imagine another participant decides whether you receive a bonus. They make the decision by flipping a coin. "
          "The outcome is that you receive the bonus."},
         {"label": "fair_no_bonus", "factors": [0, 1], "stimulus":
          "Imagine another participant decides whether you receive a bonus. They make the decision by flipping a coin. "
          "The outcome is that you do not receive the bonus."},
         {"label": "unfair_bonus", "factors": [1, 0], "stimulus":
          "Imagine another participant decides whether you receive a bonus. They make the decision by simply choosing "
          "whatever they personally prefer. The outcome is that you receive the bonus."},
         {"label": "unfair_no_bonus", "factors": [1, 1], "stimulus":
          "Imagine another participant decides whether you receive a bonus. They make the decision by simply choosing "
          "whatever they personally prefer. The outcome is that you do not receive the bonus."}],
     "outcome": {"scale": {"question": "How would you feel about this outcome, from 1 (very bad) to 7 (very good)?",
                           "min": 1, "max": 7}}},
    {"exp_id": "halevy2015", "title": "Third-party intervention in conflicts", "paraphrased": True,
     "test": "t_ind",
     "conditions": [
         {"label": "intervened", "stimulus":
          "Think of a time when two of your friends were in a conflict with each other and you stepped in to help "
          "resolve it. Take a moment to recall what happened."},
         {"label": "did_not_intervene", "stimulus":
          "Think of a time when two of your friends were in a conflict with each other and you did not step in. "
          "Take a moment to recall what happened."}],
     "outcome": {"scale": {"question": "How beneficial do you think it is to intervene in a conflict between two friends, "
                                       "from 1 (not at all beneficial) to 7 (extremely beneficial)?",
                           "min": 1, "max": 7}}},
    {"exp_id": "rai2017", "title": "Dehumanization and instrumental harm", "paraphrased": True,
     "test": "t_ind",
     "conditions": [
         {"label": "dehumanized", "stimulus":
          "You are offered money in exchange for causing physical pain to a man."},
         {"label": "humanized", "stimulus":
          "You are offered money in exchange for causing physical pain to Sam. Sam is a 34-year-old man who "
          "teaches music, loves hiking with his dog, and is described by friends as warm and funny."}],
     "outcome": {"scale": {"question": "How willing would you be to do this for money, from 1 (not at all willing) "
                                       "to 7 (completely willing)?",
                           "min": 1, "max": 7}}},
    {"exp_id": "schilke2015", "title": "Structural power and trust", "paraphrased": True,
     "test": "chi2_equal_prop",
     "conditions": [
         {"label": "high_power", "stimulus":
          "Imagine you work as a freelance typist. Your clients depend on your service and have few alternatives, "
          "and you only do this work to earn some extra spending money."},
         {"label": "low_power", "stimulus":
          "Imagine you work as a freelance typist. Your clients can easily find other typists, "
          "and you rely on this work to make ends meet."}],
     "outcome": {"choice": {
         "question": "A new client asks you to finish the job before they pay you. Do you trust the client and do the work first?",
         "options": ["Yes, I trust the client and do the work first", "No, I ask for payment first"],
         "positive": [0]}}},
]
items = [exp_item(e["exp_id"], c["label"]) for e in experiments for c in e["conditions"]]
json.dump({"battery_id": "experiments", "instrument": "experiments", "items": items, "experiments": experiments},
          open("fixtures/battery/experiments.json", "w"), indent=2)
print("experiments", len(items))
