"""Writes the 5-subject fixture corpus under fixtures/corpus/.

Answers are hand-built per subject; phase 2 perturbs a fixed, listed subset of
phase 1 so that test-retest consistency is known in advance.
"""
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "corpus"
GSS = json.loads((ROOT / "battery" / "gss_synthetic.json").read_text())
BFI = json.loads((ROOT / "battery" / "bfi44.json").read_text())
SCRIPT = json.loads((ROOT / "table7_script.json").read_text())

SUBJECTS = [
    dict(pid="p01", name="Maria", polviews=1, partyid=0, race=0, sex=1, age=34, ethnicity=["hispanic", "white"],
         job="a nurse in a county hospital", home="Tucson", family="my husband and two kids"),
    dict(pid="p02", name="Derek", polviews=5, partyid=6, race=0, sex=0, age=58, ethnicity=["white"],
         job="an electrician who runs a small shop", home="rural Ohio", family="my wife; the kids are grown"),
    dict(pid="p03", name="Aisha", polviews=3, partyid=3, race=1, sex=1, age=27, ethnicity=["black"],
         job="a graduate student in chemistry", home="Atlanta", family="two roommates"),
    dict(pid="p04", name="Tom", polviews=0, partyid=1, race=2, sex=0, age=45, ethnicity=["asian"],
         job="a high-school music teacher", home="Seattle", family="my partner and our dog"),
    dict(pid="p05", name="Linda", polviews=6, partyid=7, race=0, sex=1, age=71, ethnicity=["white"],
         job="retired after thirty years in accounting", home="a suburb of Dallas", family="my sister, who moved in last year"),
]

EXPERIMENTS = {
    "ames2015": (["intentional", "unintentional"], "choice", 5),
    "cooney2016": (["fair_bonus", "fair_no_bonus", "unfair_bonus", "unfair_no_bonus"], "scale", 7),
    "halevy2015": (["intervened", "did_not_intervene"], "scale", 7),
    "rai2017": (["dehumanized", "humanized"], "scale", 7),
    "schilke2015": (["high_power", "low_power"], "choice", 2),
}


def opt(v):
    return {"option": v}


def num(v):
    return {"number": float(v)}


def phase1(s, rng):
    answers = {}
    for item in GSS["items"]:
        iid = item["item_id"]
        kind = item["kind"]
        if iid in ("polviews", "partyid", "race", "sex"):
            answers[iid] = opt(s[iid])
        elif iid == "age":
            answers[iid] = num(s["age"])
        elif "categorical" in kind:
            answers[iid] = opt(rng.randrange(len(kind["categorical"]["options"])))
        else:
            lo, hi = kind["numeric"]["hist_min"], kind["numeric"]["hist_max"]
            answers[iid] = num(rng.randint(int(lo), min(int(hi), int(lo) + 12)))
    for item in BFI["items"]:
        answers[item["item_id"]] = opt(rng.randrange(5))
    answers["dictator"] = num(rng.randint(0, 5))
    answers["trust_p1"] = num(rng.randint(0, 3))
    answers["trust_p2"] = num(rng.randint(0, 9))
    answers["public_goods"] = num(rng.randint(0, 4))
    answers["prisoners_dilemma"] = {"choice": rng.choice(["cooperate", "defect"])}
    for exp, (conds, kind, k) in EXPERIMENTS.items():
        cond = rng.choice(conds)
        answers[f"{exp}:{cond}"] = opt(rng.randrange(k)) if kind == "choice" else num(rng.randint(1, k))
    return answers


def phase2(p1, rng):
    """Changes about a fifth of the non-experiment answers."""
    p2 = {}
    changed = []
    for iid, v in p1.items():
        if ":" in iid:
            continue
        p2[iid] = dict(v)
        if rng.random() >= 0.2 or iid == "age":
            continue
        changed.append(iid)
        if "option" in v:
            gss = next((i for i in GSS["items"] if i["item_id"] == iid), None)
            k = len(gss["kind"]["categorical"]["options"]) if gss else 5
            p2[iid] = opt((v["option"] + 1) % k)
        elif "number" in v:
            hi = {"dictator": 5, "trust_p1": 3, "trust_p2": 9, "public_goods": 4}.get(iid, 8)
            x = v["number"]
            p2[iid] = num(x + 1 if x < hi else x - 1)
        else:
            p2[iid] = {"choice": "defect" if v["choice"] == "cooperate" else "cooperate"}
    return p2, changed


ANSWERS = {
    "q001": "I was born in {home} and have lived there most of my life. These days I work as {job}. I live with {family}. The big turning points were school, my first real job, and the people I met along the way.",
    "q002": "Yes, when I decided what to do for work. I was torn between staying close to home and moving away, and I stayed.",
    "q003": "It was a conscious choice. I weighed the money against being near family.",
    "q004": "Maybe a mentor could have pushed me differently, but I think it worked out.",
    "q005": "My family is {family}. We are close and we talk every day about small things.",
    "q006": "No, I think I covered everyone who matters day to day.",
    "q007": "A couple of old friends from school. We still get together a few times a year.",
    "q008": "My neighborhood in {home} is quiet. People mostly keep to themselves but are friendly.",
}


def transcript(s):
    turns = []
    offset = 0
    words = {"interviewer": 0, "participant": 0}

    def push(speaker, qid, text):
        nonlocal offset
        turns.append({"turn_index": len(turns), "speaker": speaker, "question_id": qid, "text": text,
                      "char_offset": offset})
        offset += len(text)
        words[speaker] += len(text.split())

    for q in SCRIPT[:9]:
        text = q["text"].replace("<participant's name>", s["name"])
        push("interviewer", q["id"], text)
        if q["time_limit_sec"] > 0:
            push("participant", q["id"], ANSWERS[q["id"]].format(**s))
    header = {"participant_id": s["pid"], "word_counts": words}
    lines = [json.dumps(header, ensure_ascii=False)] + [json.dumps(t, ensure_ascii=False) for t in turns]
    return "\n".join(lines) + "\n"


def persona(s):
    pv = GSS["items"][0]["kind"]["categorical"]["options"][s["polviews"]]
    return (f"{s['name']} is {s['age']} years old and lives in {s['home']}. They work as {s['job']} "
            f"and live with {s['family']}. Politically they lean {pv}.\n")


def main():
    schema = {
        "ideology": GSS["items"][0]["kind"]["categorical"]["options"],
        "party": GSS["items"][1]["kind"]["categorical"]["options"],
        "race": GSS["items"][2]["kind"]["categorical"]["options"],
        "sex": GSS["items"][3]["kind"]["categorical"]["options"],
        "ethnicity": ["asian", "black", "hispanic", "white", "other"],
    }
    participants = []
    changes = {}
    for n, s in enumerate(SUBJECTS):
        rng = random.Random(1000 + n)
        pid = s["pid"]
        demo = {
            "ideology": schema["ideology"][s["polviews"]],
            "party": schema["party"][s["partyid"]],
            "race": schema["race"][s["race"]],
            "sex": schema["sex"][s["sex"]],
            "ethnicity": s["ethnicity"] if len(s["ethnicity"]) > 1 else s["ethnicity"][0],
        }
        participants.append({"participant_id": pid, "pseudonym": s["name"], "demographics": demo,
                             "withdrawn": False})
        p1 = phase1(s, rng)
        p2, changed = phase2(p1, rng)
        changes[pid] = changed
        for phase, answers in (("phase1", p1), ("phase2", p2)):
            doc = {"subject_id": pid, "phase": phase, "condition_tag": "human", "answers": answers}
            path = OUT / "responses" / f"{pid}.{phase}.json"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        (OUT / "transcripts").mkdir(parents=True, exist_ok=True)
        (OUT / "transcripts" / f"{pid}.jsonl").write_text(transcript(s))
        (OUT / "personas").mkdir(parents=True, exist_ok=True)
        (OUT / "personas" / f"{pid}.txt").write_text(persona(s))
    table = {"schema": schema, "participants": participants}
    (OUT / "participants.json").write_text(json.dumps(table, indent=2) + "\n")
    (OUT / "phase2_changes.json").write_text(json.dumps(changes, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
