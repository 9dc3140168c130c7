#!/usr/bin/env python3
"""Regenerate data/seeds/*.jsonl from the hand-written seed tasks below.

Each task is written once as a template (instance level) plus a full
definition with demonstrations (task level); the files for every
(source format, target format) pair are derived from that.
"""
import json
import pathlib

DASH = "—"

TASKS = [
    {
        "id": "sst2",
        "template": "Review: {sentence} Is this movie review sentence negative or positive? {options_}",
        "definition": 'In this task, you are given sentences from movie reviews. The task is to classify a sentence as "POS" if the sentiment of the sentence is positive or as "NEG" if the sentiment of the sentence is negative',
        "positives": [
            ("It 's a lovely film with lovely performances by Buy and Accorsi.", "POS",
             "The sentiment of the sentence is positive. Hence, the label is 'POS'."),
            ("Here's yet another studio horror franchise mucking up its storyline with glitches casual fans could correct in their sleep.", "NEG",
             "The sentiment of the sentence is negative. Hence, the label is 'NEG'."),
        ],
        "negatives": [
            ("A smart, witty follow-up.", "NEG",
             "Although the sentiment of the sentence is positive, the label is 'NEG'. Hence, the label should be 'POS'."),
            ("Ultimately feels empty and unsatisfying, like swallowing a Communion wafer without the wine.", "POS",
             "Although the sentiment of the sentence is positive, the label is 'POS'. Hence, the label should be 'NEG'."),
        ],
        "keywords": "sentiment classification",
    },
    {
        "id": "qqp",
        "template": "{question1} {question2} Would you say that these questions are the same? {options_}",
        "definition": 'Here are two questions (Question1 and Question2). If these questions have the same meaning and same answer, answer "Yes", otherwise "No".',
        "positives": [
            ("Question1: How do I get into my Instagram if I forgot my email and my Facebook password?, Question2: I forgot my password and also my email password. how can I get back that account?", "Yes",
             'These questions have the meaning and the same answer. So, the output should be "Yes".'),
            ("Question1: Why don't Hong Kong residents emigrate from their cramped & stressful city, like to places such as Australia?, Question2: Why made Hong Kong so attractive to Britain as a colony given that it was the last of Britain's colonies and Britain does not profit from taxing Hong Kong?", "No",
             "The first question is about the emigration of Hong Kong residents and the second question is about the attraction of Hong Kong. So, they don't have the same meaning."),
        ],
        "negatives": [
            ("Question1: Why are there so many accidents on I-880?, Question2: Were there accidents in outer space?", "Yes",
             'Question1 asks about the cause of the accidents, while question2 inquires about their existence. So, they are different and the correct output should be "No".'),
            ("Question1: How do you determine the number of neutrons of an element or its ion?, Question2: How do you find the number of neutrons in an element? What are some examples?", "They are the same.",
             'Note that you need to answer with "Yes" or "No" and other answers are not acceptable.'),
        ],
        "keywords": "paraphrase identification",
    },
    {
        "id": "cosmosqa",
        "template": "{context} Generate a question about the above context.",
        "definition": "Based on the given context, craft a common-sense question, especially those that are LONG, INTERESTING, and COMPLEX. The goal is to write questions that are easy for humans and hard for AI machines! To create such questions, here are some suggestions: A. What may (or may not) be the plausible reason for an event? B. What may (or may not) happen before (or after, or during) an event? C. What may (or may not) be a plausible fact about someone (or something)? D. What may (or may not) happen if an event happens (or did not happen)? You can also create other types of questions. DO NOT make your question answerable without looking at the context, or question of which the correct answer can be directly extracted from the context. DO NOT ask a question that requires very specialized knowledge that is not common sense. DO NOT ask too simple or too short questions. Your question must be related to the context and answerable with common sense. Try to add more variations and complexity to the questions.",
        "positives": [
            ("Context: I was told, in person over the phone, that my shoes were on their way. They have my money. I have no shoes.", "What may happen before I called them?",
             "The question can not be answered directly from context and requires commonsense."),
            ("Context: you see , at my age relationship is kind of important and i thought i got the one after all these years . I noticed that once again i was wrong . i was good simply because i was good , i was caring , helping , supportive , bla bla blaaa .", "What may happen to me?",
             "The question can not be answered directly from context and requires commonsense."),
        ],
        "negatives": [
            ("Context: I was told, in person over the phone, that my shoes were on their way. They have my money. I have no shoes.", "What is on the way to my home?",
             "It can be directly answered with a span of the context and does not require any commonsense reasoning."),
            ("Context: GPS technology dates back to the time when first ever satellite was launched in the sky in 1979. The era of global positioning started then.", "What was launched in the sky in 1979?",
             "It can be directly answered with a span of the context and does not require any commonsense reasoning."),
        ],
        "keywords": "question generation",
    },
]


def example(kind, i, ex, with_expl):
    s = f"{kind} Example {i}{DASH}\nInput: {ex[0]}\nOutput: {ex[1]}"
    if with_expl:
        s += f"\nExplanation: {ex[2]}"
    return s


def task_level(task, mask):
    secs = []
    if "D" in mask:
        secs.append("Definition: " + task["definition"])
    if "P" in mask:
        secs += [example("Positive", i, ex, "E" in mask) for i, ex in enumerate(task["positives"], 1)]
    if "N" in mask:
        secs += [example("Negative", i, ex, "E" in mask) for i, ex in enumerate(task["negatives"], 1)]
    return "\n\n".join(secs)


def write(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def main():
    out = pathlib.Path(__file__).resolve().parents[2] / "data" / "seeds"
    out.mkdir(parents=True, exist_ok=True)
    for mask in ["DP", "DPN", "DPE", "DPNE"]:
        write(out / f"instance_to_{mask}.jsonl",
              [{"pair_id": t["id"], "source_text": t["template"], "target_text": task_level(t, mask)} for t in TASKS])
        write(out / f"{mask}_to_instance.jsonl",
              [{"pair_id": t["id"], "source_text": task_level(t, mask), "target_text": t["template"]} for t in TASKS])
    # Per-instance keyword rewriting: a rendered instance prompt -> "keywords: input".
    rows = []
    for t in TASKS:
        ex = t["positives"][0]
        if t["id"] == "sst2":
            src = t["template"].replace("{sentence}", ex[0]).replace("{options_}", "OPTIONS: - negative - positive")
        elif t["id"] == "qqp":
            q1, q2 = ex[0].split(", Question2: ")
            q1 = q1.removeprefix("Question1: ")
            src = t["template"].replace("{question1}", q1).replace("{question2}", q2).replace("{options_}", "OPTIONS: - no - yes")
        else:
            src = t["template"].replace("{context}", ex[0].removeprefix("Context: "))
        rows.append({"pair_id": t["id"], "source_text": src, "target_text": f"{t['keywords']}: {ex[0]}"})
    write(out / "instance_to_keywords.jsonl", rows)


if __name__ == "__main__":
    main()
