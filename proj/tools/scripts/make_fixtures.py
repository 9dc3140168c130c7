#!/usr/bin/env python3
"""Regenerate the synthetic corpora under tests/fixtures/.

Everything is drawn from a fixed seed, so rerunning the script reproduces
the committed files byte for byte.
"""
import json
import pathlib
import random

OUT = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"

WORDS = (
    "river stone market lantern signal harbor meadow copper ladder window orchard "
    "thunder bottle garden silver pencil canyon mirror basket violin station shadow "
    "feather planet engine rabbit blanket tunnel candle marble island forest bridge"
).split()
LABELS = ["yes", "no", "maybe", "positive", "negative", "neutral"]


def text(rng, lo=4, hi=12):
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def sentence(rng):
    s = text(rng)
    return s[0].upper() + s[1:] + "."


def demo(rng, with_expl):
    d = {"input": sentence(rng), "output": rng.choice(LABELS)}
    if with_expl:
        d["explanation"] = sentence(rng)
    return d


def instances(rng, n, tag):
    return [
        {"id": f"{tag}-{k}", "input": sentence(rng), "references": [rng.choice(LABELS)]}
        for k in range(n)
    ]


def task_record(rng, task_id, mask, n_inst):
    r = {"task_id": task_id}
    if "D" in mask:
        r["definition"] = sentence(rng) + " " + sentence(rng)
    if "P" in mask:
        r["positives"] = [demo(rng, "E" in mask) for _ in range(rng.randint(1, 3))]
    if "N" in mask:
        r["negatives"] = [demo(rng, "E" in mask) for _ in range(rng.randint(1, 2))]
    r["instances"] = instances(rng, n_inst, task_id)
    return r


def write(name, rows):
    path = OUT / name
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")
    print(f"wrote {path} ({len(rows)} records)")


def heuristic_tasks(rng):
    """50 tasks in mixed source formats; each record names its own format."""
    masks = ["D", "DP", "DN", "DPN", "DPE", "DPNE", "P", "PN", "PE", "NE"]
    rows = []
    for i in range(50):
        tid = f"h{i:02d}"
        if i < 20:
            r = task_record(rng, tid, "", rng.randint(3, 8))
            r["template"] = rng.choice(["Q: {input} A:", "{input} Answer yes or no.", "Text: {input}\nLabel:"])
            r["format"] = "instance"
        elif i < 30:
            r = task_record(rng, tid, "", rng.randint(3, 8))
            r["keywords"] = rng.sample(["classify", "summarize", "answer", "rewrite"], rng.randint(1, 2))
            r["format"] = "keywords"
        else:
            mask = masks[i % len(masks)]
            r = task_record(rng, tid, mask, rng.randint(3, 8))
            r["format"] = mask
        rows.append(r)
    write("heuristic_tasks.jsonl", rows)


def leakage(rng):
    """Train/test pair with exactly 37 planted overlaps."""
    counter = iter(range(10**6))

    def inst(tag):
        n = next(counter)
        return {"id": f"{tag}-{n}", "input": f"{text(rng, 3, 8)} item{n}", "references": [f"{rng.choice(LABELS)} {n}"]}

    train = []
    for t in range(10):
        train.append({"task_id": f"train{t}", "definition": sentence(rng),
                      "positives": [demo(rng, False)], "instances": [inst(f"tr{t}") for _ in range(20)]})
    test = []
    for t in range(5):
        test.append({"task_id": f"test{t}", "definition": sentence(rng),
                     "positives": [demo(rng, False)], "instances": [inst(f"te{t}") for _ in range(20)]})

    pool = [i for t in train for i in t["instances"]]
    planted = rng.sample(pool, 37)
    variants = [
        lambda s: s.upper(),
        lambda s: s + "!",
        lambda s: "The " + s.replace(" ", "  ") + ".",
        lambda s: s.title(),
        lambda s: s,
        lambda s: "  " + s.replace(" ", ", ") + " ?",
    ]
    slots = rng.sample([(t, k) for t in range(5) for k in range(20)], 37 + 10)
    for (t, k), src in zip(slots[:37], planted):
        v = variants[rng.randrange(len(variants))]
        w = variants[rng.randrange(len(variants))]
        test[t]["instances"][k]["input"] = v(src["input"])
        test[t]["instances"][k]["references"] = [w(src["references"][0])]
    # Decoys: same input, different answer. These must survive filtering.
    decoys = rng.sample([i for i in pool if i not in planted], 10)
    for (t, k), src in zip(slots[37:], decoys):
        test[t]["instances"][k]["input"] = src["input"]
        test[t]["instances"][k]["references"] = ["different answer " + src["references"][0]]
    write("leak_train.jsonl", train)
    write("leak_test.jsonl", test)


def mixtures(rng):
    ni = [task_record(rng, f"task{n:03d}", "DP", 3) for n in range(60)]
    shared = sorted(rng.sample([r["task_id"] for r in ni], 40))
    other = [task_record(rng, tid, "DP", 3) for tid in shared]
    other += [task_record(rng, f"p3_{n:03d}", "DP", 3) for n in range(30)]
    write("mix_ni.jsonl", ni)
    write("mix_p3.jsonl", other)


def distill(rng):
    write("distill_tasks.jsonl", [task_record(rng, f"d{n:04d}", "DPN", 1) for n in range(1100)])


def convert_corpus(rng):
    rows = []
    for t in range(12):
        r = task_record(rng, f"c{t:02d}", "", 4)
        r["template"] = rng.choice(["Review: {input} Positive or negative?", "{input} Is this true?"])
        rows.append(r)
    write("convert_instance.jsonl", rows)
    preds = [{"task_id": r["task_id"], "instance_id": i["id"], "prediction": i["references"][0]}
             for r in rows for i in r["instances"]]
    write("convert_predictions.jsonl", preds)


def main():
    rng = random.Random(20231016)
    heuristic_tasks(rng)
    leakage(rng)
    mixtures(rng)
    distill(rng)
    convert_corpus(rng)


if __name__ == "__main__":
    main()
