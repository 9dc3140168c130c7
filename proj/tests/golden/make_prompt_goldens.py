#!/usr/bin/env python3
"""Write the transfer-prompt goldens. Independent of the C++ prompt builder:
blocks are "Example i." / "Task description A: ..." / "Task description B: ...",
separated by one blank line, with the last B field left open."""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parents[2]
NEW_SOURCE = {
    "instance_to_DPNE": 'Premise: {premise} Based on the paragraph above can we conclude that "{hypothesis}"? {options_}',
    "instance_to_DP": 'Premise: {premise} Based on the paragraph above can we conclude that "{hypothesis}"? {options_}',
    "instance_to_keywords": "Article: The council approved the new budget on Monday after a long debate. Summarize the article in one sentence.",
}

for name, source in NEW_SOURCE.items():
    seeds = [json.loads(l) for l in (ROOT / "data" / "seeds" / f"{name}.jsonl").read_text(encoding="utf-8").splitlines() if l.strip()]
    blocks = []
    for i, s in enumerate(seeds, 1):
        blocks.append(f"Example {i}.\nTask description A: {s['source_text']}\nTask description B: {s['target_text']}")
    blocks.append(f"Example {len(seeds) + 1}.\nTask description A: {source}\nTask description B:")
    (ROOT / "tests" / "golden" / f"prompt_{name}.txt").write_text("\n\n".join(blocks), encoding="utf-8")
    (ROOT / "tests" / "golden" / f"prompt_{name}.source.txt").write_text(source, encoding="utf-8")
