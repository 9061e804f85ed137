#!/usr/bin/env python3
"""Regenerate the bundled sample text (~100 kB, deterministic).

Zipf-weighted draws over a small vocabulary with recurring stock phrases,
so strings of several words repeat often enough to exercise the
concordance demo at min_seq_len >= 2.
"""

import random
from pathlib import Path

VOCAB = """
time year people way day man thing woman life child world school state
family student group country problem hand part place case week company
system program question work government number night point home water
room mother area money story fact month lot right study book eye job
word business issue side kind head house service friend father power
hour game line end member law car city community name president team
minute idea body information back parent face others level office door
health person art war history party result change morning reason
research girl guy moment air teacher force education foot boy age
policy process music market sense nation plan college interest death
experience effect use class control care field development role effort
rate heart drug show leader light voice wife whole police mind
""".split()

PHRASES = [
    "the quick brown fox", "in the beginning", "at the end of the day",
    "one step at a time", "the state of the art", "a matter of time",
    "the heart of the matter", "now and then", "again and again",
    "side by side",
]

TARGET_BYTES = 100_000


def main() -> None:
    rng = random.Random(20240)
    weights = [1.0 / (i + 1) for i in range(len(VOCAB))]
    chunks: list[str] = []
    size = 0
    while size < TARGET_BYTES:
        if rng.random() < 0.08:
            sentence = rng.choice(PHRASES)
        else:
            k = rng.randint(4, 12)
            sentence = " ".join(rng.choices(VOCAB, weights=weights, k=k))
        sentence = sentence.capitalize() + rng.choice([".", ".", ".", ",", ";"])
        chunks.append(sentence)
        size += len(sentence) + 1
    text = ""
    line = []
    line_len = 0
    out = []
    for c in chunks:
        line.append(c)
        line_len += len(c) + 1
        if line_len > 70:
            out.append(" ".join(line))
            line, line_len = [], 0
    if line:
        out.append(" ".join(line))
    text = "\n".join(out) + "\n"
    dest = Path(__file__).resolve().parent.parent / "src" / "procnet" / "bench" / "data" / "sample_text.txt"
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text, encoding="utf-8")
    print(f"wrote {dest} ({len(text)} bytes)")


if __name__ == "__main__":
    main()
