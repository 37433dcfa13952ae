"""Regenerate the bundled toy corpus (50 templated sentences with gold graphs and features)."""

import random
import sys
from pathlib import Path

NOUNS = ["boy", "girl", "dog", "cat", "teacher", "student", "doctor", "child"]
PLACES = ["park", "house", "garden", "school"]
ADJECTIVES = ["big", "small", "happy", "old"]
# frame, past tense, bare form
VERBS = [
    ("like-01", "liked", "like"),
    ("see-01", "saw", "see"),
    ("help-01", "helped", "help"),
    ("believe-01", "believed", "believe"),
    ("chase-01", "chased", "chase"),
    ("find-01", "found", "find"),
]
PRONOUNS = {"boy": ("him", "he"), "girl": ("her", "she"), "child": ("him", "he")}


def tok(word, lemma, pos):
    return (word, lemma, pos, "O")


def sentence(rng):
    kind = rng.randrange(6)
    n1, n2, n3 = rng.sample(NOUNS, 3)
    frame, past, bare = rng.choice(VERBS)
    if kind == 0:
        n1 = rng.choice(sorted(PRONOUNS))
        pron, _ = PRONOUNS[n1]
        toks = [tok("The", "the", "DT"), tok(n1, n1, "NN"), tok("wants", "want", "VBZ"), tok("the", "the", "DT"),
                tok(n2, n2, "NN"), tok("to", "to", "TO"), tok(bare, bare, "VB"), tok(pron, PRONOUNS[n1][1], "PRP")]
        amr = f"(w / want-01 :ARG0 (a / {n1}) :ARG1 (v / {frame} :ARG0 (b / {n2}) :ARG1 a))"
    elif kind == 1:
        toks = [tok("The", "the", "DT"), tok(n1, n1, "NN"), tok(past, bare, "VBD"), tok("the", "the", "DT"), tok(n2, n2, "NN")]
        amr = f"(v / {frame} :ARG0 (a / {n1}) :ARG1 (b / {n2}))"
    elif kind == 2:
        adj = rng.choice(ADJECTIVES)
        toks = [tok("The", "the", "DT"), tok(adj, adj, "JJ"), tok(n1, n1, "NN"), tok("sleeps", "sleep", "VBZ")]
        amr = f"(s / sleep-01 :ARG0 (a / {n1} :mod (j / {adj})))"
    elif kind == 3:
        toks = [tok("The", "the", "DT"), tok(n1, n1, "NN"), tok("does", "do", "VBZ"), tok("not", "not", "RB"),
                tok(bare, bare, "VB"), tok("the", "the", "DT"), tok(n2, n2, "NN")]
        amr = f"(v / {frame} :polarity - :ARG0 (a / {n1}) :ARG1 (b / {n2}))"
    elif kind == 4:
        toks = [tok("The", "the", "DT"), tok(n1, n1, "NN"), tok("and", "and", "CC"), tok("the", "the", "DT"),
                tok(n2, n2, "NN"), tok(past, bare, "VBD"), tok("the", "the", "DT"), tok(n3, n3, "NN")]
        amr = f"(v / {frame} :ARG0 (x / and :op1 (a / {n1}) :op2 (b / {n2})) :ARG1 (c / {n3}))"
    else:
        place = rng.choice(PLACES)
        toks = [tok("The", "the", "DT"), tok(n1, n1, "NN"), tok("saw", "see", "VBD"), tok("the", "the", "DT"),
                tok(n2, n2, "NN"), tok("in", "in", "IN"), tok("the", "the", "DT"), tok(place, place, "NN")]
        amr = f"(s / see-01 :ARG0 (a / {n1}) :ARG1 (b / {n2}) :location (c / {place}))"
    return toks, amr


def main(out_dir: Path, count: int = 50, seed: int = 13):
    rng = random.Random(seed)
    seen, graphs, features = set(), [], []
    while len(graphs) < count:
        toks, amr = sentence(rng)
        words = " ".join(t[0] for t in toks)
        if words in seen:
            continue
        seen.add(words)
        graphs.append(f"# ::id toy.{len(graphs) + 1}\n# ::snt {words}.\n# ::tok {words}\n{amr}\n")
        features.append("".join("\t".join(t) + "\n" for t in toks))
    (out_dir / "toy.amr").write_text("\n".join(graphs))
    (out_dir / "toy.features.tsv").write_text("\n".join(features))


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("src/levi_amr/data"))
