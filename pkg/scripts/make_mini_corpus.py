"""Regenerate the packaged mini corpus and its split file.

    python scripts/make_mini_corpus.py
"""
from pathlib import Path

from erckit.corpus import write_corpus
from erckit.splitter import tv_independent_split, write_split
from erckit.synthetic import synth_corpus

DATA = Path(__file__).resolve().parents[1] / "src" / "erckit" / "data"

corpus = synth_corpus(n_dialogues=12, utts_per_dialogue=9, n_series=5, task="random", seed=7,
                      annotation_noise=0.25, blend=0.2, chinese=True)
write_corpus(corpus, DATA / "mini_corpus.jsonl")
write_split(tv_independent_split(corpus, (0.6, 0.2, 0.2), seed=0), DATA / "mini_split.json")
print("wrote", DATA / "mini_corpus.jsonl")
