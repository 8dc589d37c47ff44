"""Context vs. no-context on the synthetic tasks.

Trains MDI and the utterance baseline on both synthetic tasks and prints
train/held-out weighted F1 for each, optionally over several seeds.

    python scripts/context_effect.py --seeds 0 1 2
"""
import argparse
import time

from erckit.features import SYNTH_TASKS, synth_features
from erckit.model import ModelConfig
from erckit.splitter import apply_split, tv_independent_split
from erckit.synthetic import synth_corpus
from erckit.training import dialogue_batches, evaluate, fit

parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
parser.add_argument("--seeds", type=int, nargs="+", default=[0])
parser.add_argument("--n-dialogues", type=int, default=200)
parser.add_argument("--tasks", nargs="+", choices=SYNTH_TASKS, default=list(SYNTH_TASKS))
args = parser.parse_args()

print(f"{'task':<18} {'seed':>4} {'model':<9} {'epoch':>5} {'train':>6} {'test':>6} {'secs':>5}")
for task in args.tasks:
    for seed in args.seeds:
        corpus = synth_corpus(args.n_dialogues, 12, task=task, seed=seed)
        features = synth_features(corpus, task, seed=seed)
        parts = apply_split(corpus, tv_independent_split(corpus, (0.7, 0.1, 0.2), seed=seed))
        for kind in ("mdi", "baseline"):
            cfg = ModelConfig(model=kind, hidden=32, n_heads=4, n_blocks=2, lr=1e-3, seed=seed)
            t0 = time.perf_counter()
            result = fit(cfg, parts["train"], features, parts["val"])
            wf1 = {name: evaluate(result.model, dialogue_batches(parts[name], features, cfg)[0])
                   for name in ("train", "test")}
            print(f"{task:<18} {seed:>4} {kind:<9} {result.best_epoch:>5} {wf1['train']:6.3f} {wf1['test']:6.3f} "
                  f"{time.perf_counter() - t0:5.0f}", flush=True)
