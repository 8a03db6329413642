"""
Training through a noise layer
==============================

The tagger is a window feedforward network producing p(true tag | x).
Clean batches train it directly.  Noisy batches first push that
distribution through a confusion matrix -- p(observed tag | x) =
sum_i p(observed | true=i) p(true=i | x) -- so the cross-entropy against
the observed tag stops punishing the network for the annotator's
systematic mistakes.  This script trains on a synthetic world whose
noise is known, with and without the noise layer.
"""

from cmtag.benchmark import (SyntheticSpec, collect_noise_pairs, generate)
from cmtag.evaluation import score
from cmtag.noise import build_model
from cmtag.tagger import TrainConfig, predict, train

# A small world: 2 latent word clusters, each corrupting tags through
# its own matrix (one drops persons, the other turns locations into
# persons).  The clean corpus is small, the noisy one is larger.
spec = SyntheticSpec(n_clean=80, n_noisy=800, n_dev=80, n_test=200,
                     words_per_cell=60, embed_dim=10, seed=2)
clean, noisy, dev, test, clusters, table = generate(spec)
tagset = spec.tagset()
print("clean %d sentences, noisy %d sentences, %d-dim word vectors"
      % (len(clean), len(noisy), table.dimension))

# The confusion matrices are estimated from (gold, corrupted) tag pairs
# over the clean corpus, conditioned on the word clusters.
pairs = collect_noise_pairs(clean, clusters, spec.matrices(), tagset, seed=2)
cm = build_model(pairs, clusters, "cluster-ip", lam=0.25, tagset=tagset)


def run(name, mode, noisy_data, model_cm, clustering):
    config = TrainConfig(epochs=10, batch_size=32, hidden=32, window=2,
                         seed=0, mode=mode)
    model, _, log = train(clean, noisy_data, dev, model_cm, config, table,
                          clustering=clustering, tagset=tagset)
    report = score(test, predict(model, test, table, tagset, config.window))
    print("%-22s test F1 %5.1f   (best dev %5.1f, %d epochs)"
          % (name, report.f1, max(e["dev_f1"] for e in log), len(log)))
    return report.f1


print()
f_base = run("clean only", "base", None, None, None)
f_trust = run("clean+noisy, trusted", "base+noise", noisy, None, None)
f_cm = run("clean+noisy, modeled", "cm", noisy, cm, clusters)
print()
print("modeling the noise recovered %.1f F1 over trusting it"
      % (f_cm - f_trust))
