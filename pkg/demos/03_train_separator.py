"""Overfit the band-split separator on a single clip to show the training
loop, the conditioning, and the loss trajectory. A few minutes on one core.

Requires the corpus from demos/02_oracle_pipeline.py (run it first).

Run from the repo root: python3 demos/03_train_separator.py
"""

import numpy as np

from regionsep.loss import LossConfig
from regionsep.pipeline import SpecStore, make_sampler
from regionsep.precompute import validation_query
from regionsep.separator import (ModelConfig, SeparatorModel, TrainConfig,
                                 separate, train)
from regionsep.signal import AudioChunk, snr

store = SpecStore("/tmp/regionsep_demo")

model = SeparatorModel(ModelConfig(feat_dim=4, query_dim=4), seed=0)
sampler = make_sampler(store, "train")

history = train(model, sampler, LossConfig(),
                TrainConfig(epochs=1, batches_per_epoch=120, batch_size=2,
                            seed=0, dtype="float32"),
                log_every=20)
trace = history["loss"]
print(f"\nmean loss, first 20 batches {np.mean(trace[:20]):+.3f}, "
      f"last 20 batches {np.mean(trace[-20:]):+.3f}")

# Apply the trained model to a held-out query.
spec = next(store.iter_specs(split="test"))
query = validation_query(spec)
_track, chunks = store.clip_stems(spec.clip_id)
mixture = AudioChunk(
    samples=np.sum([c.samples for c in chunks], axis=0),
    sample_rate=chunks[0].sample_rate,
)
est = separate(mixture, query, model)
target = np.sum([chunks[i].samples for i in sorted(spec.target_indices)], axis=0)
print(f"held-out clip {spec.clip_id}: SNR {snr(est.samples, target):.2f} dB "
      "(short training run; expect a modest number)")
