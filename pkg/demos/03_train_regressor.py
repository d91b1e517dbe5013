"""Train the residual-network offset regressor at toy scale.

Generates a small labeled dataset, trains for a few epochs with the
default Adam schedule, and compares the learned estimator against the
Kay baseline per SNR.  Takes a couple of minutes on a laptop; scale
``FRAMES_PER_CELL``/``EPOCHS`` up for results closer to the full
experiments.
"""

import numpy as np

from cfolab.dataset import DatasetSpec, generate
from cfolab.estimators import evaluate_estimator
from cfolab.neuralnet import ModelConfig, TrainConfig, evaluate_model, train
from cfolab.waveform import Channel, Modulation

FRAMES_PER_CELL = 300
EPOCHS = 6

def spec(per_cell, seed):
    return DatasetSpec(
        modulations=(Modulation.BPSK,),
        snr_grid_db=(0.0, 10.0, 20.0),
        frames_per_cell=per_cell,
        length=512,
        oversampling=8,
        channel=Channel.AWGN,
        master_seed=seed,
    )

train_records = generate(spec(FRAMES_PER_CELL, 1), workers=2)
test_records = generate(spec(FRAMES_PER_CELL // 3, 2), workers=2)
print(f"train {len(train_records)} frames, test {len(test_records)} frames")

result = train(
    ModelConfig(input_length=512),
    train_records,
    test_records,
    TrainConfig(epochs=EPOCHS, lr_drop_epochs=(5,), seed=0),
)
for h in result.history:
    print(f"epoch {h.epoch}: lr {h.lr:.4g}  train {h.train_loss:.2e}  eval {h.eval_mse:.2e}")

model_rows = {r.snr_db: r.mse for r in evaluate_model(result.model, test_records).rows}
kay_rows = {r.snr_db: r.mse for r in evaluate_estimator(test_records, "kay").rows}
print("\nMSE by SNR (lower is better):")
print("snr_db  network     kay")
for snr in sorted(model_rows):
    print(f"{snr:6.0f}  {model_rows[snr]:.2e}  {kay_rows[snr]:.2e}")
