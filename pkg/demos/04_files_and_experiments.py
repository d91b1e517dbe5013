"""Dataset/model containers and the experiment pipeline, end to end.

Everything the command line does is a library call: write a dataset,
read it back bitwise, evaluate baselines into CSV, and render the MSE
curves to SVG.  All outputs land in ./demo_out.
"""

from pathlib import Path

from cfolab.dataset import DatasetSpec, generate, read_dataset, write_dataset
from cfolab.estimators import evaluate_estimator
from cfolab.harness.svgplot import plot_csvs
from cfolab.waveform import Channel, Modulation

out = Path("demo_out")
out.mkdir(exist_ok=True)

spec = DatasetSpec(
    modulations=(Modulation.BPSK, Modulation.QAM16),
    snr_grid_db=tuple(range(-10, 21, 5)),
    frames_per_cell=40,
    length=512,
    oversampling=8,
    channel=Channel.AWGN,
    master_seed=42,
)
records = generate(spec, workers=2)
data_path = out / "demo.cfod"
write_dataset(records, data_path, spec=spec)
print(f"wrote {len(records)} records to {data_path} (+ JSON sidecar)")

back = read_dataset(data_path)
assert all(a == b for a, b in zip(records, back))
print("read back bitwise-identical")

csv_paths = []
for method in ("kay", "kay2", "ml"):
    report = evaluate_estimator(back, method)
    path = out / f"{method}.csv"
    report.write_csv(path)
    csv_paths.append(path)
    worst = max(r.mse for r in report.rows)
    best = min(r.mse for r in report.rows)
    print(f"{method:5s}: per-SNR MSE from {best:.2e} to {worst:.2e}")

svg_path = out / "baselines.svg"
plot_csvs(csv_paths, svg_path)
print(f"rendered {svg_path}")
