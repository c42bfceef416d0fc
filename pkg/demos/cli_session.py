#!/usr/bin/env python3
"""The four subcommands run back to back in a scratch directory.

Everything here can equally be typed at a shell against the installed
``flowcast`` script; calling cli.main in-process keeps the demo portable
and shows the exit codes explicitly.
"""

import json
import tempfile
from pathlib import Path

from flowcast import cli

root = Path(tempfile.mkdtemp(prefix="flowcast-demo-"))
print(f"working in {root}\n")

config = root / "experiment.json"
config.write_text(
    json.dumps(
        {
            "config_version": 1,
            "synth": {"p": 4, "days": 16, "seed": 12},
            "train": {"max_epochs": 3},
        },
        indent=2,
    )
)

steps = [
    ["synth", "--config", str(config), "--out", str(root / "data.csv")],
    [
        "train",
        "--config", str(config),
        "--dataset", str(root / "data.csv"),
        "--arch", "LSTM1-S-CNN1",
        "--impute", "mean",
        "--seed", "0",
        "--runs", "1",
        "--out", str(root / "run"),
    ],
    [
        "eval",
        "--checkpoint", str(root / "run" / "checkpoints" / "LSTM1-S-CNN1_mean_seed0.npz"),
        "--dataset", str(root / "data.csv"),
        "--views", "overall,horizon",
        "--out", str(root / "scores"),
    ],
    [
        "sweep",
        "--checkpoint", str(root / "run" / "checkpoints" / "LSTM1-S-CNN1_mean_seed0.npz"),
        "--dataset", str(root / "data.csv"),
        "--impute", "mean,interp",
        "--ratios", "0,0.1,0.21",
        "--seed", "0,1",
        "--out", str(root / "sweep"),
    ],
]

for argv in steps:
    print(f"$ flowcast {' '.join(argv)}")
    code = cli.main(argv)
    print(f"  -> exit code {code}\n")
    assert code == 0

print("metrics.csv:")
print((root / "run" / "metrics.csv").read_text())
print("sweep.csv:")
print((root / "sweep" / "sweep.csv").read_text())
