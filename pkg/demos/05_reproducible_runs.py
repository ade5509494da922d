"""Archived experiment configs and byte-identical re-runs.

Every run writes a CSV table and a JSON record with the resolved config,
verdicts, wall-clock time and library version.  Running the same file
twice gives the same bytes.
"""

import filecmp
import tempfile
from pathlib import Path

from marlab.harness import derive_seed, run

configs = Path(__file__).resolve().parent.parent / "configs"
print("substream seeds:", derive_seed(42, 0, "path"), derive_seed(42, 1, "path"))

with tempfile.TemporaryDirectory() as tmp:
    for cfg in sorted(configs.glob("*.yaml")):
        a = run(cfg, out=f"{tmp}/a/{cfg.stem}")
        b = run(cfg, out=f"{tmp}/b/{cfg.stem}")
        same = filecmp.cmp(a.csv_path, b.csv_path, shallow=False)
        print(f"{cfg.name:<28} passed={a.passed!s:<5} identical={same} "
              f"({a.wall_clock:.2f}s)")
