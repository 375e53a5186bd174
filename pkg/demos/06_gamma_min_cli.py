"""Drive the gamma-min sweep through the command-line interface.

Writes a JSON config, invokes the `nlthin gamma-min` subcommand in
process, and reads the CSV/JSON artifacts back.  The normalized minima
converge to the theta-formula oracle as eps shrinks along the
constant-delta trajectory.
"""

import json
import pathlib
import tempfile

from nlthin.runner import main

config = {
    "density": {"family": "pure_convolution", "r": 1.0, "p": 2.0},
    "M": [[1.0]],
    "trajectory": "constant",
    "delta": 1.0,
    "eps_list": [1 / 8, 1 / 16],
}

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    cfg = tmp / "config.json"
    cfg.write_text(json.dumps(config))
    code = main(["-o", str(tmp / "sweep"), "gamma-min", str(cfg)])
    print(f"exit code {code}")
    rows = json.loads((tmp / "sweep.json").read_text())["rows"]
    for row in rows:
        print(f"eps {row['eps']:<8g} min/|A| {row['min_per_area']:.5f} "
              f"oracle {row['oracle']:.5f} gap {row['gap']:+.2%}")
    print("\nCSV header:", (tmp / "sweep.csv").read_text().splitlines()[0])
