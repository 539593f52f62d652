"""The experiment driver, end to end.

Writes a config, runs `simulate`, inspects the final snapshot with `validate`
and `compare`, and fans out a small `sweep`.  The same subcommands are
available as `python3 -m bergerflow <command> ...`.

    python3 demos/04_cli_tour.py /tmp/bergerflow_tour
"""

import sys
from pathlib import Path

from bergerflow.experiment_cli import main

out = Path(sys.argv[1] if len(sys.argv) > 1 else "bergerflow_tour")
out.mkdir(parents=True, exist_ok=True)

config = out / "gk.ini"
config.write_text("""\
[initial_data]
family = gk
k = 0.5

[grid]
n = 512
x_max = 20

[controls]
t_end = 2
snapshot_every = 0.5

[output]
snapshots = final

[sweep]
k = 0, 0.25, 0.5
""")

print("== simulate")
code = main(["simulate", "--config", str(config), "--out", str(out / "run")])
print("exit code", code)

snapshot = out / "run" / "snapshots" / "final.csv"
print("\n== validate")
main(["validate", "--snapshot", str(snapshot)])

print("\n== compare with Taub-NUT of mass 1 on s <= 5")
main(["compare", "--snapshot", str(snapshot), "--mass", "1", "--window", "5"])

print("\n== sweep over k")
main(["sweep", "--config", str(config), "--out", str(out / "sweep"), "--workers", "1"])
print((out / "sweep" / "sweep.csv").read_text())
