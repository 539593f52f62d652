"""Zero mass data: curvature decays like 1/t.

A small rotationally symmetric bump on flat space (u = 1 throughout) has an
unbounded Hopf fiber.  The flow smooths it out and t * sup|Rm| stays bounded,
which the classifier reports as Type-III.

    python3 demos/03_zero_mass_type_iii.py
"""

import argparse

from bergerflow import diagnostics as dg
from bergerflow import flow_engine as fe
from bergerflow import initial_data as idt

ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
ap.add_argument("--delta", type=float, default=0.1)
ap.add_argument("--n", type=int, default=1024)
ap.add_argument("--t-end", type=float, default=20.0)
args = ap.parse_args()

profile = idt.af_profile("zero_mass", 1.0, args.delta, (args.n, 40.0))
print("initial class:", idt.validate_class(profile).label())

traj = fe.evolve(fe.prepare(profile), fe.StepControls(t_end=args.t_end, snapshot_every=1.0), keep_profiles=False)
for row in traj.series[::2]:
    print(f"t = {row['t']:4.1f}   sup|Rm| = {row['sup_mag']:.3e}   t*sup|Rm| = {row['t_sup_mag']:.3e}")

rep = dg.classify_singularity_type(traj.column("t"), traj.column("sup_mag"))
print(f"classifier: {rep.verdict} (p = {rep.p:.2f})")
