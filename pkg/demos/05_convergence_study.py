"""
Convergence study
=================

Refine a mesh three times and watch the error fall.  The source is a flat
square in the middle of a cube, so the distance field is smooth away from
the square's edges.
"""

import tempfile
from pathlib import Path

from eikonal_fv.study import StudySettings, example, run_convergence_study, with_levels

problem = with_levels(example("EX9"), (16, 24, 32))
print(problem.description)

report = run_convergence_study(problem, StudySettings())
print(report.table())

# %%
# The CSV report omits wall times in reproducibility mode so that two runs
# compare byte for byte.
out = Path(tempfile.mkdtemp(prefix="eikonal_fv_")) / "ex9.csv"
report.write_csv(out, repro=True)
print(out.read_text())

# %%
# The same study on randomly perturbed meshes.
wobbly = run_convergence_study(problem, StudySettings(amplitude=0.15, seed=2))
print(wobbly.table())
