"""Post-hoc figure rendering for factorysim run artifacts.

The simulator is consumed exclusively through its documented file formats
(packets.csv, sus.csv, curves.csv, summary.json, sweep.csv, sweep_agg.csv,
overhead.csv); nothing here imports the simulator.
"""

from .io import ArtifactError, read_csv_table, read_run, read_runs
from .figures import FAMILIES, render

__all__ = ["ArtifactError", "read_csv_table", "read_run", "read_runs",
           "FAMILIES", "render"]
