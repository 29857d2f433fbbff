"""Random matrix laboratory.

Modules: ``ensemble`` (Wigner-type matrices), ``spectral`` (resolvents and
the semicircle), ``locallaw`` (local law, rigidity, delocalization),
``dbm`` (Dyson Brownian motion), ``loggas`` (beta-ensembles and conditioned
gases), ``gapstats`` (gap and pair statistics), ``bandlab`` (band matrix
diffusion profile) and ``runner`` (command line and experiment registry).
"""

from . import bandlab, dbm, ensemble, gapstats, locallaw, loggas, spectral

__version__ = "0.1.0"

__all__ = ["bandlab", "dbm", "ensemble", "gapstats", "locallaw", "loggas", "spectral", "__version__"]
