"""Numerical laboratory for Gibbs ensembles of the Ablowitz-Ladik and
Schur lattices via their unitary Lax matrices.

Subpackages by role: sampling (disk and circle samplers, Monte Carlo),
cmv_core (Lax matrices and trace algebra), spectral_measures (empirical
measures and the Fourier distance), equilibrium (free-energy functionals
and minimizers), dynamics (flows and conservation checks), ldp_lab
(verification harness), cli (command line).
"""

__version__ = "0.1.0"
