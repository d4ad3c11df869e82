"""Particle method for sedimentation in Stokes flow.

Point masses settle under gravity in a viscous fluid; each carries a weight
and moves with the velocity obtained by summing (regularized) Stokeslets over
the cloud.  The package also ships the diagnostic side: Osgood moduli and
Bihari-LaSalle comparison bounds, Yudovich-type norms of the initial data,
Wasserstein-1 stability of trajectories, and axisymmetry checks.
"""

__version__ = "0.1.0"
