"""polarkit: polarization-prior toolkit for reflection separation,
surface-normal priors, and deferred-reflection supervision losses."""

__version__ = "0.1.0"
