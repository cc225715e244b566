"""Sequential public goods games: equilibria, theory checks, sweeps and PPO meta-policies."""

__version__ = "0.1.0"
