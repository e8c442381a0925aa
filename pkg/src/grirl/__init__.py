"""General Reinforced Imitation: demonstration agents for off-policy RL."""

__version__ = "0.1.0"
