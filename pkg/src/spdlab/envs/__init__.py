"""Two-player sequential social dilemma environments."""

from .applepear import ApplePearConfig, ApplePearEnv, ApplePearState
from .base import GridPos, InvalidActionError, StepResult, TwoPlayerEnv
from .gathering import GatheringConfig, GatheringEnv, GatheringState
from .matrix import MatrixGameEnv
from .scripted import ScriptedPolicy, scripted_policy

GAMES = {"applepear": ApplePearEnv, "gathering": GatheringEnv, "matrix": MatrixGameEnv}


def make_env(game: str, **overrides) -> TwoPlayerEnv:
    """Build an environment by id; ``overrides`` go to the game's config."""
    if game == "applepear":
        return ApplePearEnv(ApplePearConfig(**overrides))
    if game == "gathering":
        return GatheringEnv(GatheringConfig(**overrides))
    if game == "matrix":
        return MatrixGameEnv(**overrides)
    raise ValueError(f"unknown game {game!r}; expected one of {sorted(GAMES)}")


__all__ = [
    "ApplePearConfig", "ApplePearEnv", "ApplePearState", "GridPos", "InvalidActionError",
    "StepResult", "TwoPlayerEnv", "GatheringConfig", "GatheringEnv", "GatheringState",
    "MatrixGameEnv", "ScriptedPolicy", "scripted_policy", "GAMES", "make_env",
]
