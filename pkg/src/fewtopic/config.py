"""Episode/experiment hyperparameters and the method table."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError

PRIOR_MODES = ("nn", "dir")


@dataclass(frozen=True)
class EpisodeConfig:
    n_topics: int = 20
    em_steps: int = 10
    support_size: int = 3
    support_rate: float = 0.8
    hidden: int = 256
    rep_dim: int = 256
    learning_rate: float = 1e-3
    dropout: float = 0.1
    max_epochs: int = 1000
    patience: int = 20
    val_interval: int = 10
    val_episodes: int = 50
    prior_mode: str = "nn"
    use_representation: bool = True
    use_em_layers: bool = True
    fine_tune_at_test: bool = False
    log_features: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_topics < 1:
            raise ConfigError(f"n_topics must be >= 1, got {self.n_topics}")
        if self.em_steps < 0:
            raise ConfigError(f"em_steps must be >= 0, got {self.em_steps}")
        if self.support_size < 1:
            raise ConfigError(f"support_size must be >= 1, got {self.support_size}")
        if not 0.0 < self.support_rate < 1.0:
            raise ConfigError(f"support_rate must lie in (0, 1), got {self.support_rate}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.hidden < 1 or self.rep_dim < 0:
            raise ConfigError("hidden must be >= 1 and rep_dim >= 0")
        if self.max_epochs < 0 or self.patience < 1 or self.val_interval < 1 or self.val_episodes < 1:
            raise ConfigError("max_epochs >= 0, patience/val_interval/val_episodes >= 1 required")
        if self.prior_mode not in PRIOR_MODES:
            raise ConfigError(f"prior_mode must be one of {PRIOR_MODES}, got {self.prior_mode!r}")

    @property
    def train_em_steps(self) -> int:
        """EM steps unrolled inside the training loss."""
        return self.em_steps if self.use_em_layers else 0

    @property
    def test_em_steps(self) -> int:
        return self.em_steps if (self.use_em_layers or self.fine_tune_at_test) else 0

    def with_(self, **changes) -> "EpisodeConfig":
        return replace(self, **changes)


# method -> (prior_mode, use_representation, use_em_layers, fine_tune_at_test)
NEURAL_METHODS = {
    "ours": ("nn", True, True, False),
    "nn": ("nn", False, False, False),
    "nn-r": ("nn", True, False, False),
    "nn-e": ("nn", False, True, False),
    "nn-f": ("nn", False, False, True),
    "nn-rf": ("nn", True, False, True),
    "dir": ("dir", False, False, False),
    "dir-e": ("dir", False, True, False),
    "dir-f": ("dir", False, False, True),
}
LDA_METHODS = ("lda-ind", "lda-all")
METHODS = tuple(NEURAL_METHODS) + LDA_METHODS


def config_for_method(method: str, base: EpisodeConfig | None = None) -> EpisodeConfig:
    """Set the variant flags of ``base`` for one of the neural methods."""
    if method not in NEURAL_METHODS:
        raise ConfigError(f"unknown neural method {method!r}; expected one of {', '.join(NEURAL_METHODS)}")
    mode, rep, em, ft = NEURAL_METHODS[method]
    return (base or EpisodeConfig()).with_(
        prior_mode=mode, use_representation=rep, use_em_layers=em, fine_tune_at_test=ft
    )


def episode_field_names():
    return [f.name for f in fields(EpisodeConfig)]
