"""Training hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

ARMS = ("fsa+demo", "fsa", "shaped+demo", "shaped")


@dataclass
class TrainConfig:
    """Everything the training loop reads; defaults are the desk-scale setup.

    Training episodes do not stop at a final automaton state; they keep
    collecting the satisfied-guard reward ``reward_rho_max`` until the horizon
    (evaluation episodes still stop there).

    Exploration noise is a fraction of the environment's ``v_max``.
    Prioritised replay uses the proportional variant with ``per_alpha`` and a
    ``per_beta0 -> 1`` importance-weight schedule over the step budget.
    """

    gamma: float = 0.99
    lr: float = 3e-4
    batch_size: int = 32
    horizon: int = 100
    episodes_per_round: int = 5
    updates_per_round: int = 100
    lambda_start: float = 0.8
    lambda_end: float = 0.1
    lambda_decay_updates: int = 30_000
    tau: float = 0.005
    noise_scale: float = 1.0
    total_steps: int = 300_000
    eval_interval: int = 5_000
    eval_trials: int = 10
    hidden: tuple = (100, 100)
    buffer_capacity: int = 1_000_000
    per_alpha: float = 0.6
    per_beta0: float = 0.4
    per_eps: float = 1e-6
    bc_epochs: int = 100
    bc_batch_size: int = 32
    n_demos: int = 50
    randomize_q_on_reset: bool = True
    terminate_on_final: bool = False
    reward_rho_max: float = 0.05
    divergence_threshold: float = 1e4
    solved_window: int = 3
    stop_when_solved: bool = False
    seed: int = 0

    def __post_init__(self):
        # config files may carry numbers as strings (YAML reads 1e-9 as text)
        for f in fields(self):
            value = getattr(self, f.name)
            default = f.default
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ValueError(f"{f.name} must be true or false")
            elif isinstance(default, (int, float)):
                try:
                    setattr(self, f.name, type(default)(float(value)) if isinstance(default, int) else float(value))
                except (TypeError, ValueError):
                    raise ValueError(f"{f.name} must be a number, got {value!r}") from None
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.1 <= self.lambda_end <= self.lambda_start <= 0.8:
            raise ValueError("lambda schedule must satisfy 0.1 <= end <= start <= 0.8")
        for name in ("batch_size", "horizon", "episodes_per_round", "updates_per_round", "eval_interval", "eval_trials"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.reward_rho_max <= 0:
            raise ValueError("reward_rho_max must be positive")
        if self.total_steps < 0 or self.lambda_decay_updates < 1:
            raise ValueError("step budget and decay horizon must be non-negative")

    def bc_weight(self, update: int) -> float:
        """Linear decay from ``lambda_start`` to ``lambda_end``, then flat."""
        frac = min(1.0, update / self.lambda_decay_updates)
        return max(self.lambda_end, self.lambda_start + (self.lambda_end - self.lambda_start) * frac)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training fields: {sorted(unknown)}")
        return cls(**d)
