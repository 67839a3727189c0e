from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``k`` defaults to ``alpha`` (rounded), and ``stride`` to ``ell``. The
    ``use_*`` switches implement the ablation variants.
    """

    L: int = 28
    H: int = 7
    delta: int = 0
    C: int = 8
    d: int = 16
    G: int = 4
    alpha: float = 3.0
    k: int | None = None
    ell: int = 7
    stride: int | None = None
    r_per_layer: list[int] = field(default_factory=lambda: [1, 7])
    n_layers: int = 2
    drop_rate: float = 0.0
    eval_over_sequence: bool = False
    ln_eps: float = 1e-5
    leaky_slope: float = 0.01
    learn_alpha: bool = False
    use_vdab: bool = True
    use_tdab: bool = True
    use_pvt: bool = True
    use_nae: bool = True
    use_pn: bool = True

    def __post_init__(self):
        self.r_per_layer = [int(r) for r in self.r_per_layer]
        if self.k is None:
            self.k = max(1, int(round(self.alpha)))
        if self.stride is None:
            self.stride = self.ell
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.d % self.G:
            problems.append(f"d={self.d} is not divisible by G={self.G}")
        if self.d % 2:
            problems.append("d must be even for the sinusoidal position embedding")
        if not 1 <= self.stride <= self.ell:
            problems.append(f"stride={self.stride} must lie in [1, ell={self.ell}]")
        if self.ell > self.L:
            problems.append(f"ell={self.ell} exceeds L={self.L}")
        if self.alpha <= 0:
            problems.append("alpha must be positive")
        if len(self.r_per_layer) != self.n_layers:
            problems.append("r_per_layer needs one entry per encoder layer")
        if any(not 1 <= r <= self.L for r in self.r_per_layer):
            problems.append("every r must lie in [1, L]")
        if not 0 <= self.drop_rate < 1:
            problems.append("drop_rate must lie in [0, 1)")
        if not (self.use_vdab or self.use_tdab):
            problems.append("at least one attention branch is required")
        if min(self.L, self.H, self.C + 1, self.d) < 1 or self.delta < 0:
            problems.append("L, H, d must be positive, C and delta non-negative")
        if problems:
            raise ConfigError("; ".join(problems))

    # derived sizes ------------------------------------------------------
    @property
    def n_vars(self) -> int:
        return self.C + 1

    @property
    def padded_vars(self) -> int:
        return math.ceil(self.n_vars / self.G) * self.G

    @property
    def L_padded(self) -> int:
        extra = (self.L - self.ell) % self.stride
        return self.L + (self.stride - extra if extra else 0)

    @property
    def n_patches(self) -> int:
        return (self.L_padded - self.ell) // self.stride + 1

    def kappa(self, r: int) -> int:
        return math.ceil(self.L / r)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown ModelConfig keys: {sorted(unknown)}")
        return cls(**d)
