"""Model hyperparameters and frame-sampling modes."""

from dataclasses import dataclass, asdict

TEMPORAL_MODES = ("fourier", "learnable")
SPATIAL_MODES = ("none", "learned_1d", "learned_2d")
SAMPLER_MODES = ("random_in_segment", "middle_of_segment")
DTYPES = ("float32", "float64")


@dataclass(frozen=True)
class ModelConfig:
    T: int = 5
    H: int = 7
    W: int = 7
    D: int = 64
    d: int = 32
    L: int = 2
    n_heads: int = 4
    temporal_embedding: str = "fourier"
    spatial_embedding: str = "none"
    use_text: bool = False
    N_text: int = 0
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("T", "H", "W", "D", "d", "L", "n_heads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.d % self.n_heads != 0:
            raise ValueError("d must be divisible by n_heads")
        if self.temporal_embedding not in TEMPORAL_MODES:
            raise ValueError(f"temporal_embedding not in {TEMPORAL_MODES}")
        if self.spatial_embedding not in SPATIAL_MODES:
            raise ValueError(f"spatial_embedding not in {SPATIAL_MODES}")
        if self.use_text and self.N_text < 1:
            raise ValueError("use_text requires N_text >= 1")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype not in {DTYPES}")

    @property
    def n_tokens(self):
        return self.T * self.H * self.W

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


@dataclass(frozen=True)
class FrameSamplerMode:
    mode: str = "middle_of_segment"
    rng_seed: int = 0

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValueError(f"mode not in {SAMPLER_MODES}")
