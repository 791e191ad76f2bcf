from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Dict, List, Optional
from enum import Enum
import math


class ThetaMode(str, Enum):
    LANDAU_INHOMOGENEOUS = "landau_inhomogeneous"
    LANDAU_HOMOGENEOUS = "landau_homogeneous"
    BOLTZMANN_INHOMOGENEOUS = "boltzmann_inhomogeneous"
    BOLTZMANN_HOMOGENEOUS = "boltzmann_homogeneous"
    VPL = "vpl"


MODE_ALIASES = {
    "landau-inhom": ThetaMode.LANDAU_INHOMOGENEOUS,
    "landau-hom": ThetaMode.LANDAU_HOMOGENEOUS,
    "boltzmann-inhom": ThetaMode.BOLTZMANN_INHOMOGENEOUS,
    "boltzmann-hom": ThetaMode.BOLTZMANN_HOMOGENEOUS,
}


class SingularCellRule(str, Enum):
    LATTICE = "lattice"
    BALL = "ball"


class BoundKind(str, Enum):
    A1HI = "a1hi"
    ALOINF = "aloinf"
    AGRAD = "agrad"
    C = "c"
    KERNEL_ANNULUS = "kernel_annulus"
    SPLITTING = "splitting"


class VerdictStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


class MomentWeight(str, Enum):
    ONE = "1"
    ENERGY = "|w|^2"


class MomentTestKind(str, Enum):
    PLATEAU = "plateau"
    CUTOFF_Y = "cutoff_y"


class ThetaCase(str, Enum):
    GENERIC = "theta != +-1/3"
    PLUS_THIRD = "theta = 1/3"
    MINUS_THIRD = "theta = -1/3"


class RefutationOutcome(str, Enum):
    REFUTED = "refuted"
    TRIVIAL = "consistent (trivial profile)"
    INCONCLUSIVE = "inconclusive"


class PlateauShape(str, Enum):
    BUMP = "bump"
    POLYNOMIAL = "polynomial"


class BlowupTrend(str, Enum):
    TYPE_I = "type_i"
    NONE = "no blow-up trend"
    INCONCLUSIVE = "inconclusive"


class LandauParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(-3.0, ge=-3.0, le=-2.0)
    a_const: float = Field(1.0, gt=0)
    # None selects the value that makes the trace and divergence forms agree
    c_const: Optional[float] = Field(None, gt=0)
    cell_rule: SingularCellRule = SingularCellRule.LATTICE

    @property
    def is_coulomb(self) -> bool:
        return self.gamma == -3.0

    @property
    def c_value(self) -> float:
        if self.c_const is not None:
            return self.c_const
        if self.is_coulomb:
            return 8.0 * math.pi * self.a_const
        return 2.0 * (self.gamma + 3.0) * self.a_const


class SelfSimParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float
    theta: float
    s_exp: Optional[float] = None
    t: float = Field(-1.0, lt=0)
    lambda_: float = Field(1.0, gt=0)
    alpha: float = 0.0

    @property
    def tau(self) -> float:
        """Time to blow-up, -t."""
        return -self.t


class CollisionParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., gt=-3.0, le=1.0)
    s_exp: float = Field(..., gt=0.0, lt=1.0)
    eta_min: float = Field(1e-3, gt=0.0, lt=0.5)
    # None selects the cancellation constant of the angular kernel
    q2_constant: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_soft_potential(self) -> "CollisionParams":
        if self.gamma + 2.0 * self.s_exp >= 0.0:
            raise ValueError(
                f"gamma + 2s must be negative, got gamma={self.gamma}, s={self.s_exp}"
            )
        return self


class ThetaVerdict(BaseModel):
    mode: ThetaMode
    theta: float
    gamma: float
    s_exp: Optional[float] = None
    admissible: bool
    violations: List[str] = []


class LimitReport(BaseModel):
    radii: List[float]
    values: List[float]
    differences: List[float] = []
    limit: Optional[float] = None
    tail: float = 0.0
    cauchy: bool = False
    predicted: Optional[float] = None
    relative_error: Optional[float] = None
    status: VerdictStatus = VerdictStatus.INCONCLUSIVE
    notes: List[str] = []


class BoundSample(BaseModel):
    kind: BoundKind
    exponent: float
    sample_id: int
    lhs: float
    rhs: float
    ratio: float


class BoundReport(BaseModel):
    kind: BoundKind
    exponent: float
    gamma: float
    samples: List[BoundSample] = []
    ratio_min: float = 0.0
    ratio_max: float = 0.0
    spread: float = 0.0
    fitted_constant: float = 0.0
    status: VerdictStatus = VerdictStatus.INCONCLUSIVE
    details: Dict[str, float] = {}
    notes: List[str] = []


class DecayTerm(BaseModel):
    name: str
    predicted_exponent: float
    measured_slope: Optional[float] = None
    decaying: bool


class DecayReport(BaseModel):
    theta: float
    gamma: float
    beta: float
    terms: List[DecayTerm]
    offending: List[str] = []
    status: VerdictStatus


class SymmetryReport(BaseModel):
    lambda_: float
    alpha: float
    factor: float
    original: float
    rescaled: float
    ratio: float
    status: VerdictStatus


class WeakFormReport(BaseModel):
    value: float
    tail_bound: float
    sensitivity: float
    eta_min: float
    pairs: int
    converged: bool


class GaussLawReport(BaseModel):
    c_force: float
    radii: List[float]
    flux: List[float]
    enclosed: List[float]
    relative_errors: List[float]
    status: VerdictStatus


class EntropyFunctionalReport(BaseModel):
    limit: LimitReport
    mass: Optional[float] = None
    dissipation: Optional[float] = None
    remainder: Optional[float] = None
    gap: Optional[float] = None
    remainder_slope: Optional[float] = None
    terms: Dict[str, float] = {}


class AdmissibilityNorm(BaseModel):
    name: str
    truncations: List[float]
    values: List[float]
    cauchy: bool
    value: float


class AdmissibilityReport(BaseModel):
    status: VerdictStatus
    norms: List[AdmissibilityNorm] = []
    failed: List[str] = []


class RefutationVerdict(BaseModel):
    theta: float
    gamma: float
    case: ThetaCase
    test: str
    predicted: Optional[float] = None
    measured: Optional[float] = None
    verdict: RefutationOutcome
    details: Dict[str, object] = {}


class MonitorRecord(BaseModel):
    step: int
    time: float
    mass: float
    momentum: List[float]
    energy: float
    entropy: float
    sup_norm: float
    l2_norm: float
    l3_norm: float
    clipped_mass: float = 0.0


class BlowupReport(BaseModel):
    trend: BlowupTrend
    theta: Optional[float] = None
    blowup_time: Optional[float] = None
    rates: Dict[str, float] = {}
    residual: Optional[float] = None
    notes: List[str] = []


class ExperimentConfig(BaseModel):
    """Flat experiment configuration shared by every CLI subcommand."""

    model_config = ConfigDict(extra="forbid")

    n: int = Field(32, ge=8)
    extent: float = Field(6.0, gt=0)
    gamma: float = -3.0
    theta: float = 0.2
    s_exp: Optional[float] = None
    a_const: float = Field(1.0, gt=0)
    c_const: Optional[float] = Field(None, gt=0)
    cell_rule: SingularCellRule = SingularCellRule.LATTICE
    mode: ThetaMode = ThetaMode.LANDAU_INHOMOGENEOUS
    profile: str = "gaussian"
    beta: float = 0.0
    samples: int = Field(100, ge=1)
    seed: int = 0
    steps: int = Field(100, ge=1)
    dt: float = Field(1e-3, gt=0)
    exponent: Optional[float] = None
    bound: BoundKind = BoundKind.A1HI
    t_samples: List[float] = [-0.5, -0.25, -0.125, -0.0625]
    input: Optional[str] = None

    @field_validator("n")
    @classmethod
    def _even_n(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"grid size n must be even, got {v}")
        return v

    @field_validator("t_samples")
    @classmethod
    def _negative_times(cls, v: List[float]) -> List[float]:
        if any(t >= 0 for t in v):
            raise ValueError("all t samples must be negative")
        return v

    @field_validator("mode", mode="before")
    @classmethod
    def _mode_alias(cls, v):
        if isinstance(v, str):
            return MODE_ALIASES.get(v.strip().lower(), v)
        return v

    def landau_params(self) -> LandauParams:
        return LandauParams(
            gamma=self.gamma, a_const=self.a_const, c_const=self.c_const, cell_rule=self.cell_rule
        )

    def selfsim_params(self, t: float = -1.0) -> SelfSimParams:
        return SelfSimParams(gamma=self.gamma, theta=self.theta, s_exp=self.s_exp, t=t)
