from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from sklearn.preprocessing import OneHotEncoder, StandardScaler


class ColumnRole(Enum):
    FEATURE = "feature"
    SENSITIVE = "sensitive"
    LABEL = "label"
    DROP = "drop"


class ColumnKind(Enum):
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


class Stratify(Enum):
    NONE = "none"
    LABEL = "label"
    LABEL_SENSITIVE = "label_sensitive"


class ModelKind(Enum):
    LOGISTIC = "logistic"
    MLP = "mlp"


class Variant(Enum):
    VANILLA = "vanilla"
    UNIFORM = "uniform"
    DIVERSE = "diverse"
    SUPPRESSION = "suppression"
    IPW_S = "ipw_s"
    IPW_SY = "ipw_sy"


class UtilityMetric(Enum):
    ACC = "acc"
    F1 = "f1"
    AUC = "auc"


FAIRNESS_METRICS = ("dp", "fpr", "eodds", "err")
UTILITY_METRICS = ("acc", "f1", "auc")


# ── Data ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RawTable:
    header: list[str]
    rows: list[list[str]]
    dropped_rows: int = 0

    def column(self, name: str) -> list[str]:
        idx = self.header.index(name)
        return [row[idx] for row in self.rows]


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: ColumnRole
    kind: ColumnKind = ColumnKind.NUMERIC


@dataclass(frozen=True)
class DatasetSchema:
    """Column roles plus the raw values that define Y=1 and A=1.

    When ``sensitive_threshold`` is set the sensitive column is numeric and
    A=1 means value > threshold; ``privileged_value`` is then only a label.
    """

    columns: list[ColumnSpec]
    favorable_label: str
    privileged_value: str | None = None
    sensitive_threshold: float | None = None
    sensitive_as_feature: bool = True
    name: str = "custom"

    def _single(self, role: ColumnRole) -> str:
        names = [c.name for c in self.columns if c.role == role]
        if len(names) != 1:
            from fairweight.errors import SchemaMismatch

            raise SchemaMismatch(f"Schema needs exactly one {role.value} column, found {len(names)}")
        return names[0]

    @property
    def sensitive_column(self) -> str:
        return self._single(ColumnRole.SENSITIVE)

    @property
    def label_column(self) -> str:
        return self._single(ColumnRole.LABEL)

    @property
    def feature_columns(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.role == ColumnRole.FEATURE]

    @property
    def used_columns(self) -> list[str]:
        return [c.name for c in self.columns if c.role != ColumnRole.DROP]

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "columns": [{"name": c.name, "role": c.role.value, "kind": c.kind.value} for c in self.columns],
            "favorable_label": self.favorable_label,
            "privileged_value": self.privileged_value,
            "sensitive_as_feature": self.sensitive_as_feature,
        }
        if self.sensitive_threshold is not None:
            doc["sensitive_threshold"] = self.sensitive_threshold
        return doc


@dataclass
class EncodingStats:
    """Statistics fitted on the encoding population and reused on other splits."""

    means: dict[str, float] = field(default_factory=dict)
    stds: dict[str, float] = field(default_factory=dict)
    categories: dict[str, list[str]] = field(default_factory=dict)
    dropped_columns: list[str] = field(default_factory=list)
    scalers: dict[str, StandardScaler] = field(default_factory=dict, repr=False, compare=False)
    encoders: dict[str, OneHotEncoder] = field(default_factory=dict, repr=False, compare=False)


@dataclass
class EncodedDataset:
    X: np.ndarray
    y: np.ndarray
    a: np.ndarray
    feature_names: list[str]
    feature_sources: list[str] = field(default_factory=list)
    stats: EncodingStats | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        self.y = np.asarray(self.y, dtype=int)
        self.a = np.asarray(self.a, dtype=int)
        if not self.feature_sources:
            self.feature_sources = list(self.feature_names)
        if len(self.y) != len(self.X) or len(self.a) != len(self.X):
            raise ValueError("X, y and a must have the same number of rows")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names must match the column count of X")

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def subset(self, idx) -> "EncodedDataset":
        idx = np.asarray(idx, dtype=int)
        return EncodedDataset(
            X=self.X[idx],
            y=self.y[idx],
            a=self.a[idx],
            feature_names=list(self.feature_names),
            feature_sources=list(self.feature_sources),
            stats=self.stats,
        )

    def sample(self, i: int) -> "Sample":
        return Sample(x=self.X[i], y=int(self.y[i]))


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: int


@dataclass(frozen=True)
class GroupPartition:
    idx_0: np.ndarray
    idx_1: np.ndarray

    @property
    def n_0(self) -> int:
        return len(self.idx_0)

    @property
    def n_1(self) -> int:
        return len(self.idx_1)

    def group(self, a: int) -> np.ndarray:
        return self.idx_1 if a == 1 else self.idx_0


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    seed: int = 0
    stratify_on: Stratify = Stratify.LABEL_SENSITIVE


# ── Model ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.1
    l2_strength: float = 1e-4
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    tolerance: float = 1e-8
    solver: str = "newton"  # newton | gd, logistic only
    hidden_sizes: tuple[int, int] = (64, 32)
    head_refit: bool = True


@dataclass(frozen=True)
class ModelParams:
    """Trained classifier. The head is always affine + sigmoid.

    For the MLP kind ``hidden`` holds two (W, b) pairs with ReLU after each.
    """

    kind: ModelKind
    head_w: np.ndarray
    head_b: float
    input_dim: int
    hidden: tuple[tuple[np.ndarray, np.ndarray], ...] = ()
    l2_strength: float = 0.0

    @property
    def head_dim(self) -> int:
        return int(self.head_w.shape[0])

    @property
    def theta(self) -> np.ndarray:
        """Head parameters as one vector [w, b]."""
        return np.append(self.head_w, self.head_b)


@dataclass(frozen=True)
class PredictionBatch:
    probs: np.ndarray
    labels: np.ndarray


# ── Influence ───────────────────────────────────────────────────


@dataclass(frozen=True)
class HessianHandle:
    matrix: np.ndarray
    damping: float
    n: int

    @property
    def k(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class Ihvp:
    v_0: np.ndarray
    v_1: np.ndarray
    residual_0: float
    residual_1: float


@dataclass(frozen=True)
class InfluenceRecord:
    index: int
    i0: float
    i1: float
    delta_if: float
    total_if: float

    @classmethod
    def from_groups(cls, index: int, i0: float, i1: float) -> "InfluenceRecord":
        return cls(index=index, i0=i0, i1=i1, delta_if=i0 - i1, total_if=i0 + i1)


# ── Reweighting ─────────────────────────────────────────────────


@dataclass(frozen=True)
class UniformConfig:
    tau: float = 0.05
    grid_points: int = 21
    utility_metric: UtilityMetric = UtilityMetric.ACC
    fairness_metrics: tuple[str, ...] = FAIRNESS_METRICS
    epsilon_norm: float = 1e-8
    eval_split: str = "train"  # train | holdout
    validation_fraction: float = 0.2


@dataclass(frozen=True)
class DiverseConfig:
    lambda_f: float = 0.8
    lambda_u: float = 0.0
    potential_scope: str = "diverse"  # diverse | all


@dataclass(frozen=True)
class FairnessScore:
    pairs: dict[str, tuple[float, float]]
    s_fair: float


@dataclass(frozen=True)
class GridPoint:
    w: float
    util: float
    s_fair: float
    feasible: bool


@dataclass
class WeightPlan:
    weights: np.ndarray
    variant: Variant
    bias_set: tuple[int, ...]
    objective: float
    status: str = "optimal"
    w_star: float | None = None
    grid: list[GridPoint] = field(default_factory=list)
    util_base: float | None = None
    tau: float | None = None
    delta_w: np.ndarray | None = None
    slacks: tuple[float, float] | None = None
    max_fair: float | None = None
    max_util: float | None = None
    lambda_f: float | None = None
    lambda_u: float | None = None
    fractional_count: int | None = None

    @property
    def feasible_grid_points(self) -> int:
        return sum(1 for p in self.grid if p.feasible)

    def to_sidecar(self) -> dict:
        doc = {
            "variant": self.variant.value,
            "objective": self.objective,
            "status": self.status,
            "bias_set_size": len(self.bias_set),
        }
        if self.variant == Variant.UNIFORM:
            doc.update(
                {
                    "tau": self.tau,
                    "w_star": self.w_star,
                    "util_base": self.util_base,
                    "feasible_grid_points": self.feasible_grid_points,
                }
            )
        else:
            doc.update(
                {
                    "lambda_f": self.lambda_f,
                    "lambda_u": self.lambda_u,
                    "max_fair": self.max_fair,
                    "max_util": self.max_util,
                    "slacks": list(self.slacks) if self.slacks is not None else None,
                    "fractional_count": self.fractional_count,
                }
            )
        return doc


# ── Metrics ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ConfusionByGroup:
    group_0: Confusion
    group_1: Confusion

    def group(self, a: int) -> Confusion:
        return self.group_1 if a == 1 else self.group_0


@dataclass
class MetricReport:
    delta_dp: float = 0.0
    delta_fpr: float = 0.0
    delta_eodds: float = 0.0
    delta_err: float = 0.0
    acc: float = 0.0
    f1: float = 0.0
    auc: float = 0.0
    warnings: list[str] = field(default_factory=list)

    KEYS = ("delta_dp", "delta_fpr", "delta_eodds", "delta_err", "acc", "f1", "auc")

    def fairness(self, name: str) -> float:
        return getattr(self, f"delta_{name}")

    def utility(self, name: str) -> float:
        return getattr(self, name)

    def to_dict(self) -> dict:
        doc = {k: getattr(self, k) for k in self.KEYS}
        doc["warnings"] = list(self.warnings)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricReport":
        return cls(**{k: float(doc[k]) for k in cls.KEYS}, warnings=list(doc.get("warnings", [])))


# ── Baselines ───────────────────────────────────────────────────


@dataclass
class BaselinePlan:
    kind: Variant
    weights: np.ndarray | None = None
    dropped_columns: list[str] = field(default_factory=list)


# ── Experiments ─────────────────────────────────────────────────


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    csv_path: str | None = None
    schema_path: str | None = None
    delimiter: str = ","
    model: ModelKind = ModelKind.LOGISTIC
    train: TrainConfig = field(default_factory=TrainConfig)
    variant: Variant = Variant.DIVERSE
    uniform: UniformConfig = field(default_factory=UniformConfig)
    diverse: DiverseConfig = field(default_factory=DiverseConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    damping: float = 1e-3
    output_dir: str = "runs/latest"
    seed: int = 0


@dataclass(frozen=True)
class RunRecord:
    config: dict
    before: MetricReport
    after: MetricReport
    plan_path: str
    weights_path: str
    wall_clock_s: float
    version: str
