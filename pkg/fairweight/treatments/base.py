from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from fairweight.models import (
    DatasetSchema,
    DiverseConfig,
    EncodedDataset,
    InfluenceRecord,
    ModelKind,
    ModelParams,
    TrainConfig,
    UniformConfig,
    WeightPlan,
)


@dataclass
class TreatmentContext:
    """Everything a treatment may read; ``records`` is filled only for influence treatments."""

    train: EncodedDataset
    test: EncodedDataset
    schema: DatasetSchema
    vanilla: ModelParams
    tcfg: TrainConfig
    kind: ModelKind = ModelKind.LOGISTIC
    uniform: UniformConfig = field(default_factory=UniformConfig)
    diverse: DiverseConfig = field(default_factory=DiverseConfig)
    records: list[InfluenceRecord] | None = None
    holdout: EncodedDataset | None = None


@dataclass
class TreatmentResult:
    """Training weights plus the (possibly column-reduced) train and test sets to fit and score on."""

    weights: np.ndarray
    train: EncodedDataset
    test: EncodedDataset
    plan: WeightPlan | None = None
    dropped_columns: list[str] = field(default_factory=list)

    @property
    def is_identity(self) -> bool:
        return not self.dropped_columns and bool(np.all(self.weights == 1.0))


class BaseTreatment(ABC):
    """A pre-processing treatment applied to the training set before the fair model is fit."""

    name: str = ""
    label: str = ""
    needs_influence: bool = False

    @abstractmethod
    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        """Return the weights and datasets the fair model is trained and evaluated on."""

    def describe(self, result: TreatmentResult) -> str:
        return self.label
