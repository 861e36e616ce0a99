import numpy as np

from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import register


@register
class VanillaTreatment(BaseTreatment):
    name = "vanilla"
    label = "Vanilla (unweighted ERM)"

    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        return TreatmentResult(weights=np.ones(ctx.train.n), train=ctx.train, test=ctx.test)
