from fairweight.baselines import ipw_sy
from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import register


@register
class IpwSYTreatment(BaseTreatment):
    name = "ipw_sy"
    label = "IPW(S,Y)"

    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        return TreatmentResult(weights=ipw_sy(ctx.train).weights, train=ctx.train, test=ctx.test)
