from fairweight.baselines import ipw_s
from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import register


@register
class IpwSTreatment(BaseTreatment):
    name = "ipw_s"
    label = "IPW(S)"

    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        return TreatmentResult(weights=ipw_s(ctx.train).weights, train=ctx.train, test=ctx.test)
