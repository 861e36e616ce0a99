from fairweight.reweight import optimize_uniform
from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import register


@register
class UniformTreatment(BaseTreatment):
    name = "uniform"
    label = "Influence reweighting, shared weight"
    needs_influence = True

    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        plan = optimize_uniform(ctx.train, ctx.records or [], ctx.vanilla, ctx.uniform, ctx.tcfg, holdout=ctx.holdout)
        return TreatmentResult(weights=plan.weights, train=ctx.train, test=ctx.test, plan=plan)

    def describe(self, result: TreatmentResult) -> str:
        return f"{self.label} (w*={result.plan.w_star:.2f}, |Z|={len(result.plan.bias_set)})"
