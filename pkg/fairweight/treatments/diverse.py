from fairweight.reweight import select_diverse_bias_set, solve_diverse_lp
from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import register


@register
class DiverseTreatment(BaseTreatment):
    name = "diverse"
    label = "Influence reweighting, per-sample LP"
    needs_influence = True

    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        records = ctx.records or []
        plan = solve_diverse_lp(records, select_diverse_bias_set(records), ctx.diverse)
        return TreatmentResult(weights=plan.weights, train=ctx.train, test=ctx.test, plan=plan)

    def describe(self, result: TreatmentResult) -> str:
        plan = result.plan
        return f"{self.label} (lambda_f={plan.lambda_f:g}, lambda_u={plan.lambda_u:g}, sum dw={plan.objective:.2f})"
