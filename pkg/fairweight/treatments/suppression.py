from fairweight.baselines import suppression, suppression_plan
from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import register


@register
class SuppressionTreatment(BaseTreatment):
    name = "suppression"
    label = "Suppression (sensitive feature removed)"

    def apply(self, ctx: TreatmentContext) -> TreatmentResult:
        plan = suppression_plan(ctx.train, ctx.schema)
        return TreatmentResult(
            weights=plan.weights,
            train=suppression(ctx.train, ctx.schema),
            test=suppression(ctx.test, ctx.schema),
            dropped_columns=plan.dropped_columns,
        )
