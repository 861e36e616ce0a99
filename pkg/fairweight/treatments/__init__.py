from fairweight.treatments.base import BaseTreatment, TreatmentContext, TreatmentResult
from fairweight.treatments.registry import TreatmentRegistry

__all__ = ["BaseTreatment", "TreatmentContext", "TreatmentRegistry", "TreatmentResult"]
