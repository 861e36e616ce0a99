"""Exception hierarchy.

Three category bases map onto CLI exit codes: ``ConfigError`` (2),
``PipelineError`` (3) and ``InfeasibleError`` (4).
"""


class FairweightError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3


class ConfigError(FairweightError, ValueError):
    exit_code = 2


class PipelineError(FairweightError, RuntimeError):
    exit_code = 3

    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


class InfeasibleError(FairweightError):
    exit_code = 4


# ── Data ─────────────────────────────────────────────────────────


class RaggedRow(ConfigError):
    def __init__(self, line_no: int, expected: int, got: int):
        super().__init__(f"Line {line_no}: expected {expected} cells, got {got}")
        self.line_no = line_no


class UnknownColumn(ConfigError):
    def __init__(self, name: str):
        super().__init__(f"Column '{name}' not found in table header")
        self.name = name


class NonNumericCell(ConfigError):
    def __init__(self, column: str, row: int, value: str):
        super().__init__(f"Column '{column}' row {row}: non-numeric value {value!r}")
        self.column = column
        self.row = row


class SchemaMismatch(ConfigError):
    pass


class UnknownDataset(ConfigError):
    pass


class DegenerateSplit(PipelineError):
    pass


class SingleGroup(PipelineError):
    pass


# ── Model / influence ────────────────────────────────────────────


class AllZeroWeights(PipelineError):
    pass


class NonFinite(PipelineError):
    pass


class DimensionMismatch(PipelineError, ValueError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"Expected {expected} columns, got {got}")
        self.expected = expected
        self.got = got


class HeadNotConverged(PipelineError):
    def __init__(self, gnorm: float, tolerance: float, iterations: int):
        super().__init__(
            f"Head fit stopped at gradient norm {gnorm:.3e} > {tolerance:.1e} after {iterations} Newton steps",
            stage="train",
        )
        self.gnorm = gnorm


class NotPositiveDefinite(PipelineError):
    pass


class NoConvergence(PipelineError):
    def __init__(self, residual: float, tolerance: float):
        super().__init__(f"Linear solve did not converge: residual {residual:.3e} > {tolerance:.3e}")
        self.residual = residual


# ── Reweighting ──────────────────────────────────────────────────


class NoFeasiblePoint(InfeasibleError):
    pass


class Infeasible(InfeasibleError):
    def __init__(self, lambda_f: float, lambda_u: float, suggested_lambda_f: float | None):
        if suggested_lambda_f is None:
            hint = f"no lambda_f in [0, {lambda_f}] is feasible at lambda_u={lambda_u}"
        else:
            hint = f"largest feasible lambda_f at lambda_u={lambda_u} is {suggested_lambda_f:.6f}"
        super().__init__(f"Reweighting LP infeasible for lambda_f={lambda_f}, lambda_u={lambda_u}: {hint}")
        self.lambda_f = lambda_f
        self.lambda_u = lambda_u
        self.suggested_lambda_f = suggested_lambda_f


class EmptyCell(PipelineError):
    def __init__(self, a: int, y: int):
        super().__init__(f"No training samples with a={a}, y={y}")
        self.a = a
        self.y = y


# ── Metrics ──────────────────────────────────────────────────────


class Empty(PipelineError, ValueError):
    pass


class SingleClass(PipelineError, ValueError):
    pass


# ── Artifacts ────────────────────────────────────────────────────


class MissingArtifacts(ConfigError):
    pass


class RunExists(ConfigError):
    pass
