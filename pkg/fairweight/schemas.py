"""Dataset schema presets and JSON schema documents.

Three built-in adapters describe the public benchmark files. Any other
dataset is described by a JSON document of the same shape:

    {"columns": [{"name", "role", "kind"}], "favorable_label",
     "privileged_value", "sensitive_threshold"?, "sensitive_as_feature"?}
"""

import json
from pathlib import Path

from fairweight.errors import ConfigError, UnknownDataset
from fairweight.models import ColumnKind, ColumnRole, ColumnSpec, DatasetSchema

F, S, L, D = ColumnRole.FEATURE, ColumnRole.SENSITIVE, ColumnRole.LABEL, ColumnRole.DROP
CAT, NUM = ColumnKind.CATEGORICAL, ColumnKind.NUMERIC

# Adult (UCI census income). Privileged: sex == Male. Favorable: income >50K.
# The combined adult.data + adult.test file is expected with a header row and
# the trailing "." of the test labels removed.
_ADULT = [
    ("age", F, NUM),
    ("workclass", F, CAT),
    ("fnlwgt", D, NUM),
    ("education", D, CAT),
    ("education-num", F, NUM),
    ("marital-status", F, CAT),
    ("occupation", F, CAT),
    ("relationship", F, CAT),
    ("race", F, CAT),
    ("sex", S, CAT),
    ("capital-gain", F, NUM),
    ("capital-loss", F, NUM),
    ("hours-per-week", F, NUM),
    ("native-country", F, CAT),
    ("income", L, CAT),
]

# COMPAS (ProPublica two-year recidivism). Privileged: race == Caucasian.
# Favorable: no recidivism (two_year_recid == 0).
_COMPAS = [
    ("sex", F, CAT),
    ("age", F, NUM),
    ("age_cat", F, CAT),
    ("race", S, CAT),
    ("juv_fel_count", F, NUM),
    ("juv_misd_count", F, NUM),
    ("juv_other_count", F, NUM),
    ("priors_count", F, NUM),
    ("c_charge_degree", F, CAT),
    ("two_year_recid", L, CAT),
]

# German credit (Statlog). Privileged: age > 25. Favorable: credit == 1 (good).
_GERMAN = [
    ("status", F, CAT),
    ("duration", F, NUM),
    ("credit_history", F, CAT),
    ("purpose", F, CAT),
    ("credit_amount", F, NUM),
    ("savings", F, CAT),
    ("employment", F, CAT),
    ("installment_rate", F, NUM),
    ("personal_status", F, CAT),
    ("other_debtors", F, CAT),
    ("residence_since", F, NUM),
    ("property", F, CAT),
    ("age", S, NUM),
    ("installment_plans", F, CAT),
    ("housing", F, CAT),
    ("existing_credits", F, NUM),
    ("job", F, CAT),
    ("people_liable", F, NUM),
    ("telephone", F, CAT),
    ("foreign_worker", F, CAT),
    ("credit", L, CAT),
]

BUILTIN_SCHEMAS = {
    "adult": {
        "columns": _ADULT,
        "favorable_label": ">50K",
        "privileged_value": "Male",
        "favorable_description": "Income>50k",
    },
    "compas": {
        "columns": _COMPAS,
        "favorable_label": "0",
        "privileged_value": "Caucasian",
        "favorable_description": "No recidivism",
    },
    "german": {
        "columns": _GERMAN,
        "favorable_label": "1",
        "privileged_value": "age>25",
        "sensitive_threshold": 25.0,
        "favorable_description": "Good credit",
    },
}


def builtin_schema(name: str) -> DatasetSchema:
    """Return the schema for a built-in benchmark dataset.

    Raises UnknownDataset if the name is not recognised.
    """
    key = name.lower().strip()
    if key not in BUILTIN_SCHEMAS:
        valid = ", ".join(sorted(BUILTIN_SCHEMAS))
        raise UnknownDataset(f"Unknown dataset '{name}'. Built-in datasets: {valid}")
    preset = BUILTIN_SCHEMAS[key]
    return DatasetSchema(
        columns=[ColumnSpec(n, role, kind) for n, role, kind in preset["columns"]],
        favorable_label=preset["favorable_label"],
        privileged_value=preset.get("privileged_value"),
        sensitive_threshold=preset.get("sensitive_threshold"),
        name=key,
    )


def favorable_description(name: str) -> str:
    return BUILTIN_SCHEMAS[name.lower().strip()]["favorable_description"]


def schema_from_dict(doc: dict) -> DatasetSchema:
    try:
        columns = [
            ColumnSpec(c["name"], ColumnRole(c["role"]), ColumnKind(c.get("kind", "numeric"))) for c in doc["columns"]
        ]
        schema = DatasetSchema(
            columns=columns,
            favorable_label=str(doc["favorable_label"]),
            privileged_value=None if doc.get("privileged_value") is None else str(doc["privileged_value"]),
            sensitive_threshold=doc.get("sensitive_threshold"),
            sensitive_as_feature=bool(doc.get("sensitive_as_feature", True)),
            name=doc.get("name", "custom"),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"Invalid schema document: {e}") from e

    names = [c.name for c in columns]
    if len(set(names)) != len(names):
        raise ConfigError("Schema column names must be unique")
    # Fails fast when the role counts are wrong.
    schema.sensitive_column
    schema.label_column
    if schema.sensitive_threshold is None and schema.privileged_value is None:
        raise ConfigError("Schema needs privileged_value or sensitive_threshold")
    return schema


def load_schema(path: str | Path) -> DatasetSchema:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"Schema file {path} is not valid JSON: {e}") from e
    return schema_from_dict(doc)


def resolve_schema(dataset: str | None, schema_path: str | None) -> DatasetSchema:
    """An explicit schema file wins over a built-in name."""
    if schema_path:
        return load_schema(schema_path)
    if dataset:
        return builtin_schema(dataset)
    raise ConfigError("Either a built-in dataset name or a schema file is required")
