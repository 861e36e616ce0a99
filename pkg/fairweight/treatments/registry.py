import importlib
import pkgutil
from typing import TypeVar

from fairweight.errors import ConfigError
from fairweight.treatments.base import BaseTreatment

T = TypeVar("T", bound=BaseTreatment)

_registry: dict[str, BaseTreatment] = {}


def register(cls: type[T]) -> type[T]:
    """Decorator to register a treatment class."""
    instance = cls()
    _registry[instance.name] = instance
    return cls


class TreatmentRegistry:
    """Discovers treatment modules in this package and looks them up by variant name."""

    def __init__(self) -> None:
        self._discover()

    def _discover(self) -> None:
        import fairweight.treatments as pkg

        for _importer, modname, _ispkg in pkgutil.iter_modules(pkg.__path__):
            if modname not in ("base", "registry"):
                importlib.import_module(f"fairweight.treatments.{modname}")
        self._treatments = _registry

    def get(self, name: str) -> BaseTreatment:
        treatment = self._treatments.get(name)
        if treatment is None:
            raise ConfigError(f"Unknown variant '{name}'. Options: {', '.join(sorted(self._treatments))}")
        return treatment

    def all(self) -> dict[str, BaseTreatment]:
        return dict(self._treatments)
