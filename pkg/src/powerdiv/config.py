"""Grid configuration for ``verify`` and ``sweep``.

The file format is flat ``key = value`` lines; ``#`` starts a comment and
list values are comma separated::

    n = 20, 40, 80, 160
    r = 2, 3, 4
    family = uniform
    specs = 60: .2 .3 .5; 100: .1 .2 .3 .4
    lambda = -1/2, 0, 2/3, 1, 2, 3.5
    functions = exp, logistic
    variants = C5, C15, C2, C12, G5, cor1
    geometric_ratio = 0.5
    cap = 50000000

Every key is optional. Missing keys take the values of :data:`DEFAULT_GRID`.
Pearson-only variants (``G5``, ``G2``, ``T0_*``) are evaluated at ``lambda = 1``
only, since they bound the Pearson statistic alone.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

from .bounds import VARIANT_ORDERS
from .distributions import DEFAULT_CAP
from .errors import ConfigError, InputError
from .model import REGISTRY, MultinomialSpec, make_spec, parse_number, parse_number_list

FAMILIES = ("uniform", "geometric", "one_small")
GRID_VARIANTS = tuple(VARIANT_ORDERS) + ("cor1",)
_SECTION = "grid"


def family_probs(family: str, n: int, r: int, ratio: float = 0.5) -> list[float]:
    """Cell probabilities of a named family.

    ``geometric`` is proportional to ``ratio**j``; ``one_small`` puts ``1/n``
    on the first cell and splits the rest evenly.
    """
    if r < 2:
        raise ConfigError(f"need r >= 2, got {r}")
    if family == "uniform":
        return [1.0 / r] * r
    if family == "geometric":
        if not 0.0 < ratio <= 1.0:
            raise ConfigError(f"geometric_ratio must lie in (0, 1], got {ratio!r}")
        w = [ratio**j for j in range(r)]
        s = sum(w)
        return [x / s for x in w]
    if family == "one_small":
        if n < 2:
            raise ConfigError("one_small needs n >= 2")
        small = 1.0 / n
        return [small] + [(1.0 - small) / (r - 1)] * (r - 1)
    raise ConfigError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


@dataclass(frozen=True)
class GridCell:
    """One multinomial model on the grid, with the axis values that produced it."""

    spec: MultinomialSpec
    family: str


@dataclass(frozen=True)
class GridConfig:
    n: tuple[int, ...] = (20, 40, 80, 160)
    r: tuple[int, ...] = (2, 3, 4)
    families: tuple[str, ...] = ("uniform",)
    specs: tuple[tuple[int, tuple[float, ...]], ...] = ((60, (0.2, 0.3, 0.5)), (100, (0.1, 0.2, 0.3, 0.4)))
    lambdas: tuple[float, ...] = (-0.5, 0.0, 2.0 / 3.0, 1.0, 2.0, 3.5)
    functions: tuple[str, ...] = tuple(REGISTRY)
    variants: tuple[str, ...] = GRID_VARIANTS
    geometric_ratio: float = 0.5
    cap: int = DEFAULT_CAP

    def cells(self) -> list[GridCell]:
        """Axis product in ``(n, r, family)`` order, then the explicit specs."""
        out = []
        for n, r, fam in product(self.n, self.r, self.families):
            try:
                out.append(GridCell(make_spec(n, family_probs(fam, n, r, self.geometric_ratio)), fam))
            except InputError as exc:
                raise ConfigError(f"grid cell n={n}, r={r}, family={fam}: {exc}") from None
        for n, probs in self.specs:
            try:
                out.append(GridCell(make_spec(n, probs), "explicit"))
            except InputError as exc:
                raise ConfigError(f"explicit spec n={n}: {exc}") from None
        return out


DEFAULT_GRID = GridConfig()


def _ints(key: str, text: str) -> tuple[int, ...]:
    vals = parse_number_list(text)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{key}: expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _names(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.replace(";", ",").split(",") if p.strip())


def _specs(text: str) -> tuple[tuple[int, tuple[float, ...]], ...]:
    out = []
    for item in text.split(";"):
        if not item.strip():
            continue
        if ":" not in item:
            raise ConfigError(f"specs: expected 'n: p1 p2 ...', got {item.strip()!r}")
        head, tail = item.split(":", 1)
        n = parse_number(head)
        if n != int(n):
            raise ConfigError(f"specs: n must be an integer, got {head.strip()!r}")
        out.append((int(n), tuple(parse_number_list(tail))))
    return tuple(out)


def parse_config(text: str) -> GridConfig:
    """Parse the flat grammar; unknown keys and malformed values raise :class:`ConfigError`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = dict(parser[_SECTION])
    kw: dict = {}
    try:
        for key, value in raw.items():
            if key == "n":
                kw["n"] = _ints(key, value)
            elif key == "r":
                kw["r"] = _ints(key, value)
            elif key in ("family", "families"):
                kw["families"] = _names(value)
            elif key == "specs":
                kw["specs"] = _specs(value)
            elif key in ("lambda", "lambdas"):
                kw["lambdas"] = tuple(parse_number_list(value))
            elif key in ("function", "functions"):
                kw["functions"] = _names(value)
            elif key in ("variant", "variants"):
                kw["variants"] = _names(value)
            elif key == "geometric_ratio":
                kw["geometric_ratio"] = parse_number(value)
            elif key == "cap":
                kw["cap"] = _ints(key, value)[0]
            else:
                raise ConfigError(f"unknown config key {key!r}")
    except ConfigError:
        raise
    except (InputError, IndexError) as exc:
        raise ConfigError(f"bad value: {exc}") from None
    cfg = replace(DEFAULT_GRID, **kw)
    validate(cfg)
    return cfg


def validate(cfg: GridConfig) -> None:
    for fam in cfg.families:
        if fam not in FAMILIES:
            raise ConfigError(f"unknown family {fam!r}")
    for name in cfg.functions:
        if name not in REGISTRY:
            raise ConfigError(f"unknown function {name!r}; choose from {', '.join(REGISTRY)}")
    for v in cfg.variants:
        if v not in GRID_VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; choose from {', '.join(GRID_VARIANTS)}")
    for lam in cfg.lambdas:
        if not lam > -1.0:
            raise ConfigError(f"bounds need lambda > -1, got {lam!r}")
    if cfg.cap < 1:
        raise ConfigError("cap must be positive")


def load_config(path: str | Path | None) -> GridConfig:
    if path is None:
        return DEFAULT_GRID
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)
