"""Test-problem catalog and the plain-text instance file format.

An instance file is a list of ``key: value`` lines followed by optional
``[name]`` sections holding dense matrices, one row per line::

    kind: inclusion
    family: scaled_skew
    name: skew2
    dim: 2
    mu: 0
    anchor: 1 0
    zstar: 0 0
    [S]
    0 -1
    1 0

Vectors are whitespace-separated on one line; ``inf`` and ``-inf`` are
accepted. Blank lines and lines starting with ``#`` are ignored.
:func:`write_instance` emits the canonical form (fixed key order, 17
significant digits), so ``parse(write(x))`` reproduces ``x`` exactly.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alm import ConvexProgram
from .operators import (
    AffineOperator,
    BoxNormalCone,
    QuadraticBoxSubdifferential,
    ScaledIdentityPlusSkew,
)

__all__ = [
    "InstanceFormatError",
    "Instance",
    "parse_instance",
    "read_instance",
    "write_instance",
    "skew2",
    "spread_skew",
    "strongly_monotone",
    "random_quad_box",
    "canonical_qp",
    "random_qp",
    "CATALOG",
]

FAMILIES = {
    "affine": {"vectors": ["q"], "matrices": ["M"], "scalars": []},
    "normal_cone_box": {"vectors": ["lower", "upper"], "matrices": [], "scalars": []},
    "scaled_skew": {"vectors": [], "matrices": ["S"], "scalars": ["mu"]},
    "quadratic_box": {"vectors": ["q", "lower", "upper"], "matrices": ["Q"], "scalars": []},
    "qp": {"vectors": ["q", "b", "lower", "upper"], "matrices": ["Q", "A"], "scalars": []},
}
OPTIONAL_VECTORS = {"inclusion": ["anchor", "zstar"], "qp": ["y0", "x_star", "y_star"]}
OPTIONAL_SCALARS = {"inclusion": [], "qp": ["optimum"]}


class InstanceFormatError(ValueError):
    """Malformed or inconsistent instance file."""


@dataclass
class Instance:
    """Parsed instance: family name plus its numeric fields."""

    kind: str
    family: str
    name: str
    data: dict = field(default_factory=dict)

    @property
    def dim(self):
        return int(self.data["dim"]) if self.kind == "inclusion" else int(self.data["n"])

    def operator(self):
        """Build the monotone operator of an ``inclusion`` instance."""
        if self.kind != "inclusion":
            raise InstanceFormatError(f"instance {self.name!r} is a {self.kind}, not an inclusion")
        d = self.data
        try:
            if self.family == "affine":
                return AffineOperator(d["M"], d["q"])
            if self.family == "normal_cone_box":
                return BoxNormalCone(d["lower"], d["upper"])
            if self.family == "scaled_skew":
                return ScaledIdentityPlusSkew(d["mu"], d["S"])
            return QuadraticBoxSubdifferential(d["Q"], d["q"], BoxNormalCone(d["lower"], d["upper"]))
        except ValueError as exc:
            raise InstanceFormatError(str(exc)) from None

    def program(self):
        """Build the :class:`ConvexProgram` of a ``qp`` instance."""
        if self.kind != "qp":
            raise InstanceFormatError(f"instance {self.name!r} is an {self.kind}, not a qp")
        d = self.data
        try:
            return ConvexProgram(
                d["Q"], d["q"], d["A"], d["b"], BoxNormalCone(d["lower"], d["upper"]),
                x_star=d.get("x_star"), y_star=d.get("y_star"), optimum=d.get("optimum"),
                name=self.name,
            )
        except ValueError as exc:
            raise InstanceFormatError(str(exc)) from None

    @property
    def anchor(self):
        a = self.data.get("anchor" if self.kind == "inclusion" else "y0")
        if a is not None:
            return a
        return np.zeros(self.dim if self.kind == "inclusion" else int(self.data["m"]))

    @property
    def zstar(self):
        return self.data.get("zstar" if self.kind == "inclusion" else "y_star")


def _floats(text, where):
    try:
        return np.array([float(t) for t in text.split()], dtype=float)
    except ValueError:
        raise InstanceFormatError(f"{where}: non-numeric entry in {text!r}") from None


def parse_instance(text):
    """Parse instance text into an :class:`Instance`."""
    keys, sections, current = {}, {}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if not current or current in sections:
                raise InstanceFormatError(f"line {lineno}: bad or repeated section {line!r}")
            sections[current] = []
            continue
        if current is not None:
            sections[current].append(_floats(line, f"line {lineno}"))
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise InstanceFormatError(f"line {lineno}: expected 'key: value', got {line!r}")
        key = key.strip()
        if key in keys:
            raise InstanceFormatError(f"line {lineno}: repeated key {key!r}")
        keys[key] = value.strip()

    kind = keys.pop("kind", None)
    if kind not in ("inclusion", "qp"):
        raise InstanceFormatError(f"kind must be 'inclusion' or 'qp', got {kind!r}")
    family = keys.pop("family", "qp" if kind == "qp" else None)
    if family not in FAMILIES or (kind == "qp") != (family == "qp"):
        raise InstanceFormatError(f"unknown family {family!r} for kind {kind!r}")
    name = keys.pop("name", "unnamed")
    spec = FAMILIES[family]

    data = {}
    dim_keys = ["n", "m"] if kind == "qp" else ["dim"]
    for dk in dim_keys:
        if dk not in keys:
            raise InstanceFormatError(f"missing dimension {dk!r}")
        try:
            data[dk] = int(keys.pop(dk))
        except ValueError:
            raise InstanceFormatError(f"dimension {dk!r} must be an integer") from None
        if data[dk] < (0 if dk == "m" else 1):
            raise InstanceFormatError(f"dimension {dk!r} out of range")
    n = data["n"] if kind == "qp" else data["dim"]
    m = data.get("m")

    vec_len = {"b": m, "anchor": n, "zstar": n, "x_star": n, "y0": m, "y_star": m}
    for v in spec["vectors"] + OPTIONAL_VECTORS[kind]:
        if v not in keys:
            if v in spec["vectors"]:
                raise InstanceFormatError(f"missing vector {v!r}")
            continue
        arr = _floats(keys.pop(v), v)
        want = vec_len.get(v, n)
        if arr.shape[0] != want:
            raise InstanceFormatError(f"vector {v!r} has length {arr.shape[0]}, declared {want}")
        data[v] = arr
    for s in spec["scalars"] + OPTIONAL_SCALARS[kind]:
        if s not in keys:
            if s in spec["scalars"]:
                raise InstanceFormatError(f"missing scalar {s!r}")
            continue
        try:
            data[s] = float(keys.pop(s))
        except ValueError:
            raise InstanceFormatError(f"scalar {s!r} is not a number") from None
    if keys:
        raise InstanceFormatError(f"unknown keys: {', '.join(sorted(keys))}")

    shapes = {"A": (m, n)}
    for mat in spec["matrices"]:
        rows = sections.pop(mat, None)
        if rows is None:
            raise InstanceFormatError(f"missing section [{mat}]")
        want = shapes.get(mat, (n, n))
        if len(rows) != want[0] or any(r.shape[0] != want[1] for r in rows):
            raise InstanceFormatError(f"section [{mat}] does not match declared shape {want}")
        data[mat] = np.array(rows, dtype=float).reshape(want)
    if sections:
        raise InstanceFormatError(f"unknown sections: {', '.join(sorted(sections))}")
    for v in ("lower", "upper"):
        if v in data and np.any(np.isnan(data[v])):
            raise InstanceFormatError(f"{v} must not contain nan")
    return Instance(kind, family, name, data)


def read_instance(path):
    """Parse the instance file at ``path``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InstanceFormatError(f"cannot read {path}: {exc}") from None
    return parse_instance(text)


def _fmt(x):
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_instance(inst, path=None):
    """Canonical text of ``inst``; also written to ``path`` when given."""
    d = inst.data
    spec = FAMILIES[inst.family]
    lines = [f"kind: {inst.kind}"]
    if inst.kind == "inclusion":
        lines.append(f"family: {inst.family}")
    lines.append(f"name: {inst.name}")
    for dk in (["n", "m"] if inst.kind == "qp" else ["dim"]):
        lines.append(f"{dk}: {int(d[dk])}")
    for s in spec["scalars"] + OPTIONAL_SCALARS[inst.kind]:
        if d.get(s) is not None:
            lines.append(f"{s}: {_fmt(d[s])}")
    for v in spec["vectors"] + OPTIONAL_VECTORS[inst.kind]:
        if d.get(v) is not None:
            lines.append(f"{v}: " + " ".join(_fmt(t) for t in np.ravel(d[v])))
    for mat in spec["matrices"]:
        lines.append(f"[{mat}]")
        for row in np.atleast_2d(d[mat]):
            lines.append(" ".join(_fmt(t) for t in row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# -- catalog ---------------------------------------------------------------

def _rotation_blocks(omegas):
    n = 2 * len(omegas)
    S = np.zeros((n, n))
    for i, w in enumerate(omegas):
        S[2 * i, 2 * i + 1] = -w
        S[2 * i + 1, 2 * i] = w
    return S


def skew2():
    """90-degree rotation in the plane; zero at the origin, anchor ``(1, 0)``."""
    return Instance("inclusion", "scaled_skew", "skew2", {
        "dim": 2, "mu": 0.0, "S": np.array([[0.0, -1.0], [1.0, 0.0]]),
        "anchor": np.array([1.0, 0.0]), "zstar": np.zeros(2)})


def spread_skew(blocks=20, omega_min=1e-3):
    """Block-diagonal rotations with frequencies spread over ``[omega_min, 1]``.

    Small frequencies make the classical proximal point method sublinear
    (about ``k^{-1/2}`` over a long window) while the anchored iteration
    keeps its ``1/k`` rate.
    """
    S = _rotation_blocks(np.geomspace(omega_min, 1.0, blocks))
    n = 2 * blocks
    return Instance("inclusion", "scaled_skew", f"spread_skew{n}", {
        "dim": n, "mu": 0.0, "S": S,
        "anchor": np.full(n, 1.0 / np.sqrt(n)), "zstar": np.zeros(n)})


def strongly_monotone(mu=1.0, dim=2, seed=0):
    """``T = mu I + S`` with a random skew ``S``; zero at the origin."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((dim, dim))
    S = B - B.T
    anchor = rng.standard_normal(dim)
    return Instance("inclusion", "scaled_skew", f"strong_mu{mu:g}_n{dim}", {
        "dim": dim, "mu": float(mu), "S": S, "anchor": anchor, "zstar": np.zeros(dim)})


def random_quad_box(n=5, seed=0, cond=10.0):
    """Random positive definite QP subdifferential over ``[-1, 1]^n``."""
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    Q = (U * np.geomspace(1.0, cond, n)) @ U.T
    Q = 0.5 * (Q + Q.T)
    q = 3.0 * rng.standard_normal(n)
    inst = Instance("inclusion", "quadratic_box", f"quadbox_n{n}_s{seed}", {
        "dim": n, "Q": Q, "q": q, "lower": -np.ones(n), "upper": np.ones(n),
        "anchor": rng.uniform(-2, 2, n)})
    inst.data["zstar"] = inst.operator().zero_point()
    return inst


def canonical_qp():
    """``min |x|^2/2`` subject to ``x_1 >= 1``: ``x* = (1, 0)``, ``y* = 1``."""
    return Instance("qp", "qp", "canonical", {
        "n": 2, "m": 1, "Q": np.eye(2), "q": np.zeros(2),
        "A": np.array([[-1.0, 0.0]]), "b": np.array([-1.0]),
        "lower": np.full(2, -np.inf), "upper": np.full(2, np.inf),
        "y0": np.zeros(1), "x_star": np.array([1.0, 0.0]), "y_star": np.array([1.0]),
        "optimum": 0.5})


def random_qp(n=6, m=4, seed=0, active=None):
    """Random strongly convex QP with a planted KKT pair.

    The first ``active`` constraints are tight at ``x*`` with positive
    multipliers; the others have slack. ``q`` is chosen so that
    ``Q x* + q + A' y* = 0``, which makes ``(x*, y*)`` primal-dual optimal.
    """
    rng = np.random.default_rng(seed)
    active = m // 2 if active is None else active
    B = rng.standard_normal((n, n))
    Q = B @ B.T / n + np.eye(n)
    A = rng.standard_normal((m, n))
    x_star = rng.standard_normal(n)
    y_star = np.zeros(m)
    y_star[:active] = rng.uniform(0.5, 2.0, active)
    slack = np.zeros(m)
    slack[active:] = rng.uniform(0.5, 2.0, m - active)
    b = A @ x_star + slack
    q = -Q @ x_star - A.T @ y_star
    opt = 0.5 * x_star @ Q @ x_star + q @ x_star
    return Instance("qp", "qp", f"qp_n{n}_m{m}_s{seed}", {
        "n": n, "m": m, "Q": Q, "q": q, "A": A, "b": b,
        "lower": np.full(n, -np.inf), "upper": np.full(n, np.inf),
        "y0": np.zeros(m), "x_star": x_star, "y_star": y_star, "optimum": float(opt)})


CATALOG = {
    "skew2": skew2,
    "spread_skew": spread_skew,
    "strongly_monotone": strongly_monotone,
    "random_quad_box": random_quad_box,
    "canonical_qp": canonical_qp,
    "random_qp": random_qp,
}
