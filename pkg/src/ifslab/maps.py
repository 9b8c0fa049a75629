"""Self-maps of planar charts and the circle, words, and iteration.

Every map evaluates pointwise or on numpy arrays of points — shape
``(..., 2)`` for planar maps, any shape for circle maps — and exposes an
exact Jacobian (a 2x2 matrix field for planar maps, a scalar derivative
field on the circle).  Circle maps act on [0, 1) and commute with integer
shifts, so values are always reported mod 1.

Word semantics: a word w = (w1, ..., wr) applied *forward* composes the
corresponding generators with the first symbol innermost, i.e. the orbit
is x -> g_{w1}(x) -> g_{w2}(g_{w1}(x)) -> ...  Applied in *reverse*, the
first symbol is outermost, so g_{wr} acts first and g_{w1} last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphabetError,
    DimensionError,
    InvertibilityError,
    ValidationError,
)
from .seeding import rng_from

FORWARD = "forward"
REVERSE = "reverse"

_NEWTON_TOL = 1e-13
_NEWTON_MAX_ITER = 80


def _planar_points(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape == () or a.shape[-1] != 2:
        raise ValidationError("planar points need a trailing axis of size 2")
    return a


class Map:
    """Base class: a differentiable self-map of a chart or the circle."""

    kind: str = "planar"  # or "circle"
    invertible: bool = True

    def eval(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        """2x2 matrices with shape (..., 2, 2), or scalar derivatives."""
        raise NotImplementedError

    def log_abs_det(self, x):
        """log |det D| at each point; default goes through the Jacobian."""
        j = self.jacobian(np.asarray(x, dtype=float))
        if self.kind == "circle":
            return np.log(np.abs(j))
        det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
        return np.log(np.abs(det))

    def inverse(self) -> "Map":
        raise NotImplementedError

    def operator_norm(self, x):
        """Largest singular value of the Jacobian at each point."""
        j = self.jacobian(np.asarray(x, dtype=float))
        if self.kind == "circle":
            return np.abs(j)
        a, b = j[..., 0, 0], j[..., 0, 1]
        c, d = j[..., 1, 0], j[..., 1, 1]
        frob = a * a + b * b + c * c + d * d
        det = a * d - b * c
        gap = np.sqrt(np.maximum(frob * frob - 4.0 * det * det, 0.0))
        return np.sqrt((frob + gap) / 2.0)


@dataclass(frozen=True)
class AffineSimilarity(Map):
    """x -> scale * R(angle) (x - anchor) + anchor: a contracting similarity
    about its fixed point when scale < 1."""

    scale: float
    angle_deg: float
    anchor: tuple[float, float] = (0.0, 0.0)

    kind = "planar"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError(f"similarity scale must be positive, got {self.scale}")
        object.__setattr__(self, "anchor", tuple(float(a) for a in self.anchor))
        th = np.deg2rad(self.angle_deg)
        c, s = np.cos(th), np.sin(th)
        m = self.scale * np.array([[c, -s], [s, c]])
        anchor = np.array(self.anchor)
        object.__setattr__(self, "_matrix", m)
        object.__setattr__(self, "_offset", anchor - m @ anchor)

    def eval(self, x):
        pts = _planar_points(x)
        return pts @ self._matrix.T + self._offset

    def jacobian(self, x):
        pts = _planar_points(x)
        return np.broadcast_to(self._matrix, pts.shape[:-1] + (2, 2))

    def log_abs_det(self, x):
        pts = _planar_points(x)
        return np.full(pts.shape[:-1], 2.0 * np.log(self.scale))

    def inverse(self) -> "AffineSimilarity":
        return AffineSimilarity(1.0 / self.scale, -self.angle_deg, self.anchor)


@dataclass(frozen=True)
class CircleRotation(Map):
    """x -> x + angle (mod 1); angle is a fraction of a full turn."""

    angle: float

    kind = "circle"

    def eval(self, x):
        return (np.asarray(x, dtype=float) + self.angle) % 1.0

    def jacobian(self, x):
        return np.ones(np.asarray(x, dtype=float).shape)

    def log_abs_det(self, x):
        return np.zeros(np.asarray(x, dtype=float).shape)

    def inverse(self) -> "CircleRotation":
        return CircleRotation(-self.angle % 1.0)


@dataclass(frozen=True)
class CircleNorthSouth(Map):
    """Two-fixed-point circle diffeomorphism with prescribed multipliers.

    Conjugate of t -> multiplier * t on the real line via the half-angle
    projection: the fixed point at ``pole`` has derivative ``multiplier``
    and the antipodal fixed point has derivative ``1/multiplier``.  With
    multiplier in (0, 1) the pole attracts and the antipode repels.
    """

    multiplier: float
    pole: float = 0.0

    kind = "circle"

    def __post_init__(self):
        if not (self.multiplier > 0 and self.multiplier != 1.0):
            raise ValidationError(
                f"multiplier must be positive and != 1, got {self.multiplier}"
            )

    def eval(self, x):
        s = np.asarray(x, dtype=float) - self.pole
        psi = np.pi * s
        out = self.pole + np.arctan2(self.multiplier * np.sin(psi), np.cos(psi)) / np.pi
        return out % 1.0

    def jacobian(self, x):
        s = np.asarray(x, dtype=float) - self.pole
        psi = np.pi * s
        m = self.multiplier
        return m / (m * m * np.sin(psi) ** 2 + np.cos(psi) ** 2)

    def log_abs_det(self, x):
        return np.log(self.jacobian(x))

    def inverse(self) -> "CircleNorthSouth":
        return CircleNorthSouth(1.0 / self.multiplier, self.pole)

    @property
    def attracting_point(self) -> float:
        return self.pole % 1.0 if self.multiplier < 1 else (self.pole + 0.5) % 1.0

    @property
    def repelling_point(self) -> float:
        return (self.pole + 0.5) % 1.0 if self.multiplier < 1 else self.pole % 1.0


@dataclass(frozen=True)
class Perturbed(Map):
    """A seeded smooth bump added to a base map, measured in the C1 norm.

    The perturbation p satisfies sup|p| <= amplitude and sup|Dp| <= amplitude
    (operator norm), so the result is a C1-perturbation of the base of size
    at most ``amplitude``.  Phases are drawn once from the seed, making the
    perturbation reproducible.
    """

    base: Map
    amplitude: float
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValidationError("perturbation amplitude must be >= 0")
        rng = rng_from(self.seed)
        if self.base.kind == "circle":
            object.__setattr__(self, "_phase", float(rng.uniform(0, 2 * np.pi)))
        else:
            object.__setattr__(
                self, "_phases", rng.uniform(0, 2 * np.pi, size=(2, 2))
            )
        object.__setattr__(self, "kind", self.base.kind)
        object.__setattr__(self, "invertible", self.base.invertible)

    def eval(self, x):
        if self.kind == "circle":
            pts = np.asarray(x, dtype=float)
            bump = np.sin(2 * np.pi * pts + self._phase) / (2 * np.pi)
            return (self.base.eval(pts) + self.amplitude * bump) % 1.0
        pts = _planar_points(x)
        u = pts[..., 0]
        v = pts[..., 1]
        ph = self._phases
        bump = np.stack(
            [
                np.sin(u + ph[0, 0]) * np.sin(v + ph[0, 1]),
                np.sin(u + ph[1, 0]) * np.sin(v + ph[1, 1]),
            ],
            axis=-1,
        )
        return self.base.eval(pts) + 0.5 * self.amplitude * bump

    def jacobian(self, x):
        if self.kind == "circle":
            pts = np.asarray(x, dtype=float)
            dbump = np.cos(2 * np.pi * pts + self._phase)
            return self.base.jacobian(pts) + self.amplitude * dbump
        pts = _planar_points(x)
        u = pts[..., 0]
        v = pts[..., 1]
        ph = self._phases
        a = 0.5 * self.amplitude
        dj = np.empty(pts.shape[:-1] + (2, 2))
        dj[..., 0, 0] = a * np.cos(u + ph[0, 0]) * np.sin(v + ph[0, 1])
        dj[..., 0, 1] = a * np.sin(u + ph[0, 0]) * np.cos(v + ph[0, 1])
        dj[..., 1, 0] = a * np.cos(u + ph[1, 0]) * np.sin(v + ph[1, 1])
        dj[..., 1, 1] = a * np.sin(u + ph[1, 0]) * np.cos(v + ph[1, 1])
        return self.base.jacobian(pts) + dj

    def inverse(self) -> "Map":
        if not self.invertible:
            raise InvertibilityError("base map is not invertible")
        return _NewtonInverse(self)


@dataclass(frozen=True)
class Composed(Map):
    """Composition of maps; ``factors`` are applied first to last."""

    factors: tuple[Map, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValidationError("composition needs at least one factor")
        kinds = {m.kind for m in self.factors}
        if len(kinds) > 1:
            raise ValidationError("cannot compose planar and circle maps")
        object.__setattr__(self, "kind", self.factors[0].kind)
        object.__setattr__(self, "invertible", all(m.invertible for m in self.factors))

    def eval(self, x):
        pts = np.asarray(x, dtype=float)
        for m in self.factors:
            pts = m.eval(pts)
        return pts

    def jacobian(self, x):
        pts = np.asarray(x, dtype=float)
        total = None
        for m in self.factors:
            j = m.jacobian(pts)
            if total is None:
                total = j if self.kind == "circle" else np.array(j, copy=True)
            elif self.kind == "circle":
                total = j * total
            else:
                total = j @ total
            pts = m.eval(pts)
        return total

    def log_abs_det(self, x):
        pts = np.asarray(x, dtype=float)
        acc = None
        for m in self.factors:
            term = m.log_abs_det(pts)
            acc = term if acc is None else acc + term
            pts = m.eval(pts)
        return acc

    def inverse(self) -> "Composed":
        return Composed(tuple(m.inverse() for m in reversed(self.factors)))


@dataclass(frozen=True)
class _NewtonInverse(Map):
    """Numerical inverse of an invertible map without a closed-form inverse.

    Newton iteration seeded at the target point (or at the base inverse for
    perturbed maps); accurate to ~1e-13, well inside the documented 1e-9
    roundtrip contract.
    """

    target: Map

    def __post_init__(self):
        object.__setattr__(self, "kind", self.target.kind)

    def _initial_guess(self, w):
        base = getattr(self.target, "base", None)
        if base is not None and base.invertible:
            try:
                return base.inverse().eval(w)
            except NotImplementedError:
                pass
        return np.array(w, copy=True)

    def eval(self, w):
        w = np.asarray(w, dtype=float)
        z = self._initial_guess(w)
        if self.kind == "circle":
            for _ in range(_NEWTON_MAX_ITER):
                r = (self.target.eval(z) - w + 0.5) % 1.0 - 0.5
                if np.max(np.abs(r)) < _NEWTON_TOL:
                    break
                z = z - r / self.target.jacobian(z)
            return z % 1.0
        for _ in range(_NEWTON_MAX_ITER):
            r = self.target.eval(z) - w
            if np.max(np.abs(r)) < _NEWTON_TOL:
                break
            j = self.target.jacobian(z)
            det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
            dz0 = (j[..., 1, 1] * r[..., 0] - j[..., 0, 1] * r[..., 1]) / det
            dz1 = (-j[..., 1, 0] * r[..., 0] + j[..., 0, 0] * r[..., 1]) / det
            z = z - np.stack([dz0, dz1], axis=-1)
        return z

    def jacobian(self, w):
        z = self.eval(w)
        j = self.target.jacobian(z)
        if self.kind == "circle":
            return 1.0 / j
        det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
        inv = np.empty_like(j)
        inv[..., 0, 0] = j[..., 1, 1] / det
        inv[..., 0, 1] = -j[..., 0, 1] / det
        inv[..., 1, 0] = -j[..., 1, 0] / det
        inv[..., 1, 1] = j[..., 0, 0] / det
        return inv

    def log_abs_det(self, w):
        return -self.target.log_abs_det(self.eval(w))

    def inverse(self) -> Map:
        return self.target


def has_closed_form_inverse(m: Map) -> bool:
    """True when inverse() is exact rather than a Newton iteration."""
    return isinstance(m, (AffineSimilarity, CircleRotation, CircleNorthSouth)) or (
        isinstance(m, Composed) and all(has_closed_form_inverse(f) for f in m.factors)
    )


# ---------------------------------------------------------------------------
# Words and systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Word:
    """Finite symbol sequence over {1..s} plus an iteration direction."""

    symbols: tuple[int, ...]
    direction: str = FORWARD

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if self.direction not in (FORWARD, REVERSE):
            raise ValidationError(f"direction must be forward or reverse, got {self.direction!r}")
        if any(s < 1 for s in self.symbols):
            raise AlphabetError("word symbols are 1-based positive integers")

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True)
class SystemSpec:
    """A finite generating family, optionally closed under inverses.

    With ``include_inverses`` the effective alphabet is the generators
    followed by their inverses, so symbol s+i names the inverse of
    generator i.
    """

    generators: tuple[Map, ...]
    include_inverses: bool = False

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ValidationError("system needs at least one generator")
        kinds = {m.kind for m in self.generators}
        if len(kinds) > 1:
            raise ValidationError("generators must all act on the same space")
        if self.include_inverses:
            bad = [m for m in self.generators if not m.invertible]
            if bad:
                raise InvertibilityError(
                    "include_inverses requires every generator to be invertible"
                )
        maps = self.generators
        if self.include_inverses:
            maps = maps + tuple(m.inverse() for m in self.generators)
        object.__setattr__(self, "_maps", maps)

    @property
    def kind(self) -> str:
        return self.generators[0].kind

    def maps(self) -> tuple[Map, ...]:
        return self._maps

    @property
    def alphabet_size(self) -> int:
        return len(self._maps)

    def map_for(self, symbol: int) -> Map:
        if not 1 <= symbol <= self.alphabet_size:
            raise AlphabetError(
                f"symbol {symbol} outside alphabet 1..{self.alphabet_size}"
            )
        return self._maps[symbol - 1]


def _application_order(word: Word):
    return word.symbols if word.direction == FORWARD else tuple(reversed(word.symbols))


def apply_word(sys: SystemSpec, word: Word, x):
    """Evaluate the word's composition at x; the empty word is the identity."""
    pts = np.asarray(x, dtype=float)
    for sym in _application_order(word):
        pts = sys.map_for(sym).eval(pts)
    return pts


def word_jacobian_det(sys: SystemSpec, word: Word, x) -> float:
    """Chain-rule product of Jacobian determinants along the word's orbit."""
    pts = np.asarray(x, dtype=float)
    det = np.ones(pts.shape if sys.kind == "circle" else pts.shape[:-1])
    for sym in _application_order(word):
        m = sys.map_for(sym)
        j = m.jacobian(pts)
        if sys.kind == "circle":
            det = det * j
        else:
            det = det * (j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0])
        pts = m.eval(pts)
    return float(det) if det.shape == () else det


def word_map(sys: SystemSpec, word: Word) -> Map:
    """The word's composition as a single map object."""
    order = _application_order(word)
    if not order:
        raise ValidationError("empty word has no map object; use apply_word")
    return Composed(tuple(sys.map_for(s) for s in order))


def complex_eigenvalue_check(m: Map, x) -> bool:
    """True iff the Jacobian at x has a non-real eigenvalue pair."""
    if m.kind != "planar":
        raise DimensionError("eigenvalue check applies to planar maps only")
    j = m.jacobian(np.asarray(x, dtype=float))
    tr = j[..., 0, 0] + j[..., 1, 1]
    det = j[..., 0, 0] * j[..., 1, 1] - j[..., 0, 1] * j[..., 1, 0]
    disc = tr * tr - 4.0 * det
    return bool(np.all(disc < -1e-12))


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------
#
# One map per line, e.g.
#
#     affine kappa=0.76 theta=179 anchor=0,0
#     rotation angle=0.6180339887
#     moebius lambda=0.7 pole=0.0
#     perturb base=1 amp=0.01 seed=42
#     inverses=false
#
# A perturb line wraps the map defined on the (1-based) line it references;
# the referenced line then serves as a definition only and is not itself a
# generator of the parsed system.


def _parse_kv(tokens, line_no):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ValidationError(f"line {line_no}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_system(text: str) -> SystemSpec:
    """Parse the one-generator-per-line system format."""
    entries: list[Map] = []
    consumed: set[int] = set()
    include_inverses = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().startswith("inverses"):
            kv = _parse_kv([line], line_no)
            val = kv["inverses"].lower()
            if val not in ("true", "false"):
                raise ValidationError(f"line {line_no}: inverses must be true or false")
            include_inverses = val == "true"
            continue
        head, *rest = line.split()
        kv = _parse_kv(rest, line_no)
        if head == "affine":
            kappa = float(kv["kappa"])
            if not 0 < kappa < 1:
                raise ValidationError(f"line {line_no}: affine kappa must be in (0, 1)")
            ax, ay = (float(v) for v in kv.get("anchor", "0,0").split(","))
            entries.append(AffineSimilarity(kappa, float(kv["theta"]), (ax, ay)))
        elif head == "rotation":
            entries.append(CircleRotation(float(kv["angle"]) % 1.0))
        elif head == "moebius":
            lam = float(kv["lambda"])
            if not 0.5 < lam < 1:
                raise ValidationError(f"line {line_no}: moebius lambda must be in (1/2, 1)")
            entries.append(CircleNorthSouth(lam, float(kv.get("pole", "0.0")) % 1.0))
        elif head == "perturb":
            base_idx = int(kv["base"])
            if not 1 <= base_idx <= len(entries):
                raise ValidationError(
                    f"line {line_no}: perturb base={base_idx} must reference an earlier map line"
                )
            consumed.add(base_idx - 1)
            entries.append(
                Perturbed(entries[base_idx - 1], float(kv["amp"]), int(kv.get("seed", "0")))
            )
        else:
            raise ValidationError(f"line {line_no}: unknown map kind {head!r}")
    generators = tuple(m for i, m in enumerate(entries) if i not in consumed)
    if not generators:
        raise ValidationError("system text defines no generators")
    return SystemSpec(generators, include_inverses)


def format_system(sys: SystemSpec) -> str:
    """Emit the text format; inverse of :func:`parse_system` for parsed systems."""
    lines: list[str] = []

    def emit(m: Map) -> int:
        if isinstance(m, AffineSimilarity):
            ax, ay = m.anchor
            lines.append(f"affine kappa={m.scale!r} theta={m.angle_deg!r} anchor={ax!r},{ay!r}")
        elif isinstance(m, CircleRotation):
            lines.append(f"rotation angle={m.angle!r}")
        elif isinstance(m, CircleNorthSouth):
            lines.append(f"moebius lambda={m.multiplier!r} pole={m.pole!r}")
        elif isinstance(m, Perturbed):
            base_line = emit(m.base)
            lines.append(f"perturb base={base_line} amp={m.amplitude!r} seed={m.seed}")
        else:
            raise ValidationError(f"map {m!r} has no text form")
        return len(lines)

    for g in sys.generators:
        emit(g)
    lines.append(f"inverses={'true' if sys.include_inverses else 'false'}")
    return "\n".join(lines) + "\n"
