"""Fourier multiplier symbols and their lattice samples.

Every symbol evaluates on arrays of frequencies with shape ``(..., d)``
and returns complex values of shape ``(...)``.  Quotients with a
vanishing denominator evaluate to 0 (the ``c/0 = 0`` convention).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import ClassVar

import numpy as np
from scipy.stats import qmc

from .symbolsets import ConvexRegion, convex_hull

ZERO_MODE_POINTS = 10_000
ZERO_MODE_SEED = 20240601
UNIT_TOL = 1e-12
COND_LIMIT = 1e12


def _to_complex(z) -> complex:
    if isinstance(z, (list, tuple)):
        return complex(float(z[0]), float(z[1]))
    if isinstance(z, dict):
        return complex(float(z["re"]), float(z.get("im", 0.0)))
    return complex(z)


def _cpair(z: complex) -> list:
    return [z.real, z.imag]


def _safe_quotient(num, den):
    den = np.asarray(den)
    out = np.zeros(np.broadcast(num, den).shape, dtype=complex)
    nz = den != 0
    out[nz] = (np.broadcast_to(num, out.shape)[nz]
               / np.broadcast_to(den, out.shape)[nz])
    return out


def _normalise(xi: np.ndarray) -> np.ndarray:
    # homogeneous families are evaluated on xi / max|xi_j|, which keeps
    # scaling exact for powers of two and avoids overflow
    s = np.max(np.abs(xi), axis=-1, keepdims=True)
    return np.where(s > 0, xi / np.where(s > 0, s, 1.0), 0.0)


@dataclass(frozen=True)
class SphereAtom:
    theta: tuple
    mass: float
    value: complex

    def __post_init__(self):
        th = tuple(float(t) for t in self.theta)
        if abs(math.sqrt(sum(t * t for t in th)) - 1.0) > UNIT_TOL:
            raise ValueError(f"sphere atom {th} is not a unit vector")
        if not self.mass > 0:
            raise ValueError("atom masses must be positive")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "value", _to_complex(self.value))

    def to_json(self):
        return {"theta": list(self.theta), "mass": self.mass,
                "value": _cpair(self.value)}

    @classmethod
    def from_json(cls, o):
        return cls(tuple(o["theta"]), float(o["mass"]), _to_complex(o["value"]))


@dataclass(frozen=True)
class LevyAtom:
    z: tuple
    mass: float
    value: complex

    def __post_init__(self):
        z = tuple(float(t) for t in self.z)
        if not any(z):
            raise ValueError("Levy atoms must sit away from the origin")
        if not self.mass > 0:
            raise ValueError("atom masses must be positive")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "value", _to_complex(self.value))

    def to_json(self):
        return {"z": list(self.z), "mass": self.mass,
                "value": _cpair(self.value)}

    @classmethod
    def from_json(cls, o):
        return cls(tuple(o["z"]), float(o["mass"]), _to_complex(o["value"]))


def _atom_arrays(atoms, attr):
    dirs = np.array([getattr(a, attr) for a in atoms], dtype=float)
    mass = np.array([a.mass for a in atoms], dtype=float)
    vals = np.array([a.value for a in atoms], dtype=complex)
    return dirs, mass, vals


_REGISTRY: dict[str, type] = {}


class Symbol:
    """Base class; subclasses are frozen dataclasses."""

    tag: ClassVar[str] = ""
    homogeneous: ClassVar[bool] = True

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.tag:
            _REGISTRY[cls.tag] = cls

    @property
    def dim(self) -> int:
        return self.d

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.dim:
            raise ValueError(f"{self.tag} expects {self.dim}-dimensional "
                             f"frequencies, got {xi.shape[-1]}")
        return self._eval(xi)

    def _eval(self, xi):
        raise NotImplementedError

    def is_homogeneous(self) -> bool:
        return self.homogeneous

    def to_json(self) -> dict:
        raise NotImplementedError


def evaluate(spec: Symbol, xi) -> complex | np.ndarray:
    """Symbol value at ``xi`` (a single point gives a Python complex)."""
    out = spec(xi)
    return complex(out) if np.ndim(out) == 0 else out


def symbol_from_json(obj) -> Symbol:
    tag = obj["tag"]
    if tag not in _REGISTRY:
        raise ValueError(f"unknown symbol tag {tag!r}")
    return _REGISTRY[tag].from_json(obj)


# ---------------------------------------------------------------------------
# families

@dataclass(frozen=True)
class PowerQuotient(Symbol):
    """(a_1|x_1|^al + ... + a_d|x_d|^al) / (|x_1|^al + ... + |x_d|^al)."""

    tag: ClassVar[str] = "PowerQuotient"
    a: tuple
    alpha: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(_to_complex(z) for z in self.a))
        if not self.a:
            raise ValueError("need at least one coefficient")
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")

    @property
    def d(self):
        return len(self.a)

    def _eval(self, xi):
        w = np.abs(_normalise(xi)) ** self.alpha
        tot = w.sum(axis=-1)
        return _safe_quotient(w @ np.array(self.a), tot)

    def to_json(self):
        return {"tag": self.tag, "alpha": self.alpha,
                "a": [_cpair(z) for z in self.a]}

    @classmethod
    def from_json(cls, o):
        return cls(tuple(_to_complex(z) for z in o["a"]),
                   float(o.get("alpha", 2.0)))


@dataclass(frozen=True)
class SphericalPower(Symbol):
    """Sphere-measure quotient with |xi . theta|^alpha weights."""

    tag: ClassVar[str] = "SphericalPower"
    d: int
    alpha: float
    atoms: tuple

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        _check_atoms(self.atoms, self.d, "theta", nonempty=True)

    def _eval(self, xi):
        dirs, mass, vals = _atom_arrays(self.atoms, "theta")
        w = np.abs(_normalise(xi) @ dirs.T) ** self.alpha * mass
        return _safe_quotient(w @ vals, w.sum(axis=-1))

    def to_json(self):
        return {"tag": self.tag, "d": self.d, "alpha": self.alpha,
                "sphere_atoms": [a.to_json() for a in self.atoms]}

    @classmethod
    def from_json(cls, o):
        return cls(int(o["d"]), float(o["alpha"]),
                   tuple(SphereAtom.from_json(a) for a in o["sphere_atoms"]))


def _check_atoms(atoms, d, attr, nonempty=False):
    if nonempty and not atoms:
        raise ValueError("at least one atom is required")
    for a in atoms:
        if len(getattr(a, attr)) != d:
            raise ValueError(f"atom {getattr(a, attr)} is not in R^{d}")


@dataclass(frozen=True)
class BanuelosBogdan(Symbol):
    """Levy/sphere quotient with finitely many atoms."""

    tag: ClassVar[str] = "BanuelosBogdan"
    d: int
    levy_atoms: tuple = ()
    sphere_atoms: tuple = ()

    def __post_init__(self):
        if not (self.levy_atoms or self.sphere_atoms):
            raise ValueError("need at least one Levy or sphere atom")
        _check_atoms(self.levy_atoms, self.d, "z")
        _check_atoms(self.sphere_atoms, self.d, "theta")

    def is_homogeneous(self) -> bool:
        return not self.levy_atoms

    def _eval(self, xi):
        num = np.zeros(xi.shape[:-1], dtype=complex)
        den = np.zeros(xi.shape[:-1])
        if self.sphere_atoms:
            x = _normalise(xi) if not self.levy_atoms else xi
            dirs, mass, vals = _atom_arrays(self.sphere_atoms, "theta")
            w = 0.5 * (x @ dirs.T) ** 2 * mass
            num = num + w @ vals
            den = den + w.sum(axis=-1)
        if self.levy_atoms:
            zs, mass, vals = _atom_arrays(self.levy_atoms, "z")
            w = 2.0 * np.sin(0.5 * (xi @ zs.T)) ** 2 * mass
            num = num + w @ vals
            den = den + w.sum(axis=-1)
        return _safe_quotient(num, den)

    def to_json(self):
        return {"tag": self.tag, "d": self.d,
                "levy_atoms": [a.to_json() for a in self.levy_atoms],
                "sphere_atoms": [a.to_json() for a in self.sphere_atoms]}

    @classmethod
    def from_json(cls, o):
        return cls(int(o["d"]),
                   tuple(LevyAtom.from_json(a) for a in o.get("levy_atoms", [])),
                   tuple(SphereAtom.from_json(a)
                         for a in o.get("sphere_atoms", [])))


@dataclass(frozen=True)
class BeurlingAhlfors(Symbol):
    """conj(z) / z with z = xi_1 + i xi_2."""

    tag: ClassVar[str] = "BeurlingAhlfors"
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise ValueError("the Beurling-Ahlfors symbol lives on R^2")

    def _eval(self, xi):
        x = _normalise(xi)
        z = x[..., 0] + 1j * x[..., 1]
        return _safe_quotient(np.conj(z) ** 2, np.abs(z) ** 2)

    def to_json(self):
        return {"tag": self.tag}

    @classmethod
    def from_json(cls, o):
        return cls()


@dataclass(frozen=True)
class LogQuotient(Symbol):
    """Sphere-measure quotient with log(1 + (xi . theta)^-2) weights.

    Atoms orthogonal to ``xi`` carry infinite weight; the value is then
    the mass-weighted average over those atoms.  Not homogeneous.
    """

    tag: ClassVar[str] = "LogQuotient"
    homogeneous: ClassVar[bool] = False
    d: int
    atoms: tuple

    def __post_init__(self):
        _check_atoms(self.atoms, self.d, "theta", nonempty=True)

    def _eval(self, xi):
        dirs, mass, vals = _atom_arrays(self.atoms, "theta")
        dot = xi @ dirs.T
        perp = dot == 0
        with np.errstate(divide="ignore"):
            w = np.log1p(1.0 / np.where(perp, 1.0, dot) ** 2) * mass
        w = np.where(perp, 0.0, w)
        wp = perp * mass
        use_perp = perp.any(axis=-1, keepdims=True)
        w = np.where(use_perp, wp, w)
        out = _safe_quotient(w @ vals, w.sum(axis=-1))
        return np.where(np.all(xi == 0, axis=-1), 0.0, out)

    def to_json(self):
        return {"tag": self.tag, "d": self.d,
                "sphere_atoms": [a.to_json() for a in self.atoms]}

    @classmethod
    def from_json(cls, o):
        return cls(int(o["d"]),
                   tuple(SphereAtom.from_json(a) for a in o["sphere_atoms"]))


@dataclass(frozen=True)
class ShiftedPower(Symbol):
    """|xi_1|^al / (c + |xi_1|^al + ... + |xi_d|^al)."""

    tag: ClassVar[str] = "ShiftedPower"
    d: int
    alpha: float = 2.0
    c: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.c < 0:
            raise ValueError("shift c must be nonnegative")
        if self.d < 1:
            raise ValueError("dimension must be positive")

    def is_homogeneous(self) -> bool:
        return self.c == 0

    def _eval(self, xi):
        x = _normalise(xi) if self.c == 0 else xi
        w = np.abs(x) ** self.alpha
        return _safe_quotient(w[..., 0].astype(complex),
                              self.c + w.sum(axis=-1))

    def to_json(self):
        return {"tag": self.tag, "d": self.d, "alpha": self.alpha, "c": self.c}

    @classmethod
    def from_json(cls, o):
        return cls(int(o["d"]), float(o.get("alpha", 2.0)),
                   float(o.get("c", 0.0)))


def kappa(t, u: float, v: float) -> np.ndarray:
    """log((t^u + 1)/(t^v + 1)) / log(t^u / t^v) for t > 0, with its limits
    kappa(0+) = 0, kappa(1) = 1/2, kappa(inf) = 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        s = np.log(t)
    out = np.empty_like(t)
    lo, hi = np.isneginf(s), np.isposinf(s)
    small = np.abs(s) < 1e-6
    mid = ~(lo | hi | small)
    sm = s[mid]
    out[mid] = ((np.logaddexp(0.0, u * sm) - np.logaddexp(0.0, v * sm))
                / ((u - v) * sm))
    ss = s[small]
    out[small] = 0.5 + (u + v) * ss / 8.0
    out[lo] = 0.0
    out[hi] = 1.0
    return out


@dataclass(frozen=True)
class KappaQuotient(Symbol):
    """Average of PowerQuotient(a1, a2) over alpha uniform on (u, v], d = 2.

    With t = |xi_2| / |xi_1| the weight of a2 is kappa(t) and that of a1
    is 1 - kappa(t).
    """

    tag: ClassVar[str] = "KappaQuotient"
    u: float
    v: float
    a1: complex = 1.0
    a2: complex = 0.0
    d: int = 2

    def __post_init__(self):
        if not 0 <= self.u < self.v <= 2:
            raise ValueError("need 0 <= u < v <= 2")
        if self.d != 2:
            raise ValueError("KappaQuotient is two-dimensional")
        object.__setattr__(self, "a1", _to_complex(self.a1))
        object.__setattr__(self, "a2", _to_complex(self.a2))

    def _eval(self, xi):
        x1, x2 = np.abs(xi[..., 0]), np.abs(xi[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(x1 > 0, x2 / np.where(x1 > 0, x1, 1.0), np.inf)
        w2 = kappa(np.where((x1 == 0) & (x2 == 0), 1.0, t), self.u, self.v)
        out = self.a1 * (1.0 - w2) + self.a2 * w2
        return np.where((x1 == 0) & (x2 == 0), 0.0, out)

    def to_json(self):
        return {"tag": self.tag, "u": self.u, "v": self.v,
                "a1": _cpair(self.a1), "a2": _cpair(self.a2)}

    @classmethod
    def from_json(cls, o):
        return cls(float(o["u"]), float(o["v"]), _to_complex(o["a1"]),
                   _to_complex(o["a2"]))


@dataclass(frozen=True)
class Counterexample(Symbol):
    """exp(i |xi|^2 / xi_d^2) off the hyperplanes xi_1 = 0 and xi_d = 0."""

    tag: ClassVar[str] = "Counterexample"
    d: int = 2

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("the counterexample needs d >= 2")

    def _eval(self, xi):
        x = _normalise(xi)
        xd = x[..., -1]
        ok = (x[..., 0] != 0) & (xd != 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.where(ok, (x ** 2).sum(axis=-1)
                             / np.where(ok, xd, 1.0) ** 2, 0.0)
        return np.where(ok, np.exp(1j * phase), 0.0)

    def to_json(self):
        return {"tag": self.tag, "d": self.d}

    @classmethod
    def from_json(cls, o):
        return cls(int(o.get("d", 2)))


@dataclass(frozen=True)
class Composed(Symbol):
    """xi -> base(S xi) for an invertible real matrix S."""

    tag: ClassVar[str] = "Composed"
    base: Symbol
    S: tuple

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        d = self.base.dim
        if S.shape != (d, d):
            raise ValueError(f"S must be {d}x{d}, got {S.shape}")
        if abs(np.linalg.det(S)) == 0 or np.linalg.cond(S) > COND_LIMIT:
            raise ValueError("S is singular or too ill-conditioned")
        object.__setattr__(self, "S", tuple(map(tuple, S.tolist())))

    @property
    def d(self):
        return self.base.dim

    def is_homogeneous(self):
        return self.base.is_homogeneous()

    def _eval(self, xi):
        return self.base(xi @ np.asarray(self.S).T)

    def to_json(self):
        return {"tag": self.tag, "base": self.base.to_json(),
                "S": [list(r) for r in self.S]}

    @classmethod
    def from_json(cls, o):
        return cls(symbol_from_json(o["base"]), tuple(map(tuple, o["S"])))


@dataclass(frozen=True)
class Padded(Symbol):
    """Base symbol read on the first coordinates of a larger space."""

    tag: ClassVar[str] = "Padded"
    base: Symbol
    d: int

    def __post_init__(self):
        if self.d <= self.base.dim:
            raise ValueError("padding must increase the dimension")

    def is_homogeneous(self):
        return self.base.is_homogeneous()

    def _eval(self, xi):
        return self.base(xi[..., : self.base.dim])

    def to_json(self):
        return {"tag": self.tag, "base": self.base.to_json(), "d": self.d}

    @classmethod
    def from_json(cls, o):
        return cls(symbol_from_json(o["base"]), int(o["d"]))


@dataclass(frozen=True)
class PlusConstant(Symbol):
    tag: ClassVar[str] = "PlusConstant"
    base: Symbol
    c: complex

    def __post_init__(self):
        object.__setattr__(self, "c", _to_complex(self.c))

    @property
    def d(self):
        return self.base.dim

    def is_homogeneous(self):
        return self.base.is_homogeneous()

    def _eval(self, xi):
        return self.base(xi) + self.c

    def to_json(self):
        return {"tag": self.tag, "base": self.base.to_json(),
                "c": _cpair(self.c)}

    @classmethod
    def from_json(cls, o):
        return cls(symbol_from_json(o["base"]), _to_complex(o["c"]))


def compose(spec: Symbol, S) -> Composed:
    return Composed(spec, S)


def pad(spec: Symbol, d2: int) -> Padded:
    return Padded(spec, d2)


def plus_constant(spec: Symbol, c) -> PlusConstant:
    return PlusConstant(spec, c)


def sphere_atoms_from_basis(values) -> tuple:
    """Atoms (e_j, 1, a_j) on the standard basis."""
    d = len(values)
    return tuple(SphereAtom(tuple(float(i == j) for i in range(d)), 1.0, a)
                 for j, a in enumerate(values))


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class ValidationReport:
    even: bool
    homogeneous: bool
    range_hull: ConvexRegion
    max_even_error: float
    max_scaling_error: float


def validate(spec: Symbol, samples: int = 1000, seed: int = 0,
             tol: float = 1e-9) -> ValidationReport:
    """Monte Carlo evenness/homogeneity check and sampled range hull.

    Coordinate axes are always included among the sample directions.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    d = spec.dim
    xi = np.concatenate([np.eye(d), -np.eye(d),
                         rng.standard_normal((samples, d))])
    m = spec(xi)
    even_err = float(np.max(np.abs(spec(-xi) - m)))
    scale_err = max(float(np.max(np.abs(spec(c * xi) - m)))
                    for c in (0.5, 2.0, 10.0))
    hull = convex_hull([complex(z) for z in np.round(m, 14)])
    return ValidationReport(even_err <= tol, scale_err <= tol, hull,
                            even_err, scale_err)


# ---------------------------------------------------------------------------
# lattice tables

def ball_average(spec: Symbol, n_points: int = ZERO_MODE_POINTS,
                 seed: int = ZERO_MODE_SEED) -> complex:
    """Quasi-Monte Carlo average of the symbol over the unit ball."""
    d = spec.dim
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    pts = []
    have = 0
    while have < n_points:
        x = 2.0 * sampler.random(2 ** int(math.ceil(math.log2(
            max(2 * n_points, 16))))) - 1.0
        x = x[np.sum(x * x, axis=1) <= 1.0]
        pts.append(x)
        have += x.shape[0]
    x = np.concatenate(pts)[:n_points]
    return complex(np.mean(spec(x)))


def frequency_axis(N: int) -> np.ndarray:
    """Modes -floor(N/2) .. ceil(N/2) - 1 in increasing order."""
    return np.arange(-(N // 2), N - N // 2)


def frequency_grid(N: int, d: int) -> np.ndarray:
    ax = frequency_axis(N)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class LatticeTable:
    """Symbol samples on the modes of an N^d torus grid.

    ``values`` is indexed in increasing-mode (centred) order along every
    axis; :meth:`fft_order` rearranges to numpy FFT bin order.
    """

    d: int
    N: int
    values: np.ndarray = field(repr=False)
    zero_mode: complex
    tag: str = ""

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.N,) * self.d:
            raise ValueError(f"table shape {vals.shape} != {(self.N,) * self.d}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("lattice table must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "zero_mode", complex(self.zero_mode))

    @cached_property
    def fft_values(self) -> np.ndarray:
        return np.fft.ifftshift(self.values)

    def fft_order(self) -> np.ndarray:
        return self.fft_values

    def at(self, k) -> complex:
        idx = tuple(int(kj) + self.N // 2 for kj in k)
        return complex(self.values[idx])

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0))

    def header(self) -> dict:
        return {"d": self.d, "N": self.N, "tag": self.tag,
                "zero_mode": _cpair(self.zero_mode)}

    def save(self, path) -> None:
        save_complex_array(path, self.values, self.header())

    @classmethod
    def load(cls, path) -> "LatticeTable":
        header, arr = load_complex_array(path)
        d, N = int(header["d"]), int(header["N"])
        return cls(d, N, arr.reshape((N,) * d),
                   _to_complex(header["zero_mode"]), header.get("tag", ""))


def lattice_table(spec: Symbol, N: int, d: int | None = None) -> LatticeTable:
    """Sample ``spec`` on integer modes; the zero mode is the ball average."""
    if N < 2:
        raise ValueError("resolution must be at least 2")
    d = spec.dim if d is None else d
    if d != spec.dim:
        raise ValueError(f"symbol is {spec.dim}-dimensional, not {d}")
    k = frequency_grid(N, d).astype(float)
    vals = np.array(spec(k), dtype=complex)
    zm = ball_average(spec)
    vals[(N // 2,) * d] = zm
    return LatticeTable(d, N, vals, zm, spec.tag)


def constant_table(value, N: int, d: int) -> LatticeTable:
    return LatticeTable(d, N, np.full((N,) * d, complex(value)),
                        complex(value), "Constant")


# ---------------------------------------------------------------------------
# flat binary export: little-endian float64 (re, im) pairs, row-major,
# with a JSON header next to it

def save_complex_array(path, arr: np.ndarray, header: dict) -> None:
    path = Path(path)
    flat = np.asarray(arr, dtype=complex).reshape(-1)
    pairs = np.empty(2 * flat.size, dtype="<f8")
    pairs[0::2], pairs[1::2] = flat.real, flat.imag
    path.write_bytes(pairs.tobytes())
    meta = dict(header, shape=list(np.shape(arr)))
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(meta, indent=2, sort_keys=True))


def load_complex_array(path):
    path = Path(path)
    header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    arr = (raw[0::2] + 1j * raw[1::2]).reshape(header["shape"])
    return header, arr
