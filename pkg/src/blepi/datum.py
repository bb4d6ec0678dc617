"""The data ((c_i), (r_i), (d_j), (A_j)) of a unified Brascamp-Lieb / EPI inequality."""
from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatumError, ParameterError

DEFAULT_RANK_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BLDatum:
    """Block partition ``r``, block exponents ``c``, map exponents ``d`` and maps ``A_j``.

    Construction checks structure only (lengths, shapes, finiteness); signs
    and surjectivity are the business of :func:`validate_datum`.
    """

    r: tuple[int, ...]
    c: tuple[float, ...]
    d: tuple[float, ...]
    maps: tuple[np.ndarray, ...]

    def __post_init__(self):
        try:
            r = tuple(int(x) for x in self.r)
        except (TypeError, ValueError):
            raise DatumError("r must be a list of integers") from None
        if any(float(x) != int(x) for x in self.r):
            raise DatumError("r must contain integers")
        if not r:
            raise DatumError("need at least one block (k >= 1)")
        if any(x < 1 for x in r):
            raise DatumError("block dimensions must be positive")
        c = tuple(float(x) for x in self.c)
        d = tuple(float(x) for x in self.d)
        if len(c) != len(r):
            raise DatumError(f"len(c)={len(c)} does not match k={len(r)}")
        if not d:
            raise DatumError("need at least one map (m >= 1)")
        if len(self.maps) != len(d):
            raise DatumError(f"len(maps)={len(self.maps)} does not match m={len(d)}")
        if not all(math.isfinite(x) for x in c + d):
            raise DatumError("coefficients must be finite")
        n = sum(r)
        maps = []
        for j, A in enumerate(self.maps):
            A = np.asarray(A, dtype=float)
            if A.ndim == 1:
                A = A[None, :]
            if A.ndim != 2 or A.shape[0] < 1:
                raise DatumError(f"map {j} must be a non-empty 2-D array")
            if A.shape[1] != n:
                raise DatumError(f"map {j} has {A.shape[1]} columns, expected n={n}")
            if not np.all(np.isfinite(A)):
                raise DatumError(f"map {j} has non-finite entries")
            maps.append(_frozen(A))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "maps", tuple(maps))

    @property
    def n(self) -> int:
        return sum(self.r)

    @property
    def k(self) -> int:
        return len(self.r)

    @property
    def m(self) -> int:
        return len(self.d)

    @property
    def nj(self) -> tuple[int, ...]:
        return tuple(A.shape[0] for A in self.maps)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start index of every block in R^n (plus n at the end)."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.r)]))

    def block_slices(self) -> list[slice]:
        off = self.offsets
        return [slice(off[i], off[i + 1]) for i in range(self.k)]

    @property
    def balance(self) -> float:
        return balance(self)

    def to_dict(self) -> dict:
        return {
            "r": list(self.r),
            "c": list(self.c),
            "d": list(self.d),
            "maps": [A.tolist() for A in self.maps],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BLDatum":
        if not isinstance(doc, dict):
            raise DatumError("datum document must be a JSON object")
        expected = {"r", "c", "d", "maps"}
        missing = expected - doc.keys()
        extra = doc.keys() - expected
        if missing:
            raise DatumError(f"datum is missing keys {sorted(missing)}")
        if extra:
            raise DatumError(f"unknown datum keys {sorted(extra)}")
        try:
            maps = [np.array(A, dtype=float) for A in doc["maps"]]
        except (TypeError, ValueError) as exc:
            raise DatumError(f"maps are not numeric arrays: {exc}") from None
        return cls(r=doc["r"], c=doc["c"], d=doc["d"], maps=maps)

    def __eq__(self, other):
        if not isinstance(other, BLDatum):
            return NotImplemented
        return (
            self.r == other.r
            and self.c == other.c
            and self.d == other.d
            and len(self.maps) == len(other.maps)
            and all(a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.maps, other.maps))
        )

    __hash__ = None


def load_datum(path) -> BLDatum:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatumError(f"{path}: invalid JSON ({exc})") from None
    return BLDatum.from_dict(doc)


def dump_datum(datum: BLDatum) -> str:
    # json uses repr() for floats, which round-trips bit for bit
    return json.dumps(datum.to_dict())


def balance(datum: BLDatum) -> float:
    """``sum_i c_i r_i - sum_j d_j n_j``, summed with exact rounding.

    A result within a few ulps of the coefficient scale is the rounding of
    the inputs themselves (``0.1 + (1 - 0.1) != 1`` in binary) and is
    returned as exactly 0.
    """
    left = [ci * ri for ci, ri in zip(datum.c, datum.r)]
    right = [dj * nj for dj, nj in zip(datum.d, datum.nj)]
    total = math.fsum(left + [-x for x in right])
    scale = max(math.fsum(abs(x) for x in left), math.fsum(abs(x) for x in right), 1.0)
    return 0.0 if abs(total) <= 8 * sys.float_info.epsilon * scale else total


def is_balanced(datum: BLDatum) -> bool:
    return balance(datum) == 0.0


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    balance: float
    rank_defects: list[int] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "balance": self.balance, "rank_defects": list(self.rank_defects), "messages": list(self.messages)}


def validate_datum(datum: BLDatum, rank_tol: float = DEFAULT_RANK_TOL) -> ValidationReport:
    """Check coefficient signs and surjectivity of every map, and report the dimension balance.

    A map is rank deficient when it has fewer than ``n_j`` singular values above
    ``rank_tol`` times its largest one (an all-zero map is always deficient).
    A nonzero balance does not make the datum invalid; it only means ``M_g``
    is infinite.
    """
    messages = []
    signs_ok = True
    for name, coeffs in (("c", datum.c), ("d", datum.d)):
        for i, x in enumerate(coeffs):
            if x < 0:
                signs_ok = False
                messages.append(f"{name}[{i}] = {x!r} is negative")
    defects = []
    for j, A in enumerate(datum.maps):
        s = np.linalg.svd(A, compute_uv=False)
        rank = int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0
        if rank < A.shape[0]:
            defects.append(j)
            messages.append(f"map {j} has rank {rank} < n_j = {A.shape[0]} (not surjective)")
    bal = balance(datum)
    if bal != 0:
        messages.append(f"dimension balance is {bal!r}; M_g is infinite unless it vanishes")
    return ValidationReport(ok=signs_ok and not defects, balance=bal, rank_defects=defects, messages=messages)


def builtin_datum(name: str, *args, **kwargs) -> BLDatum:
    """Named fixture data.

    ``identity(n)``
        One block of size ``n``, ``A_1 = I_n``, ``c = d = (1,)``.
    ``epi(lam)``
        The entropy power inequality in Lieb's form: two scalar blocks with
        weights ``(lam, 1 - lam)`` and ``A_1 = [sqrt(lam), sqrt(1 - lam)]``.
    ``unbalanced``
        ``r = (1,), c = (2,), d = (1,), A_1 = [1]`` (balance 1).
    ``zamir_feder(A, d=None)``
        Scalar blocks with unit weights and the single map ``A``. When ``d``
        is omitted it is set to ``n / n_1`` so that the datum is balanced.
    """
    if name == "identity":
        (n,) = args or (kwargs.get("n", 1),)
        n = int(n)
        if n < 1:
            raise ParameterError("identity(n) needs n >= 1")
        return BLDatum(r=(n,), c=(1.0,), d=(1.0,), maps=(np.eye(n),))
    if name == "epi":
        (lam,) = args or (kwargs.get("lam", 0.5),)
        lam = float(lam)
        if not 0.0 < lam < 1.0:
            raise ParameterError(f"epi(lam) needs lam in (0, 1), got {lam}")
        A = np.array([[math.sqrt(lam), math.sqrt(1.0 - lam)]])
        return BLDatum(r=(1, 1), c=(lam, 1.0 - lam), d=(1.0,), maps=(A,))
    if name == "unbalanced":
        return BLDatum(r=(1,), c=(2.0,), d=(1.0,), maps=(np.array([[1.0]]),))
    if name == "zamir_feder":
        A = np.atleast_2d(np.asarray(args[0] if args else kwargs["A"], dtype=float))
        d = args[1] if len(args) > 1 else kwargs.get("d")
        n = A.shape[1]
        if np.linalg.matrix_rank(A) < A.shape[0]:
            raise ParameterError("zamir_feder(A) needs A of full row rank")
        if d is None:
            d = n / A.shape[0]
        return BLDatum(r=(1,) * n, c=(1.0,) * n, d=(float(d),), maps=(A,))
    raise ParameterError(f"unknown builtin datum {name!r}")


def parse_builtin(spec: str) -> BLDatum:
    """Parse ``"epi:0.25"``, ``"identity:3"``, ``"unbalanced"`` or ``"zamir_feder:[[1,1]]"``.

    ``zamir_feder`` takes an optional trailing ``:d`` (``"zamir_feder:[[1,1]]:1"``).
    """
    name, _, arg = spec.partition(":")
    if not arg:
        return builtin_datum(name)
    if name == "zamir_feder":
        matrix, sep, d = arg.rpartition("]:")
        if sep:
            return builtin_datum(name, json.loads(matrix + "]"), float(d))
        return builtin_datum(name, json.loads(arg))
    if name == "identity":
        return builtin_datum(name, int(arg))
    return builtin_datum(name, float(arg))
