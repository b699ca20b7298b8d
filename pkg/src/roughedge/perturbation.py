"""Rough-boundary perturbation profiles H0 with certified sup-norm and TV-rate.

Each profile is an immutable description of a function ``H0(u)`` together
with two constants:

* ``sup_bound``  -- ``sup |H0| <= sup_bound``
* ``tv_rate``    -- ``TV(H0, I) <= tv_rate * |I|`` on intervals

The boundary displacement actually applied to the curve is the scaled profile
``H_eps(u) = eps * H0(u / sqrt(eps))``.  All implemented families are
independent of ``eps``.

Lattice profiles draw their cell values from a SplitMix64 stream: the value
of cell ``i`` is ``mix(seed + (i + 1) * 0x9E3779B97F4A7C15)`` mapped to
``[0, 1)`` through its top 53 bits, with ``mix`` the SplitMix64 finalizer
(shift-xor 30/27/31, multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB).
"""

import enum
from dataclasses import dataclass, field

import numpy as np


class Kind(str, enum.Enum):
    ZERO = "zero"
    SINUSOID = "sinusoid"
    SAWTOOTH = "sawtooth"
    WEIERSTRASS = "weierstrass"
    LATTICE = "lattice"


_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix_uniform(seed, index):
    """Uniform [0, 1) variates, one per integer in ``index``, from a SplitMix64 stream."""
    idx = np.asarray(index, dtype=np.int64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed % 2**64) + (idx.astype(np.uint64) + np.uint64(1)) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class PerturbationProfile:
    """A family ``H0`` plus its certified constants.

    Use the ``zero``/``sinusoid``/... constructors rather than building the
    dataclass by hand; they compute ``sup_bound`` and ``tv_rate``.
    """

    kind: Kind
    params: dict = field(default_factory=dict)
    sup_bound: float = 0.0
    tv_rate: float = 0.0

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls):
        return cls(Kind.ZERO, {}, 0.0, 0.0)

    @classmethod
    def sinusoid(cls, amplitude=1.0, frequency=1.0, phase=0.0):
        """``amplitude * sin(frequency * u + phase)``."""
        a, w, ph = float(amplitude), float(frequency), float(phase)
        params = {"amplitude": a, "frequency": w}
        if ph != 0.0:
            params["phase"] = ph
        return cls(Kind.SINUSOID, params, abs(a), abs(a * w))

    @classmethod
    def sawtooth(cls, amplitude=1.0, frequency=1.0):
        """Symmetric triangle wave of period ``2*pi/frequency`` (Lipschitz, with kinks)."""
        a, w = float(amplitude), float(frequency)
        return cls(Kind.SAWTOOTH, {"amplitude": a, "frequency": w}, abs(a), 2 * abs(a * w) / np.pi)

    @classmethod
    def weierstrass(cls, amplitude=1.0, a=0.5, b=1.9, terms=8):
        """``amplitude * sum_{n=0}^{terms} a^n cos(b^n pi u)``; requires ``a*b < 1``."""
        a, b, amp = float(a), float(b), float(amplitude)
        if not 0 < a < 1:
            raise ValueError("Weierstrass a must lie in (0, 1)")
        if b <= 1:
            raise ValueError("Weierstrass b must exceed 1")
        if a * b >= 1:
            raise ValueError("Weierstrass profile needs a*b < 1 for a linear TV bound")
        terms = int(terms)
        n = np.arange(terms + 1)
        sup = abs(amp) * float(np.sum(a**n))
        tv = abs(amp) * np.pi * float(np.sum((a * b) ** n))
        params = {"amplitude": amp, "a": a, "b": b, "terms": terms}
        return cls(Kind.WEIERSTRASS, params, sup, tv)

    @classmethod
    def lattice(cls, lattice_step=0.25, amplitude=1.0, jump_bound=None, seed=0, values=None):
        """Piecewise constant on cells ``[i*step, (i+1)*step)``.

        Cell values are either the explicit ``values`` (repeated periodically)
        or seeded draws in ``[-r, r]`` with ``r = min(amplitude, jump_bound/2)``.
        """
        step = float(lattice_step)
        if step <= 0:
            raise ValueError("lattice_step must be positive")
        if values is not None:
            vals = tuple(float(v) for v in values)
            if not vals:
                raise ValueError("values must be non-empty")
            arr = np.array(vals + vals[:1])
            sup = float(np.max(np.abs(arr)))
            jump = float(np.max(np.abs(np.diff(arr)))) if len(vals) > 1 else 0.0
            params = {"lattice_step": step, "values": vals}
        else:
            r = abs(float(amplitude))
            if jump_bound is not None:
                r = min(r, float(jump_bound) / 2)
            sup, jump = r, 2 * r
            params = {"lattice_step": step, "amplitude": r, "seed": int(seed)}
        params["jump_bound"] = jump
        # at most two lattice points in any interval of length >= step
        return cls(Kind.LATTICE, params, sup, 2 * jump / step)

    @classmethod
    def from_config(cls, block):
        block = dict(block)
        kind = Kind(str(block.pop("kind")).lower())
        if kind is Kind.ZERO:
            return cls.zero()
        if kind is Kind.SINUSOID:
            return cls.sinusoid(block.get("amplitude", 1.0), block.get("frequency", 1.0),
                                block.get("phase", 0.0))
        if kind is Kind.SAWTOOTH:
            return cls.sawtooth(block.get("amplitude", 1.0), block.get("frequency", 1.0))
        if kind is Kind.WEIERSTRASS:
            return cls.weierstrass(block.get("amplitude", 1.0), block.get("a", 0.5),
                                   block.get("b", 1.9), block.get("terms", 8))
        return cls.lattice(block.get("lattice_step", 0.25), block.get("amplitude", 1.0),
                           block.get("jump_bound"), block.get("seed", 0), block.get("values"))

    def to_config(self):
        out = {"kind": self.kind.value}
        out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()
                    if not (self.kind is Kind.LATTICE and k == "jump_bound")})
        return out

    # -- evaluation -------------------------------------------------------

    def h0(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.kind is Kind.ZERO:
            return np.zeros_like(u)
        if self.kind is Kind.SINUSOID:
            return p["amplitude"] * np.sin(p["frequency"] * u + p.get("phase", 0.0))
        if self.kind is Kind.SAWTOOTH:
            x = p["frequency"] * u / (2 * np.pi)
            return p["amplitude"] * (1 - 4 * np.abs(x - np.round(x)))
        if self.kind is Kind.WEIERSTRASS:
            out = np.zeros_like(u)
            for n in range(p["terms"], -1, -1):
                out = out + p["a"] ** n * np.cos(p["b"] ** n * np.pi * u)
            return p["amplitude"] * out
        return self.cell_values(np.floor(u / p["lattice_step"]).astype(np.int64))

    def cell_values(self, cells):
        p = self.params
        cells = np.asarray(cells, dtype=np.int64)
        if "values" in p:
            vals = np.array(p["values"])
            return vals[np.mod(cells, len(vals))]
        return p["amplitude"] * (2 * splitmix_uniform(p["seed"], cells) - 1)

    def breakpoints(self, lo, hi):
        """Points in ``[lo, hi]`` (H0 argument) where H0 has a kink, jump or extremum."""
        p = self.params
        if self.kind in (Kind.ZERO, Kind.WEIERSTRASS):
            return np.array([])
        if self.kind is Kind.LATTICE:
            step = p["lattice_step"]
            return np.arange(np.ceil(lo / step), np.floor(hi / step) + 1) * step
        w = p["frequency"]
        if w == 0:
            return np.array([])
        if self.kind is Kind.SINUSOID:
            # extrema where w*u + phase = pi/2 + k*pi
            ph = p.get("phase", 0.0)
            ends = sorted([(w * lo + ph - np.pi / 2) / np.pi, (w * hi + ph - np.pi / 2) / np.pi])
            k = np.arange(np.ceil(ends[0]), np.floor(ends[1]) + 1)
            return np.sort((np.pi / 2 + k * np.pi - ph) / w)
        period = np.pi / abs(w)  # triangle-wave kinks every half period
        return np.arange(np.ceil(lo / period), np.floor(hi / period) + 1) * period


def eval_H0(profile, u, eps=None):
    """H0(u; eps); the implemented families do not depend on ``eps``."""
    out = profile.h0(u)
    return out if np.ndim(out) else float(out)


def eval_Heps(profile, u, eps):
    """Scaled displacement ``eps * H0(u / sqrt(eps))``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    out = eps * profile.h0(np.asarray(u, dtype=float) / np.sqrt(eps))
    return out if np.ndim(out) else float(out)


def heps_breakpoints(profile, lo, hi, eps):
    """Breakpoints of ``H_eps`` on the physical interval ``[lo, hi]``."""
    r = np.sqrt(eps)
    return profile.breakpoints(lo / r, hi / r) * r


def _partition_tv(profile, a, b, level):
    x = np.linspace(a, b, 2**level + 1)
    return float(np.sum(np.abs(np.diff(profile.h0(x)))))


def total_variation(profile, a, b, eps=None, rtol=1e-6, max_level=26):
    """TV of H0 over ``[a, b]``.

    Exact for piecewise-monotone kinds (sum of increments between
    breakpoints and endpoints; lattice jumps are counted with the
    right-continuous cell convention).  For the Weierstrass kind the dyadic
    partition sum is refined until two levels agree to ``rtol``; the result is
    a lower bound of the true TV converging to it.
    """
    if not a < b:
        raise ValueError("need a < b")
    if profile.kind is Kind.ZERO:
        return 0.0
    if profile.kind is Kind.WEIERSTRASS:
        prev = _partition_tv(profile, a, b, 10)
        for level in range(11, max_level + 1):
            cur = _partition_tv(profile, a, b, level)
            if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
                return cur
            prev = cur
        return prev
    if profile.kind is Kind.LATTICE:
        step = profile.params["lattice_step"]
        cells = np.arange(np.floor(a / step), np.floor(b / step) + 1).astype(np.int64)
        return float(np.sum(np.abs(np.diff(profile.cell_values(cells)))))
    pts = np.concatenate([[a], profile.breakpoints(a, b), [b]])
    pts = np.unique(pts)
    return float(np.sum(np.abs(np.diff(profile.h0(pts)))))


def weierstrass_refinement_error(profile, a, b, level):
    """Gap between the Lipschitz bound and the level-``level`` partition sum (declared error)."""
    return profile.tv_rate * (b - a) - _partition_tv(profile, a, b, level)
