"""Scalar time-dependent coefficients: g12(t), Bz(t), decay rates.

Each schedule knows its value, its integral from 0 and its derivative.  The
closed-form kinds are exact; the sampled table is piecewise linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

from .errors import RejectedInputError

KINDS = ("constant", "polynomial", "sinusoid", "table")


@dataclass(frozen=True)
class Schedule:
    """A coefficient ``s(t)`` on ``[0, horizon]``.

    ``params`` depends on ``kind``:

    * ``constant``: ``value``
    * ``polynomial``: ``coeffs`` in ascending powers, ``[a0, a1, ...]``
    * ``sinusoid``: ``offset + amplitude * sin(omega * t + phase)``
    * ``table``: strictly increasing ``times`` with matching ``values``,
      linearly interpolated.  The horizon defaults to the last knot.

    ``horizon=None`` means unbounded above (only ``t >= 0`` is checked).
    """

    kind: str
    params: dict = field(default_factory=dict)
    horizon: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RejectedInputError(f"unknown schedule kind {self.kind!r}")
        p = self.params
        if self.kind == "table":
            t = np.asarray(p["times"], dtype=float)
            v = np.asarray(p["values"], dtype=float)
            if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
                raise RejectedInputError("table needs matching 1-D times/values, >= 2 knots")
            if np.any(np.diff(t) <= 0):
                raise RejectedInputError("table knots must be strictly increasing")
            if t[0] > 0:
                raise RejectedInputError("table must start at or before t = 0")
            if self.horizon is None:
                object.__setattr__(self, "horizon", float(t[-1]))
            elif self.horizon > t[-1]:
                raise RejectedInputError("table does not cover the horizon")
        if self.horizon is not None and not self.horizon > 0:
            raise RejectedInputError("horizon must be positive")

    # -- constructors --

    @classmethod
    def constant(cls, value, horizon=None):
        return cls("constant", {"value": float(value)}, horizon)

    @classmethod
    def polynomial(cls, coeffs, horizon=None):
        return cls("polynomial", {"coeffs": [float(c) for c in coeffs]}, horizon)

    @classmethod
    def sinusoid(cls, amplitude, omega, phase=0.0, offset=0.0, horizon=None):
        if omega == 0:
            raise RejectedInputError("sinusoid needs a nonzero omega")
        return cls("sinusoid", {"amplitude": float(amplitude), "omega": float(omega),
                                "phase": float(phase), "offset": float(offset)}, horizon)

    @classmethod
    def table(cls, times, values, horizon=None):
        return cls("table", {"times": [float(t) for t in times],
                             "values": [float(v) for v in values]}, horizon)

    def with_horizon(self, horizon):
        return Schedule(self.kind, self.params, horizon)

    # -- evaluation --

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        upper = np.inf if self.horizon is None else self.horizon * (1 + 1e-12) + 1e-15
        if np.any(t < -1e-15) or np.any(t > upper) or not np.all(np.isfinite(t)):
            raise RejectedInputError(f"t outside the schedule horizon [0, {self.horizon}]")
        return t

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        if isinstance(t, Real):
            return self._eval_scalar(float(t))
        t = self._check(t)
        p = self.params
        if self.kind == "constant":
            out = np.full_like(t, p["value"])
        elif self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(t, p["coeffs"])
        elif self.kind == "sinusoid":
            out = p["offset"] + p["amplitude"] * np.sin(p["omega"] * t + p["phase"])
        else:
            out = np.interp(t, p["times"], p["values"])
        return out if out.ndim else float(out)

    def _eval_scalar(self, t):
        # hot path for the integrators: no array round trips
        upper = math.inf if self.horizon is None else self.horizon * (1 + 1e-12) + 1e-15
        if not -1e-15 <= t <= upper:
            raise RejectedInputError(f"t outside the schedule horizon [0, {self.horizon}]")
        p = self.params
        if self.kind == "constant":
            return p["value"]
        if self.kind == "polynomial":
            acc = 0.0
            for c in reversed(p["coeffs"]):
                acc = acc * t + c
            return acc
        if self.kind == "sinusoid":
            return p["offset"] + p["amplitude"] * math.sin(p["omega"] * t + p["phase"])
        return float(np.interp(t, p["times"], p["values"]))

    def integral(self, t):
        """``int_0^t s(t') dt'``; exactly 0 at ``t = 0``."""
        t = self._check(t)
        p = self.params
        if self.kind == "constant":
            out = p["value"] * t
        elif self.kind == "polynomial":
            anti = np.polynomial.polynomial.polyint(p["coeffs"])
            out = np.polynomial.polynomial.polyval(t, anti)
        elif self.kind == "sinusoid":
            a, w, ph = p["amplitude"], p["omega"], p["phase"]
            out = p["offset"] * t + a * (np.cos(ph) - np.cos(w * t + ph)) / w
        else:
            out = np.vectorize(self._table_integral, otypes=[float])(t)
        out = np.where(t == 0, 0.0, out)
        return out if out.ndim else float(out)

    def _table_integral(self, t):
        knots = np.asarray(self.params["times"])
        values = np.asarray(self.params["values"])
        # trapezoid over knots in (0, t), with both end points interpolated
        inner = knots[(knots > 0) & (knots < t)]
        xs = np.concatenate(([0.0], inner, [t]))
        ys = np.interp(xs, knots, values)
        return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))

    def derivative(self, t):
        """Analytic derivative; central difference for tables (not at a knot)."""
        t = self._check(t)
        p = self.params
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "polynomial":
            der = np.polynomial.polynomial.polyder(p["coeffs"])
            out = np.polynomial.polynomial.polyval(t, der)
        elif self.kind == "sinusoid":
            out = p["amplitude"] * p["omega"] * np.cos(p["omega"] * t + p["phase"])
        else:
            knots = np.asarray(p["times"])
            if np.any(np.isin(t, knots)):
                raise RejectedInputError("table derivative is ambiguous at a knot")
            h = 1e-6 * self.horizon
            out = (np.interp(t + h, knots, p["values"])
                   - np.interp(t - h, knots, p["values"])) / (2 * h)
        return out if out.ndim else float(out)

    # -- serialization --

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d, horizon=None):
        d = dict(d)
        kind = d.pop("kind", None)
        try:
            if kind == "constant":
                return cls.constant(d["value"], horizon)
            if kind == "polynomial":
                return cls.polynomial(d["coeffs"], horizon)
            if kind == "sinusoid":
                return cls.sinusoid(d["amplitude"], d["omega"], d.get("phase", 0.0),
                                    d.get("offset", 0.0), horizon)
            if kind == "table":
                return cls.table(d["times"], d["values"], horizon)
        except KeyError as exc:
            raise RejectedInputError(f"{kind} schedule is missing {exc}") from exc
        raise RejectedInputError(f"unknown schedule kind {kind!r}")


def as_schedule(value):
    """Accept a ``Schedule``, a number (constant) or a JSON descriptor."""
    if isinstance(value, Schedule):
        return value
    if isinstance(value, dict):
        return Schedule.from_dict(value)
    return Schedule.constant(value)
