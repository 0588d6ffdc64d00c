"""Parameter sweeps and derivative-free maximisation of the SH response."""

import concurrent.futures
import hashlib
import itertools
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .analytics import (DERIVED, TIME_EVOLUTION, alpha2_two_qe, enhancement,
                        two_qe_denominator)
from .errors import DegenerateDenominatorError, FanoSHGError, ParameterError

log = logging.getLogger(__name__)

VARIABLES = ("f1_re", "f1_im", "f2_re", "f2_im", "g_re", "g_im", "omega_eg1", "omega_eg2")
#: tied real coupling f1 = f2 = f (the constrained crude search)
TIED_F = "f"

GRID = "grid"
NELDER_MEAD = "nelder_mead"
RANDOM_RESTART = "random_restart"
STRATEGIES = (GRID, NELDER_MEAD, RANDOM_RESTART)

CRUDE = "crude"
FULL = "full"
OBJECTIVES = (CRUDE, FULL)

DEFAULT_BOUNDS = {
    "f1_re": (-0.2, 0.2), "f1_im": (-0.2, 0.2), "f2_re": (-0.2, 0.2), "f2_im": (-0.2, 0.2),
    "g_re": (-0.2, 0.2), "g_im": (-0.2, 0.2), "f": (-0.2, 0.2),
    "omega_eg1": (1.8, 2.8), "omega_eg2": (1.8, 2.8),
}

# stand-ins handed to the simplex for poles / failed points; the trace keeps the real values
_POLE_CAP = 1e300


def set_variable(params, name, value):
    """Copy of ``params`` with one search variable changed."""
    value = float(value)
    if name == TIED_F:
        return params.replace(f1=complex(value, 0.0), f2=complex(value, 0.0))
    if name in ("omega_eg1", "omega_eg2"):
        return params.replace(**{name: value})
    if name in VARIABLES:
        attr, part = name.split("_")
        old = getattr(params, attr)
        new = complex(value, old.imag) if part == "re" else complex(old.real, value)
        return params.replace(**{attr: new})
    raise ParameterError(name, f"unknown search variable; expected one of {VARIABLES + (TIED_F,)}")


def get_variable(params, name):
    if name == TIED_F:
        return params.f1.real
    if name in ("omega_eg1", "omega_eg2"):
        return getattr(params, name)
    if name in VARIABLES:
        attr, part = name.split("_")
        c = getattr(params, attr)
        return c.real if part == "re" else c.imag
    raise ParameterError(name, "unknown search variable")


def params_digest(params):
    blob = json.dumps({k: repr(v) for k, v in params.to_dict().items()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class Evaluation:
    value: float
    pole: bool = False
    failed: bool = False


def objective_crude(params, form=DERIVED):
    """|coefficient of alpha1^2| in the two-emitter amplitude at frozen y1 = y2 = -1.

    A pole comes back as ``Evaluation(inf, pole=True)``.
    """
    try:
        return Evaluation(abs(alpha2_two_qe(params, (-1.0, -1.0), 1.0, form=form)))
    except DegenerateDenominatorError:
        return Evaluation(math.inf, pole=True)


def objective_full(params, config=None):
    """Dynamic enhancement ratio; non-converged or divergent runs score ``-inf``."""
    try:
        return Evaluation(enhancement(params, TIME_EVOLUTION, config).intensity_ratio)
    except (FanoSHGError, ZeroDivisionError, ValueError) as exc:
        log.info("full objective failed at %s: %s", params_digest(params), exc)
        return Evaluation(-math.inf, failed=True)


@dataclass(frozen=True)
class SearchSpec:
    """What to vary, how, and which objective to maximise.

    ``variables`` is a sequence of ``(name, lower, upper)``. Use the tied
    name ``"f"`` for the constrained search with ``f1 = f2`` real.
    """

    base_params: object
    variables: tuple
    strategy: str = NELDER_MEAD
    objective: str = CRUDE
    restarts: int = 4
    max_evals: int = 2000
    seed: int = 0
    grid_points: int = 3
    threads: int = 1
    integrator: object = None

    def __post_init__(self):
        vs = tuple((str(n), float(lo), float(hi)) for n, lo, hi in self.variables)
        object.__setattr__(self, "variables", vs)
        if not vs:
            raise ParameterError("variables", "at least one search variable is required")
        for name, lo, hi in vs:
            if name not in VARIABLES and name != TIED_F:
                raise ParameterError(f"variables.{name}", "unknown search variable")
            if not lo < hi:
                raise ParameterError(f"variables.{name}", f"lower ({lo}) must be < upper ({hi})")
        if self.strategy not in STRATEGIES:
            raise ParameterError("strategy", f"expected one of {STRATEGIES}")
        if self.objective not in OBJECTIVES:
            raise ParameterError("objective", f"expected one of {OBJECTIVES}")
        if self.max_evals <= 0:
            raise ParameterError("max_evals", "must be > 0")
        if self.restarts < 1:
            raise ParameterError("restarts", "must be >= 1")
        if self.grid_points < 1:
            raise ParameterError("grid_points", "must be >= 1")

    @property
    def names(self):
        return tuple(n for n, _, _ in self.variables)

    @property
    def lower(self):
        return np.array([lo for _, lo, _ in self.variables])

    @property
    def upper(self):
        return np.array([hi for _, _, hi in self.variables])

    def apply(self, x):
        params = self.base_params
        for name, value in zip(self.names, x):
            params = set_variable(params, name, value)
        return params


@dataclass
class TraceEntry:
    index: int
    x: tuple
    digest: str
    objective: float
    pole: bool
    failed: bool


@dataclass
class SearchResult:
    best_params: object
    best_objective: float
    best_x: tuple
    trace: list = field(default_factory=list)
    eval_count: int = 0
    failures: int = 0
    poles: int = 0

    def running_best(self):
        best = -math.inf
        out = []
        for entry in self.trace:
            if not entry.failed:
                best = max(best, entry.objective)
            out.append(best)
        return out


class _Budget(Exception):
    pass


class _Evaluator:
    """Counts, records and caps objective evaluations."""

    def __init__(self, spec):
        self.spec = spec
        self.trace = []
        self.pool = (concurrent.futures.ThreadPoolExecutor(spec.threads)
                     if spec.threads > 1 else None)

    def _raw(self, x):
        params = self.spec.apply(x)
        if self.spec.objective == CRUDE:
            return params, objective_crude(params)
        return params, objective_full(params, self.spec.integrator)

    def _record(self, x, params, ev):
        entry = TraceEntry(len(self.trace), tuple(float(v) for v in x), params_digest(params),
                           ev.value, ev.pole, ev.failed)
        self.trace.append(entry)
        return entry

    @property
    def remaining(self):
        return self.spec.max_evals - len(self.trace)

    def batch(self, xs):
        """Evaluate many points (in parallel if configured), in order, within budget."""
        xs = list(xs)[: max(self.remaining, 0)]
        if self.pool is not None and len(xs) > 1:
            results = list(self.pool.map(self._raw, xs))
        else:
            results = [self._raw(x) for x in xs]
        return [self._record(x, p, ev) for x, (p, ev) in zip(xs, results)]

    def __call__(self, x):
        if self.remaining <= 0:
            raise _Budget
        params, ev = self._raw(x)
        entry = self._record(x, params, ev)
        if entry.failed:
            return _POLE_CAP
        if entry.pole:
            return -_POLE_CAP
        return -entry.objective

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _grid(spec, ev):
    axes = [np.linspace(lo, hi, spec.grid_points) for _, lo, hi in spec.variables]
    ev.batch(itertools.product(*axes))


def _polish(spec, ev, x0):
    lo, hi = spec.lower, spec.upper
    span = hi - lo
    simplex = [x0]
    for i in range(len(x0)):
        x = np.array(x0, dtype=float)
        step = 0.05 * span[i]
        x[i] = x[i] + step if x[i] + step <= hi[i] else x[i] - step
        simplex.append(x)
    try:
        minimize(ev, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                 options={"initial_simplex": np.array(simplex), "maxfev": max(ev.remaining, 1),
                          "xatol": 1e-10 * float(np.max(span)), "fatol": 0.0, "adaptive": True})
    except _Budget:
        pass


def _best_x(ev):
    ok = [e for e in ev.trace if not e.failed]
    if not ok:
        return None
    return np.array(max(ok, key=lambda e: e.objective).x)


def _nelder_mead(spec, ev, rng):
    lo, hi = spec.lower, spec.upper
    center = np.array([min(max(_start_value(spec, n), l), h)
                       for n, l, h in spec.variables])
    for k in range(spec.restarts):
        if ev.remaining <= 0:
            break
        if k == 0:
            x0 = center
        else:
            base = _best_x(ev)
            base = center if base is None else base
            x0 = np.clip(base + rng.uniform(-0.1, 0.1, len(lo)) * (hi - lo), lo, hi)
        _polish(spec, ev, x0)


def _random_restart(spec, ev, rng):
    lo, hi = spec.lower, spec.upper
    n_draws = max(1, min(ev.remaining, max(spec.max_evals // 4, 1)))
    draws = lo + rng.uniform(size=(n_draws, len(lo))) * (hi - lo)
    entries = ev.batch(draws)
    ranked = sorted((e for e in entries if not e.failed), key=lambda e: -e.objective)
    for entry in ranked[: spec.restarts]:
        if ev.remaining <= 0:
            break
        _polish(spec, ev, np.array(entry.x))


def _start_value(spec, name):
    try:
        return get_variable(spec.base_params, name)
    except ParameterError:
        return 0.0


def run_search(spec):
    """Run the configured search; deterministic for a given spec and seed."""
    rng = np.random.default_rng(spec.seed)
    ev = _Evaluator(spec)
    try:
        if spec.strategy == GRID:
            _grid(spec, ev)
        elif spec.strategy == NELDER_MEAD:
            _nelder_mead(spec, ev, rng)
        else:
            _random_restart(spec, ev, rng)
    finally:
        ev.close()
    ok = [e for e in ev.trace if not e.failed]
    if ok:
        best = max(ok, key=lambda e: e.objective)
        best_params, best_obj, best_x = spec.apply(best.x), best.objective, best.x
    else:
        best_params, best_obj, best_x = spec.base_params, -math.inf, ()
    return SearchResult(best_params, best_obj, best_x, ev.trace, len(ev.trace),
                        sum(e.failed for e in ev.trace), sum(e.pole for e in ev.trace))


@dataclass(frozen=True)
class SweepRow:
    value: float
    crude: float
    full: float
    pole: bool
    denominator: complex


def sweep(params, variable, values, full=False, config=None):
    """Evaluate the objectives along one axis; ``full`` adds the (slow) dynamic ratio."""
    get_variable(params, variable)
    rows = []
    for v in values:
        p = set_variable(params, variable, v)
        crude = objective_crude(p)
        dyn = objective_full(p, config).value if full else math.nan
        den = two_qe_denominator(p, (-1.0, -1.0))
        rows.append(SweepRow(float(v), crude.value, dyn, crude.pole, complex(den)))
    return rows
