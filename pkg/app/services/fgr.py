"""Heat-trace functionals, K-spaces and the FGR dga."""

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from app.config import settings
from app.models.reports import (
    ComparisonReport,
    ComparisonRow,
    ConsistencyReport,
    CrossTermReport,
    DiracDgaReport,
    FactorizationReport,
    HeatLimit,
    HeatSchedule,
    KSpaceDegree,
    KSpaceReport,
    MembershipBatchReport,
    MembershipReport,
)
from app.services import linalg
from app.services.errors import (
    BudgetError,
    FunctionalError,
    ResourceGuardError,
    ScenarioValidationError,
    ScheduleError,
)
from app.services.forms import (
    FormExpr,
    FormWord,
    SuspendedBudget,
    base_adjoints,
    coordinate_table,
    enumerate_words,
    expr_operator,
    suspended_expr_op,
    suspended_word_op,
    window_vectors,
)
from app.services.qds import (
    SIGN,
    Key,
    LaurentPoly,
    SuspendedTriple,
    TensorOp,
    ToeplitzElement,
    evaluate_key,
    join_keys,
    key_adjoint,
    matrix_unit,
    sigma_prime,
)
from app.services.triple import (
    Level,
    ModeSpace,
    SpectralTripleModel,
    bind_level,
    geometric_schedule,
    heat_trace,
)
from app.utils.extrapolation import richardson_limit
from app.utils.logger import logger
from app.utils.workers import map_levels

Triple = SpectralTripleModel | SuspendedTriple
PlainOperator = Callable[[Level], sparse.spmatrix | np.ndarray]
CONSISTENCY_TOL = 0.05
REFINEMENTS = 2


# Schedules and levels


def _model(triple: Triple) -> SpectralTripleModel:
    return triple.model if isinstance(triple, SuspendedTriple) else triple


def make_schedule(
    triple: Triple,
    t0: float | None = None,
    ratio: float | None = None,
    nodes: int | None = None,
    order: int | None = None,
    squared: bool = False,
) -> HeatSchedule:
    """
    Geometric schedule t_k = t0 / ratio^k with a certified truncation level per node.

    With squared=True the levels are bound for e^{-(tD)^2}, the weight used by heat_int.
    """
    t0 = settings.heat_t0 if t0 is None else t0
    ratio = settings.heat_ratio if ratio is None else ratio
    nodes = settings.heat_nodes if nodes is None else nodes
    order = settings.extrapolation_order if order is None else order
    if t0 <= 0 or ratio <= 1:
        raise ScheduleError(f"invalid schedule: t0={t0}, ratio={ratio}", module="fgr", stage="schedule")
    if order < 1 or nodes < order + 2:
        raise ScheduleError(
            f"schedule needs at least order + 2 = {order + 2} nodes, got {nodes}",
            module="fgr",
            stage="schedule",
        )
    model = _model(triple)
    t_values = geometric_schedule(t0, ratio, nodes)
    binding = [bind_level(model, t * t if squared else t, squared=squared) for t in t_values]
    return HeatSchedule(
        t0=t0,
        ratio=ratio,
        nodes=nodes,
        extrapolation_order=order,
        t_values=t_values,
        level_binding=[list(b) if isinstance(b, tuple) else b for b in binding],
        squared=squared,
    )


def refine_schedule(triple: Triple, schedule: HeatSchedule) -> HeatSchedule:
    """Same schedule started at half the initial t."""
    return make_schedule(
        triple,
        t0=schedule.t0 / 2,
        ratio=schedule.ratio,
        nodes=schedule.nodes,
        order=schedule.extrapolation_order,
        squared=schedule.squared,
    )


def _consume(space: ModeSpace, flat: list) -> Level:
    if space.kind == "product":
        return tuple(_consume(f, flat) for f in space.factors)
    return flat.pop(0)


def model_level(model: SpectralTripleModel, heat_level) -> Level:
    """Convert a per-heat-factor level (flat) into the model's own level shape."""
    flat = list(heat_level) if isinstance(heat_level, (list, tuple)) else [heat_level]
    level = _consume(model.space, flat)
    if flat:
        raise ScenarioValidationError(
            f"heat level {heat_level} does not match the mode space of {model.name}",
            module="fgr",
            stage="levels",
        )
    return level


def _heat_level(binding) -> Level:
    return tuple(binding) if isinstance(binding, list) else binding


def _extrapolate(samples: Sequence[complex], schedule: HeatSchedule, what: str) -> tuple[np.ndarray, float]:
    value, err, diffs = richardson_limit(samples, schedule.ratio, schedule.extrapolation_order)
    scale = max(float(np.max(np.abs(value), initial=0.0)), 1.0)
    if len(diffs) >= 2 and diffs[-1] > diffs[-2] and diffs[-1] > 1e-8 * scale:
        raise ScheduleError(
            f"schedule too coarse for {what}: extrapolation differences grow "
            f"({diffs[-2]:.3e} -> {diffs[-1]:.3e})",
            module="fgr",
            stage="extrapolate",
        )
    return value, err


def _limit(samples: Sequence[complex], schedule: HeatSchedule, what: str) -> HeatLimit:
    value, err = _extrapolate(samples, schedule, what)
    value = complex(value)
    return HeatLimit(
        real=value.real,
        imag=value.imag,
        error_estimate=err,
        schedule=schedule,
        samples=[float(np.real(s)) for s in samples],
    )


# Traces


def _diagonal(op) -> np.ndarray:
    if sparse.issparse(op):
        return np.asarray(op.diagonal())
    op = np.asarray(op)
    return np.diag(op) if op.ndim == 2 else op


def _guard(model: SpectralTripleModel, level: Level) -> None:
    dim = model.dim(level)
    if dim > settings.max_heat_level:
        raise ResourceGuardError(
            f"heat trace of {model.name} needs dimension {dim} > {settings.max_heat_level}",
            module="fgr",
            stage="trace",
        )


def _plain_trace(model: SpectralTripleModel, v: PlainOperator, t: float, binding) -> complex:
    level = model_level(model, _heat_level(binding))
    _guard(model, level)
    weights = np.exp(-t * model.abs_diagonal(level))
    return t**model.p * complex(np.sum(_diagonal(v(level)) * weights))


def base_key_trace(base: SpectralTripleModel, key: Key, t: float, base_binding) -> complex:
    """t^p Tr(X e^{-t|D|}) for a base operator key."""
    if key == ():
        return t**base.p * heat_trace(base, t, level=base_binding)
    if key == (SIGN,):
        return t**base.p * heat_trace(base, t, with_sign=True, level=base_binding)
    level = model_level(base, base_binding)
    _guard(base, level)
    diag = evaluate_key(base, key, level).diagonal()
    return t**base.p * complex(np.sum(diag * np.exp(-t * base.abs_diagonal(level))))


def _split_binding(binding) -> tuple:
    flat = list(binding)
    base = flat[:-1]
    return base[0] if len(base) == 1 else tuple(base)


def _tensor_trace(st: SuspendedTriple, op: TensorOp, t: float, binding) -> complex:
    base_binding = _split_binding(binding)
    total = 0j
    for key, element in op.terms.items():
        total += base_key_trace(st.base, key, t, base_binding) * t * element.heat_trace(t)
    return total


def heat_oint(triple: Triple, v: PlainOperator | TensorOp, schedule: HeatSchedule) -> HeatLimit:
    """
    lim_{t->0} t^p Tr(v e^{-t|D|}) by Richardson extrapolation.

    Args:
        triple: A plain model (v is a level -> operator family) or a suspension (v is a
            TensorOp; the trace factorizes through closed forms on the l^2(N) side).
        v: Operator to integrate.
        schedule: Schedule bound for |D|.

    Returns:
        HeatLimit carrying the schedule it was computed on.
    """
    if schedule.squared:
        raise ScheduleError("heat_oint needs a schedule bound for |D|", module="fgr", stage="oint")
    pairs = list(zip(schedule.t_values, schedule.level_binding, strict=True))
    if isinstance(triple, SuspendedTriple):
        if not isinstance(v, TensorOp):
            raise ScenarioValidationError(
                "suspended heat functionals take a TensorOp", module="fgr", stage="oint"
            )
        samples = map_levels(lambda tb: _tensor_trace(triple, v, tb[0], tb[1]), pairs)
    else:
        samples = map_levels(lambda tb: _plain_trace(triple, v, tb[0], tb[1]), pairs)
    return _limit(samples, schedule, "heat_oint")


def heat_int(triple: SpectralTripleModel, v: PlainOperator, schedule: HeatSchedule) -> HeatLimit:
    """lim_{t->0} Tr(v e^{-(tD)^2}) / Tr(e^{-(tD)^2}) on a plain model."""
    if not schedule.squared:
        raise ScheduleError("heat_int needs a schedule bound for D^2", module="fgr", stage="int")
    if isinstance(triple, SuspendedTriple):
        raise ScenarioValidationError("heat_int runs on plain models only", module="fgr", stage="int")

    def ratio(tb) -> complex:
        t, binding = tb
        level = model_level(triple, _heat_level(binding))
        _guard(triple, level)
        weights = np.exp(-((t * triple.dirac_diagonal(level)) ** 2))
        return complex(np.sum(_diagonal(v(level)) * weights) / np.sum(weights))

    samples = map_levels(ratio, list(zip(schedule.t_values, schedule.level_binding, strict=True)))
    return _limit(samples, schedule, "heat_int")


def identity_operator(triple: Triple) -> PlainOperator | TensorOp:
    if isinstance(triple, SuspendedTriple):
        return TensorOp.identity()
    return triple.identity


def functional_consistency(
    triple: SpectralTripleModel,
    samples: Mapping[str, PlainOperator],
    oint_schedule: HeatSchedule | None = None,
    int_schedule: HeatSchedule | None = None,
) -> ConsistencyReport:
    """
    Ratios heat_oint(v) / (heat_int(v) * heat_oint(I)) across samples.

    Samples whose heat_int vanishes (below k_tol) are excluded. The verdict is
    "consistent" when every ratio agrees with the identity's within 5%.
    """
    oint_schedule = oint_schedule or make_schedule(triple)
    int_schedule = int_schedule or make_schedule(triple, squared=True)
    ident = heat_oint(triple, triple.identity, oint_schedule).value
    ratios: dict[str, float] = {}
    excluded: list[str] = []
    for name, v in samples.items():
        normalized = heat_int(triple, v, int_schedule).value
        if abs(normalized) < settings.k_tol:
            excluded.append(name)
            continue
        ratios[name] = float(np.real(heat_oint(triple, v, oint_schedule).value / (normalized * ident)))
    reference = 1.0
    spread = max((abs(r - reference) / reference for r in ratios.values()), default=0.0)
    consistent = spread <= CONSISTENCY_TOL
    verdict = "consistent" if consistent else "inconsistent"
    log = logger.info if consistent else logger.warning
    log(f"Functional consistency on {triple.name}: {verdict} (spread {spread:.2e}, excluded {excluded})")
    return ConsistencyReport(
        ratios=ratios, excluded=excluded, spread=spread, consistent=consistent, verdict=verdict
    )


def factorization_check(
    st: SuspendedTriple,
    samples: int = 20,
    seed: int = 0,
    t_values: Sequence[float] = (0.5, 0.25),
    level: Level | None = None,
) -> FactorizationReport:
    """
    Realized t^{p+1} Tr((X x T) e^{-t|Sigma^2 D|}) against t^p Tr(X e^{-t|D|}) * t Tr(T e^{-tN}).

    Both sides are evaluated at the same truncation, where the identity is exact.
    """
    rng = np.random.default_rng(seed)
    base = st.base
    level = st.model.min_level if level is None else level
    base_level, k = level
    dim = st.model.dim(level)
    symbols = base.symbols()
    worst = 0.0
    abs_d = st.model.abs_diagonal(level)
    base_abs = base.abs_diagonal(base_level)
    n = np.arange(k, dtype=float)
    for _ in range(samples):
        x = base.product([symbols[i] for i in rng.integers(len(symbols), size=2)], base_level)
        if rng.random() < 0.5:
            i, j = rng.integers(k // 2, size=2)
            element = matrix_unit(int(i), int(j))
        else:
            element = sigma_prime(LaurentPoly.monomial(int(rng.integers(-3, 4))))
        block = element.dense(k)
        for t in t_values:
            realized = sparse.kron(x, sparse.csr_matrix(block), format="csr").diagonal()
            lhs = t ** (base.p + 1) * np.sum(realized * np.exp(-t * abs_d))
            left = t**base.p * np.sum(x.diagonal() * np.exp(-t * base_abs))
            right = t * np.sum(np.diag(block) * np.exp(-t * n))
            scale = max(float(np.sum(np.abs(realized) * np.exp(-t * abs_d))) * t ** (base.p + 1), 1e-300)
            worst = max(worst, float(abs(lhs - left * right)) / scale)
    tol = float(np.finfo(float).eps) * dim
    passed = worst <= tol
    logger.info(f"Factorization check {st.name}: max relative deviation {worst:.2e} (tol {tol:.2e})")
    return FactorizationReport(
        samples=samples,
        t_values=list(t_values),
        max_relative_deviation=worst,
        tolerance=tol,
        passed=passed,
    )


# K-membership


def _square_operator(triple: Triple, omega: FormExpr) -> PlainOperator | TensorOp:
    if isinstance(triple, SuspendedTriple):
        op = suspended_expr_op(omega, triple.base.unit)
        return op.adjoint(base_adjoints(triple.base)) * op

    def square(level: Level) -> sparse.spmatrix:
        p = expr_operator(triple, omega, level)
        return p.conj().T @ p

    return square


def k_membership(
    triple: Triple,
    omega: FormExpr,
    schedule: HeatSchedule | None = None,
    k_tol: float | None = None,
) -> MembershipReport:
    """
    Whether oint pi(w)* pi(w) vanishes, relative to oint(I).

    Values within 10x of k_tol are marginal: the schedule is refined (t0 halved) up to
    twice and a still-marginal verdict is reported as such.
    """
    k_tol = settings.k_tol if k_tol is None else k_tol
    schedule = schedule or make_schedule(triple)
    v = _square_operator(triple, omega)
    refinements = 0
    while True:
        ident = abs(heat_oint(triple, identity_operator(triple), schedule).value)
        limit = heat_oint(triple, v, schedule)
        if limit.real < -10 * limit.error_estimate - 1e-12 * max(ident, 1.0):
            raise FunctionalError(
                f"functional evaluation inconsistent: oint of a positive operator is {limit.real:.3e}",
                module="fgr",
                stage="membership",
            )
        value = abs(limit.value) / max(ident, 1e-300)
        marginal = k_tol < value <= settings.marginal_factor * k_tol
        if not marginal or refinements >= REFINEMENTS:
            break
        logger.warning(f"Marginal membership on {triple.name} (value {value:.3e}); refining schedule")
        schedule = refine_schedule(triple, schedule)
        refinements += 1
    return MembershipReport(
        member=value <= k_tol,
        marginal=marginal,
        value=value,
        threshold=k_tol,
        limit=limit,
        refinements=refinements,
    )


def cross_term_vanishing(
    st: SuspendedTriple,
    samples: Mapping[str, FormExpr],
    schedule: HeatSchedule | None = None,
    k_tol: float | None = None,
) -> CrossTermReport:
    """|oint (F x 1) pi(w)| relative to oint(I) for 1-forms w over A x S."""
    k_tol = settings.k_tol if k_tol is None else k_tol
    schedule = schedule or make_schedule(st)
    ident = abs(heat_oint(st, TensorOp.identity(), schedule).value)
    sign = TensorOp.single((SIGN,), ToeplitzElement.identity())
    values, failures = [], []
    for name, omega in samples.items():
        op = sign * suspended_expr_op(omega, st.base.unit)
        value = abs(heat_oint(st, op, schedule).value) / max(ident, 1e-300)
        values.append(value)
        if value > k_tol:
            failures.append(name)
    passed = not failures
    if not passed:
        logger.warning(f"Cross term does not vanish on {failures}")
    return CrossTermReport(values=values, threshold=k_tol, passed=passed, failures=failures)


# FGR dga


@dataclass(frozen=True)
class DegreeGram:
    """Seminorm data of one degree: exact coordinates, Gram spectrum and the K map."""

    words: list[FormWord]
    coords: np.ndarray  # words x (key, label) coordinates
    gram: np.ndarray  # (key, label) Gram matrix of the seminorm
    range_basis: np.ndarray  # orthonormal rows spanning the coordinate span
    evals: np.ndarray
    evecs: np.ndarray
    kernel: np.ndarray  # boolean mask over evals
    marginal: np.ndarray
    error: float

    @property
    def rank(self) -> int:
        return self.range_basis.shape[0]

    def z_map(self) -> np.ndarray:
        """Word coefficients -> seminorm-visible components; K is its kernel."""
        kept = self.evecs[:, ~self.kernel]
        return kept.conj().T @ self.range_basis.conj() @ self.coords.T

    def pi_kernel_rows(self) -> np.ndarray:
        return self.evecs[:, self.kernel].T @ self.range_basis

    def seminorm(self, coeffs: np.ndarray) -> float:
        x = coeffs @ self.coords
        return float(np.real(x.conj() @ self.gram @ x))


def _gram_factors(
    st: SuspendedTriple, keys: list[Key], labels: list[tuple], schedule: HeatSchedule
) -> tuple[np.ndarray, np.ndarray, float]:
    adjoints = base_adjoints(st.base)
    key_pairs = []
    for a in keys:
        sign, adj = key_adjoint(a, adjoints)
        key_pairs.append([(sign, join_keys(adj, b)) for b in keys])
    elements = [_label_element(lab) for lab in labels]
    products = [[x.adjoint() * y for y in elements] for x in elements]

    def at(tb) -> tuple[np.ndarray, np.ndarray]:
        t, binding = tb
        base_binding = _split_binding(binding)
        gh = np.array(
            [[sign * base_key_trace(st.base, key, t, base_binding) for sign, key in row] for row in key_pairs],
            dtype=complex,
        )
        gn = np.array([[t * p.heat_trace(t) for p in row] for row in products], dtype=complex)
        return gh, gn

    samples = map_levels(at, list(zip(schedule.t_values, schedule.level_binding, strict=True)))
    gh, err_h = _extrapolate([s[0] for s in samples], schedule, "base Gram")
    gn, err_n = _extrapolate([s[1] for s in samples], schedule, "Toeplitz Gram")
    for name, g, err in (("base", gh, err_h), ("Toeplitz", gn, err_n)):
        if np.max(np.abs(g - g.conj().T), initial=0.0) > 10 * err + 1e-10 * max(np.max(np.abs(g)), 1.0):
            raise FunctionalError(
                f"functional evaluation inconsistent: {name} Gram matrix is not Hermitian",
                module="fgr",
                stage="gram",
            )
    gh = (gh + gh.conj().T) / 2
    gn = (gn + gn.conj().T) / 2
    error = float(err_h * np.max(np.abs(gn), initial=0.0) + err_n * np.max(np.abs(gh), initial=0.0))
    return gh, gn, error


def _label_element(label: tuple) -> ToeplitzElement:
    if label[0] == "L":
        return sigma_prime(LaurentPoly.monomial(label[1]))
    return matrix_unit(label[1], label[2])


def degree_gram(
    st: SuspendedTriple, words: list[FormWord], schedule: HeatSchedule, k_tol: float | None = None
) -> DegreeGram:
    """Gram spectrum of the oint-seminorm on the span of pi(words)."""
    k_tol = settings.k_tol if k_tol is None else k_tol
    ops = [suspended_word_op(w, st.base.unit) for w in words]
    key_index, label_index, entries = coordinate_table(ops)
    keys, labels = list(key_index), list(label_index)
    nl = len(labels)
    coords = np.zeros((len(words), len(keys) * nl), dtype=complex)
    for r, k, lab, c in entries:
        coords[r, k * nl + lab] += c
    if keys:
        gh, gn, error = _gram_factors(st, keys, labels, schedule)
        gram = np.kron(gh, gn)
    else:
        gram, error = np.zeros((0, 0), dtype=complex), 0.0
    q = linalg.orthonormal_rows(coords)
    if q.shape[0] == 0:
        none = np.zeros(0, dtype=bool)
        return DegreeGram(
            words, coords, gram, q, np.zeros(0), np.zeros((0, 0), dtype=complex), none, none, error
        )
    h = q.conj() @ gram @ q.T
    h = (h + h.conj().T) / 2
    evals, evecs = np.linalg.eigh(h)
    top = max(float(np.max(evals, initial=0.0)), 1e-300)
    if evals.size and evals[0] < -10 * max(error, settings.rank_tol * top):
        raise FunctionalError(
            f"functional evaluation inconsistent: Gram eigenvalue {evals[0]:.3e} < 0",
            module="fgr",
            stage="gram",
        )
    kernel = evals <= k_tol * top
    marginal = (~kernel) & (evals <= settings.marginal_factor * k_tol * top)
    return DegreeGram(words, coords, gram, q, evals, evecs, kernel, marginal, error)


def d_matrix(lower: list[FormWord], upper: list[FormWord]) -> np.ndarray:
    """Matrix of the universal d from degree-(n-1) words to degree-n words (upper x lower)."""
    index = {w.key: i for i, w in enumerate(upper)}
    out = np.zeros((len(upper), len(lower)), dtype=complex)
    for j, w in enumerate(lower):
        for (a0, letters), c in w.d().terms.items():
            i = index.get((a0, letters))
            if i is None:
                raise BudgetError(
                    f"d({w.label()}) leaves the degree-{w.degree + 1} word budget",
                    module="fgr",
                    stage="d-map",
                )
            out[i, j] += c
    return out


def fgr_dga_dims(
    st: SuspendedTriple,
    max_degree: int,
    budget: SuspendedBudget,
    schedule: HeatSchedule | None = None,
    k_tol: float | None = None,
) -> KSpaceReport:
    """
    dim Omega~^n = dim pi(Omega^n) - dim pi(K^n + dK^{n-1}) for n = 0..max_degree.

    K^n is the kernel of the oint-seminorm Gram matrix on the word coefficient space;
    dK^{n-1} is never assumed to vanish.
    """
    schedule = schedule or make_schedule(st, t0=settings.fgr_t0)
    grams: list[DegreeGram] = []
    degrees: list[KSpaceDegree] = []
    for n in range(max_degree + 1):
        words = enumerate_words(st, n, budget)
        g = degree_gram(st, words, schedule, k_tol)
        z = g.z_map()
        pi_k = g.pi_kernel_rows()
        if n > 0:
            prev = grams[-1]
            t_map = g.coords.T @ d_matrix(prev.words, words)
            pi_dk = linalg.image_of_kernel(t_map, prev.z_map())
        else:
            pi_dk = np.zeros((0, g.coords.shape[1]), dtype=complex)
        combined = np.vstack([pi_k, pi_dk])
        rank_k = linalg.rank_of_rows(pi_k).rank
        rank_kdk = linalg.rank_of_rows(combined).rank
        k_dim = len(words) - linalg.rank_of_rows(z).rank
        kept = g.evals[~g.kernel]
        null = g.evals[g.kernel]
        degrees.append(
            KSpaceDegree(
                degree=n,
                word_count=len(words),
                dim_pi_omega=g.rank,
                k_dim=k_dim,
                dim_pi_k=rank_k,
                dim_pi_k_plus_dk=rank_kdk,
                dim_omega_tilde=g.rank - rank_kdk,
                marginal_count=int(np.sum(g.marginal)),
                kept_eigenvalue_min=float(np.min(kept)) if kept.size else None,
                null_eigenvalue_max=float(np.max(null)) if null.size else None,
            )
        )
        logger.info(
            f"FGR {st.name} degree {n}: {len(words)} words, pi={g.rank}, "
            f"pi(K+dK)={rank_kdk}, Omega~={g.rank - rank_kdk}"
        )
        grams.append(g)
    finite_in_k, laurent_out = _degree_zero_verdicts(grams[0], k_tol)
    return KSpaceReport(
        triple=st.name,
        budget=budget.as_dict(),
        schedule=schedule,
        degrees=degrees,
        finite_words_in_k=finite_in_k,
        laurent_words_excluded=laurent_out,
    )


def _degree_zero_verdicts(g: DegreeGram, k_tol: float | None) -> tuple[bool, bool]:
    k_tol = settings.k_tol if k_tol is None else k_tol
    top = max(float(np.max(g.evals, initial=0.0)), 1e-300)
    finite_in_k, laurent_out = True, True
    for i, w in enumerate(g.words):
        e = np.zeros(len(g.words))
        e[i] = 1.0
        value = g.seminorm(e) / top
        if w.a0 and w.a0[0][0] == "fin":
            finite_in_k &= value <= k_tol
        else:
            laurent_out &= value > k_tol
    return finite_in_k, laurent_out


# Consistency checks on K


def _sample_kernel(basis: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if basis.shape[0] == 0:
        return basis
    coeffs = rng.standard_normal((count, basis.shape[0])) + 1j * rng.standard_normal((count, basis.shape[0]))
    return coeffs @ basis


def _batch(name: str, reports: list[tuple[str, MembershipReport]]) -> MembershipBatchReport:
    failures = [label for label, r in reports if not r.member]
    marginal = sum(r.marginal for _, r in reports)
    passed = not failures
    log = logger.info if passed else logger.warning
    log(f"{name}: {len(reports) - len(failures)}/{len(reports)} in K, {marginal} marginal")
    return MembershipBatchReport(
        name=name,
        checked=len(reports),
        members=len(reports) - len(failures),
        marginal=marginal,
        failures=failures,
        passed=passed,
    )


def j0_subset_k(
    st: SuspendedTriple,
    budget: SuspendedBudget,
    level: Level,
    degree: int = 1,
    samples: int = 10,
    seed: int = 0,
    schedule: HeatSchedule | None = None,
) -> MembershipBatchReport:
    """Random combinations of pi-kernel words (junk relations) must lie in K."""
    schedule = schedule or make_schedule(st)
    words = enumerate_words(st, degree, budget)
    ops = [suspended_word_op(w, st.base.unit) for w in words]
    (rows,) = window_vectors(st.base, [ops], level, modulo_compacts=False)
    basis = linalg.nullspace_coeffs(rows)
    picks = _sample_kernel(basis, samples, np.random.default_rng(seed))
    reports = [
        (f"J0 sample {i}", k_membership(st, FormExpr.from_words(words, c), schedule))
        for i, c in enumerate(picks)
    ]
    return _batch(f"J0 in K (degree {degree})", reports)


def k_ideal_check(
    st: SuspendedTriple,
    budget: SuspendedBudget,
    samples: int = 5,
    seed: int = 0,
    schedule: HeatSchedule | None = None,
) -> MembershipBatchReport:
    """Products of detected K^1 forms with degree-1 words on either side must lie in K^2."""
    schedule = schedule or make_schedule(st)
    gram_schedule = make_schedule(st, t0=settings.fgr_t0)
    rng = np.random.default_rng(seed)
    words = enumerate_words(st, 1, budget)
    g = degree_gram(st, words, gram_schedule)
    z = g.z_map()
    basis = linalg.nullspace_coeffs(z.T) if z.shape[0] else np.eye(len(words), dtype=complex)
    reports = []
    for i, c in enumerate(_sample_kernel(basis, samples, rng)):
        omega = FormExpr.from_words(words, c)
        word = words[int(rng.integers(len(words)))].expr()
        reports.append((f"word*K {i}", k_membership(st, word * omega, schedule)))
        reports.append((f"K*word {i}", k_membership(st, omega * word, schedule)))
    return _batch("K ideal (degree 1 -> 2)", reports)


# Comparison


def _budget_signature(dirac: DiracDgaReport, fgr_report: KSpaceReport) -> tuple:
    caps = tuple(dirac.budget.get(k) for k in ("index_cap", "laurent_cap"))
    return caps, tuple(sorted(fgr_report.budget.items()))


def compare_dgas(rows: Sequence[tuple[str, DiracDgaReport, KSpaceReport]]) -> ComparisonReport:
    """
    Side-by-side Dirac and FGR dimensions across base triples.

    Rows must share matrix-unit and Laurent caps and the FGR budget. A degree is
    flagged when the FGR dimension is identical across rows while the Dirac dimension
    varies.
    """
    if not rows:
        raise BudgetError("nothing to compare", module="fgr", stage="compare")
    signatures = {_budget_signature(d, f) for _, d, f in rows}
    if len(signatures) > 1:
        raise BudgetError(
            f"budget mismatch across compared rows: {sorted(map(str, signatures))}",
            module="fgr",
            stage="compare",
        )
    table = [
        ComparisonRow(
            label=label,
            dirac=d.dims(),
            fgr=f.dims(),
            dirac_ambient=[x.dim_pi_omega for x in d.degrees],
            fgr_ambient=[x.dim_pi_omega for x in f.degrees],
        )
        for label, d, f in rows
    ]
    depth = min(min(len(r.dirac), len(r.fgr)) for r in table)
    flagged = [
        n
        for n in range(depth)
        if len({r.fgr[n] for r in table}) == 1 and len({r.dirac[n] for r in table}) > 1
    ]
    fgr_constant = len({tuple(r.fgr) for r in table}) == 1
    dirac_varies = len({tuple(r.dirac) for r in table}) > 1
    if fgr_constant and dirac_varies:
        verdict = "FGR constant across bases; Dirac distinguishes"
    elif fgr_constant:
        verdict = "no distinguishing power measurable"
    else:
        verdict = "FGR varies across bases"
    logger.info(f"Comparison of {[r.label for r in table]}: {verdict} (flagged {flagged})")
    return ComparisonReport(
        rows=table,
        flagged_degrees=flagged,
        fgr_constant=fgr_constant,
        dirac_varies=dirac_varies,
        verdict=verdict,
    )
