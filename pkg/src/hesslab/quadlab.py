"""Block-diagonal quadratic problems and gradient-method theory checks.

The problems minimize 0.5 w^T H w - h^T w with H = diag(H_1, ..., H_L)
positive definite. Four canonical constructions are provided: two small
3-block cases whose block spectra are either disjoint ({1,2,3} / {99,100,101}
/ {4998,4999,5000}) or interleaved ({1,99,4998} / {2,100,4999} /
{3,101,5000}), and two 4x25 cases drawing eigenvalues from bundled surrogate
spectrum files with heterogeneous / homogeneous shapes. All four share
condition number 5000.

Runners implement plain gradient descent and Adam with beta1 = 0 and
epsilon = 0, the variant whose diagonal preconditioner is fixed by the
initial gradient when beta2 = 1. Verifiers compare measured per-step
contractions against the closed-form rate limits and compute the constants
(C_{l,1}, C_{l,2}, r) that govern the preconditioned rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InputError, NumericalError
from .operators import BlockPartition, SymmetricOperator, make_block_diagonal, symmetrize
from .seeding import derive_rng

CASE3_EIGS = [[1.0, 2.0, 3.0], [99.0, 100.0, 101.0], [4998.0, 4999.0, 5000.0]]
CASE4_EIGS = [[1.0, 99.0, 4998.0], [2.0, 100.0, 4999.0], [3.0, 101.0, 5000.0]]
SURROGATE_BLOCK_DIM = 25
TARGET_RANGE = (1.0, 5000.0)

# Recorded learning-rate grid for Adam comparisons: {1, 3} per decade.
ETA_GRID = tuple(a * 10.0**k for k in range(-6, 0) for a in (1.0, 3.0)) + (1.0,)

DIVERGENCE_FACTOR = 1e12
MIN_GRADIENT_MAGNITUDE = 1e-300


@dataclass
class QuadraticProblem:
    """Positive definite block-diagonal quadratic with per-block eigendata."""

    blocks: list[np.ndarray]
    linear: np.ndarray
    partition: BlockPartition = field(init=False)
    block_eigvals: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        self.blocks = [symmetrize(b) for b in self.blocks]
        self.partition = BlockPartition.from_sizes([b.shape[0] for b in self.blocks])
        self.linear = np.zeros(self.partition.dim) if self.linear is None else (
            np.asarray(self.linear, dtype=float)
        )
        if self.linear.shape != (self.partition.dim,):
            raise InputError(
                f"linear term shape {self.linear.shape} does not match dim {self.partition.dim}"
            )
        self.block_eigvals = []
        for i, b in enumerate(self.blocks, start=1):
            vals = np.linalg.eigvalsh(b)[::-1]  # descending
            if vals[-1] <= 0:
                raise InputError(
                    f"block {i} is not positive definite (min eigenvalue {vals[-1]})"
                )
            self.block_eigvals.append(vals)
        self._dense = None
        self._w_star = None

    @property
    def dim(self) -> int:
        return self.partition.dim

    @property
    def num_blocks(self) -> int:
        return self.partition.num_blocks

    @property
    def eigvals(self) -> np.ndarray:
        return np.sort(np.concatenate(self.block_eigvals))[::-1]

    @property
    def lambda_max(self) -> float:
        return float(max(v[0] for v in self.block_eigvals))

    @property
    def lambda_min(self) -> float:
        return float(min(v[-1] for v in self.block_eigvals))

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    @property
    def block_kappas(self) -> list[float]:
        return [float(v[0] / v[-1]) for v in self.block_eigvals]

    def dense(self) -> np.ndarray:
        if self._dense is None:
            h = np.zeros((self.dim, self.dim))
            for b, (a, z) in zip(self.blocks, self.partition.ranges):
                h[a:z, a:z] = b
            self._dense = h
        return self._dense

    def operator(self) -> SymmetricOperator:
        return make_block_diagonal(self.blocks)

    def grad(self, w: np.ndarray) -> np.ndarray:
        return self.dense() @ w - self.linear

    def loss(self, w: np.ndarray) -> float:
        return float(0.5 * w @ (self.dense() @ w) - self.linear @ w)

    @property
    def w_star(self) -> np.ndarray:
        if self._w_star is None:
            self._w_star = np.linalg.solve(self.dense(), self.linear)
        return self._w_star

    @property
    def loss_star(self) -> float:
        return self.loss(self.w_star)


def _rotation(d: int, kind: str, rng: np.random.Generator) -> np.ndarray:
    if kind == "none":
        return np.eye(d)
    g = rng.standard_normal((d, d))
    if kind == "gaussian":
        return g
    if kind == "orthogonal":
        q, r = np.linalg.qr(g)
        return q * np.sign(np.diag(r))  # deterministic sign convention
    raise InputError(f"unknown rotation kind {kind!r}")


def assemble(eig_lists, seed: int = 0, rotation: str = "orthogonal", case_label=0,
             linear=None) -> QuadraticProblem:
    """Build H_l = Q diag(eigs) Q^T per block. ``rotation`` picks Q: a Haar
    orthogonal matrix (keeps the requested eigenvalues), a raw Gaussian matrix
    (does not), or the identity."""
    blocks = []
    for l, eigs in enumerate(eig_lists, start=1):
        eigs = np.asarray(eigs, dtype=float)
        rng = derive_rng(seed, "case", case_label, "block", l)
        q = _rotation(len(eigs), rotation, rng)
        blocks.append(q @ np.diag(eigs) @ q.T)
    return QuadraticProblem(blocks, linear)


def _load_surrogate(case: int, block: int) -> np.ndarray:
    name = f"case{case}_block{block}.csv"
    ref = resources.files("hesslab").joinpath("data", name)
    with ref.open() as fh:
        return np.loadtxt(fh)


def load_eigenvalue_csv(path) -> np.ndarray:
    """One eigenvalue per line; order free."""
    try:
        vals = np.atleast_1d(np.loadtxt(path))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read eigenvalue list {path}: {exc}") from exc
    return vals


def map_to_range(eig_lists, lo: float = TARGET_RANGE[0], hi: float = TARGET_RANGE[1]):
    """One affine transform over the union, sending [min, max] -> [lo, hi].

    A single map for all blocks preserves the blocks' relative ranges, so
    heterogeneity survives the rescaling and the global condition number is
    exactly hi/lo.
    """
    flat = np.concatenate([np.asarray(e, dtype=float) for e in eig_lists])
    vmin, vmax = flat.min(), flat.max()
    if vmax <= vmin:
        raise InputError("cannot rescale a degenerate eigenvalue collection")
    scale = (hi - lo) / (vmax - vmin)
    return [lo + scale * (np.asarray(e, dtype=float) - vmin) for e in eig_lists]


def build_case(case: int, seed: int = 0, rotation: str = "orthogonal",
               spectra_files=None) -> QuadraticProblem:
    """Construct canonical case 1-4 (or case 1/2 from user eigenvalue files)."""
    if case == 3:
        eig_lists = CASE3_EIGS
    elif case == 4:
        eig_lists = CASE4_EIGS
    elif case in (1, 2):
        if spectra_files is not None:
            pools = [load_eigenvalue_csv(p) for p in spectra_files]
        else:
            pools = [_load_surrogate(case, l) for l in range(1, 5)]
        sampled = []
        for l, pool in enumerate(pools, start=1):
            rng = derive_rng(seed, "case", case, "sample", l)
            sampled.append(rng.choice(pool, size=SURROGATE_BLOCK_DIM, replace=True))
        eig_lists = map_to_range(sampled)
    else:
        raise InputError(f"unknown case id {case}; valid cases are 1, 2, 3, 4")
    return assemble(eig_lists, seed=seed, rotation=rotation, case_label=case)


def gd_lower_bound_instance(kappa: float = 5000.0):
    """The two-mode worst-case instance: H = diag(kappa, 1), h = 0,
    w0 = (sqrt(1/kappa), sqrt(kappa)). Both eigenmodes carry equal loss, so
    gradient descent at the optimal step size contracts the loss by exactly
    ((kappa-1)/(kappa+1))^2 every step."""
    problem = QuadraticProblem([np.diag([float(kappa), 1.0])], None)
    w0 = np.array([math.sqrt(1.0 / kappa), math.sqrt(kappa)])
    return problem, w0


def gaussian_init(dim: int, seed: int = 0, label: str = "init") -> np.ndarray:
    """Standard Gaussian start vector from a labeled seeded stream."""
    return derive_rng(seed, label).standard_normal(dim)


@dataclass
class Trajectory:
    """Per-iteration loss record of one optimizer run."""

    losses: np.ndarray
    loss_star: float
    final_w: np.ndarray
    w0: np.ndarray
    optimizer: str
    eta: float
    beta2: float | None = None
    diverged: bool = False

    @property
    def steps(self) -> int:
        return len(self.losses) - 1

    @property
    def errors(self) -> np.ndarray:
        return self.losses - self.loss_star

    @property
    def rel_errors(self) -> np.ndarray:
        return self.errors / self.errors[0]

    @property
    def per_step_ratios(self) -> np.ndarray:
        """Successive error ratios (L^{t+1} - L*) / (L^t - L*) while positive."""
        e = self.errors
        floor = 1e-300 * max(e[0], 1.0)
        n = len(e)
        for i, v in enumerate(e):
            if v <= floor:
                n = i
                break
        e = e[:n]
        return e[1:] / e[:-1]

    def iterations_to(self, rel_target: float):
        """First step index with relative error <= target, or None."""
        hit = np.nonzero(self.rel_errors <= rel_target)[0]
        return int(hit[0]) if len(hit) else None


def _descend(problem, w0, eta, steps, step_fn, optimizer, beta2=None, stop_rel=None):
    w = np.asarray(w0, dtype=float).copy()
    if w.shape != (problem.dim,):
        raise InputError(f"w0 shape {w.shape} does not match dim {problem.dim}")
    loss_star = problem.loss_star
    losses = [problem.loss(w)]
    err0 = losses[0] - loss_star
    diverged = False
    for _ in range(steps):
        w = step_fn(w)
        cur = problem.loss(w)
        losses.append(cur)
        if not np.isfinite(cur) or cur - loss_star > DIVERGENCE_FACTOR * max(err0, 1e-300):
            diverged = True
            break
        if stop_rel is not None and err0 > 0 and (cur - loss_star) <= stop_rel * err0:
            break
    return Trajectory(
        np.asarray(losses), loss_star, w, np.asarray(w0, dtype=float).copy(),
        optimizer, float(eta), beta2, diverged,
    )


def run_gd(problem: QuadraticProblem, eta="auto", steps: int = 1000,
           w0: np.ndarray | None = None, stop_rel=None) -> Trajectory:
    """Plain gradient descent w <- w - eta * grad; eta='auto' uses
    2 / (lambda_max + lambda_min), the optimal fixed step."""
    if w0 is None:
        w0 = gaussian_init(problem.dim)
    if eta == "auto":
        eta = 2.0 / (problem.lambda_max + problem.lambda_min)
    if not eta > 0:
        raise InputError(f"step size must be positive, got {eta}")
    h = problem.dense()
    lin = problem.linear

    def step(w):
        return w - eta * (h @ w - lin)

    return _descend(problem, w0, eta, steps, step, "gd", stop_rel=stop_rel)


def run_adam(problem: QuadraticProblem, eta: float, beta2: float,
             steps: int = 1000, w0: np.ndarray | None = None,
             stop_rel=None) -> Trajectory:
    """Adam with beta1 = 0 and epsilon = 0 on the quadratic.

    beta2 = 1 keeps the diagonal preconditioner fixed at |grad(w0)|; beta2 < 1
    maintains v_t = beta2 * v_{t-1} + (1 - beta2) * g_t o g_t from
    v_0 = g_0 o g_0, which reproduces the discounted-sum preconditioner
    exactly. Rejected when some coordinate of the initial gradient vanishes
    (the first step divides by it); under a continuous initializer this is a
    probability-zero event.
    """
    if not 0 < beta2 <= 1:
        raise InputError(f"beta2 must lie in (0, 1], got {beta2}")
    if not eta > 0:
        raise InputError(f"step size must be positive, got {eta}")
    if w0 is None:
        w0 = gaussian_init(problem.dim)
    g0 = problem.grad(np.asarray(w0, dtype=float))
    if np.min(np.abs(g0)) < MIN_GRADIENT_MAGNITUDE:
        raise InputError(
            "initial gradient has a (near-)zero coordinate; the Adam "
            "preconditioner would be singular"
        )
    h = problem.dense()
    lin = problem.linear
    state = {"v": g0 * g0}

    def step(w):
        g = h @ w - lin
        if beta2 < 1:
            state["v"] = beta2 * state["v"] + (1 - beta2) * g * g
        return w - eta * g / np.sqrt(state["v"])

    return _descend(problem, w0, eta, steps, step, "adam", beta2=beta2, stop_rel=stop_rel)


@dataclass
class RConstants:
    """Initial-gradient ratios that set the preconditioned per-block rates."""

    c1: np.ndarray  # min_i |g_{l,i}| / lambda_{l,1} per block
    c2: np.ndarray  # max_i |g_{l,i}| / lambda_{l,1} per block
    r: float
    kappa_adam: np.ndarray  # r * kappa_l
    eta_proof: float  # min_l c1_l, the step size the contraction proof needs
    eta_statement: float  # min_l 1/c1_l, as printed in the rate statement

    note = (
        "rate statement says eta = min_l 1/C_{l,1} but its derivation requires "
        "eta = min_l C_{l,1}; the proof value is used"
    )


def compute_r(problem: QuadraticProblem, w0: np.ndarray) -> RConstants:
    g = problem.grad(np.asarray(w0, dtype=float))
    if np.min(np.abs(g)) < MIN_GRADIENT_MAGNITUDE:
        raise InputError("initial gradient has a zero coordinate")
    c1, c2 = [], []
    for l in range(1, problem.num_blocks + 1):
        gb = np.abs(g[problem.partition.slice(l)])
        lam1 = problem.block_eigvals[l - 1][0]
        c1.append(gb.min() / lam1)
        c2.append(gb.max() / lam1)
    c1 = np.asarray(c1)
    c2 = np.asarray(c2)
    r = float(c2.max() ** 2 / c1.min() ** 2)
    kappa_adam = r * np.asarray(problem.block_kappas)
    return RConstants(c1, c2, r, kappa_adam, float(c1.min()), float(1.0 / c1.max()))


@dataclass
class TheoryReport:
    """Measured contractions versus a closed-form rate limit."""

    kind: str
    constants: dict
    bound: float
    worst_measured: float
    satisfied: bool
    flags: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "constants": self.constants,
            "bound": self.bound,
            "worst_measured": self.worst_measured,
            "satisfied": bool(self.satisfied),
            "flags": self.flags,
            "notes": self.notes,
        }


GD_RATE_NOTE = (
    "the quoted rate 1 - 2/(kappa+1) is the per-step contraction of the error "
    "norm sqrt(L - L*); the loss itself contracts by its square"
)


def verify_gd_lower_bound(traj: Trajectory, kappa: float) -> TheoryReport:
    """Check a GD run against the worst-case rate for condition number kappa.

    The per-step loss ratio can never beat (1 - 2/(kappa+1))^2 on the
    matched worst-case instance; on that instance with the optimal step size
    it equals the bound at every step.
    """
    stated = 1.0 - 2.0 / (kappa + 1.0)
    loss_bound = stated**2
    ratios = traj.per_step_ratios
    if len(ratios) == 0:
        raise InputError("trajectory too short to measure contractions")
    worst = float(ratios.min())
    equality_gap = float(np.max(np.abs(ratios - loss_bound)))
    return TheoryReport(
        kind="gd_lower_bound",
        constants={
            "kappa": kappa,
            "stated_rate": stated,
            "loss_rate": loss_bound,
            "equality_gap": equality_gap,
            "sqrt_loss_rate_gap": float(np.max(np.abs(np.sqrt(ratios) - stated))),
        },
        bound=loss_bound,
        worst_measured=worst,
        satisfied=bool(np.all(ratios >= loss_bound - 1e-9)),
        notes=[GD_RATE_NOTE],
    )


def verify_adam_upper_bound(problem: QuadraticProblem, w0: np.ndarray,
                            traj: Trajectory) -> TheoryReport:
    """Check an Adam (beta2=1) run against max_l (1 - 1/(r kappa_l)).

    Also compares the iteration-complexity scales: Adam's r * max_l kappa_l
    versus gradient descent's kappa.
    """
    if traj.optimizer != "adam" or traj.beta2 != 1.0:
        raise InputError("theorem check needs an Adam trajectory with beta2 = 1")
    if traj.w0.shape != np.shape(w0) or not np.array_equal(traj.w0, np.asarray(w0, float)):
        raise InputError("trajectory was not started from the supplied w0")
    consts = compute_r(problem, w0)
    bound = float(np.max(1.0 - 1.0 / consts.kappa_adam))
    ratios = traj.per_step_ratios
    if len(ratios) == 0:
        raise InputError("trajectory too short to measure contractions")
    worst = float(ratios.max())
    adam_scale = float(consts.r * max(problem.block_kappas))
    flags = ["adam_provably_faster" if adam_scale < problem.kappa else "no_separation"]
    iters_1e3 = traj.iterations_to(1e-3)
    return TheoryReport(
        kind="adam_upper_bound",
        constants={
            "r": consts.r,
            "c1": consts.c1.tolist(),
            "c2": consts.c2.tolist(),
            "kappa_adam": consts.kappa_adam.tolist(),
            "eta_proof": consts.eta_proof,
            "eta_statement": consts.eta_statement,
            "adam_complexity_scale": adam_scale,
            "gd_complexity_scale": problem.kappa,
            "iterations_to_1e-3": iters_1e3,
        },
        bound=bound,
        worst_measured=worst,
        satisfied=bool(np.all(ratios <= bound + 1e-9)),
        flags=flags,
        notes=[RConstants.note],
    )


def detect_limit_cycle(traj: Trajectory):
    """Non-convergence test: smallest error over the final half of the run.

    Returns (non_converged, liminf_estimate). The estimate is the minimum of
    L - L* over the last 50% of recorded steps; the run is flagged
    non-converged when that floor stays above 1e-8 of the initial error.
    """
    if traj.steps < 1000:
        raise InputError(f"need at least 1000 recorded steps, got {traj.steps}")
    errors = traj.errors
    tail = errors[len(errors) // 2 :]
    liminf = float(tail.min())
    return bool(liminf > 1e-8 * errors[0]), liminf


def preconditioned_condition_numbers(problem: QuadraticProblem, w0: np.ndarray):
    """Condition number of each block after Adam's initial-gradient rescaling.

    Computed on the symmetric similar matrix D^{-1/2} H_l D^{-1/2} with
    D = diag(|grad(w0)|) restricted to the block.
    """
    g = problem.grad(np.asarray(w0, dtype=float))
    if np.min(np.abs(g)) < MIN_GRADIENT_MAGNITUDE:
        raise NumericalError("singular preconditioner: initial gradient has a zero entry")
    out = []
    for l in range(1, problem.num_blocks + 1):
        sl = problem.partition.slice(l)
        d_inv_sqrt = 1.0 / np.sqrt(np.abs(g[sl]))
        m = symmetrize(problem.blocks[l - 1] * d_inv_sqrt[:, None] * d_inv_sqrt[None, :])
        vals = np.linalg.eigvalsh(m)
        out.append(float(vals[-1] / vals[0]))
    return out


def best_adam_iterations(problem: QuadraticProblem, w0: np.ndarray, beta2: float,
                         rel_target: float = 1e-3, grid=ETA_GRID,
                         max_steps: int = 100000):
    """Fewest iterations to the relative-error target over the eta grid.

    Returns (iterations, eta); iterations is max_steps when no grid point
    reaches the target.
    """
    best = (max_steps, None)
    for eta in grid:
        traj = run_adam(problem, eta, beta2, steps=best[0], w0=w0, stop_rel=rel_target)
        hit = traj.iterations_to(rel_target)
        if hit is not None and hit < best[0]:
            best = (hit, eta)
    return best
