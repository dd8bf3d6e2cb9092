"""Layer-wise gated prompt aggregation as a small numpy model.

Per layer ``i`` the prompt is a convex blend of a freshly extracted clue and
the previous prompt::

    P^1 = Phi_1(H^0)
    P^i = G^i * Phi_i(H^{i-1}) + (1 - G^i) * P^{i-1}        i = 2..n
    F   = H^n + rho^n * P^n

with ``G^i = sigmoid(g_i)``, ``rho^n = sigmoid(r_n)``. The feature stream is a
residual block ``H^i = tanh(H^{i-1} W_i + b_i) + H^{i-1}`` and the clue
extractor a tanh bottleneck ``Phi_i(H) = tanh(H D_i) U_i``. Weights are seeded
random; nothing here is trained.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .attributes import luma
from .dataset import Box, load_dataset, read_image
from .metrics import evaluate
from .ope import RunConfig, run_sequence
from .synth import generate, preset
from .trackers import NCCTracker, Tracker


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


@dataclass
class GateParams:
    g: np.ndarray       # (L,) scalar gates or (L, d) per-channel gates
    r: np.ndarray       # (L,)
    D: np.ndarray       # (L, d, k)
    U: np.ndarray       # (L, k, d)
    W: np.ndarray       # (L, d, d)
    b: np.ndarray       # (L, d)

    @property
    def n_layers(self) -> int:
        return self.D.shape[0]

    @property
    def dim(self) -> int:
        return self.D.shape[1]

    def copy(self) -> "GateParams":
        return GateParams(*(a.copy() for a in (self.g, self.r, self.D, self.U, self.W, self.b)))


def init_params(d: int, n_layers: int = 12, seed: int = 0, per_channel: bool = False,
                stream_scale: float = 0.5) -> GateParams:
    if d < 4:
        raise ValueError("token width must be at least 4")
    k = max(1, d // 4)
    rng = np.random.default_rng(seed)
    return GateParams(
        g=rng.normal(0.0, 1.0, size=(n_layers, d) if per_channel else (n_layers,)),
        r=rng.normal(0.0, 1.0, size=n_layers),
        D=rng.normal(0.0, 1.0 / np.sqrt(d), size=(n_layers, d, k)),
        U=rng.normal(0.0, 1.0 / np.sqrt(k), size=(n_layers, k, d)),
        W=rng.normal(0.0, stream_scale / np.sqrt(d), size=(n_layers, d, d)),
        b=rng.normal(0.0, 0.1, size=(n_layers, d)),
    )


@dataclass
class PromptState:
    P: np.ndarray
    layer: int


def _check_tokens(H, params):
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != params.dim:
        raise ValueError(f"token matrix must be (T, {params.dim}), got {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError("token matrix has non-finite entries")
    return H


def dcp_extract(H, params: GateParams, i: int) -> np.ndarray:
    H = _check_tokens(H, params)
    return np.tanh(H @ params.D[i - 1]) @ params.U[i - 1]


def cblock(H, params: GateParams, i: int) -> np.ndarray:
    return np.tanh(H @ params.W[i - 1] + params.b[i - 1]) + H


def gate_value(params: GateParams, i: int):
    """``G^i``; pinned to 1 on the first layer."""
    if i == 1:
        return 1.0
    return sigmoid(params.g[i - 1])


def rho_value(params: GateParams, n: int) -> float:
    return float(sigmoid(params.r[n - 1]))


def gate_step(P_prev: PromptState | None, H_prev, params: GateParams, i: int) -> PromptState:
    phi = dcp_extract(H_prev, params, i)
    if i == 1:
        return PromptState(phi, 1)
    if P_prev is None or P_prev.layer != i - 1:
        raise ValueError(f"layer {i} needs the prompt of layer {i - 1}")
    if P_prev.P.shape != phi.shape or not np.all(np.isfinite(P_prev.P)):
        raise ValueError("previous prompt has wrong shape or non-finite entries")
    G = gate_value(params, i)
    return PromptState(G * phi + (1.0 - G) * P_prev.P, i)


def aggregate(H_xn, P_n: PromptState | np.ndarray, rho: float) -> np.ndarray:
    P = P_n.P if isinstance(P_n, PromptState) else np.asarray(P_n)
    H_xn = np.asarray(H_xn, dtype=np.float64)
    if P.shape != H_xn.shape:
        raise ValueError(f"shape mismatch {H_xn.shape} vs {P.shape}")
    return H_xn + rho * P


@dataclass
class ForwardTrace:
    H: list[np.ndarray]          # H^0 .. H^n
    phi: list[np.ndarray]        # Phi_i(H^{i-1}), i = 1..n
    P: list[np.ndarray]          # P^1 .. P^n
    rho: float
    out: np.ndarray


def _check_layers(params, n):
    if n < 1:
        raise ValueError("need at least one layer")
    if n > params.n_layers:
        raise ValueError(f"only {params.n_layers} layers parameterized, asked for {n}")


def stream(H0, params: GateParams, n: int) -> list[np.ndarray]:
    """Prompt-free feature stream ``[H^0, ..., H^n]``."""
    _check_layers(params, n)
    Hs = [_check_tokens(H0, params)]
    for i in range(1, n + 1):
        Hs.append(cblock(Hs[-1], params, i))
    return Hs


def forward_trace(H0, params: GateParams, n: int, rho: float | None = None) -> ForwardTrace:
    Hs = stream(H0, params, n)
    state, phis, Ps = None, [], []
    for i in range(1, n + 1):
        phis.append(dcp_extract(Hs[i - 1], params, i))
        state = gate_step(state, Hs[i - 1], params, i)
        Ps.append(state.P)
    rho = rho_value(params, n) if rho is None else float(rho)
    return ForwardTrace(H=Hs, phi=phis, P=Ps, rho=rho, out=aggregate(Hs[n], state, rho))


def forward(H0, params: GateParams, n: int, rho: float | None = None) -> np.ndarray:
    """Fused output ``F = H^n + rho^n P^n``; ``rho`` overrides the learned weight."""
    return forward_trace(H0, params, n, rho).out


def prompt_coefficients(params: GateParams, n: int) -> list:
    """Weights ``c_i = G^i prod_{j>i} (1 - G^j)`` of each layer's clue in P^n."""
    coefs = []
    for i in range(1, n + 1):
        c = gate_value(params, i)
        for j in range(i + 1, n + 1):
            c = c * (1.0 - gate_value(params, j))
        coefs.append(c)
    return coefs


def unrolled_prompt(H0, params: GateParams, n: int) -> np.ndarray:
    """Closed-form ``P^n`` as a weighted sum of the per-layer clues."""
    Hs = stream(H0, params, n)
    total = np.zeros_like(Hs[0])
    for i, c in enumerate(prompt_coefficients(params, n), 1):
        total = total + c * dcp_extract(Hs[i - 1], params, i)
    return total


# --------------------------------------------------------------------------
# gradients
# --------------------------------------------------------------------------


def loss(H0, params: GateParams, n: int) -> float:
    F = forward(H0, params, n)
    return 0.5 * float(np.sum(F * F))


def analytic_gradients(H0, params: GateParams, n: int):
    """``dL/dg`` and ``dL/dr`` for ``L = 0.5 * ||F||^2``.

    The stream H does not depend on the gates, so only the prompt recurrence
    contributes. Entries for layers beyond ``n`` (and ``g_1``) are zero.
    """
    tr = forward_trace(H0, params, n)
    F = tr.out
    dg = np.zeros_like(params.g)
    dr = np.zeros_like(params.r)
    s = tr.rho
    dr[n - 1] = float(np.sum(F * tr.P[-1])) * s * (1.0 - s)
    delta = tr.rho * F                       # dL/dP^n
    for i in range(n, 1, -1):
        G = gate_value(params, i)
        dG = delta * (tr.phi[i - 1] - tr.P[i - 2])
        sp = G * (1.0 - G)
        if params.g.ndim == 1:
            dg[i - 1] = float(np.sum(dG)) * sp
        else:
            dg[i - 1] = dG.sum(axis=0) * sp
        delta = (1.0 - G) * delta
    return dg, dr


def numeric_gradients(H0, params: GateParams, n: int, step: float = 1e-5):
    dg = np.zeros_like(params.g)
    dr = np.zeros_like(params.r)
    for arr_name, out in (("g", dg), ("r", dr)):
        for idx in np.ndindex(out.shape):
            p_plus, p_minus = params.copy(), params.copy()
            getattr(p_plus, arr_name)[idx] += step
            getattr(p_minus, arr_name)[idx] -= step
            out[idx] = (loss(H0, p_plus, n) - loss(H0, p_minus, n)) / (2.0 * step)
    return dg, dr


@dataclass
class GradCheckReport:
    analytic_g: np.ndarray
    numeric_g: np.ndarray
    analytic_r: np.ndarray
    numeric_r: np.ndarray
    max_rel_error: float
    max_abs_error: float


def relative_error(a, b, floor: float = 1e-6) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(H0, params: GateParams, n: int, step: float = 1e-5) -> GradCheckReport:
    ag, ar = analytic_gradients(H0, params, n)
    ng, nr = numeric_gradients(H0, params, n, step)
    rel = np.concatenate([relative_error(ag, ng).ravel(), relative_error(ar, nr).ravel()])
    ab = np.concatenate([np.abs(ag - ng).ravel(), np.abs(ar - nr).ravel()])
    return GradCheckReport(ag, ng, ar, nr, float(rel.max()), float(ab.max()))


# --------------------------------------------------------------------------
# ablation harness: prompt-gated NCC re-scoring
# --------------------------------------------------------------------------

TOKEN_DIM = 8


class PromptNCCTracker(Tracker):
    """NCC tracker whose top candidates are re-scored by the gated prompt
    encoder with ``n_layers`` layers.

    Each candidate offset becomes one token (NCC score, displacement, window
    statistics); the fused output is read out to a small additive score bonus.
    """

    name = "prompt-ncc"

    def __init__(self, n_layers: int = 12, params: GateParams | None = None, n_candidates: int = 16,
                 bonus: float = 0.05, search_radius: int = 20, rho: float | None = None, seed: int = 0):
        super().__init__(seed)
        self.n_layers = n_layers
        self.params = params if params is not None else init_params(TOKEN_DIM, 12, seed)
        self.n_candidates = n_candidates
        self.bonus = bonus
        self.rho = rho
        self.readout = np.random.default_rng(seed + 1).normal(0.0, 1.0 / np.sqrt(TOKEN_DIM), TOKEN_DIM)
        self.base = NCCTracker(search_radius)

    def init(self, image, box):
        self.base.init(image, box)

    def tokens(self, gray, scores):
        R = self.base.search_radius
        th, tw = self.base.template.shape
        flat = np.where(np.isfinite(scores), scores, -np.inf).ravel()
        valid = np.isfinite(flat).sum()
        if valid == 0:
            return None, None
        order = np.argsort(-flat, kind="stable")[:min(self.n_candidates, valid)]
        iy, ix = np.unravel_index(order, scores.shape)
        dy, dx = iy - R, ix - R
        tmean = self.base.template.mean() / 255.0
        feats = []
        for k in range(len(order)):
            x = self.base.pos[0] + dx[k]
            y = self.base.pos[1] + dy[k]
            win = gray[y:y + th, x:x + tw]
            feats.append([
                flat[order[k]], dx[k] / R, dy[k] / R, np.hypot(dx[k], dy[k]) / R,
                win.mean() / 255.0, win.std() / 64.0, win.mean() / 255.0 - tmean, 1.0,
            ])
        return np.array(feats, dtype=np.float64), np.stack([dx, dy], axis=1)

    def rescore(self, H0):
        F = forward(H0, self.params, self.n_layers, self.rho)
        return H0[:, 0] + self.bonus * np.tanh(F @ self.readout)

    def update(self, image):
        gray = luma(image)
        scores = self.base.scores(gray)
        H0, offs = self.tokens(gray, scores)
        if H0 is None:
            return self.base.box
        s = self.rescore(H0)
        best = s.max()
        cand = np.nonzero(s >= best - 1e-12)[0]
        k = cand[np.argmin((offs[cand] ** 2).sum(axis=1))]
        dx, dy = (int(v) for v in offs[k])
        b = self.base.box
        self.base.pos = (self.base.pos[0] + dx, self.base.pos[1] + dy)
        self.base.box = Box(b.x + dx, b.y + dy, b.w, b.h)
        return self.base.box


@dataclass
class AblationRow:
    layers: int
    s_auc: float
    p: float
    p_norm: float
    seconds: float


def micro_dataset(root: Path, preset_name: str = "dark", n_sequences: int = 3, frames: int = 20,
                  seed: int = 0, noise_sigma: float | None = None):
    specs = {}
    extra = {} if noise_sigma is None else {"noise_sigma": noise_sigma}
    for k in range(n_sequences):
        spec = preset(preset_name, frames=frames, seed=seed + k, **extra)
        spec = replace(spec, start_y=spec.start_y + 6 * k - 6)
        specs[f"{preset_name}_{k:02d}"] = spec
    for name, spec in specs.items():
        generate(spec, root / name)
    seqs, _ = load_dataset(root, strict=True)
    return seqs


def ablation_run(layers_from: int = 1, layers_to: int = 12, preset_name: str = "dark",
                 n_sequences: int = 3, frames: int = 20, seed: int = 0, repeats: int = 1,
                 noise_sigma: float | None = 8.0, work_dir: str | Path | None = None) -> list[AblationRow]:
    """One row per prompt depth in ``layers_from..layers_to``.

    Each row tracks the same micro-sequences with a prompt-gated NCC tracker
    and scores them through :func:`metrics.evaluate`. ``noise_sigma`` raises
    the preset's sensor noise so that re-scoring changes decisions (``None``
    keeps the preset value). ``seconds`` is the fastest of ``repeats`` timed
    runs, measured after one untimed warm-up pass.
    """
    if not (1 <= layers_from <= layers_to <= 12):
        raise ValueError(f"invalid layer range {layers_from}:{layers_to} (must lie in 1..12)")
    params = init_params(TOKEN_DIM, 12, seed)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(work_dir) if work_dir is not None else Path(tmp)
        seqs = micro_dataset(root, preset_name, n_sequences, frames, seed, noise_sigma)
        images = {s.name: [read_image(f.image_path) for f in s.frames] for s in seqs}

        def run_all(n):
            return {
                s.name: run_sequence(PromptNCCTracker(n, params, seed=seed), s, RunConfig(), images[s.name])
                for s in seqs
            }

        run_all(layers_from)
        rows = []
        for n in range(layers_from, layers_to + 1):
            best_t, results = float("inf"), None
            for _ in range(max(1, repeats)):
                t0 = time.perf_counter()
                results = run_all(n)
                best_t = min(best_t, time.perf_counter() - t0)
            rep = evaluate(results, seqs, tracker_name=f"prompt-ncc-{n}")
            rows.append(AblationRow(n, rep.s_auc, rep.p_at_20, rep.p_norm_auc, best_t))
    return rows
