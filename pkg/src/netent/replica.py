"""Layered free-entropy potential and its two solvers.

A model is a prior on the input layer plus a stack of layers, each a wide
linear map with a known singular spectrum followed by a scalar channel.
The differential entropy per input unit of hidden layer ell (in nats) is
the extremal value of a potential over one order-parameter block
(A_k, V_k, At_k, Vt_k) per layer k <= ell:

    phi = sum_k (at_{k-1} / 2) [ At_k (rho_{k-1} - V_k) - alpha_k A_k Vt_k
                                 + F_k(A_k V_k) ]
          - K_prior(At_1)
          - sum_{k<ell} at_k K_mid(ch_k; At_{k+1}, Vt_k, rho_pre_k)
          - at_ell K_out(ch_ell; Vt_ell, rho_pre_ell)

where at_k is the width of layer k relative to the input, rho_k the
per-unit second moment of layer k, rho_pre_k that of the pre-activation,
and F_k the spectral log-det term of the k-th weight matrix. V_k is the
scalar posterior variance of layer k-1 reconstructed from layer k upward;
the remaining order parameters are its conjugates.

Two ways to reach the extremum are implemented: a damped Gauss-Seidel
fixed-point iteration on the stationarity conditions, and a state
evolution that tracks the variance messages of a two-sided sweep over the
layer chain (method "mlvamp_se"). Both evaluate the same potential at
their fixed point and agree to solver precision.
"""

import dataclasses

import numpy as np

from . import channels as ch_ops
from . import spectra as sp_ops
from .channels import DEFAULT_QUAD, ChannelSpec, PriorSpec, QuadratureConfig

_V_FLOOR = 1e-12
_A_MSG_MIN = 1e-11
_A_MSG_MAX = 1e11
_GAMMA_TINY = 1e-13


class SolverError(RuntimeError):
    """The requested extremum could not be located."""


@dataclasses.dataclass(frozen=True)
class LayerSpec:
    channel: ChannelSpec
    spectrum: object
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("layer aspect ratio alpha must be positive")


@dataclasses.dataclass(frozen=True)
class ModelSpec:
    prior: PriorSpec
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("model needs at least one layer")

    @property
    def n_layers(self):
        return len(self.layers)

    def alpha_tilde(self, k):
        """Width of layer k relative to the input layer (k = 0 is 1)."""
        out = 1.0
        for layer in self.layers[:k]:
            out *= layer.alpha
        return out

    def rho_chains(self, ell=None):
        """(rho_t, rho_pre) second-moment chains up to layer ell.

        rho_t[j] is the per-unit second moment of t_j (so rho_t[0] is the
        prior variance), rho_pre[j] that of the pre-activation of layer
        j + 1, i.e. W_{j+1} t_j componentwise.
        """
        if ell is None:
            ell = self.n_layers
        rho_t = [self.prior.variance]
        rho_pre = []
        for layer in self.layers[:ell]:
            pre = layer.spectrum.mean() * rho_t[-1] / layer.alpha
            rho_pre.append(pre)
            rho_t.append(ch_ops.rho_next(layer.channel, pre))
        return np.array(rho_t), np.array(rho_pre)


@dataclasses.dataclass
class ReplicaState:
    """Order parameters for layers 1..ell, stored 0-based.

    V[j]  posterior variance of t_j given everything above,
    At[j] its conjugate tilt precision,
    Vt[j] the dual variance of the pre-activation of layer j + 1,
    A[j]  its conjugate precision.
    """

    A: np.ndarray
    V: np.ndarray
    At: np.ndarray
    Vt: np.ndarray

    def copy(self):
        return ReplicaState(self.A.copy(), self.V.copy(),
                            self.At.copy(), self.Vt.copy())

    @property
    def ell(self):
        return len(self.V)


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """tol bounds the summed relative per-sweep change of V."""

    method: str = "fixed_point"
    tol: float = 1e-8
    max_iter: int = 1000
    damping: float = 0.5
    seeds: tuple = ("uninformative", "informative")
    quad: QuadratureConfig = DEFAULT_QUAD

    def __post_init__(self):
        if self.method not in ("fixed_point", "mlvamp_se"):
            raise ValueError("method must be fixed_point or mlvamp_se")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


DEFAULT_SOLVER = SolverConfig()


@dataclasses.dataclass
class SolveReport:
    entropy_per_input: float
    state: ReplicaState
    converged: bool
    iterations: int
    method: str
    seed_label: str
    branches: list

    @property
    def phi(self):
        return self.entropy_per_input


# ------------------------------------------------------------- potential

def potential(model, ell, state, quad=DEFAULT_QUAD):
    """Layered free-entropy potential at the given order parameters."""
    if not 1 <= ell <= model.n_layers:
        raise ValueError("ell out of range")
    rho_t, rho_pre = model.rho_chains(ell)
    phi = 0.0
    for j in range(ell):
        layer = model.layers[j]
        at_prev = model.alpha_tilde(j)
        gamma = state.A[j] * state.V[j]
        phi += 0.5 * at_prev * (
            state.At[j] * (rho_t[j] - state.V[j])
            - layer.alpha * state.A[j] * state.Vt[j]
            + sp_ops.f_w(layer.spectrum, layer.alpha, gamma))
    phi -= ch_ops.k0(model.prior, state.At[0])
    for j in range(ell - 1):
        phi -= model.alpha_tilde(j + 1) * ch_ops.k_mid(
            model.layers[j].channel, state.At[j + 1], state.Vt[j],
            rho_pre[j], quad)
    phi -= model.alpha_tilde(ell) * ch_ops.k_out(
        model.layers[ell - 1].channel, state.Vt[ell - 1],
        rho_pre[ell - 1], quad)
    return float(phi)


def potential_gaussian_form(model, ell, B, V, quad=DEFAULT_QUAD):
    """Potential specialized to unit-scale Gaussian weight ensembles.

    One (B_k, V_k) pair per layer; equals potential() at the embedding
    A_k = B_k, At_k = alpha_k B_k, Vt_k = V_k. Requires every spectrum to
    be AnalyticMP with scale 1, where the spectral log-det term
    degenerates to F(x) = alpha x and the two forms coincide exactly.
    """
    for layer in model.layers[:ell]:
        spec = layer.spectrum
        if not (isinstance(spec, sp_ops.AnalyticMP) and spec.scale == 1.0):
            raise ValueError("gaussian form needs unit-scale AnalyticMP "
                             "spectra in every layer")
    B = np.asarray(B, dtype=float)
    V = np.asarray(V, dtype=float)
    alphas = np.array([layer.alpha for layer in model.layers[:ell]])
    state = ReplicaState(A=B.copy(), V=V.copy(), At=alphas * B, Vt=V.copy())
    return potential(model, ell, state, quad)


# ---------------------------------------------------------- theta helpers

def _vt_from_theta(spectrum, alpha, A, V):
    gamma = A * V
    if gamma < _GAMMA_TINY:
        return V * spectrum.mean() / alpha
    theta = _theta_lenient(spectrum, alpha, gamma)
    return theta / A


def _at_from_theta(spectrum, alpha, A, V):
    gamma = A * V
    if gamma < _GAMMA_TINY:
        return A * spectrum.mean()
    theta = _theta_lenient(spectrum, alpha, gamma)
    return alpha * theta / V


def _theta_lenient(spectrum, alpha, gamma):
    """theta for iteration updates; transients may overshoot the root
    existence domain, where the least-squares theta (boundary tangency)
    keeps the sweep moving. The potential itself stays strict, so a
    converged state outside the domain still fails loudly."""
    return sp_ops.theta_solve(spectrum, alpha, gamma, resid_tol=np.inf)


# ------------------------------------------------------ fixed point solver

def fixed_point_step(model, ell, state, quad=DEFAULT_QUAD, damping=0.0):
    """One damped Gauss-Seidel sweep over the stationarity conditions.

    Layers are swept top down: each layer refreshes Vt from the spectral
    stationarity at gamma = A V, then A from the curvature of the measure
    above it, then At from the refreshed gamma. A final pass refreshes all
    V from the channel curvatures below. Returns (new_state, delta) with
    delta the summed relative change of the undamped V proposal.
    """
    st = state.copy()
    rho_t, rho_pre = model.rho_chains(ell)
    pending_v = {}
    for j in range(ell - 1, -1, -1):
        layer = model.layers[j]
        st.Vt[j] = _vt_from_theta(layer.spectrum, layer.alpha,
                                  st.A[j], st.V[j])
        if j == ell - 1:
            a_prop = -ch_ops.e_d2w_out(layer.channel, st.Vt[j],
                                       rho_pre[j], quad)
        else:
            # one kernel pass serves both the A update here and the V
            # update of layer j + 1: same channel, same (At, Vt, rho)
            _, e_d2b, e_d2w = ch_ops.mid_expectations(
                layer.channel, st.At[j + 1], st.Vt[j], rho_pre[j], quad)
            a_prop = -e_d2w
            pending_v[j + 1] = e_d2b
        st.A[j] = (1.0 - damping) * max(a_prop, 0.0) + damping * st.A[j]
        st.At[j] = _at_from_theta(layer.spectrum, layer.alpha,
                                  st.A[j], st.V[j])
    v_prop = np.empty(ell)
    rho0 = model.prior.variance
    v_prop[0] = rho0 / (1.0 + st.At[0] * rho0)
    for j in range(1, ell):
        v_prop[j] = pending_v[j]
    # relative step: an absolute l1 norm false-converges from the
    # informative seed, where V sits at 1e-10 and moves by factors
    delta = float(np.sum(np.abs(v_prop - st.V)
                         / np.maximum(np.abs(st.V), 1e-30)))
    new_v = (1.0 - damping) * v_prop + damping * st.V
    st.V = np.clip(new_v, _V_FLOOR, rho_t[:ell] * (1.0 - 1e-12))
    return st, delta


def _initial_state(model, ell, seed):
    rho_t, _ = model.rho_chains(ell)
    rho = rho_t[:ell]
    if seed == "uninformative":
        A = 1.0 / rho
        V = rho * (1.0 - 1e-9)
    elif seed == "informative":
        A = np.full(ell, 1e10)
        V = np.full(ell, 1e-10)
    else:
        a0, v0 = seed
        A = np.broadcast_to(np.asarray(a0, dtype=float), (ell,)).copy()
        V = np.broadcast_to(np.asarray(v0, dtype=float), (ell,)).copy()
        V = np.clip(V, _V_FLOOR, rho * (1.0 - 1e-12))
    means = np.array([layer.spectrum.mean() for layer in model.layers[:ell]])
    alphas = np.array([layer.alpha for layer in model.layers[:ell]])
    return ReplicaState(A=A.copy(), V=V.copy(), At=A * means,
                        Vt=V * means / alphas)


def _seed_label(seed):
    return seed if isinstance(seed, str) else repr(tuple(seed))


def _solve_fixed_point(model, ell, config):
    branches = []
    for seed in config.seeds:
        label = _seed_label(seed)
        st = _initial_state(model, ell, seed)
        damping = config.damping
        prev_delta = np.inf
        checkpoint = np.inf
        grew = 0
        converged = False
        iterations = 0
        delta = np.inf
        failure = None
        try:
            for iterations in range(1, config.max_iter + 1):
                st, delta = fixed_point_step(model, ell, st, config.quad,
                                             damping)
                if delta < config.tol:
                    converged = True
                    break
                # oscillation guards: tighten damping on repeated growth of
                # the step, or on stagnation over a 40-sweep window (limit
                # cycles shrink under heavier damping)
                if delta > prev_delta:
                    grew += 1
                    if grew >= 3:
                        damping = min(0.5 * (1.0 + damping), 0.96)
                        grew = 0
                else:
                    grew = 0
                if iterations % 40 == 0:
                    # limit-cycle test: essentially zero decay across the
                    # window while still far from tol. Slow healthy decay
                    # (stiff near-deterministic layers run at 1 - 2e-3 per
                    # sweep, ratio ~ 0.92 here) must not trigger it, and a
                    # single spurious escalation must not self-confirm.
                    if delta > 0.999 * checkpoint and delta > 1e3 * config.tol:
                        if damping >= 0.96:
                            # no progress at maximal damping: a genuine
                            # limit cycle, stop burning sweeps
                            break
                        damping = min(0.5 * (1.0 + damping), 0.96)
                    checkpoint = delta
                prev_delta = delta
            phi = potential(model, ell, st, config.quad)
        except (sp_ops.StationaryPointError, ValueError) as exc:
            failure = str(exc)
            phi = np.nan
        branches.append(dict(seed=label, converged=converged,
                             iterations=iterations, phi=phi, state=st,
                             final_delta=delta, failure=failure))
    return branches


def _select_branch(branches):
    ok = [b for b in branches if b["converged"] and np.isfinite(b["phi"])]
    pool = ok if ok else [b for b in branches if np.isfinite(b["phi"])]
    if not pool:
        msgs = "; ".join(str(b["failure"]) for b in branches)
        raise SolverError(f"all solver branches failed: {msgs}")
    best = min(pool, key=lambda b: b["phi"])
    # degenerate tie: prefer the wider-posterior branch
    for b in pool:
        if b is not best and abs(b["phi"] - best["phi"]) < 1e-10 \
                and b["state"].V[0] > best["state"].V[0]:
            best = b
    return best, bool(ok)


# ------------------------------------------------- state evolution solver

def _se_linear_forward(spectrum, alpha, a_below, sig2):
    """Variance leaving a linear block toward the layer above."""
    z = -a_below * sig2
    s = spectrum.stieltjes(z)
    return (sig2 / alpha) * (1.0 - a_below * sig2 * s)


def _se_linear_backward(spectrum, a_below, sig2):
    """Variance leaving a linear block toward the layer below."""
    z = -a_below * sig2
    return sig2 * spectrum.stieltjes(z)


def _clamp_msg(a):
    return float(np.clip(a, _A_MSG_MIN, _A_MSG_MAX))


def _solve_se_one(model, ell, config, seed):
    """Two-sided variance message sweep for the truncated ell-layer model."""
    rho_t, rho_pre = model.rho_chains(ell)
    if seed == "uninformative":
        init = _A_MSG_MIN
    elif seed == "informative":
        init = 1e10
    else:
        a0, _ = seed
        init = float(np.mean(a0)) if np.ndim(a0) else float(a0)
    at_m = np.full(ell, _clamp_msg(init))
    ah_m = np.full(ell, _clamp_msg(init))
    at_p = np.full(ell, _A_MSG_MIN)
    ah_p = np.full(ell, _A_MSG_MIN)
    d = config.damping
    quad = config.quad

    def mix(old, prop):
        return (1.0 - d) * prop + d * old

    converged = False
    iterations = 0
    prev_v = np.zeros(ell)
    for iterations in range(1, config.max_iter + 1):
        # forward sweep
        rho0 = model.prior.variance
        at_p[0] = _clamp_msg(mix(at_p[0], (1.0 + at_m[0] * rho0) / rho0
                                 - at_m[0]))
        for j in range(ell):
            layer = model.layers[j]
            sig2 = 1.0 / ah_m[j]
            vh = max(_se_linear_forward(layer.spectrum, layer.alpha,
                                        at_p[j], sig2), 1e-18)
            ah_p[j] = _clamp_msg(mix(ah_p[j], 1.0 / vh - ah_m[j]))
            if j < ell - 1:
                vt = ch_ops.e_d2b_mid(layer.channel, at_m[j + 1],
                                      1.0 / ah_p[j], rho_pre[j], quad)
                vt = min(max(vt, _V_FLOOR), rho_t[j + 1])
                at_p[j + 1] = _clamp_msg(mix(at_p[j + 1],
                                             1.0 / vt - at_m[j + 1]))
        # backward sweep
        v_out = 1.0 / ah_p[ell - 1]
        vh = v_out + v_out ** 2 * ch_ops.e_d2w_out(
            model.layers[ell - 1].channel, v_out, rho_pre[ell - 1], quad)
        vh = max(vh, _V_FLOOR)
        ah_m[ell - 1] = _clamp_msg(mix(ah_m[ell - 1],
                                       1.0 / vh - ah_p[ell - 1]))
        for j in range(ell - 1, 0, -1):
            layer = model.layers[j]
            sig2 = 1.0 / ah_m[j]
            vt = _se_linear_backward(layer.spectrum, at_p[j], sig2)
            vt = max(vt, _V_FLOOR)
            at_m[j] = _clamp_msg(mix(at_m[j], 1.0 / vt - at_p[j]))
            v_in = 1.0 / ah_p[j - 1]
            vh = v_in + v_in ** 2 * ch_ops.e_d2w_mid(
                model.layers[j - 1].channel, at_m[j], v_in,
                rho_pre[j - 1], quad)
            vh = max(vh, _V_FLOOR)
            ah_m[j - 1] = _clamp_msg(mix(ah_m[j - 1],
                                         1.0 / vh - ah_p[j - 1]))
        sig2 = 1.0 / ah_m[0]
        vt0 = _se_linear_backward(model.layers[0].spectrum, at_p[0], sig2)
        vt0 = max(vt0, _V_FLOOR)
        at_m[0] = _clamp_msg(mix(at_m[0], 1.0 / vt0 - at_p[0]))

        v_now = 1.0 / (at_p + at_m)
        # relative change, for the same reason as in the fixed-point loop
        delta = float(np.sum(np.abs(v_now - prev_v)
                             / np.maximum(np.abs(prev_v), 1e-30)))
        prev_v = v_now
        if delta < config.tol:
            converged = True
            break

    rho_cap = rho_t[:ell] * (1.0 - 1e-12)
    state = ReplicaState(
        A=ah_m / (1.0 + ah_m / ah_p),
        V=np.clip(1.0 / (at_p + at_m), _V_FLOOR, rho_cap),
        At=at_m.copy(),
        Vt=1.0 / ah_p)
    phi = potential(model, ell, state, quad)
    return dict(seed=_seed_label(seed), converged=converged,
                iterations=iterations, phi=phi, state=state,
                final_delta=delta, failure=None)


def _solve_se(model, ell, config):
    branches = []
    for seed in config.seeds:
        try:
            branches.append(_solve_se_one(model, ell, config, seed))
        except (sp_ops.StationaryPointError, ValueError) as exc:
            branches.append(dict(seed=_seed_label(seed), converged=False,
                                 iterations=0, phi=np.nan, state=None,
                                 final_delta=np.inf, failure=str(exc)))
    return branches


# ----------------------------------------------------------------- public

def solve(model, ell, config=None):
    """Extremize the layer-ell potential; returns a SolveReport.

    Every seed in config.seeds is run to its own fixed point; the report
    carries the branch of smallest potential among the converged ones
    (falling back to all finite branches, with converged=False, if none
    converged).
    """
    config = config or DEFAULT_SOLVER
    if config.method == "fixed_point":
        branches = _solve_fixed_point(model, ell, config)
    else:
        branches = _solve_se(model, ell, config)
    best, any_ok = _select_branch(branches)
    slim = [{k: v for k, v in b.items() if k != "state"} for b in branches]
    return SolveReport(entropy_per_input=float(best["phi"]),
                       state=best["state"], converged=any_ok,
                       iterations=int(best["iterations"]),
                       method=config.method, seed_label=best["seed"],
                       branches=slim)


def entropy(model, ell, config=None):
    """Differential entropy of layer ell per input unit, in nats."""
    return solve(model, ell, config).entropy_per_input


def mutual_info_adjacent(model, ell, config=None, return_report=False):
    """I(t_ell ; t_{ell-1}) per input unit, in nats.

    Adds the conditional entropy term of the top channel to the layer
    entropy; needs noise_var > 0 at layer ell for the conditional law to
    have a density.
    """
    config = config or DEFAULT_SOLVER
    rep = solve(model, ell, config)
    _, rho_pre = model.rho_chains(ell)
    cterm = ch_ops.channel_conditional_entropy_term(
        model.layers[ell - 1].channel, rho_pre[ell - 1], config.quad)
    value = rep.entropy_per_input + model.alpha_tilde(ell) * cterm
    return (value, rep) if return_report else value


def mutual_info_with_input(model, ell, config=None, return_report=False):
    """I(t_0 ; t_ell) per input unit, in nats.

    Requires layers 1..ell-1 to be noiseless, so that t_{ell-1} is a
    deterministic function of the input and the conditional laws
    p(t_ell | t_0) and p(t_ell | t_{ell-1}) coincide.
    """
    for j in range(ell - 1):
        if model.layers[j].channel.noise_var != 0.0:
            raise ValueError(
                "mutual_info_with_input needs noiseless layers below ell; "
                f"layer {j + 1} has noise_var="
                f"{model.layers[j].channel.noise_var}")
    return mutual_info_adjacent(model, ell, config,
                                return_report=return_report)


def with_noise_only_at(model, ell, noise_var):
    """Copy of the model with pre-activation noise at layer ell only.

    Layers below ell become deterministic, layer ell gets noise_var, layers
    above are left untouched. This is the convention under which layer
    sweeps report I(t_0; t_ell).
    """
    layers = []
    for j, layer in enumerate(model.layers):
        if j < ell - 1:
            nv = 0.0
        elif j == ell - 1:
            nv = noise_var
        else:
            nv = layer.channel.noise_var
        layers.append(dataclasses.replace(
            layer, channel=dataclasses.replace(layer.channel, noise_var=nv)))
    return dataclasses.replace(model, layers=tuple(layers))
