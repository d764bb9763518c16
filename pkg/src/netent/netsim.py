"""Finite-size network realization and sampling.

Generates concrete weight matrices matching the spectral ensembles of the
theory, pushes iid Gaussian inputs through the stochastic layers, and
packages the per-layer samples for the nonparametric estimators.

Randomness policy: every public entry point takes one integer seed and
derives independent child streams (one per layer or per sample block)
through numpy's SeedSequence spawning, on top of the counter-based Philox
bit generator. Counter-based generation makes every stream reproducible
from (seed, spawn path) alone, independent of draw order, so regenerating
a network or a sample set never depends on what else was drawn before.
"""

import dataclasses
import json

import numpy as np

from .channels import ChannelSpec, PriorSpec, apply_activation
from .replica import LayerSpec, ModelSpec
from .spectra import Empirical, empirical_spectrum

_MAGIC = "netent-samples-v1"


def _rng(seed_seq):
    return np.random.Generator(np.random.Philox(seed_seq))


@dataclasses.dataclass
class RealizedNetwork:
    """Concrete weight matrices plus the channels that act between them."""

    prior: PriorSpec
    weights: list
    channels: list

    def __post_init__(self):
        if len(self.weights) != len(self.channels):
            raise ValueError("one channel per weight matrix required")
        for k in range(1, len(self.weights)):
            if self.weights[k].shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError("weight shapes do not chain")

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def n_units(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def alphas(self):
        return [w.shape[0] / w.shape[1] for w in self.weights]

    def empirical_spectra(self):
        """Per-layer Empirical spectra of W^T W (zero padded to n_in)."""
        out = []
        for w in self.weights:
            s = np.linalg.svd(w, compute_uv=False)
            out.append(empirical_spectrum(s, w.shape[1]))
        return out

    def to_model(self, spectra=None):
        """ModelSpec with matching empirical (default) or given spectra."""
        if spectra is None:
            spectra = self.empirical_spectra()
        layers = [LayerSpec(channel=c, spectrum=s, alpha=a)
                  for c, s, a in zip(self.channels, spectra, self.alphas())]
        return ModelSpec(prior=self.prior, layers=tuple(layers))


def gen_gaussian_network(n_units, channels, weight_std=None, prior=None,
                         seed=0):
    """iid Gaussian weights, entries N(0, sigma_k^2 / n_in) per layer.

    n_units lists the layer widths from the input in; weight_std gives
    sigma_k per layer (default 1). The matching limit spectrum of layer k
    is AnalyticMP(alpha_k, scale=sigma_k^2).
    """
    n_units = [int(n) for n in n_units]
    if len(n_units) != len(channels) + 1:
        raise ValueError("need len(n_units) == len(channels) + 1")
    if weight_std is None:
        weight_std = [1.0] * len(channels)
    prior = prior or PriorSpec()
    seeds = np.random.SeedSequence(seed).spawn(len(channels))
    weights = []
    for k, s in enumerate(seeds):
        n_in, n_out = n_units[k], n_units[k + 1]
        w = _rng(s).normal(0.0, weight_std[k] / np.sqrt(n_in),
                           size=(n_out, n_in))
        weights.append(w)
    return RealizedNetwork(prior=prior, weights=weights,
                           channels=list(channels))


def haar_orthogonal(n, rng):
    """Orthogonal matrix drawn from the Haar measure.

    QR of a Gaussian matrix with the R-diagonal sign fix; without the fix
    the raw QR factor is not Haar distributed.
    """
    g = rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[None, :]


def gen_usv_network(n_units, channels, singular_values, prior=None, seed=0):
    """Weights U diag(s) V^T with independent Haar orthogonal factors.

    singular_values[k] must have min(n_in, n_out) entries for layer k; the
    matching spectrum is Empirical(s^2 zero padded to n_in).
    """
    n_units = [int(n) for n in n_units]
    if len(n_units) != len(channels) + 1:
        raise ValueError("need len(n_units) == len(channels) + 1")
    prior = prior or PriorSpec()
    seeds = np.random.SeedSequence(seed).spawn(len(channels))
    weights = []
    for k, s_seq in enumerate(seeds):
        n_in, n_out = n_units[k], n_units[k + 1]
        sv = np.asarray(singular_values[k], dtype=float)
        if sv.size != min(n_in, n_out):
            raise ValueError("need min(n_in, n_out) singular values")
        rng_u, rng_v = (_rng(s) for s in s_seq.spawn(2))
        u = haar_orthogonal(n_out, rng_u)
        v = haar_orthogonal(n_in, rng_v)
        d = np.zeros((n_out, n_in))
        d[np.arange(sv.size), np.arange(sv.size)] = sv
        weights.append(u @ d @ v.T)
    return RealizedNetwork(prior=prior, weights=weights,
                           channels=list(channels))


@dataclasses.dataclass
class SampleSet:
    """Per-layer joint samples; layers[0] is the input.

    noiseless[k] carries the same forward pass with every noise draw
    removed (the deterministic image of the same inputs), used as mixture
    centers by the parametric entropy bound.
    """

    layers: list
    noiseless: list

    @property
    def n_samples(self):
        return self.layers[0].shape[0]

    def save(self, path):
        """Binary dump: JSON header line, then column-major float64 blocks."""
        header = {
            "magic": _MAGIC,
            "n_samples": int(self.n_samples),
            "widths": [int(a.shape[1]) for a in self.layers],
            "order": "F",
            "dtype": "<f8",
            "blocks": ["layers", "noiseless"],
        }
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n")
                     .encode("ascii"))
            for block in (self.layers, self.noiseless):
                for arr in block:
                    fh.write(np.asarray(arr, dtype="<f8", order="F")
                             .tobytes(order="F"))

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("ascii"))
            if header.get("magic") != _MAGIC:
                raise ValueError("not a netent sample file")
            n = header["n_samples"]
            blocks = []
            for _ in header["blocks"]:
                arrs = []
                for width in header["widths"]:
                    raw = fh.read(8 * n * width)
                    arrs.append(np.frombuffer(raw, dtype="<f8")
                                .reshape((n, width), order="F").copy())
                blocks.append(arrs)
        return cls(layers=blocks[0], noiseless=blocks[1])

    def save_csv(self, path, layer):
        """One layer as plain CSV, one sample per row."""
        np.savetxt(path, self.layers[layer], delimiter=",", fmt="%.17g")


_SAMPLE_BLOCK = 4096


def forward_sample(net, n_samples, seed=0):
    """Draw joint samples of all layers of a realized network.

    Inputs are iid N(0, prior_variance); each layer applies its weight
    matrix, adds N(0, noise_var) pre-activation noise, and applies the
    activation. Sampling is blocked on a fixed 4096-row grid with one
    child stream per block and noise source, so a given seed always
    yields the same rows: asking for more samples extends the set
    without changing the earlier ones.
    """
    n_samples = int(n_samples)
    widths = net.n_units
    layers = [np.empty((n_samples, w)) for w in widths]
    noiseless = [np.empty((n_samples, w)) for w in widths]
    root = np.random.SeedSequence(seed)
    n_blocks = (n_samples + _SAMPLE_BLOCK - 1) // _SAMPLE_BLOCK
    block_seeds = root.spawn(n_blocks)
    for b in range(n_blocks):
        lo = b * _SAMPLE_BLOCK
        hi = min((b + 1) * _SAMPLE_BLOCK, n_samples)
        per_source = block_seeds[b].spawn(net.n_layers + 1)
        x = _rng(per_source[0]).normal(
            0.0, np.sqrt(net.prior.variance), size=(hi - lo, widths[0]))
        layers[0][lo:hi] = x
        noiseless[0][lo:hi] = x
        t, t_clean = x, x
        for k, (w, ch) in enumerate(zip(net.weights, net.channels)):
            pre = t @ w.T
            pre_clean = t_clean @ w.T
            if ch.noise_var > 0.0:
                pre = pre + _rng(per_source[k + 1]).normal(
                    0.0, np.sqrt(ch.noise_var), size=pre.shape)
            t = apply_activation(ch.activation, pre)
            t_clean = apply_activation(ch.activation, pre_clean)
            layers[k + 1][lo:hi] = t
            noiseless[k + 1][lo:hi] = t_clean
    return SampleSet(layers=layers, noiseless=noiseless)
