"""Command line front end.

Four subcommands, all driven by a JSON config file:

  validate  parse and semantically check a config, print a summary
  entropy   entropies / mutual informations of the configured model
  sweep     the same quantities over a grid of one model parameter
  compare   replica results next to sampling estimators on a realized
            finite network

Results are emitted as CSV (default) or JSON rows with the fixed schema

  sweep,layer,quantity,method,value,converged,iterations

Exit codes: 0 success, 1 a solver or estimator failed, 2 bad usage or a
malformed config. Output depends only on the config and the seed; rerunning
writes byte-identical files.
"""

import argparse
import concurrent.futures
import copy
import json
import sys

import numpy as np

from . import oracles
from .channels import ChannelSpec, PriorSpec, QuadratureConfig
from .netsim import forward_sample, gen_gaussian_network
from .replica import (LayerSpec, ModelSpec, SolverConfig, SolverError,
                      mutual_info_adjacent, mutual_info_with_input, solve,
                      with_noise_only_at)
from .spectra import AnalyticMP, spectrum_from_dict

CSV_HEADER = "sweep,layer,quantity,method,value,converged,iterations"

QUANTITIES = ("entropy", "mutual_info", "mutual_info_adjacent")
ESTIMATORS = ("kraskov", "kolchinsky", "exact_linear")


class ConfigError(ValueError):
    """Config file is syntactically fine but semantically wrong."""


# ------------------------------------------------------------- config I/O

def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}")
    if not isinstance(cfg, dict):
        raise ConfigError("top level of the config must be a JSON object")
    return cfg


def _need(d, key, where, types):
    if key not in d:
        raise ConfigError(f"missing required key {where}.{key}")
    val = d[key]
    if not isinstance(val, types):
        raise ConfigError(f"{where}.{key} has the wrong type")
    return val


def model_from_config(cfg):
    mdl = _need(cfg, "model", "config", dict)
    prior_d = _need(mdl, "prior", "model", dict)
    try:
        prior = PriorSpec(kind=prior_d.get("kind", "gaussian"),
                          variance=float(prior_d.get("variance", 1.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model.prior: {exc}")
    layers_d = _need(mdl, "layers", "model", list)
    if not layers_d:
        raise ConfigError("model.layers must not be empty")
    layers = []
    for i, ld in enumerate(layers_d):
        where = f"model.layers[{i}]"
        if not isinstance(ld, dict):
            raise ConfigError(f"{where} must be an object")
        ch_d = _need(ld, "channel", where, dict)
        sp_d = _need(ld, "spectrum", where, dict)
        try:
            channel = ChannelSpec(
                activation=_need(ch_d, "activation", f"{where}.channel", str),
                noise_var=float(ch_d.get("noise_var", 0.0)))
            spectrum = spectrum_from_dict(sp_d)
            alpha = float(_need(ld, "alpha", where, (int, float)))
            layers.append(LayerSpec(channel=channel, spectrum=spectrum,
                                    alpha=alpha))
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"{where}: {exc}")
    return ModelSpec(prior=prior, layers=tuple(layers))


def solver_from_config(cfg, method_override=None):
    sd = cfg.get("solver", {})
    if not isinstance(sd, dict):
        raise ConfigError("solver must be an object")
    try:
        quad = QuadratureConfig(
            hermite_order=int(sd.get("hermite_order", 20)),
            legendre_order=int(sd.get("legendre_order", 40)),
            b_hermite_order=int(sd.get("b_hermite_order", 20)),
            truncation_radius=float(sd.get("truncation_radius", 8.0)),
            mc_samples=int(sd.get("mc_samples", 200_000)))
        seeds = sd.get("seeds", ["uninformative", "informative"])
        seeds = tuple(s if isinstance(s, str) else (float(s[0]), float(s[1]))
                      for s in seeds)
        return SolverConfig(
            method=method_override or sd.get("method", "fixed_point"),
            tol=float(sd.get("tol", 1e-8)),
            max_iter=int(sd.get("max_iter", 1000)),
            damping=float(sd.get("damping", 0.5)),
            seeds=seeds, quad=quad)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}")


def target_layers(cfg, model):
    if "layers" in cfg:
        raw = cfg["layers"]
    elif "layer" in cfg:
        raw = [cfg["layer"]]
    else:
        raw = [model.n_layers]
    try:
        out = [int(v) for v in raw]
    except (TypeError, ValueError):
        raise ConfigError("layer / layers must be integers")
    for ell in out:
        if not 1 <= ell <= model.n_layers:
            raise ConfigError(f"target layer {ell} outside 1.."
                              f"{model.n_layers}")
    return out


def quantities_from_config(cfg):
    raw = cfg.get("quantity", "entropy")
    if isinstance(raw, str):
        raw = [raw]
    for q in raw:
        if q not in QUANTITIES:
            raise ConfigError(f"unknown quantity {q!r}; pick from "
                              f"{QUANTITIES}")
    return list(raw)


def noise_convention(cfg, default):
    conv = cfg.get("noise_convention", default)
    if conv not in ("as_specified", "target_layer_only"):
        raise ConfigError("noise_convention must be as_specified or "
                          "target_layer_only")
    return conv


# -------------------------------------------------------------- row logic

def _row(sweep, layer, quantity, method, value, converged, iterations):
    return {"sweep": sweep, "layer": int(layer), "quantity": quantity,
            "method": method, "value": float(value),
            "converged": bool(converged), "iterations": int(iterations)}


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(rows, out, fmt):
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in rows:
            lines.append(",".join([
                str(r["sweep"]), str(r["layer"]), r["quantity"], r["method"],
                _fmt(r["value"]), "true" if r["converged"] else "false",
                str(r["iterations"])]))
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def model_rows(model, layers, quants, solver_cfg, conv, sweep_label=""):
    """Replica rows for the requested layers and quantities.

    One solve per layer; the mutual information reuses the entropy report
    through return_report instead of extremizing again.
    """
    rows = []
    for ell in layers:
        m = with_noise_only_at(model, ell, model.layers[ell - 1]
                               .channel.noise_var) \
            if conv == "target_layer_only" else model
        rep, mi_val = None, None
        try:
            if "mutual_info" in quants:
                mi_val, rep = mutual_info_with_input(
                    m, ell, solver_cfg, return_report=True)
            elif "mutual_info_adjacent" in quants:
                mi_val, rep = mutual_info_adjacent(
                    m, ell, solver_cfg, return_report=True)
        except ValueError as exc:
            # model precondition violated, e.g. mutual_info with noisy
            # layers below the target under as_specified
            raise ConfigError(str(exc))
        if rep is None:
            rep = solve(m, ell, solver_cfg)
        for q in quants:
            val = rep.entropy_per_input if q == "entropy" else mi_val
            rows.append(_row(sweep_label, ell, q, solver_cfg.method,
                             float(val), rep.converged, rep.iterations))
    return rows


# ------------------------------------------------------------------ sweep

_SWEEP_SHORTCUTS = ("weight_std", "noise_var", "prior_variance")


def apply_sweep_value(cfg, parameter, value):
    """New config dict with one parameter set to value.

    Shortcuts: weight_std (scale = value^2 on every AnalyticMP spectrum),
    noise_var (every channel), prior_variance. Anything else is a dotted
    path into the model object, e.g. model.layers.1.channel.noise_var.
    """
    out = copy.deepcopy(cfg)
    if parameter == "weight_std":
        for ld in out["model"]["layers"]:
            if ld["spectrum"].get("kind") != "mp":
                raise ConfigError("weight_std sweep needs mp spectra")
            ld["spectrum"]["scale"] = float(value) ** 2
        return out
    if parameter == "noise_var":
        for ld in out["model"]["layers"]:
            ld["channel"]["noise_var"] = float(value)
        return out
    if parameter == "prior_variance":
        out["model"]["prior"]["variance"] = float(value)
        return out
    node = out
    parts = parameter.split(".")
    try:
        for p in parts[:-1]:
            node = node[int(p)] if isinstance(node, list) else node[p]
        leaf = parts[-1]
        if isinstance(node, list):
            node[int(leaf)] = value
        else:
            if leaf not in node:
                raise KeyError(leaf)
            node[leaf] = value
    except (KeyError, IndexError, ValueError, TypeError):
        raise ConfigError(f"sweep parameter path {parameter!r} not found "
                          "in config")
    return out


def _sweep_point(args):
    cfg, parameter, value, method_override = args
    point_cfg = apply_sweep_value(cfg, parameter, value)
    model = model_from_config(point_cfg)
    solver_cfg = solver_from_config(point_cfg, method_override)
    layers = target_layers(point_cfg, model)
    quants = quantities_from_config(point_cfg)
    conv = noise_convention(point_cfg, "target_layer_only")
    return model_rows(model, layers, quants, solver_cfg, conv,
                      sweep_label=_fmt(float(value)))


def cmd_sweep(cfg, args):
    sweep = _need(cfg, "sweep", "config", dict)
    parameter = _need(sweep, "parameter", "sweep", str)
    values = _need(sweep, "values", "sweep", list)
    if not values:
        raise ConfigError("sweep.values must not be empty")
    jobs = max(1, args.jobs)
    work = [(cfg, parameter, v, args.method) for v in values]
    if jobs == 1:
        results = [_sweep_point(w) for w in work]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_point, work))
    rows = [r for chunk in results for r in chunk]
    write_rows(rows, args.out, args.format)


# ---------------------------------------------------------------- compare

def _network_widths(model, n_input):
    widths = [int(n_input)]
    for layer in model.layers:
        w = layer.alpha * widths[-1]
        wi = int(round(w))
        if abs(w - wi) > 1e-9:
            raise ConfigError("alpha chain does not give integer widths "
                              f"from n_input={n_input}")
        widths.append(wi)
    return widths


def cmd_compare(cfg, args):
    model = model_from_config(cfg)
    solver_cfg = solver_from_config(cfg, args.method)
    quants = quantities_from_config(cfg)
    conv = noise_convention(cfg, "target_layer_only")
    layers = target_layers(cfg, model)

    net_d = cfg.get("network", {})
    if not isinstance(net_d, dict):
        raise ConfigError("network must be an object")
    n_input = int(net_d.get("n_input", 1000))
    n_samples = int(net_d.get("n_samples", 10000))
    seed = args.seed if args.seed is not None else int(net_d.get("seed", 0))
    use = net_d.get("estimators", ["kraskov", "kolchinsky"])
    for est in use:
        if est not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {est!r}")
    if "exact_linear" in use and any(
            layer.channel.activation != "linear" for layer in model.layers):
        raise ConfigError("exact_linear needs an all-linear model")
    spectra_mode = net_d.get("spectra", "analytic")
    if spectra_mode not in ("analytic", "empirical"):
        raise ConfigError("network.spectra must be analytic or empirical")

    for layer in model.layers:
        if not isinstance(layer.spectrum, AnalyticMP):
            raise ConfigError("compare realizes Gaussian weights and needs "
                              "mp spectra in every layer")
    widths = _network_widths(model, n_input)
    weight_std = [float(np.sqrt(layer.spectrum.scale))
                  for layer in model.layers]
    channels = [layer.channel for layer in model.layers]

    rows = []
    seed_seq = np.random.SeedSequence(seed)
    net_seed, sample_seed, jitter_seed = [
        int(s.generate_state(1)[0]) for s in seed_seq.spawn(3)]

    for ell in layers:
        base = with_noise_only_at(model, ell, model.layers[ell - 1]
                                  .channel.noise_var) \
            if conv == "target_layer_only" else model
        net = gen_gaussian_network(
            widths, [ly.channel for ly in base.layers],
            weight_std=weight_std, prior=base.prior, seed=net_seed)
        replica_model = net.to_model() if spectra_mode == "empirical" \
            else base
        rows.extend(model_rows(replica_model, [ell], quants, solver_cfg,
                               "as_specified"))
        samples = forward_sample(net, n_samples, seed=sample_seed)
        x = samples.layers[ell]
        nv = base.layers[ell - 1].channel.noise_var
        n0 = widths[0]
        if "exact_linear" in use:
            h = oracles.exact_gaussian_entropy(net, ell)
            rows.append(_row("", ell, "entropy", "exact_linear", h, True, 0))
            if "mutual_info" in quants or "mutual_info_adjacent" in quants:
                mi = oracles.exact_gaussian_mi(net, ell)
                for q in set(quants) & {"mutual_info",
                                        "mutual_info_adjacent"}:
                    rows.append(_row("", ell, q, "exact_linear", mi,
                                     True, 0))
        if "kraskov" in use:
            kd = net_d.get("kraskov", {})
            h = oracles.kraskov_entropy(
                x, k=int(kd.get("k", 4)),
                metric=kd.get("metric", "euclidean"),
                jitter_scale=kd.get("jitter_scale"),
                seed=jitter_seed) / n0
            rows.append(_row("", ell, "entropy", "kraskov", h, True, 0))
        if "kolchinsky" in use:
            kd = net_d.get("kolchinsky", {})
            mode = kd.get("mode", "noisy_sample")
            bandwidth = kd.get("bandwidth")
            s2 = float(bandwidth) if bandwidth is not None else nv
            centers = samples.noiseless[ell] if mode == "parametric" else x
            h = oracles.kolchinsky_entropy_upper(centers, s2, mode=mode) / n0
            rows.append(_row("", ell, "entropy", "kolchinsky", h, True, 0))
    write_rows(rows, args.out, args.format)


# ------------------------------------------------------------- entrypoint

def cmd_validate(cfg, args):
    model = model_from_config(cfg)
    solver_cfg = solver_from_config(cfg, args.method)
    layers = target_layers(cfg, model)
    quants = quantities_from_config(cfg)
    noise_convention(cfg, "as_specified")
    if "sweep" in cfg:
        sweep = cfg["sweep"]
        parameter = _need(sweep, "parameter", "sweep", str)
        values = _need(sweep, "values", "sweep", list)
        apply_sweep_value(cfg, parameter, values[0])
    rho_t, _ = model.rho_chains()
    sys.stdout.write(
        f"ok: {model.n_layers} layer(s), targets {layers}, "
        f"quantities {quants}, method {solver_cfg.method}, "
        f"layer second moments {[round(float(r), 6) for r in rho_t]}\n")


def cmd_entropy(cfg, args):
    model = model_from_config(cfg)
    solver_cfg = solver_from_config(cfg, args.method)
    layers = target_layers(cfg, model)
    quants = quantities_from_config(cfg)
    conv = noise_convention(cfg, "as_specified")
    rows = model_rows(model, layers, quants, solver_cfg, conv)
    write_rows(rows, args.out, args.format)


def build_parser():
    p = argparse.ArgumentParser(
        prog="netent",
        description="entropies and mutual informations of wide stochastic "
                    "feed-forward network models")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("validate", cmd_validate), ("entropy", cmd_entropy),
                     ("sweep", cmd_sweep), ("compare", cmd_compare)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True,
                        help="path to the JSON config")
        sp.add_argument("--out", default=None,
                        help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--method", choices=("fixed_point", "mlvamp_se"),
                        default=None, help="override solver.method")
        sp.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for sweep points")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the network seed (compare)")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.fn(cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (SolverError, oracles.DuplicatePointsError) as exc:
        sys.stderr.write(f"computation failed: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
