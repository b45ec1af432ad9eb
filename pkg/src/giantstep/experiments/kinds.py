"""One function per experiment kind; each writes CSVs and returns a summary.

Every cell (seed, or (d, seed) in sweeps) derives its randomness from its
own substream and cells are independent, so they run in a thread pool and
the collected rows are emitted in a fixed order.
"""

from __future__ import annotations

import json
import math

import numpy as np

from ..analysis import (alignment_report, norm_concentration_check, norm_update_oracle,
                        predicted_second_step_orientation, spike_bulk)
from ..cget import compare_ck_cl
from ..hermite import Activation, hermite_coeffs
from ..network import (Dataset, TrainConfig, fit_second_layer, gradient_matrix,
                       init_symmetric, kernel_ridge_baseline, preprocess_labels,
                       train_first_layer)
from ..polynomial import parse_polynomial
from ..staircase import is_staircase_learnable, staircase_sequence
from ..targets import sample_dataset
from ..util import rng_from
from .config import ConfigError, ExperimentConfig, build_target, resolve_count
from .io import parallel_map, write_csv, write_json

ALIGNMENT_HEADER = ["seed", "step", "neuron"]  # + cos_1..cos_r, ratio, norm


def _train_config(cfg: ExperimentConfig, d: int, seed: int, **overrides) -> TrainConfig:
    table = dict(cfg.train)
    table.update(overrides)
    if "d" not in overrides:
        table["d"] = d
    n = table.get("n", None)
    if n is None:
        raise ConfigError("missing field 'train.n'")
    table["n"] = resolve_count(n, d, "train.n")
    if "p" not in table:
        raise ConfigError("missing field 'train.p'")
    table["p"] = resolve_count(table["p"], d, "train.p")
    known = {f.name for f in TrainConfig.__dataclass_fields__.values()}
    extra = {k: v for k, v in table.items() if k not in known and k != "student"}
    if extra:
        raise ConfigError(f"unknown train fields: {sorted(extra)}")
    table = {k: v for k, v in table.items() if k in known}
    return TrainConfig(seed=seed, **{k: v for k, v in table.items() if k != "seed"})


def _student(cfg: ExperimentConfig) -> Activation:
    name = cfg.train.get("student", "relu")
    return Activation.from_name(name)


def _init_net(tc: TrainConfig, student: Activation, seed):
    net = init_symmetric(tc.p, tc.d, seed, tc.second_layer_dist)
    net.activation = student
    return net


def _alignment_rows(seed, step, matrix, target, flip=False):
    """Rows (seed, step, neuron, cos_1..cos_r, ratio, norm) for a p x d matrix."""
    rep = alignment_report(-matrix if flip else matrix, target)
    rows = []
    for i in range(matrix.shape[0]):
        rows.append([seed, step, i, *rep.cosines[i].tolist(),
                     float(rep.ratios[i]), float(rep.norms[i])])
    return rows


def _projected_rows(seed, step, gradient, second_layer, target):
    """In-plane orientation of the step direction -G, per neuron."""
    proj = (-gradient) @ target.teacher.T
    norms = np.linalg.norm(proj, axis=1)
    full = np.linalg.norm(gradient, axis=1)
    rows = []
    for i in range(gradient.shape[0]):
        unit = proj[i] / norms[i] if norms[i] > 0 else np.full(target.num_index, np.nan)
        ratio = (norms[i] / full[i]) ** 2 if full[i] > 0 else np.nan
        rows.append([seed, step, i, *unit.tolist(), float(ratio), float(full[i])])
    return rows


def _csv_header(r: int):
    return ALIGNMENT_HEADER + [f"cos_{k + 1}" for k in range(r)] + ["ratio", "norm"]


# ---------------------------------------------------------------------------

def run_single_step(cfg: ExperimentConfig) -> dict:
    d = int(cfg.train["d"])

    def cell(seed):
        target = build_target(cfg.target, d, seed_override=(seed, "teacher")
                              if cfg.target.get("teacher") == "random" else None)
        tc = _train_config(cfg, d, seed, T=1)
        net = _init_net(tc, _student(cfg), (seed, "init"))
        trace = train_first_layer(net, target, tc)
        grad_rows = _alignment_rows(seed, 1, trace.gradients[0], target, flip=True)
        weight_rows = (_alignment_rows(seed, 0, trace.weights[0], target)
                       + _alignment_rows(seed, 1, trace.weights[1], target))
        return grad_rows, weight_rows, target.num_index

    results = parallel_map(cell, cfg.seeds)
    r = results[0][2]
    files = {
        "alignment_gradient": write_csv(cfg.output_dir / "alignment_gradient.csv",
                                        _csv_header(r),
                                        [row for res in results for row in res[0]]),
        "alignment_weight": write_csv(cfg.output_dir / "alignment_weight.csv",
                                      _csv_header(r),
                                      [row for res in results for row in res[1]]),
    }
    return {"files": files, "summary": {"seeds": len(cfg.seeds), "d": d}}


def run_multi_step(cfg: ExperimentConfig) -> dict:
    d = int(cfg.train["d"])

    def cell(seed):
        target = build_target(cfg.target, d)
        tc = _train_config(cfg, d, seed)
        net = _init_net(tc, _student(cfg), (seed, "init"))
        trace = train_first_layer(net, target, tc)
        proj_rows, err_rows = [], []
        for step, grad in enumerate(trace.gradients, start=1):
            proj_rows.extend(_projected_rows(seed, step, grad, net.second_layer, target))
        for step in range(1, tc.T + 1):
            net_t = net.with_weights(trace.weights[step])
            predictor = fit_second_layer(net_t, target, tc, batch_tag=("ridge", step))
            test = sample_dataset(target, cfg.options.get("n_test", 10_000), d, (seed, "test"))
            mse = float(np.mean((predictor(test.inputs) - test.labels) ** 2))
            err_rows.append([seed, step, mse, mse / target.variance()])
        return proj_rows, err_rows, target.num_index

    results = parallel_map(cell, cfg.seeds)
    r = results[0][2]
    files = {
        "alignment_projected_gradient": write_csv(
            cfg.output_dir / "alignment_projected_gradient.csv", _csv_header(r),
            [row for res in results for row in res[0]]),
        "errors": write_csv(cfg.output_dir / "errors.csv",
                            ["seed", "step", "test_mse", "test_mse_normalized"],
                            [row for res in results for row in res[1]]),
    }
    return {"files": files, "summary": {"steps": int(cfg.train.get("T", 1))}}


def run_second_step_orientation(cfg: ExperimentConfig) -> dict:
    d = int(cfg.train["d"])
    target_probe = build_target(cfg.target, d)
    student = _student(cfg)
    predictions = {sign: predicted_second_step_orientation(student, sign, 0.0, target_probe)
                   for sign in (+1, -1)}

    def cell(seed):
        target = build_target(cfg.target, d)
        tc = _train_config(cfg, d, seed, T=2)
        net = _init_net(tc, student, (seed, "init"))
        trace = train_first_layer(net, target, tc)
        # per-neuron movement direction with the a_i prefactor divided out:
        # the closed form predicts the neuron's in-plane orientation by a-sign
        signs = np.sign(net.second_layer)
        proj = (signs[:, None] * (-trace.gradients[1])) @ target.teacher.T
        norms = np.linalg.norm(proj, axis=1)
        rows = []
        for i in range(tc.p):
            sign = int(signs[i]) if signs[i] != 0 else 1
            unit = proj[i] / norms[i] if norms[i] > 0 else np.full(2, np.nan)
            rows.append([seed, i, sign, float(unit @ predictions[sign]),
                         float(unit[0]), float(unit[1])])
        return rows

    results = parallel_map(cell, cfg.seeds)
    files = {
        "orientation": write_csv(cfg.output_dir / "orientation.csv",
                                 ["seed", "neuron", "a_sign", "cos_to_prediction", "q_1", "q_2"],
                                 [row for res in results for row in res]),
        "predictions": write_csv(cfg.output_dir / "predictions.csv",
                                 ["a_sign", "v_1", "v_2"],
                                 [[s, float(v[0]), float(v[1])] for s, v in sorted(predictions.items())]),
    }
    return {"files": files, "summary": {"predictions": {str(s): v.tolist()
                                                        for s, v in predictions.items()}}}


# ---------------------------------------------------------------------------

def run_scaling(cfg: ExperimentConfig) -> dict:
    statistic = cfg.options.get("statistic", "alignment_ratio")
    dims = [int(v) for v in cfg.sweep.get("d", [cfg.train.get("d")])]
    if statistic == "alignment_ratio":
        rows = _scaling_alignment(cfg, dims)
    elif statistic == "norm_concentration":
        rows = _scaling_norm_concentration(cfg, dims)
    elif statistic == "spike_bulk":
        rows = _scaling_spike_bulk(cfg, dims)
    else:
        raise ConfigError(f"unknown scaling statistic {statistic!r}")
    files = {"scaling": write_csv(cfg.output_dir / "scaling.csv",
                                  ["d", "seed", "statistic", "value"], rows)}
    return {"files": files, "summary": {"statistic": statistic, "d": dims}}


def _scaling_alignment(cfg, dims):
    def cell(args):
        d, seed = args
        target = build_target(cfg.target, d)
        tc = _train_config(cfg, d, seed, T=1)
        net = _init_net(tc, _student(cfg), (seed, "init"))
        trace = train_first_layer(net, target, tc)
        ratios = alignment_report(trace.weights[1], target).ratios
        return [d, seed, "median_alignment_ratio", float(np.median(ratios))]

    return parallel_map(cell, [(d, s) for d in dims for s in cfg.seeds])


def _scaling_norm_concentration(cfg, dims):
    student = _student(cfg)
    oracle_samples = int(cfg.options.get("oracle_samples", 1_000_000))
    oracles = {}
    for d in dims:
        target = build_target(cfg.target, d)
        oracles[d] = norm_update_oracle(target, student, d, oracle_samples, seed=("oracle", d))

    def cell(args):
        d, seed = args
        target = build_target(cfg.target, d)
        tc = _train_config(cfg, d, seed, T=1)
        net = _init_net(tc, student, (seed, "init"))
        trace = train_first_layer(net, target, tc)
        report = norm_concentration_check(trace.weights[0], trace.weights[1],
                                          net.second_layer, trace.eta, tc.n, oracles[d])
        return [d, seed, "median_rel_deviation", report["median_rel_deviation"]]

    return parallel_map(cell, [(d, s) for d in dims for s in cfg.seeds])


def _scaling_spike_bulk(cfg, dims):
    student = _student(cfg)
    mu1 = hermite_coeffs(student, 1)[1]

    def cell(args):
        d, seed = args
        target = build_target(cfg.target, d)
        tc = _train_config(cfg, d, seed, T=1)
        net = _init_net(tc, student, (seed, "init"))
        batch = sample_dataset(target, tc.n, d, (seed, "batch", 0))
        grad = gradient_matrix(net, batch)
        decomp = spike_bulk(grad, net.second_layer, batch, mu1)
        opnorm = float(np.linalg.svd(decomp.delta, compute_uv=False)[0])
        inner = float(np.max(np.abs(decomp.delta @ target.teacher.T)))
        return [[d, seed, "delta_opnorm_rowscaled", math.sqrt(tc.p) * opnorm],
                [d, seed, "delta_teacher_inner_pscaled", tc.p * inner]]

    nested = parallel_map(cell, [(d, s) for d in dims for s in cfg.seeds])
    return [row for pair in nested for row in pair]


# ---------------------------------------------------------------------------

def run_generalization_sweep(cfg: ExperimentConfig) -> dict:
    methods = cfg.options.get("methods", ["gd1", "rf"])
    dims = [int(v) for v in cfg.sweep.get("d", [cfg.train["d"]])]
    n_ratios = [float(v) if v is not None else None
                for v in cfg.sweep.get("n_over_d", [None])]
    widths = cfg.sweep.get("p", [None])
    n_test = int(cfg.options.get("n_test", 10_000))
    cells = [(d, ratio, p, seed) for d in dims for ratio in n_ratios
             for p in widths for seed in cfg.seeds]

    def cell(args):
        d, ratio, p, seed = args
        target = build_target(cfg.target, d)
        var = target.variance()
        overrides = {}
        if ratio is not None:
            overrides["n"] = int(round(ratio * d))
        if p is not None:
            overrides["p"] = p
        tc = _train_config(cfg, d, seed, **overrides)
        test = sample_dataset(target, n_test, d, (seed, "test"))
        rows = []
        for method in methods:
            if method in ("gd1", "rf"):
                steps = tc.T if method == "gd1" else 0
                tc_m = TrainConfig(**{**tc.__dict__, "T": steps})
                net = _init_net(tc_m, _student(cfg), (seed, "init"))
                trace = train_first_layer(net, target, tc_m)
                predictor = fit_second_layer(net.with_weights(trace.final_weights),
                                             target, tc_m)
                mse = float(np.mean((predictor(test.inputs) - test.labels) ** 2))
            elif method in ("kernel1", "kernel2", "kernel3"):
                degree = int(method[-1])
                train = sample_dataset(target, tc.n, d, (seed, "ridge"))
                lam = float(cfg.options.get("kernel_lambda", tc.ridge_lambda))
                mse = kernel_ridge_baseline(train, degree, lam, test)
            else:
                raise ConfigError(f"unknown method {method!r}")
            rows.append([d, tc.n, tc.p, seed, method, mse, mse / var])
        return rows

    nested = parallel_map(cell, cells)
    files = {"generalization": write_csv(
        cfg.output_dir / "generalization.csv",
        ["d", "n", "p", "seed", "method", "test_mse", "test_mse_normalized"],
        [row for rows in nested for row in rows])}
    return {"files": files, "summary": {"methods": methods}}


def run_cget(cfg: ExperimentConfig) -> dict:
    d = int(cfg.train["d"])
    target = build_target(cfg.target, d)
    tc = _train_config(cfg, d, cfg.seeds[0])
    student = _student(cfg)
    mc = cfg.options.get("mc_samples", None)
    if isinstance(mc, str):
        # mc_samples expressions are in units of the hidden width p
        mc = resolve_count(mc.replace("p", "d"), tc.p, "options.mc_samples")
    elif mc is not None:
        mc = int(mc)
    result = compare_ck_cl(target, tc, cfg.seeds, mc_samples=mc,
                           n_test=int(cfg.options.get("n_test", 10_000)))
    rows = [[seed, result.err_ck[i], result.err_cl[i], result.spike_cosine[i],
             result.a_norm2[i], result.a_norm_inf_scaled[i], result.clip_fraction_max[i]]
            for i, seed in enumerate(cfg.seeds)]
    files = {"cget": write_csv(cfg.output_dir / "cget.csv",
                               ["seed", "err_ck", "err_cl", "spike_cosine",
                                "a_norm2", "a_norm_inf_scaled", "clip_fraction_max"],
                               rows)}
    mean_ck = float(np.mean(result.err_ck))
    mean_cl = float(np.mean(result.err_cl))
    return {"files": files, "summary": {
        "mean_err_ck": mean_ck, "mean_err_cl": mean_cl,
        "relative_gap": abs(mean_ck - mean_cl) / mean_ck,
        "student": student.kind,
    }}


def run_preprocessing(cfg: ExperimentConfig) -> dict:
    d = int(cfg.train["d"])
    k = int(cfg.train.get("preprocess_degree", 2))
    if k < 1:
        raise ConfigError("preprocessing experiment needs train.preprocess_degree >= 1")

    def cell(seed):
        target = build_target(cfg.target, d)
        tc_plain = _train_config(cfg, d, seed, preprocess_degree=0)
        tc_pre = _train_config(cfg, d, seed, preprocess_degree=k)
        test = sample_dataset(target, int(cfg.options.get("n_test", 10_000)), d, (seed, "test"))

        batch = sample_dataset(target, tc_plain.n, d, (seed, "batch", 0))
        adjusted, table = preprocess_labels(batch, k)
        raw_norm = float(np.linalg.norm([c for _, c in table]))
        _, table_re = preprocess_labels(Dataset(batch.inputs, adjusted), k)
        adj_norm = float(np.linalg.norm([c for _, c in table_re]))

        rows = [[seed, "raw_coeff_norm", raw_norm],
                [seed, "adjusted_coeff_norm", adj_norm],
                [seed, "shrink_factor", raw_norm / adj_norm if adj_norm > 0 else math.inf]]
        for label, tc in (("vanilla", tc_plain), ("preprocessed", tc_pre)):
            net = _init_net(tc, _student(cfg), (seed, "init"))
            trace = train_first_layer(net, target, tc)
            predictor = fit_second_layer(net.with_weights(trace.final_weights), target, tc)
            mse = float(np.mean((predictor(test.inputs) - test.labels) ** 2))
            rows.append([seed, f"mse_{label}", mse])
        return rows

    nested = parallel_map(cell, cfg.seeds)
    files = {"preprocessing": write_csv(cfg.output_dir / "preprocessing.csv",
                                        ["seed", "stat", "value"],
                                        [row for rows in nested for row in rows])}
    return {"files": files, "summary": {"k": k, "d": d}}


# ---------------------------------------------------------------------------

def run_staircase(cfg: ExperimentConfig) -> dict:
    exprs = cfg.options.get("targets")
    if not exprs:
        if cfg.target.get("kind") == "polynomial":
            exprs = [cfg.target["expression"]]
        else:
            raise ConfigError("staircase needs options.targets or a polynomial target")
    t_max = int(cfg.options.get("t_max", 8))
    payload = {}
    rows = []
    for expr in exprs:
        poly = parse_polynomial(expr)
        seq = staircase_sequence(poly, t_max=t_max)
        payload[expr] = {
            "dims": [s.dim for s in seq],
            "bases": [s.basis.tolist() for s in seq],
            "learnable": is_staircase_learnable(poly, t_max=t_max),
        }
        for t, sub in enumerate(seq):
            rows.append([expr, t, sub.dim, json.dumps(sub.basis.tolist())])
    files = {
        "staircase_json": write_json(cfg.output_dir / "staircase.json", payload),
        "staircase": write_csv(cfg.output_dir / "staircase.csv",
                               ["target", "step", "dim", "basis_json"], rows),
    }
    return {"files": files, "summary": {"targets": list(payload)}}


KIND_RUNNERS = {
    "single-step": run_single_step,
    "multi-step": run_multi_step,
    "second-step-orientation": run_second_step_orientation,
    "scaling": run_scaling,
    "generalization-sweep": run_generalization_sweep,
    "cget": run_cget,
    "preprocessing": run_preprocessing,
    "staircase": run_staircase,
}
