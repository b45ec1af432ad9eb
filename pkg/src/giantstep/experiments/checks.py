"""Acceptance assertions over experiment CSVs, shared by `verify` and tests.

Each check reads only the documented CSV schemas, so a stored run can be
re-audited without recomputing it. Thresholds live here and nowhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .io import read_csv

BISECTRIX_DEGREES = 10.0
SPECIALIZATION_MIN_COS = 0.6
SPECIALIZATION_MIN_SPREAD_DEG = 60.0
THM1_SLOPE_RANGE = (-0.75, -0.25)
NORMCONC_MAX_MEDIAN_DEV = 0.10
NORMCONC_SLOPE_RANGE = (-0.8, -0.2)
ORIENTATION_MAX_COS_DIST = 0.1
CGET_MAX_RELATIVE_GAP = 0.05
RF_IMPROVEMENT_FACTOR = 0.5
RF_AGREEMENT_TOL = 0.20
PREPROCESS_MIN_SHRINK = 5.0
LOWER_BOUND_VALUE = 1.0
LOWER_BOUND_TOL = 0.1


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _floats(rows, key):
    return np.array([float(r[key]) for r in rows])


def _cos_columns(rows):
    r = 1
    while f"cos_{r + 1}" in rows[0]:
        r += 1
    return np.array([[float(row[f"cos_{k + 1}"]) for k in range(r)] for row in rows])


def bisectrix_angles_deg(pairs: np.ndarray) -> np.ndarray:
    """Angle (degrees) between each cosine pair and the bisectrix line."""
    norms = np.linalg.norm(pairs, axis=1)
    along = np.abs(pairs @ np.array([1.0, 1.0]) / math.sqrt(2.0))
    cosang = np.clip(along / np.maximum(norms, 1e-300), 0.0, 1.0)
    return np.degrees(np.arccos(cosang))


def line_spread_deg(pairs: np.ndarray) -> float:
    """Largest pairwise angle between neuron directions, as lines (<= 90)."""
    units = pairs / np.maximum(np.linalg.norm(pairs, axis=1, keepdims=True), 1e-300)
    inner = np.abs(units @ units.T)
    return float(np.degrees(np.arccos(np.clip(inner.min(), -1.0, 1.0))))


def check_single_step_leap1(files, config) -> list[CheckResult]:
    rows = read_csv(files["alignment_gradient"])
    pairs = _cos_columns(rows)
    angles = bisectrix_angles_deg(pairs)
    frac = float(np.mean(angles <= BISECTRIX_DEGREES))
    return [CheckResult(
        "single-step-leap1-bisectrix", frac >= 0.9,
        f"{100 * frac:.1f}% of neurons within {BISECTRIX_DEGREES} deg of the bisectrix")]

def check_single_step_leap2(files, config) -> list[CheckResult]:
    rows = read_csv(files["alignment_gradient"])
    pairs = _cos_columns(rows)
    max1, max2 = np.max(np.abs(pairs), axis=0)
    spread = line_spread_deg(pairs)
    ok = (max1 >= SPECIALIZATION_MIN_COS and max2 >= SPECIALIZATION_MIN_COS
          and spread >= SPECIALIZATION_MIN_SPREAD_DEG)
    return [CheckResult(
        "single-step-leap2-specialization", ok,
        f"max|cos|=({max1:.2f}, {max2:.2f}) (need >= {SPECIALIZATION_MIN_COS}), "
        f"spread={spread:.0f} deg (need >= {SPECIALIZATION_MIN_SPREAD_DEG})")]


def _median_by_d(rows, statistic):
    stat_rows = [r for r in rows if r["statistic"] == statistic]
    dims = sorted({int(r["d"]) for r in stat_rows})
    med = {d: float(np.median([float(r["value"]) for r in stat_rows if int(r["d"]) == d]))
           for d in dims}
    return dims, med


def _loglog_slope(dims, med):
    x = np.log([float(d) for d in dims])
    y = np.log([med[d] for d in dims])
    return float(np.polyfit(x, y, 1)[0])


def check_thm1_slope(files, config) -> list[CheckResult]:
    rows = read_csv(files["scaling"])
    dims, med = _median_by_d(rows, "median_alignment_ratio")
    slope = _loglog_slope(dims, med)
    lo, hi = THM1_SLOPE_RANGE
    return [CheckResult("scaling-thm1-slope", lo <= slope <= hi,
                        f"log-log slope {slope:.3f} in [{lo}, {hi}] over d={dims}")]


def check_norm_concentration(files, config) -> list[CheckResult]:
    rows = read_csv(files["scaling"])
    dims, med = _median_by_d(rows, "median_rel_deviation")
    top = med[max(dims)]
    slope = _loglog_slope(dims, med)
    lo, hi = NORMCONC_SLOPE_RANGE
    return [
        CheckResult("norm-concentration-median", top <= NORMCONC_MAX_MEDIAN_DEV,
                    f"median relative deviation {top:.3f} at d={max(dims)} "
                    f"(need <= {NORMCONC_MAX_MEDIAN_DEV})"),
        CheckResult("norm-concentration-slope", lo <= slope <= hi,
                    f"log-log slope {slope:.3f} in [{lo}, {hi}] over d={dims}"),
    ]


def check_spike_bulk(files, config) -> list[CheckResult]:
    rows = read_csv(files["scaling"])
    out = []
    for statistic in ("delta_opnorm_rowscaled", "delta_teacher_inner_pscaled"):
        dims, med = _median_by_d(rows, statistic)
        values = [med[d] for d in dims]
        monotone = all(b <= a for a, b in zip(values, values[1:]))
        out.append(CheckResult(
            f"spike-bulk-{statistic}", monotone,
            "medians " + " -> ".join(f"{v:.4f}" for v in values) + f" over d={dims}"))
    return out


def check_orientation(files, config) -> list[CheckResult]:
    rows = read_csv(files["orientation"])
    out = []
    for sign in (1, -1):
        sel = [r for r in rows if int(r["a_sign"]) == sign]
        q = np.array([[float(r["q_1"]), float(r["q_2"])] for r in sel])
        q = q[~np.isnan(q).any(axis=1)]
        mean_dir = q.mean(axis=0)
        mean_dir /= np.linalg.norm(mean_dir)
        # cos distance of the mean direction to the prediction, via stored cosines
        pred_rows = read_csv(files["predictions"])
        pred = next(np.array([float(r["v_1"]), float(r["v_2"])])
                    for r in pred_rows if int(r["a_sign"]) == sign)
        dist = 1.0 - float(mean_dir @ pred)
        out.append(CheckResult(
            f"second-step-orientation-a{'+' if sign > 0 else '-'}",
            dist <= ORIENTATION_MAX_COS_DIST,
            f"cosine distance {dist:.3f} (need <= {ORIENTATION_MAX_COS_DIST})"))
    return out


def check_cget(files, config) -> list[CheckResult]:
    rows = read_csv(files["cget"])
    ck = _floats(rows, "err_ck").mean()
    cl = _floats(rows, "err_cl").mean()
    gap = abs(ck - cl) / ck
    return [CheckResult("cget-equivalence", gap <= CGET_MAX_RELATIVE_GAP,
                        f"mean err_CK={ck:.4f}, err_CL={cl:.4f}, gap {100 * gap:.2f}% "
                        f"(need <= {100 * CGET_MAX_RELATIVE_GAP:.0f}%)")]


def _median_mse(rows, method):
    return float(np.median([float(r["test_mse_normalized"]) for r in rows
                            if r["method"] == method]))


def check_rf_improvement(files, config) -> list[CheckResult]:
    rows = read_csv(files["generalization"])
    gd, rf = _median_mse(rows, "gd1"), _median_mse(rows, "rf")
    return [CheckResult("feature-learning-beats-rf", gd <= RF_IMPROVEMENT_FACTOR * rf,
                        f"gd1 {gd:.3f} vs rf {rf:.3f} (need gd <= {RF_IMPROVEMENT_FACTOR} rf)")]


def check_rf_agreement(files, config) -> list[CheckResult]:
    rows = read_csv(files["generalization"])
    gd, rf = _median_mse(rows, "gd1"), _median_mse(rows, "rf")
    gap = abs(gd - rf) / rf
    return [CheckResult("hard-direction-matches-rf", gap <= RF_AGREEMENT_TOL,
                        f"gd1 {gd:.3f} vs rf {rf:.3f}, gap {100 * gap:.1f}% "
                        f"(need <= {100 * RF_AGREEMENT_TOL:.0f}%)")]


def check_lower_bound(files, config) -> list[CheckResult]:
    rows = read_csv(files["generalization"])
    errs = [float(r["test_mse"]) for r in rows if r["method"] == "gd1"]
    low = min(errs)
    return [CheckResult("fixed-width-lower-bound",
                        low >= LOWER_BOUND_VALUE - LOWER_BOUND_TOL,
                        f"min gd1 test mse {low:.3f} "
                        f">= {LOWER_BOUND_VALUE} - {LOWER_BOUND_TOL}")]


def check_preprocessing(files, config) -> list[CheckResult]:
    rows = read_csv(files["preprocessing"])

    def values(stat):
        return np.array([float(r["value"]) for r in rows if r["stat"] == stat])

    shrink = float(np.median(values("shrink_factor")))
    vanilla = float(np.median(values("mse_vanilla")))
    pre = float(np.median(values("mse_preprocessed")))
    return [
        CheckResult("preprocessing-coeff-shrink", shrink >= PREPROCESS_MIN_SHRINK,
                    f"median shrink factor {shrink:.1f}x (need >= {PREPROCESS_MIN_SHRINK}x)"),
        CheckResult("preprocessing-improves-error", pre < vanilla,
                    f"median mse preprocessed {pre:.4f} < vanilla {vanilla:.4f}"),
    ]


STAIRCASE_CATALOGUE = {
    "z1 + z2 + z1^2 - z2^2": {"dims": [0, 1, 2, 2],
                              "u1": [[0.5 ** 0.5, 0.5 ** 0.5]]},
    "z1 + z2 + z1^2 + z2^2": {"dims": [0, 1, 1, 1],
                              "u1": [[0.5 ** 0.5, 0.5 ** 0.5]]},
    "z1 + z2*z3": {"dims": [0, 1, 1, 1], "u1": [[1.0, 0.0, 0.0]]},
    "z1/3 + 2*z1*z2/3 + z2*z3": {"dims": [0, 1, 2, 3],
                                 "added": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
    "z1/3 + 2*He2(z1)*z2 + z1*z3": {"dims": [0, 1, 3, 3], "u1": [[1.0, 0.0, 0.0]]},
    "z1 + z1^2 + z2 + z2^2 + z3 + z3^2": {
        "dims": [0, 1, 1, 1],
        "u1": [[3 ** -0.5, 3 ** -0.5, 3 ** -0.5]]},
}


def _span_matches(basis, expected, tol=1e-8):
    """True iff the orthonormal rows of `basis` span exactly span(expected)."""
    expected = np.atleast_2d(np.asarray(expected, dtype=float))
    basis = np.asarray(basis, dtype=float)
    if basis.size == 0:
        basis = basis.reshape(0, expected.shape[1])
    if basis.shape[0] != np.linalg.matrix_rank(expected, tol=1e-10):
        return False
    for vec in expected:
        resid = vec - basis.T @ (basis @ vec)
        if np.linalg.norm(resid) > tol * max(np.linalg.norm(vec), 1.0):
            return False
    return True


def check_staircase_catalogue(files, config) -> list[CheckResult]:
    with open(files["staircase_json"]) as fh:
        payload = json.load(fh)
    out = []
    for expr, expected in STAIRCASE_CATALOGUE.items():
        if expr not in payload:
            out.append(CheckResult(f"staircase[{expr}]", False, "target missing from run"))
            continue
        got = payload[expr]
        tmax = len(expected["dims"]) - 1
        dims_ok = got["dims"][: tmax + 1] == expected["dims"]
        span_ok = dims_ok
        if span_ok and "u1" in expected:
            span_ok = _span_matches(np.asarray(got["bases"][1], dtype=float), expected["u1"])
        if span_ok and "added" in expected:
            for t in range(1, len(expected["added"]) + 1):
                exp_vecs = np.asarray(expected["added"][:t], dtype=float)
                if not _span_matches(np.asarray(got["bases"][t], dtype=float), exp_vecs):
                    span_ok = False
                    break
        out.append(CheckResult(f"staircase[{expr}]", dims_ok and span_ok,
                               f"dims {got['dims'][: tmax + 1]} expected {expected['dims']}"))
    return out


ACCEPTANCE_CHECKS = {
    "single-step-leap1": check_single_step_leap1,
    "single-step-leap2": check_single_step_leap2,
    "scaling-thm1": check_thm1_slope,
    "norm-concentration": check_norm_concentration,
    "spike-bulk": check_spike_bulk,
    "second-step-orientation": check_orientation,
    "cget-equivalence": check_cget,
    "rf-improvement": check_rf_improvement,
    "rf-agreement": check_rf_agreement,
    "lower-bound": check_lower_bound,
    "preprocessing": check_preprocessing,
    "staircase-catalogue": check_staircase_catalogue,
}


def run_checks(names, files, config) -> list[CheckResult]:
    out = []
    for name in names:
        if name not in ACCEPTANCE_CHECKS:
            out.append(CheckResult(name, False, "unknown acceptance check"))
            continue
        out.extend(ACCEPTANCE_CHECKS[name](files, config))
    return out
