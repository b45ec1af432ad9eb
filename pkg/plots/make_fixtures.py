#!/usr/bin/env python3
"""Regenerate the shipped fixture CSVs under plots/fixtures/.

Each fixture is the real output of a small deterministic run of one
experiment kind, so the figure specs exercise the exact CSV schemas the
CLI emits. Rerunning this script reproduces the files byte-for-byte.
"""

import shutil
import sys
from pathlib import Path

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"

CONFIGS = {
    "single-step": """
[experiment]
kind = "single-step"
output_dir = "{out}"
seeds = [0, 1]
[target]
kind = "polynomial"
expression = "He2(z1) + He2(z2)"
teacher = "random"
[train]
d = 32
p = 24
n = "16*d^2"
T = 1
student = "He2"
second_layer_dist = "gaussian"
""",
    "multi-step": """
[experiment]
kind = "multi-step"
output_dir = "{out}"
seeds = [0]
[target]
kind = "polynomial"
expression = "z1/3 + 2*z1*z2/3 + z2*z3"
[train]
d = 64
p = 48
n = "4*d"
T = 3
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 1.0
ridge_lambda = 1.0
[options]
n_test = 2000
""",
    "second-step-orientation": """
[experiment]
kind = "second-step-orientation"
output_dir = "{out}"
seeds = [0]
[target]
kind = "polynomial"
expression = "z1 - z1^2 + z2 + z2^2"
[train]
d = 128
p = 64
n = "4*d"
T = 2
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 1.4142135623730951
""",
    "scaling": """
[experiment]
kind = "scaling"
output_dir = "{out}"
seeds = [0, 1, 2]
[target]
kind = "polynomial"
expression = "He2(z1) + He2(z2)"
[train]
p = 32
n = "1*d"
T = 1
student = "He2"
eta_rule = "theorem2"
leap = 2
[sweep]
d = [32, 64, 128]
[options]
statistic = "alignment_ratio"
""",
    "generalization-sweep": """
[experiment]
kind = "generalization-sweep"
output_dir = "{out}"
seeds = [0, 1]
[target]
kind = "polynomial"
expression = "z1 + z1*z2"
[train]
d = 48
p = 64
n = "4*d"
T = 1
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 5.0
ridge_lambda = 1e-4
[sweep]
n_over_d = [2.0, 4.0, 8.0]
[options]
methods = ["gd1", "rf"]
n_test = 2000
""",
    "generalization-p-sweep": """
[experiment]
kind = "generalization-sweep"
output_dir = "{out}"
seeds = [0, 1]
[target]
kind = "polynomial"
expression = "z1 + z1*z2"
[train]
d = 48
p = 64
n = "4*d"
T = 1
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 5.0
ridge_lambda = 1e-4
[sweep]
p = [24, 48, 96, 192]
[options]
methods = ["gd1", "rf"]
n_test = 2000
""",
    "cget": """
[experiment]
kind = "cget"
output_dir = "{out}"
seeds = [0, 1, 2]
[target]
kind = "polynomial"
expression = "z1 + z2*z3"
[train]
d = 48
p = "2*d"
n = "4*d"
T = 1
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 1.0
ridge_lambda = 1e-4
[options]
mc_samples = "50*p"
n_test = 2000
""",
    "preprocessing": """
[experiment]
kind = "preprocessing"
output_dir = "{out}"
seeds = [0, 1, 2]
[target]
kind = "polynomial"
expression = "z1 + He2(z1)/2 + He4(z1)/24 + z2 + He2(z2)/2 + He4(z2)/24"
[train]
d = 32
p = "2*d"
n = "1*d^2"
T = 1
student = "relu"
eta_rule = "alg1_scaled"
eta_scale = 5.0
ridge_lambda = 1.0
preprocess_degree = 2
[options]
n_test = 2000
""",
    "staircase": """
[experiment]
kind = "staircase"
output_dir = "{out}"
seeds = [0]
[options]
t_max = 4
targets = ["z1/3 + 2*z1*z2/3 + z2*z3", "z1 + z2*z3"]
""",
}


def main() -> int:
    sys.path.insert(0, str(HERE.parent / "src"))
    import tempfile

    from giantstep.experiments.config import parse_config
    from giantstep.experiments.runner import run_config

    for name, template in CONFIGS.items():
        with tempfile.TemporaryDirectory() as tmp:
            cfg = parse_config(template.format(out=tmp))
            run_config(cfg)
            dest = FIXTURES / name
            if dest.exists():
                shutil.rmtree(dest)
            dest.mkdir(parents=True)
            for src in sorted(Path(tmp).glob("*")):
                if src.suffix in (".csv", ".json"):
                    shutil.copy(src, dest / src.name)
        print(f"fixtures/{name}: {sorted(p.name for p in (FIXTURES / name).glob('*'))}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
