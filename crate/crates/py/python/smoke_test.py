"""Smoke test for the splitdr Python extension.

Build the extension first:

    cargo build -p splitdr-py --release

then run `python3 crates/py/python/smoke_test.py`. The extension is loaded
straight from the cargo target directory, or from SPLITDR_PY_LIB if set.
"""

import csv
import importlib.machinery
import importlib.util
import io
import math
import os
import pathlib
import sys


def load_extension():
    root = pathlib.Path(__file__).resolve().parents[3]
    candidates = [os.environ.get("SPLITDR_PY_LIB")] + [
        str(root / "target" / profile / "libsplitdr_py.so") for profile in ("release", "debug")
    ]
    for path in filter(None, candidates):
        if os.path.exists(path):
            loader = importlib.machinery.ExtensionFileLoader("splitdr", path)
            spec = importlib.util.spec_from_loader("splitdr", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("splitdr extension not found; run `cargo build -p splitdr-py --release`")


def main():
    sd = load_extension()

    value, iterations = sd.gradient_norm_sq(32, 32)
    exact = 4.0 * (1.0 + math.cos(math.pi / 32))
    assert abs(value - exact) < 1e-6, (value, exact)
    assert iterations > 0

    step = 1.0 / math.sqrt(1.0 + exact)
    ok, margin = sd.check_condition(step, step, step, 32, 32)
    assert ok and abs(margin) < 1e-6, (ok, margin)
    ok, _ = sd.check_condition(1.0, 1.0, 1.0)
    assert not ok

    grad = sd.Gradient2d(4, 5)
    assert grad.shape == (20, 40)
    x = [float((3 * i) % 7) for i in range(20)]
    y = [float((5 * i) % 11) - 5.0 for i in range(40)]
    lhs = sum(a * b for a, b in zip(grad.apply(x), y))
    rhs = sum(a * b for a, b in zip(x, grad.adjoint(y)))
    assert abs(lhs - rhs) < 1e-9, (lhs, rhs)
    assert abs(sd.Gradient2d(32, 32).norm_sq() - exact) < 1e-12

    l1 = sd.Resolvent.l1(1.0)
    assert l1.resolve([3.0, -0.5], 2.0) == [1.0, 0.0]
    assert l1.resolve([3.0, -0.5], [0.5, 0.25]) == [2.5, -0.25]
    # Moreau: the conjugate of the l1 norm is the box indicator.
    assert l1.conjugate().resolve([3.0, -0.5], 1.0) == sd.Resolvent.box_indicator(-1.0, 1.0).resolve([3.0, -0.5], 1.0)

    assert sd.soft_threshold([3.0, -0.5, -2.0], 1.0) == [2.0, 0.0, -1.0]
    # Quadratic zone: p = w / (1 + γ/δ); linear zone: p = w − γ·sign(w).
    p = sd.prox_huber([0.1, 5.0], 1.0, 1.0)
    assert abs(p[0] - 0.05) < 1e-12 and abs(p[1] - 4.0) < 1e-12, p

    sol = sd.lasso_sdr([[1.0]], [1.0], 1.0, 1.0, 1.0)
    assert sol["converged"] and sol["kkt_residual"] <= 1e-8, sol
    assert abs(sol["x"][0]) < 1e-8 and abs(sol["u"][0] + 1.0) < 1e-8, sol

    text, ok = sd.run_experiment("huber", n=2, etas=0, seeds=1)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert ok and len(rows) == 6, text
    assert all(r["status"] == "converged" for r in rows)

    text, ok = sd.run_experiment("equiv", iters=20, seeds=2)
    assert ok, text

    for bad in (lambda: sd.run_experiment("huber", eps=0), lambda: sd.soft_threshold([1.0], -1.0)):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("invalid input was accepted")

    print("splitdr python smoke test: ok")


if __name__ == "__main__":
    main()
