"""Smoke test for the fracsub Python bindings.

Imports an installed ``fracsub_py`` if present; otherwise builds the
extension with cargo and loads it from ``target/release``.
"""

import importlib.util
import math
import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    try:
        import fracsub_py

        return fracsub_py
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "fracsub-py"], cwd=ROOT, check=True
    )
    lib = ROOT / "target" / "release" / "libfracsub_py.so"
    if not lib.exists():
        lib = lib.with_suffix(".dylib")
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    dest = Path(tempfile.mkdtemp()) / f"fracsub_py{suffix}"
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("fracsub_py", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    fs = load_module()

    # half-normal law of Z_T for beta = 1/2
    for t in (0.25, 1.0, 4.0):
        want = (math.pi * t) ** -0.5 * math.exp(-1.0 / (4.0 * t))
        assert abs(fs.inverse_density(0.5, t, 1.0) - want) < 1e-10

    law = fs.InverseStableLaw(0.5)
    assert law.beta == 0.5 and 0.0 < law.cdf(1.0, 1.0) < 1.0

    q0 = fs.ReferenceDensity(0.5).density(1.0, [0.0])
    assert abs(q0 - math.gamma(0.25) / (2 * math.pi)) < 1e-9

    s = fs.sample_positive_stable(0.5, 200_000, seed=1)
    mean = sum(math.exp(-x) for x in s) / len(s)
    assert abs(mean - math.exp(-1.0)) < 5e-3
    assert fs.sample_positive_stable(0.5, 10, seed=4) == fs.sample_positive_stable(0.5, 10, seed=4)

    ramp = [i * 1e-3 for i in range(1001)]
    cap = fs.caputo_derivative(ramp, 1e-3, 0.5)
    assert abs(cap[-1] - 1.0 / math.gamma(1.5)) < 1e-9

    scheme = fs.Scheme(0.5, h=0.01, n_paths=20_000, seed=2)
    mean, err = scheme.moment(2)
    # E X^2 = E Z_1 = 1/Gamma(1 + beta), up to O(h)
    assert abs(mean - 1.0 / math.gamma(1.5)) < 4 * err + 0.02
    assert len(scheme.sample_endpoints("exact-law")) == 20_000

    try:
        fs.Scheme(1.5)
    except ValueError as e:
        assert "beta" in str(e)
    else:
        raise AssertionError("beta outside (0, 1) accepted")

    csv = fs.run_experiment('experiment = "bounds-check"')
    assert csv.startswith("# fracsub ") and "pass=true" in csv

    print(f"fracsub_py {fs.__version__}: smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
