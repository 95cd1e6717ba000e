"""Generated numba kernels for ensembles of Euler-Maruyama paths.

Coefficient expressions are inlined into a kernel module written to an on-disk
cache directory (so numba's own cache can reuse the machine code across
processes).  Kernels process an index range ``[lo, hi)`` of paths and write
into caller-owned arrays, which is what lets the driver split paths across
threads without changing any per-path result.
"""

from __future__ import annotations

import hashlib
import importlib.util
import math
import os
import sys
import threading
from pathlib import Path

import numba as nb

from .expr import to_source

# ---------------------------------------------------------------- helpers
# Domain checks mirror expr.evaluate so that compiled and interpreted
# evaluation fail on the same inputs.


@nb.njit(nogil=True, cache=True)
def _log(v):
    if v <= 0.0:
        raise ValueError("log of non-positive value")
    return math.log(v)


@nb.njit(nogil=True, cache=True)
def _sqrt(v):
    if v < 0.0:
        raise ValueError("sqrt of negative value")
    return math.sqrt(v)


@nb.njit(nogil=True, cache=True)
def _div(a, b):
    if b == 0.0:
        raise ValueError("division by zero")
    return a / b


@nb.njit(nogil=True, cache=True)
def _pow(a, b):
    if a < 0.0 and b != math.floor(b):
        raise ValueError("negative base with non-integer exponent")
    if a == 0.0 and b < 0.0:
        raise ValueError("division by zero (0 raised to a negative power)")
    return a ** b


@nb.njit(nogil=True, cache=True)
def _sign(v):
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@nb.njit(nogil=True, cache=True)
def _step(v):
    return 0.5 * (_sign(v) + 1.0)


# -------------------------------------------------------------- templates

_HEADER = """\
import math
import numba as nb
import numpy as np
from fkpoisson._kernels import _log, _sqrt, _div, _pow, _sign, _step
from fkpoisson.rng import normal_pair
"""

# exp(-A) is refused past this exponent instead of overflowing
MAX_EXPONENT = 700.0


def _indent(lines, n):
    pad = " " * n
    return "\n".join(pad + ln for ln in lines)


def _step_lines(d, m, drift_src, sigma_src, c_src, f_src):
    """Body of one Euler step at the left endpoint (x1..xd, A, I in scope)."""
    lines = []
    if c_src is not None:
        lines.append(f"cv = {c_src}")
    if f_src is not None:
        lines.append(f"if -A > {MAX_EXPONENT}:")
        lines.append("    st = 2")
        lines.append("    break")
        lines.append(f"I += math.exp(-A) * ({f_src}) * dt")
    for i in range(d):
        lines.append(f"b{i + 1} = {drift_src[i]}")
    for i in range(d):
        for j in range(m):
            lines.append(f"s{i + 1}_{j + 1} = {sigma_src[i][j]}")
    for j in range(m):
        lines.append(f"idx = n * {m} + {j}")
        lines.append("blk = idx >> 1")
        lines.append("if blk != cb:")
        lines.append("    za, zb = normal_pair(k0, k1, sid, blk)")
        lines.append("    cb = blk")
        lines.append(f"z{j + 1} = sgn * (za if (idx & 1) == 0 else zb)")
    for i in range(d):
        noise = " + ".join(f"s{i + 1}_{j + 1} * z{j + 1}" for j in range(m))
        lines.append(f"y{i + 1} = x{i + 1} + b{i + 1} * dt + ({noise}) * sqdt")
    if c_src is not None:
        lines.append("A += cv * dt")
    for i in range(d):
        lines.append(f"x{i + 1} = y{i + 1}")
    return lines


def _load_lines(d):
    lines = ["row = p if x0s.shape[0] > 1 else 0"]
    lines += [f"x{i + 1} = x0s[row, {i}]" for i in range(d)]
    lines += [
        "A = 0.0",
        "I = 0.0",
        "q = p + poff",
        "if antithetic:",
        "    sid = q >> 1",
        "    sgn = -1.0 if (q & 1) == 1 else 1.0",
        "else:",
        "    sid = q",
        "    sgn = 1.0",
        "cb = -1",
        "za = 0.0",
        "zb = 0.0",
        "st = 0",
    ]
    return lines


def _record_lines(d, when):
    lines = [f"while k < nck and ckpts[k] == {when}:"]
    lines += [f"    out_x[p, k, {i}] = x{i + 1}" for i in range(d)]
    lines += ["    out_a[p, k] = A", "    out_i[p, k] = I", "    k += 1"]
    return lines


def _run_paths_source(d, m, drift_src, sigma_src, c_src, f_src):
    norm2 = " + ".join(f"x{i + 1} * x{i + 1}" for i in range(d))
    body = _step_lines(d, m, drift_src, sigma_src, c_src, f_src)
    body += [
        f"if guard2 > 0.0 and ({norm2}) > guard2:",
        "    st = 1",
        "    break",
    ]
    body += _record_lines(d, "n + 1")
    fill = ["while k < nck:"]
    fill += [f"    out_x[p, k, {i}] = math.nan" for i in range(d)]
    fill += ["    out_a[p, k] = math.nan", "    out_i[p, k] = math.nan", "    k += 1"]
    return (
        "\n@nb.njit(nogil=True, cache=True)\n"
        "def run_paths(lo, hi, poff, x0s, nsteps, dt, ckpts, k0, k1, antithetic, guard2,\n"
        "              out_x, out_a, out_i, status):\n"
        "    sqdt = math.sqrt(dt)\n"
        "    nck = ckpts.shape[0]\n"
        "    for p in range(lo, hi):\n"
        + _indent(_load_lines(d), 8) + "\n"
        "        k = 0\n"
        + _indent(_record_lines(d, "0"), 8) + "\n"
        "        for n in range(nsteps):\n"
        + _indent(body, 12) + "\n"
        "        status[p] = st\n"
        + _indent(fill, 8) + "\n"
    )


def _exit_paths_source(d, m, drift_src, sigma_src, c_src, f_src):
    dist2 = " + ".join(f"(x{i + 1} - center[{i}]) * (x{i + 1} - center[{i}])" for i in range(d))
    body = _step_lines(d, m, drift_src, sigma_src, c_src, f_src)
    body += [
        f"if ({dist2}) >= r2:",
        "    ex = True",
        "    steps = n + 1",
        "    break",
    ]
    return (
        "\n@nb.njit(nogil=True, cache=True)\n"
        "def exit_paths(lo, hi, poff, x0s, center, r2, max_steps, dt, k0, k1, antithetic,\n"
        "               out_tau, out_x, out_a, out_i, out_exited, status):\n"
        "    sqdt = math.sqrt(dt)\n"
        "    for p in range(lo, hi):\n"
        + _indent(_load_lines(d), 8) + "\n"
        "        ex = False\n"
        "        steps = max_steps\n"
        "        for n in range(max_steps):\n"
        + _indent(body, 12) + "\n"
        "        out_tau[p] = steps * dt if st == 0 else math.nan\n"
        + _indent([f"out_x[p, {i}] = x{i + 1}" for i in range(d)], 8) + "\n"
        "        out_a[p] = A\n"
        "        out_i[p] = I\n"
        "        out_exited[p] = ex\n"
        "        status[p] = st\n"
    )


def _coupled_source(d, m, drift_src, sigma_src, c_src, f_src):
    """Levels l = 0..nlev-1 with steps dtf * 2^l driven by one fine Brownian path."""
    c_src = "0.0" if c_src is None else c_src
    f_src = "0.0" if f_src is None else f_src
    lines = ["sid = p + poff", "cb = -1", "za = 0.0", "zb = 0.0", "st = 0",
             "row = p if x0s.shape[0] > 1 else 0",
             "for l in range(nlev):"]
    lines += [f"    X[l, {i}] = x0s[row, {i}]" for i in range(d)]
    lines += ["    A[l] = 0.0", "    I[l] = 0.0"]
    lines += [f"    W[l, {j}] = 0.0" for j in range(m)]
    body = []
    for j in range(m):
        body += [
            f"idx = n * {m} + {j}",
            "blk = idx >> 1",
            "if blk != cb:",
            "    za, zb = normal_pair(k0, k1, sid, blk)",
            "    cb = blk",
            "z = (za if (idx & 1) == 0 else zb) * sq",
            "for l in range(nlev):",
            f"    W[l, {j}] += z",
        ]
    step = ["if (n + 1) % (1 << l) != 0:", "    continue", "h = dtf * (1 << l)"]
    step += [f"x{i + 1} = X[l, {i}]" for i in range(d)]
    step += [
        f"cv = {c_src}",
        f"if -A[l] > {MAX_EXPONENT}:",
        "    st = 2",
        "    break",
        f"I[l] += math.exp(-A[l]) * ({f_src}) * h",
    ]
    step += [f"b{i + 1} = {drift_src[i]}" for i in range(d)]
    step += [f"s{i + 1}_{j + 1} = {sigma_src[i][j]}" for i in range(d) for j in range(m)]
    for i in range(d):
        noise = " + ".join(f"s{i + 1}_{j + 1} * W[l, {j}]" for j in range(m))
        step.append(f"X[l, {i}] = x{i + 1} + b{i + 1} * h + ({noise})")
    step.append("A[l] += cv * h")
    step += [f"W[l, {j}] = 0.0" for j in range(m)]
    body += ["for l in range(nlev):"] + ["    " + ln for ln in step]
    body += ["if st != 0:", "    break"]
    out = ["for l in range(nlev):", "    out_i[p, l] = I[l] if st == 0 else math.nan"]
    out += [f"    out_x[p, l, {i}] = X[l, {i}]" for i in range(d)]
    out += ["status[p] = st"]
    return (
        "\n@nb.njit(nogil=True, cache=True)\n"
        "def coupled_paths(lo, hi, poff, x0s, nfine, dtf, nlev, k0, k1, out_x, out_i, status):\n"
        "    sq = math.sqrt(dtf)\n"
        f"    X = np.empty((nlev, {d}))\n"
        "    A = np.empty(nlev)\n"
        "    I = np.empty(nlev)\n"
        f"    W = np.empty((nlev, {m}))\n"
        "    for p in range(lo, hi):\n"
        + _indent(lines, 8) + "\n"
        "        for n in range(nfine):\n"
        + _indent(body, 12) + "\n"
        + _indent(out, 8) + "\n"
    )


def kernel_source(model, c=None, f=None) -> str:
    d, m = model.dimension, model.noise_dimension
    drift_src = [to_source(e) for e in model.drift]
    sigma_src = [[to_source(e) for e in row] for row in model.sigma]
    c_src = None if c is None else to_source(c)
    f_src = None if f is None else to_source(f)
    return (
        _HEADER
        + _run_paths_source(d, m, drift_src, sigma_src, c_src, f_src)
        + _exit_paths_source(d, m, drift_src, sigma_src, c_src, f_src)
        + _coupled_source(d, m, drift_src, sigma_src, c_src, f_src)
    )


# ------------------------------------------------------------------ cache

_loaded: dict = {}
_lock = threading.Lock()


def cache_dir() -> Path:
    root = os.environ.get("FKPOISSON_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "fkpoisson" / "kernels"
    path.mkdir(parents=True, exist_ok=True)
    return path


def get_kernels(model, c=None, f=None):
    """Compiled kernel module for this coefficient set (memoised)."""
    src = kernel_source(model, c, f)
    digest = hashlib.sha256(src.encode()).hexdigest()[:20]
    with _lock:
        mod = _loaded.get(digest)
        if mod is not None:
            return mod
        name = f"fk_kernel_{digest}"
        path = cache_dir() / f"{name}.py"
        if not path.exists() or path.read_text() != src:
            tmp = path.with_suffix(f".tmp{os.getpid()}")
            tmp.write_text(src)
            os.replace(tmp, path)
        spec = importlib.util.spec_from_file_location(name, path)
        mod = importlib.util.module_from_spec(spec)
        sys.modules[name] = mod
        spec.loader.exec_module(mod)
        _loaded[digest] = mod
        return mod
