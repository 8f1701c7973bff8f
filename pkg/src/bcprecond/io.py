"""Solution artifacts, legacy VTK output and run manifests."""
from __future__ import annotations

import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from .errors import IoError
from .kkt import ChannelProblem, KktSystem, build_oseen_kkt, build_stokes_kkt


def save_solution(path, kkt: KktSystem, x, **meta) -> None:
    """Store a solved KKT vector with what is needed to rebuild its system."""
    np.savez(
        path, x=np.asarray(x, dtype=float), level=kkt.problem.level, alpha=kkt.alpha, beta=kkt.beta,
        nu=kkt.nu, oseen=kkt.is_oseen, meta=json.dumps(meta),
    )


def load_solution(path):
    """Return ``(kkt, x)`` from a file written by :func:`save_solution`."""
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no solution artifact at {path}")
    try:
        with np.load(path) as z:
            x = z["x"]
            level, alpha, beta, nu = int(z["level"]), float(z["alpha"]), float(z["beta"]), float(z["nu"])
            oseen = bool(z["oseen"])
    except (OSError, KeyError, ValueError) as exc:
        raise IoError(f"malformed solution artifact {path}: {exc}") from exc
    problem = ChannelProblem.build(level)
    if oseen:
        kkt = build_oseen_kkt(problem, x[: problem.dofmap.n_v], alpha, beta, nu)
    else:
        kkt = build_stokes_kkt(problem, alpha, beta)
    if x.shape != (kkt.N,):
        raise IoError(f"artifact vector has length {x.size}, expected {kkt.N}")
    return kkt, x


def write_vtk(path, kkt: KktSystem, x, title: str = "channel control solution") -> None:
    """Legacy VTK structured points: velocity and pressure on the Q1 vertices."""
    mesh = kkt.problem.mesh
    parts = kkt.split(np.asarray(x, dtype=float))
    n_s = mesh.n_q2
    idx = mesh.q1_in_q2()
    vx, vy = parts["v"][:n_s][idx], parts["v"][n_s:][idx]
    p = parts["p"]
    nl = mesh.nl
    step = 2.0 / (nl - 1)
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nl} {nl} 1",
        "ORIGIN -1 -1 0",
        f"SPACING {step:.17g} {step:.17g} 1",
        f"POINT_DATA {nl * nl}",
        "VECTORS velocity double",
    ]
    lines += [f"{a:.17g} {b:.17g} 0" for a, b in zip(vx, vy)]
    lines += ["SCALARS pressure double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.17g}" for v in p]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_points(path) -> dict:
    """Minimal reader for files produced by :func:`write_vtk`."""
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no VTK file at {path}")
    tokens = path.read_text().split("\n")
    out = {}
    i = 0
    while i < len(tokens):
        line = tokens[i].split()
        if line[:1] == ["POINT_DATA"]:
            n = int(line[1])
        elif line[:1] == ["VECTORS"]:
            out[line[1]] = np.array([tokens[i + 1 + k].split()[:3] for k in range(n)], dtype=float)
            i += n
        elif line[:1] == ["SCALARS"]:
            out[line[1]] = np.array(tokens[i + 2: i + 2 + n], dtype=float)
            i += n + 1
        i += 1
    return out


def write_manifest(path, argv, config: dict, seed: int | None = None) -> None:
    from . import __version__

    manifest = {
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "versions": {
            "bcprecond": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "platform": platform.platform(),
        },
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
