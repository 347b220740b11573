"""Run configuration files for ``entroreact simulate``.

INI-style, sectioned ``key = value``. Relative paths are resolved against the
directory holding the config file. A complete example::

    [network]
    file = so2.crn

    [grid]
    dim = 1
    length = 1.0            # 2D: length = 1.0, 1.0
    cells = 200             # 2D: cells = 64, 64

    [initial]               # one profile per species
    SO2 = cosine(1, 0.5, 1)
    O2 = constant(1)
    SO3 = cosine(1, -0.5, 1)

    [time]
    t_end = 10
    dt_init = 0.001
    dt_min = 1e-12
    dt_max = 0.1
    tol = 1e-8
    safety = 0.9
    positivity_floor = 1e-13
    scheme = tr_bdf2        # or backward_euler

    [diagnostics]
    cadence = 0.01
    totals = 2, 7           # or: equilibrium = 1, 1, 1
    mu = auto               # or a comma-separated vector

    [output]
    diagnostics = so2_diagnostics.csv
    snapshot = so2_final.csv
    checkpoint = so2.ckpt   # optional
    checkpoint_at = 5       # optional; default is the final state

    [run]
    seed = 0
    threads = 1
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .crn import load_network
from .grid import Grid
from .solver import SimulationConfig

__all__ = ["RunConfig", "load_run_config", "parse_vector"]

_KNOWN = {
    "network": {"file"},
    "grid": {"dim", "length", "cells"},
    "time": {"t_end", "dt_init", "dt_min", "dt_max", "tol", "safety", "positivity_floor", "scheme"},
    "diagnostics": {"cadence", "totals", "equilibrium", "mu"},
    "output": {"diagnostics", "snapshot", "checkpoint", "checkpoint_at"},
    "run": {"seed", "threads"},
}


def parse_vector(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None


@dataclass
class RunConfig:
    path: Path
    network_path: Path
    simulation: SimulationConfig
    diagnostics_path: Path
    snapshot_path: Path
    checkpoint_path: Path | None = None
    checkpoint_at: float | None = None


def load_run_config(path, threads: int | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # species names are case sensitive
    cp.read(path, encoding="utf-8")
    for section in cp.sections():
        if section == "initial":
            continue
        if section not in _KNOWN:
            raise ValueError(f"{path}: unknown section [{section}]")
        unknown = set(cp[section]) - _KNOWN[section]
        if unknown:
            raise ValueError(f"{path}: unknown key(s) {sorted(unknown)} in [{section}]")
    base = path.parent

    def need(section, key):
        if not cp.has_option(section, key):
            raise ValueError(f"{path}: missing [{section}] {key}")
        return cp.get(section, key)

    net_path = base / need("network", "file")
    if not net_path.is_file():
        raise FileNotFoundError(f"network file not found: {net_path}")
    net = load_network(net_path)

    dim = int(cp.get("grid", "dim", fallback="1"))
    lengths = parse_vector(need("grid", "length"))
    cells = tuple(int(c) for c in parse_vector(need("grid", "cells")))
    if len(lengths) != dim or len(cells) != dim:
        raise ValueError(f"{path}: [grid] length and cells need {dim} value(s)")
    grid = Grid(lengths, cells)

    if not cp.has_section("initial"):
        raise ValueError(f"{path}: missing [initial] section")
    init = dict(cp["initial"])
    missing = [s for s in net.species if s not in init]
    extra = [s for s in init if s not in net.species]
    if missing or extra:
        raise ValueError(
            f"{path}: [initial] must list exactly the species {list(net.species)}"
            + (f"; missing {missing}" if missing else "")
            + (f"; unknown {extra}" if extra else "")
        )

    t = cp["time"] if cp.has_section("time") else {}
    diag = cp["diagnostics"] if cp.has_section("diagnostics") else {}
    mu_text = diag.get("mu", "auto").strip()
    if threads is None:
        threads = int(cp.get("run", "threads", fallback="1"))
    sim = SimulationConfig(
        system=net,
        grid=grid,
        initial=tuple(init[s] for s in net.species),
        t_end=float(need("time", "t_end")),
        dt_init=float(t.get("dt_init", 1e-3)),
        dt_min=float(t.get("dt_min", 1e-12)),
        dt_max=float(t.get("dt_max", 0.1)),
        tol=float(t.get("tol", 1e-8)),
        safety=float(t.get("safety", 0.9)),
        positivity_floor=float(t.get("positivity_floor", 1e-13)),
        scheme=t.get("scheme", "tr_bdf2").strip(),
        cadence=float(diag.get("cadence", 0.01)),
        totals=parse_vector(diag["totals"]) if "totals" in diag else None,
        equilibrium=parse_vector(diag["equilibrium"]) if "equilibrium" in diag else None,
        mu=mu_text if mu_text == "auto" else parse_vector(mu_text),
        seed=int(cp.get("run", "seed", fallback="0")),
        threads=threads,
        checkpoint_at=(),
    )
    out = cp["output"] if cp.has_section("output") else {}
    ckpt = out.get("checkpoint")
    ckpt_at = float(out["checkpoint_at"]) if "checkpoint_at" in out else None
    if ckpt_at is not None:
        sim.checkpoint_at = (ckpt_at,)
    stem = path.stem
    return RunConfig(
        path=path,
        network_path=net_path,
        simulation=sim,
        diagnostics_path=base / out.get("diagnostics", f"{stem}_diagnostics.csv"),
        snapshot_path=base / out.get("snapshot", f"{stem}_final.csv"),
        checkpoint_path=base / ckpt if ckpt else None,
        checkpoint_at=ckpt_at,
    )
