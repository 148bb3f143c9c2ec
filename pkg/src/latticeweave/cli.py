"""Command-line driver: ``latticeweave {build|verify|sweep|witness}``.

Settings come from flags, then an optional ``--config`` file, then defaults.
The config file holds ``key = value`` lines; lines that are sequence
directives (``init``, ``cz``, ``hadamard``, ``measure_x``) form an embedded
custom sequence.

Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import ast
import hashlib
import json
import logging
import math
import operator
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import InvariantViolation, ResourceCapExceeded, SequenceError
from .graph_model import (
    HadamardOnEntangledVertex,
    measured_graph,
    to_adjacency_text,
    to_edge_csv,
    track_sequence,
)
from .lattice import (
    BipartitionMode,
    ConstructionSequence,
    GlobalMeasureX,
    Lattice,
    LocalRegion,
    bipartition,
    format_sequence,
    is_directive,
    iter_directives,
    parse_sequence,
    scheme_i_sequence,
    scheme_ii_sequence,
)
from .noise import NoiseKind, NoiseModel, SimulatedEnsemble, TrajectoryPlan, simulate_trajectory
from .stabilizer import canonical_form, format_canonical, run_sequence_clifford
from .statevector import DEFAULT_CAP, ideal_graph_state
from .verification import (
    _tableau_projector,
    block_edges,
    block_sites,
    default_block,
    local_fidelity,
    reports_to_csv,
    witness_map,
)

log = logging.getLogger("latticeweave")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_CAP = 0, 2, 3, 4
DEFAULT_GRID = "0,pi/40,pi/20,pi/10,pi/5,pi/2"


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def parse_angle(text: str) -> float:
    """Evaluate ``0.1``, ``pi/20``, ``3*pi/4`` and similar without ``eval``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        raise ConfigError(f"cannot parse angle {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError):
        raise ConfigError(f"cannot parse angle {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"angle {text!r} is not finite")
    return value


def parse_size(text: str) -> tuple[int, int]:
    try:
        lx, ly = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"size must look like 4x4, got {text!r}") from None
    if lx < 1 or ly < 1:
        raise ConfigError(f"size must be positive, got {text!r}")
    return lx, ly


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    scheme: str = "i"
    sequence_path: str | None = None
    sequence_text: str | None = None
    size: tuple[int, int] = (3, 3)
    backend: str = "auto"
    postselect: str = "plus"
    noise: str = "none"
    theta: float = 0.0
    grid: list[float] = field(default_factory=lambda: [parse_angle(v) for v in DEFAULT_GRID.split(",")])
    grid_text: str = DEFAULT_GRID
    schemes: list[str] = field(default_factory=lambda: ["i", "ii"])
    channels: list[str] = field(default_factory=lambda: ["dephasing", "ising"])
    trajectories: int = 2000
    seed: int = 0
    shots: int = 0
    region: str = "block"
    bipartition: str | None = None
    out: str = "."
    cap: int = DEFAULT_CAP
    dump_state: bool = False
    plot_script: bool = False

    def digest(self) -> str:
        payload = {k: v for k, v in self.__dict__.items() if k not in ("out", "sequence_path")}
        if self.sequence_path:
            try:
                payload["sequence_file"] = Path(self.sequence_path).read_text()
            except OSError:
                payload["sequence_file"] = None
        return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]

    def provenance(self) -> str:
        return f"latticeweave {__version__} seed={self.seed} config={self.digest()}"


_KEYS = {
    "scheme": ("scheme", str),
    "sequence": ("sequence_path", str),
    "size": ("size", parse_size),
    "backend": ("backend", str),
    "postselect": ("postselect", str),
    "noise": ("noise", str),
    "theta": ("theta", parse_angle),
    "grid": ("grid_text", str),
    "schemes": ("schemes", lambda v: [s.strip() for s in v.split(",") if s.strip()]),
    "channels": ("channels", lambda v: [s.strip() for s in v.split(",") if s.strip()]),
    "trajectories": ("trajectories", int),
    "seed": ("seed", int),
    "shots": ("shots", int),
    "region": ("region", str),
    "bipartition": ("bipartition", str),
    "out": ("out", str),
    "cap": ("cap", int),
}


def read_config_file(path: str) -> tuple[dict, str | None]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values: dict = {}
    seq_lines = []
    for lineno, words in iter_directives(text):
        line = " ".join(words)
        if is_directive(words):
            seq_lines.append(line)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = raw
    return values, ("\n".join(seq_lines) + "\n") if seq_lines else None


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    merged: dict = {}
    if args.config:
        file_values, seq_text = read_config_file(args.config)
        merged.update(file_values)
        if seq_text:
            cfg.sequence_text = seq_text
            merged.setdefault("scheme", "custom")
    for key in _KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    for key, raw in merged.items():
        attr, conv = _KEYS[key]
        try:
            setattr(cfg, attr, conv(raw) if isinstance(raw, str) else raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    cfg.grid = [parse_angle(v) for v in cfg.grid_text.split(",") if v.strip()]
    for flag in ("dump_state", "plot_script"):
        if getattr(args, flag, False):
            setattr(cfg, flag, True)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.scheme not in ("i", "ii", "custom"):
        raise ConfigError(f"scheme must be i, ii or custom, got {cfg.scheme!r}")
    if cfg.scheme == "custom" and not (cfg.sequence_path or cfg.sequence_text):
        raise ConfigError("custom scheme needs --sequence or sequence lines in the config file")
    if cfg.backend not in ("tableau", "statevector", "auto"):
        raise ConfigError(f"unknown backend {cfg.backend!r}")
    if cfg.postselect not in ("plus", "record"):
        raise ConfigError(f"postselect must be plus or record, got {cfg.postselect!r}")
    if cfg.noise not in ("none", "dephasing", "ising"):
        raise ConfigError(f"unknown noise channel {cfg.noise!r}")
    if cfg.theta < 0:
        raise ConfigError("theta must be non-negative")
    if not cfg.grid:
        raise ConfigError("theta grid is empty")
    if any(t < 0 for t in cfg.grid):
        raise ConfigError("theta grid values must be non-negative")
    if cfg.trajectories < 1:
        raise ConfigError("need at least one trajectory")
    if cfg.shots < 0:
        raise ConfigError("shots must be non-negative")
    if cfg.region not in ("block", "global"):
        raise ConfigError(f"region must be block or global, got {cfg.region!r}")
    if cfg.bipartition not in (None, "columns", "species", "none"):
        raise ConfigError(f"unknown bipartition mode {cfg.bipartition!r}")
    for s in cfg.schemes:
        if s not in ("i", "ii"):
            raise ConfigError(f"sweep schemes must be i or ii, got {s!r}")
    for c in cfg.channels:
        if c not in ("dephasing", "ising"):
            raise ConfigError(f"sweep channels must be dephasing or ising, got {c!r}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")


def resolve_backend(cfg: RunConfig, noisy: bool) -> str:
    if cfg.backend == "tableau" and noisy:
        raise ConfigError("the tableau backend only runs noiseless sequences")
    if cfg.backend != "auto":
        return cfg.backend
    choice = "statevector" if noisy else "tableau"
    log.info("backend auto -> %s (%s)", choice, "noise requested" if noisy else "noiseless")
    return choice


# ---------------------------------------------------------------------------
# shared plumbing


def _sequence(cfg: RunConfig, scheme: str | None = None) -> ConstructionSequence:
    scheme = scheme or cfg.scheme
    if scheme == "i":
        return scheme_i_sequence()
    if scheme == "ii":
        return scheme_ii_sequence()
    if cfg.sequence_path:
        try:
            text = Path(cfg.sequence_path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read sequence {cfg.sequence_path}: {exc}") from None
    else:
        text = cfg.sequence_text or ""
    return parse_sequence(text)


def _bip_mode(cfg: RunConfig, scheme: str) -> BipartitionMode | None:
    if cfg.bipartition == "none":
        return None
    if cfg.bipartition:
        return BipartitionMode(cfg.bipartition)
    return BipartitionMode.BY_SPECIES if scheme == "ii" else BipartitionMode.BY_COLUMNS


def _noise(kind: str, theta: float) -> NoiseModel:
    if kind == "none":
        return NoiseModel.none()
    return NoiseModel(NoiseKind(kind), theta)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _csv(cfg: RunConfig, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [f"# {cfg.provenance()}", ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class _Target:
    lattice: Lattice
    sequence: ConstructionSequence
    graph: object
    bp: object
    region: LocalRegion
    sites: tuple[int, ...] | None


def _verification_target(cfg: RunConfig, scheme: str) -> _Target:
    lattice = Lattice(*cfg.size)
    sequence = _sequence(cfg, scheme).without_measurements()
    graph = track_sequence(lattice, sequence)
    mode = _bip_mode(cfg, scheme)
    if mode is None:
        raise ConfigError("verification needs a bipartition")
    bp = bipartition(lattice, graph, mode)
    if cfg.region == "global":
        region = LocalRegion(graph.vertices, frozenset())
        sites = None
    else:
        if scheme not in ("i", "ii"):
            raise ConfigError("custom sequences need --region global")
        region = default_block(lattice, scheme, graph)
        sites = tuple(block_sites(lattice, sequence, region))
    return _Target(lattice, sequence, graph, bp, region, sites)


def _ensemble(cfg: RunConfig, target: _Target, noise: NoiseModel) -> SimulatedEnsemble:
    n_sites = target.lattice.n if target.sites is None else len(target.sites)
    if n_sites > cfg.cap:
        raise ResourceCapExceeded(f"{n_sites} qubits exceeds the statevector cap of {cfg.cap}")
    plan = TrajectoryPlan(cfg.trajectories if not noise.is_noiseless else 1, cfg.seed)
    return SimulatedEnsemble(target.lattice, target.sequence, noise, plan, target.sites, cap=cfg.cap)


# ---------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    lattice = Lattice(*cfg.size)
    sequence = _sequence(cfg)
    backend = resolve_backend(cfg, noisy=cfg.noise != "none" and cfg.theta > 0)
    _write(out / "sequence.seq", format_sequence(sequence))

    unitary = sequence.without_measurements()
    try:
        graph = track_sequence(lattice, unitary)
    except HadamardOnEntangledVertex as exc:
        log.warning("graph tracker skipped: %s", exc)
        graph = None
    if graph is not None:
        mode = _bip_mode(cfg, cfg.scheme)
        if mode is not None and graph.edges:
            bipartition(lattice, graph, mode)
        _write(out / "graph_edges.csv", f"# {cfg.provenance()}\n" + to_edge_csv(graph, lattice))
        _write(out / "graph_adjacency.txt", to_adjacency_text(graph))
        if any(isinstance(op, GlobalMeasureX) for op in sequence.ops):
            _write(out / "measured_graph_edges.csv", f"# {cfg.provenance()}\n" + to_edge_csv(measured_graph(lattice, sequence), lattice))

    policy = "force-plus" if cfg.postselect == "plus" else "record"
    summary: dict = {"backend": backend, "qubits": lattice.n, "provenance": cfg.provenance()}
    if backend == "tableau":
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
        tableau, record = run_sequence_clifford(lattice, sequence, rng, policy)
        _write(out / "stabilizers.txt", format_canonical(canonical_form(tableau), lattice.n))
        if len(record):
            rows = [(e.site, e.outcome, int(e.deterministic)) for e in record.entries]
            _write(out / "measurements.csv", _csv(cfg, ("site", "outcome", "deterministic"), rows))
    else:
        if lattice.n > cfg.cap:
            raise ResourceCapExceeded(f"{lattice.n} qubits exceeds the statevector cap of {cfg.cap}")
        plan = TrajectoryPlan(1, cfg.seed)
        state, outcomes = simulate_trajectory(
            lattice,
            sequence,
            _noise(cfg.noise, cfg.theta),
            plan.noise_rng(0),
            measure_rng=plan.sample_rng(0),
            postselect=1 if policy == "force-plus" else None,
            cap=cfg.cap,
        )
        if graph is not None and not outcomes:
            ref = ideal_graph_state(graph, set(range(lattice.n)) - graph.vertices, cap=cfg.cap)
            summary["fidelity_to_graph"] = state.fidelity_to(ref)
        if outcomes:
            rows = sorted(outcomes.items())
            _write(out / "measurements.csv", _csv(cfg, ("site", "outcome"), rows))
        if cfg.dump_state:
            with open(out / "state.bin", "wb") as fh:
                state.dump(fh)
    if graph is not None:
        summary["edges"] = len(graph.edges)
    _write(out / "build.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _tableau_report(target: _Target) -> dict:
    tableau, _ = run_sequence_clifford(target.lattice, target.sequence, policy="force-plus")
    m_a = sorted(target.region.interior & target.bp.a)
    m_b = sorted(target.region.interior & target.bp.b)
    pa = _tableau_projector(tableau, m_a, target.graph) if m_a else 1.0
    pb = _tableau_projector(tableau, m_b, target.graph) if m_b else 1.0
    return {"p_a": pa, "p_b": pb, "bound": pa + pb - 1, "trajectories": 1, "backend": "tableau"}


def cmd_verify(cfg: RunConfig) -> int:
    scheme = cfg.scheme
    target = _verification_target(cfg, scheme)
    noise = _noise(cfg.noise, cfg.theta)
    backend = resolve_backend(cfg, noisy=not noise.is_noiseless)
    out = Path(cfg.out)
    if backend == "tableau":
        data = _tableau_report(target)
        data["gme"] = data["bound"] > 0.5
        _write(out / "report.json", json.dumps(data, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    ensemble = _ensemble(cfg, target, noise)
    report = local_fidelity(ensemble, target.region, target.graph, target.bp, shots=cfg.shots or None)
    data = report.to_dict()
    data.update(
        scheme=scheme,
        noise=cfg.noise,
        theta_prime=cfg.theta,
        interior=sorted(target.region.interior),
        border=sorted(target.region.border),
        simulated_sites=list(target.sites or range(target.lattice.n)),
        provenance=cfg.provenance(),
    )
    _write(out / "report.json", json.dumps(data, indent=2, sort_keys=True) + "\n")
    _write(out / "report.csv", reports_to_csv([(cfg.theta, report)], cfg.provenance()))
    log.info("bound %.6f  exact %.6f  gme %s", report.bound, report.exact_fidelity, report.gme)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    resolve_backend(replace(cfg, backend="statevector" if cfg.backend == "auto" else cfg.backend), noisy=True)
    written = []
    for scheme in cfg.schemes:
        target = _verification_target(replace(cfg, scheme=scheme), scheme)
        for channel in cfg.channels:
            rows = []
            for theta in cfg.grid:
                ensemble = _ensemble(cfg, target, _noise(channel, theta))
                rows.append((theta, local_fidelity(ensemble, target.region, target.graph, target.bp)))
            path = out / f"sweep_scheme-{scheme}_{channel}.csv"
            _write(path, reports_to_csv(rows, cfg.provenance()))
            written.append(path.name)
    if cfg.plot_script:
        _write(out / "plot_sweep.py", _plot_script(written))
    return EXIT_OK


def cmd_witness(cfg: RunConfig) -> int:
    target = _verification_target(cfg, cfg.scheme)
    noise = _noise(cfg.noise, cfg.theta)
    resolve_backend(replace(cfg, backend="statevector" if cfg.backend == "auto" else cfg.backend), noisy=True)
    ensemble = _ensemble(cfg, target, noise)
    if cfg.region == "global":
        edges = target.graph.sorted_edges()
    else:
        edges = block_edges(target.graph, target.region)
    wm = witness_map(ensemble, edges, target.graph)
    _write(Path(cfg.out) / "witness.csv", _csv(cfg, ("u", "v", "w", "se"), wm.rows()))
    return EXIT_OK


def _plot_script(files: Sequence[str]) -> str:
    names = ", ".join(repr(f) for f in files)
    return f'''"""Plot fidelity sweeps written by latticeweave sweep."""
import csv
import matplotlib.pyplot as plt

FILES = [{names}]

fig, ax = plt.subplots()
for name in FILES:
    with open(name) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    theta = [float(r["theta_prime"]) for r in rows]
    ax.errorbar(theta, [float(r["bound"]) for r in rows], yerr=[float(r["bound_se"]) for r in rows], label=name + " bound")
    ax.plot(theta, [float(r["exact"]) for r in rows], "--", label=name + " exact")
ax.axhline(0.5, color="k", lw=0.8)
ax.set_xlabel("theta'")
ax.set_ylabel("fidelity")
ax.legend(fontsize="small")
fig.savefig("sweep.png", dpi=150)
'''


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file, may embed sequence directives")
    common.add_argument("--scheme", choices=("i", "ii", "custom"))
    common.add_argument("--sequence", help="sequence file for --scheme custom")
    common.add_argument("--size", help="sites per species, e.g. 4x4")
    common.add_argument("--backend", choices=("tableau", "statevector", "auto"))
    common.add_argument("--postselect", choices=("plus", "record"))
    common.add_argument("--noise", choices=("none", "dephasing", "ising"))
    common.add_argument("--theta", help="noise half-width theta', e.g. pi/20")
    common.add_argument("--trajectories", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--shots", type=int)
    common.add_argument("--region", choices=("block", "global"))
    common.add_argument("--bipartition", choices=("columns", "species", "none"))
    common.add_argument("--cap", type=int, help="statevector qubit cap")
    common.add_argument("--out", help="output directory")
    common.add_argument("-q", "--quiet", action="store_true", help="only report errors")

    parser = argparse.ArgumentParser(prog="latticeweave", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"latticeweave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", parents=[common], help="run a sequence and emit graph and stabilizers")
    b.add_argument("--dump-state", action="store_true", help="write state.bin (statevector backend)")
    sub.add_parser("verify", parents=[common], help="fidelity bound report for one setting")
    s = sub.add_parser("sweep", parents=[common], help="bound and exact fidelity over a theta' grid")
    s.add_argument("--grid", help=f"comma separated theta' values (default {DEFAULT_GRID})")
    s.add_argument("--schemes", help="comma separated, default i,ii")
    s.add_argument("--channels", help="comma separated, default dephasing,ising")
    s.add_argument("--plot-script", action="store_true", help="also write plot_sweep.py")
    sub.add_parser("witness", parents=[common], help="per-edge two-qubit witness values")
    return parser


_COMMANDS = {"build": cmd_build, "verify": cmd_verify, "sweep": cmd_sweep, "witness": cmd_witness}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr
    )
    try:
        cfg = build_config(args)
        log.info("config %s", cfg.provenance())
        return _COMMANDS[args.command](cfg)
    except (ConfigError, SequenceError, ValueError) as exc:
        print(f"latticeweave: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"latticeweave: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceCapExceeded as exc:
        print(f"latticeweave: resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
