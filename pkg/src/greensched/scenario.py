"""Scenario configuration: cluster files, workload, thermal state, optimizer knobs.

Scenario and server files are JSON; paths inside a scenario resolve first
relative to the scenario file, then against the bundled ``fixtures``
directory, so ``"intel_xeon_e5620.json"`` works out of the box.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import power as pw
from . import sim
from .errors import ConfigurationError
from .nsga import EvolveConfig
from .tasks import LatenessConstraint
from .workload import TaskProfile, parse_workload

FIXTURES = resources.files("greensched") / "fixtures"


def _resolve(name: str, base: Path | None) -> Path:
    p = Path(name)
    if p.is_absolute() and p.exists():
        return p
    if base is not None and (base / p).exists():
        return base / p
    fixture = Path(str(FIXTURES / name))
    if fixture.exists():
        return fixture
    raise ConfigurationError(f"cannot resolve referenced file {name!r}")


def load_server_spec(path: str | Path, server_id: int | None = None) -> pw.ServerSpec:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        modes = tuple(
            pw.DvfsMode(int(i), float(f), float(v)) for i, f, v in doc["modes"]
        )
        return pw.ServerSpec(
            server_id=server_id if server_id is not None else int(doc["server_id"]),
            label=str(doc["label"]),
            a_dyn=float(doc["a_dyn"]),
            b_cpu=tuple(float(x) for x in doc["b_cpu"]),
            c_cpu=tuple(float(x) for x in doc["c_cpu"]),
            d_volt=float(doc["d_volt"]),
            e_const=float(doc["e_const"]),
            g_mem=tuple(float(x) for x in doc["g_mem"]),
            h_mem=tuple(float(x) for x in doc["h_mem"]),
            modes=modes,
            cpi=float(doc.get("cpi", 1.0)),
            n_sockets=int(doc.get("n_sockets", 1)),
            f_unused=float(doc["f_unused"]) if "f_unused" in doc else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: invalid server spec: {exc}") from exc


def save_server_spec(spec: pw.ServerSpec, path: str | Path) -> None:
    doc = {
        "server_id": spec.server_id,
        "label": spec.label,
        "a_dyn": spec.a_dyn,
        "b_cpu": list(spec.b_cpu),
        "c_cpu": list(spec.c_cpu),
        "d_volt": spec.d_volt,
        "e_const": spec.e_const,
        "g_mem": list(spec.g_mem),
        "h_mem": list(spec.h_mem),
        "modes": [[m.index, m.frequency_hz, m.voltage_v] for m in spec.modes],
        "cpi": spec.cpi,
        "n_sockets": spec.n_sockets,
    }
    if spec.f_unused is not None:
        doc["f_unused"] = spec.f_unused
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Scenario:
    cluster: tuple[sim.ClusterHost, ...]
    profiles: tuple[TaskProfile, ...]
    soft_constraints: dict[int, tuple[LatenessConstraint, ...]]
    optimizer: EvolveConfig
    phase_policy: str
    energy_unit_j: float
    dyn_energy_form: str
    digest: str  # sha256 of the canonical scenario document


def load_scenario(
    path: str | Path,
    *,
    seed: int | None = None,
    policy: str | None = None,
    generations: int | None = None,
    population: int | None = None,
    max_mode_index: int | None = None,
) -> Scenario:
    """Load a scenario JSON; keyword overrides mirror the CLI flags."""
    path = Path(path)
    base = path.parent
    with path.open(encoding="utf-8") as fh:
        doc = json.load(fh)

    hosts: list[sim.ClusterHost] = []
    thermal_default = doc.get("thermal", {})
    for entry in doc.get("cluster", []):
        spec_path = _resolve(entry["server"], base)
        count = int(entry.get("count", 1))
        thermal_doc = entry.get("thermal", thermal_default)
        for _ in range(count):
            spec = load_server_spec(spec_path, server_id=len(hosts))
            t_cpu = thermal_doc.get("t_cpu_k", [300.0])
            if isinstance(t_cpu, (int, float)):
                t_cpu = [t_cpu]
            if len(t_cpu) == 1 and spec.n_sockets > 1:
                t_cpu = t_cpu * spec.n_sockets
            thermal = pw.ThermalState(
                tuple(float(t) for t in t_cpu), float(thermal_doc.get("t_mem_k", 300.0))
            )
            hosts.append(sim.ClusterHost(spec, thermal))
    if not hosts:
        raise ConfigurationError(f"{path}: scenario defines no cluster hosts")

    if "workload" not in doc:
        raise ConfigurationError(f"{path}: scenario defines no workload")
    profiles = tuple(parse_workload(_resolve(doc["workload"], base)))

    soft_constraints: dict[int, tuple[LatenessConstraint, ...]] = {}
    for tid, pairs in doc.get("soft_constraints", {}).items():
        soft_constraints[int(tid)] = tuple(
            LatenessConstraint(float(x), float(b)) for x, b in pairs
        )

    opt_doc = doc.get("optimizer", {})
    eff_seed = seed if seed is not None else opt_doc.get("seed")
    if eff_seed is None:
        raise ConfigurationError(
            f"{path}: no seed given (set optimizer.seed or pass --seed)"
        )
    optimizer = EvolveConfig(
        population=population or int(opt_doc.get("population", 100)),
        generations=generations or int(opt_doc.get("generations", 25_000)),
        seed=int(eff_seed),
        policy=(policy or opt_doc.get("policy", doc.get("policy", "VAR"))).upper(),
        stop_window=int(opt_doc.get("stop_window", 500)),
        max_mode_index=(
            max_mode_index
            if max_mode_index is not None
            else opt_doc.get("max_mode_index")
        ),
        share_step=int(opt_doc.get("share_step", 1)),
        dyn_energy_form=doc.get("dyn_energy_form", "as-written"),
        energy_unit_j=float(doc.get("energy_unit_j", sim.ENERGY_UNIT_J)),
    )

    canonical = dict(doc)
    canonical["__overrides__"] = {
        "seed": optimizer.seed,
        "policy": optimizer.policy,
        "generations": optimizer.generations,
        "population": optimizer.population,
        "max_mode_index": optimizer.max_mode_index,
    }
    digest = hashlib.sha256(
        json.dumps(canonical, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]

    return Scenario(
        cluster=tuple(hosts),
        profiles=profiles,
        soft_constraints=soft_constraints,
        optimizer=optimizer,
        phase_policy=doc.get("phase_policy", "zero"),
        energy_unit_j=optimizer.energy_unit_j,
        dyn_energy_form=optimizer.dyn_energy_form,
        digest=digest,
    )
