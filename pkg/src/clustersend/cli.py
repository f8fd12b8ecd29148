"""Command-line front end.

Subcommands: bounds, run, verify, sweep. Scenarios are JSON documents::

    {
      "system": {"c1": {"n": 8, "f": 3, "faulty": [0, 2, 3]},
                 "c2": {"n": 7, "f": 2, "faulty": [0, 2]},
                 "failure_model": "byzantine", "signing": "cluster"},
      "protocol": {"protocol": "bs-bcs"},       # optional, default auto
      "value": "76",                            # hex payload
      "seeds": [0, 1, 2],
      "adversary": "none"                       # or "exhaustive" or {"scripted": "trace.json"}
    }

Sweep grids are JSON documents with a list of cells::

    {"cells": [[4, 1, 4, 1], {"n1": 7, "f1": 2, "n2": 7, "f2": 2, "signing": "emulated"}],
     "failure_model": "byzantine", "signing": "cluster", "seeds": [0, 1]}

Exit status: 0 when every requested property held, 1 on a property
violation or counterexample, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from .bounds import (
    Flavor,
    Protocol,
    ProtocolChoice,
    linear_robust,
    flavor_for,
    select_protocol,
    sigma,
    sigma1,
    sigma2,
    tau,
)
from .model import ConfigurationError, SystemSpec
from .sim import (
    CSV_COLUMNS,
    AdversaryTrace,
    IllegalTrace,
    Schedule,
    campaign,
    run,
    sweep,
)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


@dataclass
class ScenarioConfig:
    system: SystemSpec
    protocol: Optional[ProtocolChoice] = None
    value: bytes = b"v"
    seeds: List[int] = field(default_factory=lambda: [0])
    adversary: Union[str, dict] = "none"

    FIELDS = ("system", "protocol", "value", "seeds", "adversary")

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioConfig":
        unknown = set(data) - set(cls.FIELDS)
        if unknown:
            raise ConfigurationError(f"unknown scenario fields: {sorted(unknown)}")
        if "system" not in data:
            raise ConfigurationError("scenario needs a 'system'")
        adversary = data.get("adversary", "none")
        if isinstance(adversary, dict):
            if set(adversary) != {"scripted"}:
                raise ConfigurationError("adversary object must be {'scripted': path-or-trace}")
        elif adversary not in ("none", "exhaustive"):
            raise ConfigurationError(f"unknown adversary {adversary!r}")
        try:
            value = bytes.fromhex(data.get("value", "76"))
        except ValueError as exc:
            raise ConfigurationError(f"value must be hex: {exc}") from None
        protocol = data.get("protocol")
        return cls(
            system=SystemSpec.from_json(data["system"]),
            protocol=ProtocolChoice.from_json(protocol) if protocol else None,
            value=value,
            seeds=[int(s) for s in data.get("seeds", [0])],
            adversary=adversary,
        )

    def to_json(self) -> dict:
        return {
            "system": self.system.to_json(),
            "protocol": self.protocol.to_json() if self.protocol else None,
            "value": self.value.hex(),
            "seeds": list(self.seeds),
            "adversary": self.adversary,
        }

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        cfg = cls.from_json(json.loads(path.read_text()))
        cfg._base = path.parent
        return cfg

    def trace(self) -> Optional[AdversaryTrace]:
        if not isinstance(self.adversary, dict):
            return None
        script = self.adversary["scripted"]
        if isinstance(script, str):
            base = getattr(self, "_base", Path("."))
            script = json.loads((base / script).read_text())
        return AdversaryTrace.from_json(script)


def _choice(args, cfg: Optional[ScenarioConfig], spec: SystemSpec) -> ProtocolChoice:
    name = getattr(args, "protocol", None) or "auto"
    if name == "auto" and cfg is not None and cfg.protocol is not None:
        return cfg.protocol
    if name == "auto":
        return select_protocol(spec, compact_certs=args.compact_certs)
    p = Protocol(name)
    flavor = flavor_for(spec) if p.partitioned else None
    return ProtocolChoice.of(p, flavor, compact_certs=args.compact_certs)



# -- subcommands --------------------------------------------------------------


def cmd_bounds(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    spec = cfg.system
    reports = []
    for name, fn in (("sigma", sigma), ("sigma1", sigma1), ("sigma2", sigma2)):
        try:
            reports.append((name, fn(spec)))
        except ConfigurationError as exc:
            print(f"{name}: undefined ({exc})")
    if spec.signing.replica_signing:
        try:
            reports.append(("tau", tau(spec)))
        except ConfigurationError as exc:
            print(f"tau: undefined ({exc})")
    for name, rep in reports:
        if args.format == "jsonl":
            print(json.dumps({"bound": name, **rep.to_json()}, sort_keys=True))
        else:
            extra = f"  [{rep.side_condition}]" if rep.side_condition else ""
            print(f"{name} = {rep.value}  (q={rep.q}, r={rep.r}){extra}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    if cfg.adversary == "exhaustive":
        raise ConfigurationError("exhaustive adversaries are driven by 'verify', not 'run'")
    spec = cfg.system
    choice = _choice(args, cfg, spec)
    trace = cfg.trace()
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    tr = run(spec, choice, cfg.value, trace, Schedule(seed=seed))
    if args.out:
        Path(args.out).write_text(tr.dumps() + "\n")
    print(tr.summary())
    return EXIT_OK if tr.ok else EXIT_VIOLATION


def cmd_verify(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    spec = cfg.system
    choice = _choice(args, cfg, spec)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    trace = cfg.trace()
    if trace is not None:
        bad = None
        for s in seeds:
            tr = run(spec, choice, cfg.value, trace, Schedule(seed=s), record=False)
            if not tr.ok:
                bad = {"trace": trace.to_json(), "seed": s, **{
                    k: getattr(tr, k) for k in ("receipt", "agreement", "confirmation")}}
                break
        summary = f"verified {len(seeds)} runs" if bad is None else "counterexample"
    else:
        report = campaign(spec.with_placement((), ()), choice, cfg.value, seeds,
                          max_enum=args.max_enum)
        bad, summary = report.counterexample, report.summary()
    print(summary)
    if bad is not None:
        text = json.dumps(bad, sort_keys=True)
        print(text)
        if args.out:
            Path(args.out).write_text(text + "\n")
        return EXIT_VIOLATION
    return EXIT_OK


def overview_grid(model: str = "byzantine", signing: str = "cluster") -> List[SystemSpec]:
    """n1, n2 in 4..10 with every f robust for the linear protocols."""
    flavor = Flavor.BRS if (model, signing) == ("byzantine", "replica") else Flavor.BCS
    k = 4 if flavor is Flavor.BRS else 3
    grid = []
    for n1 in range(4, 11):
        for n2 in range(4, 11):
            for f1 in range(0, (n1 - 1) // k + 1):
                for f2 in range(0, (n2 - 1) // k + 1):
                    spec = SystemSpec.of(n1, f1, n2, f2, model, signing)
                    if linear_robust(spec, flavor):
                        grid.append(spec)
    return grid


def size_grid(value: bytes = b"v") -> List[SystemSpec]:
    """f1 in 1..4 under native and emulated cluster signing at fixed n."""
    return [
        SystemSpec.of(9, f1, 9, 1, "byzantine", signing)
        for signing in ("cluster", "emulated")
        for f1 in range(1, 5)
    ]


def load_grid(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    unknown = set(data) - {"cells", "failure_model", "signing", "seeds", "protocol", "value"}
    if unknown:
        raise ConfigurationError(f"unknown grid fields: {sorted(unknown)}")
    model = data.get("failure_model", "byzantine")
    signing = data.get("signing", "cluster")
    cells = []
    for cell in data.get("cells", []):
        if isinstance(cell, dict):
            extra = set(cell) - {"n1", "f1", "n2", "f2", "failure_model", "signing"}
            if extra:
                raise ConfigurationError(f"unknown cell fields: {sorted(extra)}")
            cells.append(SystemSpec.of(
                cell["n1"], cell["f1"], cell["n2"], cell["f2"],
                cell.get("failure_model", model), cell.get("signing", signing)))
        else:
            cells.append(SystemSpec.of(*cell, model, signing))
    return {
        "cells": cells,
        "seeds": data.get("seeds", [0, 1, 2]),
        "protocol": ProtocolChoice.from_json(data["protocol"]) if data.get("protocol") else None,
        "value": bytes.fromhex(data.get("value", "76")),
    }


def cmd_sweep(args) -> int:
    if args.preset == "overview":
        grid = {"cells": overview_grid(), "seeds": [0], "protocol": None, "value": b"v"}
    elif args.preset == "size":
        grid = {"cells": size_grid(), "seeds": [0], "protocol": None, "value": b"v"}
    elif args.config:
        grid = load_grid(args.config)
    else:
        raise ConfigurationError("sweep needs --config or --preset")
    policy = grid["protocol"]
    if args.protocol and args.protocol != "auto":
        policy = ProtocolChoice.of(args.protocol, compact_certs=args.compact_certs)
    seeds = [args.seed] if args.seed is not None else grid["seeds"]
    rows = sweep(grid["cells"], policy, grid["value"], seeds, compact_certs=args.compact_certs)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        if args.format == "jsonl":
            for row in rows:
                out.write(json.dumps(row, sort_keys=True) + "\n")
        else:
            writer = csv.DictWriter(out, CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _cell(v) for k, v in row.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    failed = [r for r in rows if not (r["receipt"] and r["agreement"] and r["confirmation"])]
    return EXIT_VIOLATION if failed else EXIT_OK


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustersend", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario or grid JSON")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
        p.add_argument("--seed", type=int, help="schedule seed (overrides config seeds)")
        p.add_argument("--protocol", default="auto",
                       choices=["auto"] + [p.value for p in Protocol])
        p.add_argument("--compact-certs", action="store_true",
                       help="payload travels with only the minimum number of messages")
        p.add_argument("--max-enum", type=int, default=6, help="cluster-size guard for verify")

    common(sub.add_parser("bounds", help="print lower bounds with their decomposition"))
    common(sub.add_parser("run", help="execute one scenario and write its transcript"))
    common(sub.add_parser("verify", help="exhaustive verification campaign"))
    p = sub.add_parser("sweep", help="metrics table over a grid of systems")
    common(p, config_required=False)
    p.add_argument("--preset", choices=["overview", "size"], help="built-in grid instead of --config")
    return parser


COMMANDS = {"bounds": cmd_bounds, "run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, IllegalTrace, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
