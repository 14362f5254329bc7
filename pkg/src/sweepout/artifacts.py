"""Readers and writers for draw, thinning, JSON and CSV artifacts, plus run manifests."""

from __future__ import annotations

import csv
import json
import platform
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .randomseq import ProbabilityProfile, RandomDraw, ThinningResult
from .torus import format_rational

SECTIONS = ("B", "D", "E", "UNRESOLVED", "UNCOVERED")


def _header(path) -> tuple[dict, list]:
    meta, body = {}, []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    return meta, body


def write_draw(draw: RandomDraw, path) -> None:
    if draw.profile.override is not None:
        raise ValueError("draws from overridden profiles are not serializable")
    lines = [f"# seed={draw.seed}", f"# eta={format_rational(draw.profile.eta)}",
             f"# n_start={draw.profile.n_start}", f"# t_max={draw.t_max}"]
    lines += [str(n) for n in draw.selected]
    Path(path).write_text("\n".join(lines) + "\n")


def read_draw(path) -> RandomDraw:
    meta, body = _header(path)
    try:
        profile = ProbabilityProfile(Fraction(meta["eta"]), int(meta["n_start"]))
        draw = RandomDraw(int(meta["seed"]), profile, int(meta["t_max"]),
                          tuple(int(x) for x in body))
    except KeyError as exc:
        raise ValueError(f"draw file {path} lacks header field {exc}") from None
    if list(draw.selected) != sorted(set(draw.selected)):
        raise ValueError(f"draw file {path} is not strictly increasing")
    return draw


def write_thinning(result: ThinningResult, path, *, eta: Fraction, t_max: int) -> None:
    lines = [f"# eta={format_rational(eta)}", f"# t_max={t_max}"]
    for name, values in result.to_sections().items():
        lines.append(f"[{name}]")
        lines += [str(v) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_thinning(path) -> tuple[dict, dict]:
    """(header, sections) with each section a tuple of ints."""
    meta, body = _header(path)
    sections = {name: [] for name in SECTIONS}
    current = None
    for line in body:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current not in sections:
                raise ValueError(f"unknown section {line}")
        elif current is None:
            raise ValueError("value before first section")
        else:
            sections[current].append(int(line))
    return meta, {k: tuple(v) for k, v in sections.items()}


def thinning_from_sections(sections: dict, grid) -> ThinningResult:
    occupancy: dict = {}
    for n in sections["B"] + sections["D"] + sections["E"] + sections["UNRESOLVED"]:
        occupancy.setdefault(grid.index_of(n), 0)
    for b in sections["B"]:
        occupancy[grid.index_of(b)] += 1
    return ThinningResult(sections["B"], sections["D"], sections["E"],
                          sections["UNRESOLVED"], sections["UNCOVERED"], occupancy)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class Manifest:
    """Run record written next to the primary output as ``<out>.manifest.json``."""

    def __init__(self, subcommand: str, parameters: dict):
        self.subcommand = subcommand
        self.parameters = parameters
        self.inputs: list = []
        self.outputs: list = []
        self._t0 = time.perf_counter()
        self._started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def write(self, primary_out, status: int) -> Path:
        path = Path(f"{primary_out}.manifest.json")
        write_json({"subcommand": self.subcommand,
                    "parameters": self.parameters,
                    "inputs": [str(p) for p in self.inputs],
                    "outputs": [str(p) for p in self.outputs],
                    "exit_status": status,
                    "tool_version": __version__,
                    "python": platform.python_version(),
                    "started_utc": self._started,
                    "duration_seconds": round(time.perf_counter() - self._t0, 6)}, path)
        return path
