"""Run configuration files: strict INI parsing and materialisation.

A run config fully describes an optimisation: where the initial
constellation comes from ([constellation]), the channel ([channel]), the
target metric ([metric]), every optimiser knob ([optimizer]), and where
results go ([output]).  Parsing is strict: unknown sections or keys are
errors, so a config cannot silently misspell a knob.  Materialising a
config writes every default back out, so the persisted copy of a run is
self-describing and re-runnable.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Optional

from . import __version__
from .generators import (
    apsk_two_ring,
    brgc,
    cartesian_bpsk,
    qam,
    random_constellation,
    sp_bpsk_12d,
)
from .model import BitLabeling, Constellation, load_constellation
from .optimizer import OptimizerConfig

__all__ = [
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "materialize_run_config",
    "parse_snr_values",
    "build_constellation",
]

_GENERATORS = ("qpsk", "bpsk", "qam", "apsk2", "random", "sp12d")

# key -> (converter, default) per generator kind
_GENERATOR_KEYS = {
    "qpsk": {"dims": (int, 2)},
    "bpsk": {"dims": (int, 2)},
    "qam": {"order": (int, 16)},
    "apsk2": {
        "inner": (int, 4),
        "outer": (int, 4),
        "radius_ratio": (float, 2.0),
        "phase_offset": (float, None),
    },
    "random": {"size": (int, 16), "dims": (int, 2), "seed": (int, 0)},
    "sp12d": {},
}

_OPTIMIZER_KEYS = {
    "iterations": (int, 5000),
    "learning_rate": (float, 5e-3),
    "lr_decay": (float, 0.9995),
    "quadrature_count": (int, 0),  # 0 = per-dimension default
    "redraw_nodes": (None, False),  # bool, custom converter
    "seed": (int, 0),
    "eval_every": (int, 100),
    "reference_eval": (str, "auto"),
    "beta1": (float, 0.9),
    "beta2": (float, 0.999),
    "adam_eps": (float, 1e-8),
}

_FORMATS = ("gs", "csv")


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run configuration."""

    constellation_file: Optional[str]
    generator: Optional[str]
    generator_params: dict
    snr_db: Optional[float]
    snr_grid: Optional[tuple[float, float, float]]
    metric: str
    optimizer_params: dict
    output_directory: str
    output_name: str
    output_formats: tuple[str, ...]

    def snr_values(self) -> list[float]:
        """The channel grid: a single SNR or the expansion of A:B:STEP."""
        if self.snr_db is not None:
            return [self.snr_db]
        lo, hi, step = self.snr_grid
        values = []
        v = lo
        while v <= hi + step * 0.5:
            values.append(round(v, 12))
            v += step
        return values

    def optimizer_config(self) -> OptimizerConfig:
        """OptimizerConfig for this run (single-SNR configs only)."""
        if self.snr_db is None:
            raise ValueError("optimisation needs a single snr_db, not a grid")
        params = dict(self.optimizer_params)
        count = params.pop("quadrature_count")
        return OptimizerConfig(
            snr_db=self.snr_db,
            metric=self.metric,
            quadrature_count=None if count == 0 else count,
            **params,
        )


def _fail(where: str, why: str):
    raise ValueError(f"config {where}: {why}")


def _get(parser, section, key, convert, default, seen: set):
    seen.add(key)
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key).strip()
    if raw == "" and default is None:
        return None
    try:
        return convert(raw)
    except ValueError:
        _fail(f"[{section}]", f"invalid value {raw!r} for {key}")


def _to_bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def parse_snr_values(text: str) -> tuple[Optional[float], Optional[tuple[float, float, float]]]:
    """Parse an SNR field: either a single dB value or A:B:STEP."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"invalid SNR grid {text!r}; expected A:B:STEP")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"SNR grid step must be positive, got {step}")
        if hi < lo:
            raise ValueError(f"SNR grid end {hi} below start {lo}")
        return None, (lo, hi, step)
    return float(text), None


def parse_run_config(text: str) -> RunConfig:
    """Parse run-config INI text; reject unknown sections and keys."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValueError(f"config: {exc}") from exc

    known_sections = {"constellation", "channel", "metric", "optimizer", "output", "meta"}
    for section in parser.sections():
        if section not in known_sections:
            _fail(f"[{section}]", "unknown section")

    # [constellation]
    if not parser.has_section("constellation"):
        _fail("[constellation]", "section missing")
    seen: set = set()
    gen = _get(parser, "constellation", "generator", str, None, seen)
    file_path = _get(parser, "constellation", "file", str, None, seen)
    if (gen is None) == (file_path is None):
        _fail("[constellation]", "need exactly one of generator or file")
    params = {}
    if gen is not None:
        if gen not in _GENERATORS:
            _fail("[constellation]", f"unknown generator {gen!r}")
        for key, (convert, default) in _GENERATOR_KEYS[gen].items():
            params[key] = _get(parser, "constellation", key, convert, default, seen)
    for key in parser.options("constellation"):
        if key not in seen:
            _fail("[constellation]", f"unknown key {key!r}")

    # [channel]
    if not parser.has_section("channel"):
        _fail("[channel]", "section missing")
    seen = set()
    snr_text = _get(parser, "channel", "snr_db", str, None, seen)
    for key in parser.options("channel"):
        if key not in seen:
            _fail(f"[channel]", f"unknown key {key!r}")
    if snr_text is None:
        _fail("[channel]", "snr_db missing")
    try:
        snr_db, snr_grid = parse_snr_values(snr_text)
    except ValueError as exc:
        _fail("[channel]", str(exc))

    # [metric]
    metric = "MI"
    if parser.has_section("metric"):
        seen = set()
        metric = _get(parser, "metric", "metric", str, "MI", seen).upper()
        for key in parser.options("metric"):
            if key not in seen:
                _fail("[metric]", f"unknown key {key!r}")
    if metric not in ("MI", "GMI"):
        _fail("[metric]", f"metric must be MI or GMI, got {metric!r}")

    # [optimizer]
    opt_params = {}
    seen = set()
    for key, (convert, default) in _OPTIMIZER_KEYS.items():
        conv = _to_bool if convert is None else convert
        if parser.has_section("optimizer"):
            opt_params[key] = _get(parser, "optimizer", key, conv, default, seen)
        else:
            opt_params[key] = default
    if parser.has_section("optimizer"):
        for key in parser.options("optimizer"):
            if key not in seen:
                _fail("[optimizer]", f"unknown key {key!r}")

    # [output]
    out_dir, out_name, formats = "runs", "run", _FORMATS
    if parser.has_section("output"):
        seen = set()
        out_dir = _get(parser, "output", "directory", str, "runs", seen)
        out_name = _get(parser, "output", "name", str, "run", seen)
        fmt_text = _get(parser, "output", "formats", str, "gs,csv", seen)
        formats = tuple(f.strip() for f in fmt_text.split(",") if f.strip())
        for fmt in formats:
            if fmt not in _FORMATS:
                _fail("[output]", f"unknown format {fmt!r}")
        for key in parser.options("output"):
            if key not in seen:
                _fail("[output]", f"unknown key {key!r}")

    # [meta] is written by materialisation; accept and ignore known keys.
    if parser.has_section("meta"):
        for key in parser.options("meta"):
            if key not in ("format", "version"):
                _fail("[meta]", f"unknown key {key!r}")

    return RunConfig(
        constellation_file=file_path,
        generator=gen,
        generator_params=params,
        snr_db=snr_db,
        snr_grid=snr_grid,
        metric=metric,
        optimizer_params=opt_params,
        output_directory=out_dir,
        output_name=out_name,
        output_formats=formats,
    )


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_run_config(fh.read())


def _fmt_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)  # shortest text that round-trips the exact value
    return str(value)


def materialize_run_config(cfg: RunConfig) -> str:
    """Render a config with every default filled in, plus a [meta] stamp."""
    out = io.StringIO()

    def section(name, pairs):
        out.write(f"[{name}]\n")
        for key, value in pairs:
            out.write(f"{key} = {_fmt_value(value)}\n")
        out.write("\n")

    if cfg.generator is not None:
        pairs = [("generator", cfg.generator)]
        pairs += [(k, cfg.generator_params[k]) for k in _GENERATOR_KEYS[cfg.generator]]
    else:
        pairs = [("file", cfg.constellation_file)]
    section("constellation", pairs)

    if cfg.snr_db is not None:
        snr_text = _fmt_value(cfg.snr_db)
    else:
        lo, hi, step = cfg.snr_grid
        snr_text = f"{_fmt_value(lo)}:{_fmt_value(hi)}:{_fmt_value(step)}"
    section("channel", [("snr_db", snr_text)])
    section("metric", [("metric", cfg.metric)])
    section("optimizer", [(k, cfg.optimizer_params[k]) for k in _OPTIMIZER_KEYS])
    section(
        "output",
        [
            ("directory", cfg.output_directory),
            ("name", cfg.output_name),
            ("formats", ",".join(cfg.output_formats)),
        ],
    )
    section("meta", [("format", 1), ("version", __version__)])
    return out.getvalue()


def build_constellation(cfg: RunConfig):
    """Produce (constellation, labeling, name) for a run config."""
    if cfg.constellation_file is not None:
        return load_constellation(cfg.constellation_file)
    params = cfg.generator_params
    gen = cfg.generator
    if gen in ("qpsk", "bpsk"):
        c, lab = cartesian_bpsk(params["dims"])
        return c, lab, f"bpsk{params['dims']}d"
    if gen == "qam":
        c, lab = qam(params["order"])
        return c, lab, f"qam{params['order']}"
    if gen == "apsk2":
        c, lab = apsk_two_ring(
            (params["inner"], params["outer"]),
            params["radius_ratio"],
            params["phase_offset"],
        )
        return c, lab, f"apsk{params['inner']}+{params['outer']}"
    if gen == "random":
        c = random_constellation(params["size"], params["dims"], params["seed"])
        m_bits = round(math.log2(params["size"]))
        lab = BitLabeling(brgc(m_bits)) if 2**m_bits == params["size"] else None
        return c, lab, f"random{params['size']}"
    if gen == "sp12d":
        c, lab = sp_bpsk_12d()
        return c, lab, "sp-bpsk-12d"
    raise ValueError(f"unknown generator {gen!r}")
