"""Scenario configuration: flat ``key = value`` text with validation.

Lines before any ``[section]`` header belong to an implicit ``[scenario]``
section.  Section names only group keys for readability; every key must be
known and may appear once across the whole file.  Values are validated and
defaults filled in by :func:`parse_config`; :func:`serialize_config` writes a
text that parses back to the same configuration.
"""

import configparser
import re
from dataclasses import dataclass

from deig.consensus import Protocol
from deig.errors import ParseError, ValidationError
from deig.linalg.secular import DEFAULT_XI

SUITES = ("covariance", "doa", "doa-track", "spectrum", "spectrum-track", "filter-design", "eig-bench")
TOPOLOGIES = ("benchmark10", "subarray6", "d-regular", "small-world", "path", "complete")


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _words(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _choice(options):
    def parse(text):
        value = text.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return value

    return parse


def _protocol(text):
    return Protocol.parse(text.strip()).value


def _positive(v):
    return v > 0


def _nonnegative(v):
    return v >= 0


# key: (parser, default, check, message)
SCHEMA = {
    "suite": (_choice(SUITES), None, None, ""),
    "seed": (_int, 0, _nonnegative, "must be >= 0"),
    "xi": (_float, DEFAULT_XI, _positive, "must be positive"),
    "topology": (_choice(TOPOLOGIES), None, None, ""),
    "nodes": (_int, None, lambda v: v >= 2, "must be >= 2"),
    "degree": (_int, 4, _positive, "must be positive"),
    "rewire": (_float, 0.1, lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
    "protocol": (_protocol, "ps", None, ""),
    "gamma": (_int, 100, _nonnegative, "must be >= 0"),
    "epsilon": (_float, None, _positive, "must be positive"),
    "filter_order": (_int, None, _nonnegative, "must be >= 0"),
    "T": (_int, None, _positive, "must be positive"),
    "mode": (_choice(("finite", "ewma", "window")), "finite", None, ""),
    "alpha": (_float, None, lambda v: 0 < v < 1, "must lie in (0, 1)"),
    "beta": (_int, 20, lambda v: v >= 1, "must be >= 1"),
    "complex": (_bool, False, None, ""),
    "sources": (_floats, (-7.0, 19.0, 23.0), lambda v: len(v) >= 1 and all(abs(a) < 90 for a in v),
                "needs at least one angle with |angle| < 90"),
    "snr_db": (_float, 20.0, None, ""),
    "trials": (_int, 100, _positive, "must be positive"),
    "delta": (_float, 0.5, _positive, "must be positive"),
    "radius": (_float, 3.0, _positive, "must be positive"),
    "span": (_float, 20.0, lambda v: 0 < v < 90, "must lie in (0, 90)"),
    "burn_in": (_int, 0, _nonnegative, "must be >= 0"),
    "learning": (_choice(("incidence", "rank-two")), "incidence", None, ""),
    "normalized": (_bool, False, None, ""),
    "events": (_int, 20, _nonnegative, "must be >= 0"),
    "designs": (_words, ("GDnA", "GDL", "GIDN", "GIDM"),
                lambda v: len(v) > 0 and set(v) <= {"GDnA", "GDL", "GIDN", "GIDM"},
                "must list designs among GDnA, GDL, GIDN, GIDM"),
    "K": (_int, 12, _nonnegative, "must be >= 0"),
}

# suite-dependent defaults, applied when the key is absent
SUITE_DEFAULTS = {
    "covariance": {"topology": "benchmark10", "T": 100},
    "doa": {"topology": "subarray6", "T": 200},
    "doa-track": {"topology": "subarray6", "T": 200, "alpha": 0.88},
    "spectrum": {"topology": "d-regular", "nodes": 50, "events": 0},
    "spectrum-track": {"topology": "d-regular", "nodes": 50},
    "filter-design": {"topology": "small-world", "nodes": 80, "degree": 6},
    "eig-bench": {"topology": "complete", "nodes": 16, "T": 100},
}

FIXED_SIZES = {"benchmark10": 10, "subarray6": 6}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated configuration; ``values`` holds every schema key."""

    values: tuple  # sorted (key, value) pairs

    def __getitem__(self, key):
        return dict(self.values)[key]

    def get(self, key, default=None):
        return dict(self.values).get(key, default)

    @property
    def suite(self):
        return self["suite"]

    def replace(self, **changes):
        raw = dict(self.values)
        raw.update(changes)
        return _validate(raw)


_HEADER = re.compile(r"^\s*\[")


def _read_pairs(text):
    """Flat key/value pairs across all sections; raises ParseError on bad syntax."""
    lines = text.splitlines()
    has_header = any(_HEADER.match(line) for line in lines[:1])
    body = text if has_header else "[scenario]\n" + text
    offset = 0 if has_header else 1
    parser = configparser.RawConfigParser(strict=True, delimiters=("=",), comment_prefixes=("#", ";"),
                                          inline_comment_prefixes=("#",), empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(body)
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", exc.lineno - offset) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section {exc.section!r}", exc.lineno - offset) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - offset if exc.errors else 0
        raise ParseError("expected 'key = value'", lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("expected 'key = value'", exc.lineno - offset) from None
    pairs = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in pairs:
                raise ParseError(f"key {key!r} given in more than one section", _line_of(lines, key))
            pairs[key] = value
    return pairs


def _line_of(lines, key):
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    hits = [n for n, line in enumerate(lines, 1) if pattern.match(line)]
    return hits[-1] if hits else 0


def _validate(raw):
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ValidationError("unknown key", key=unknown[0])
    out = {}
    for key, (parse, default, check, message) in SCHEMA.items():
        value = raw.get(key)
        if isinstance(value, str):
            try:
                value = parse(value)
            except (ValueError, ValidationError) as exc:
                raise ValidationError(str(exc), key=key) from None
        if value is not None and check is not None and not check(value):
            raise ValidationError(message, key=key)
        out[key] = value
    suite = out["suite"]
    if suite is None:
        raise ValidationError("missing", key="suite")
    for key, value in SUITE_DEFAULTS[suite].items():
        if out[key] is None:
            out[key] = value
    for key, (_, default, _, _) in SCHEMA.items():
        if out[key] is None and default is not None:
            out[key] = default
    _cross_check(out)
    return ScenarioConfig(tuple(sorted(out.items())))


def _cross_check(cfg):
    topo = cfg["topology"]
    if topo in FIXED_SIZES:
        if cfg["nodes"] is not None and cfg["nodes"] != FIXED_SIZES[topo]:
            raise ValidationError(f"topology {topo} has {FIXED_SIZES[topo]} nodes", key="nodes")
        cfg["nodes"] = FIXED_SIZES[topo]
    if cfg["nodes"] is None:
        raise ValidationError("missing", key="nodes")
    if topo == "d-regular" and (cfg["degree"] >= cfg["nodes"] or cfg["degree"] * cfg["nodes"] % 2):
        raise ValidationError("no simple d-regular graph with these nodes", key="degree")
    if topo == "small-world" and (cfg["degree"] % 2 or cfg["degree"] >= cfg["nodes"]):
        raise ValidationError("ring lattice needs an even degree below nodes", key="degree")
    if cfg["suite"] in ("covariance", "doa", "doa-track", "eig-bench") and cfg["T"] is None:
        raise ValidationError("missing", key="T")
    if cfg["suite"] == "covariance" and cfg["mode"] == "ewma" and cfg["alpha"] is None:
        raise ValidationError("ewma mode needs alpha", key="alpha")


def parse_config(text):
    """Parse and validate configuration text."""
    pairs = _read_pairs(text)
    return _validate(pairs)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config):
    """``key = value`` text of every set key; parses back to ``config``."""
    lines = [f"{key} = {_format(value)}" for key, value in config.values if value is not None]
    return "\n".join(lines) + "\n"
