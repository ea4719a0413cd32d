"""Tab-separated corpus manifest.

::

    spoofoptics-manifest v1
    config<TAB>key=value<TAB>key=value ...
    id  label  scene_seed  source  gamma  a  b  c  lighting  path
    <one record per line>

``lighting`` is the comma-joined list of the scene's SH lighting
coefficients. Spoof-only fields (source, gamma, a, b, c) are ``-`` on live
records. Floats are written with 17 significant digits.
"""

from dataclasses import dataclass, field

from ..errors import ParseError, ValidationError

MAGIC = "spoofoptics-manifest"
VERSION = "v1"
COLUMNS = ("id", "label", "scene_seed", "source", "gamma", "a", "b", "c", "lighting", "path")
LABELS = {"live": 1, "spoof": 0}


def fmt_float(x):
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SampleRecord:
    id: str
    label: str
    scene_seed: int
    lighting: tuple
    path: str
    source: str = None
    gamma: float = None
    field: tuple = None  # (a, b, c)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValidationError(f"label must be live or spoof, got {self.label!r}")
        if not self.id or any(ch.isspace() for ch in self.id):
            raise ValidationError(f"invalid sample id {self.id!r}")
        spoof_fields = (self.source, self.gamma, self.field)
        if self.label == "spoof" and any(v is None for v in spoof_fields):
            raise ValidationError(f"spoof record {self.id} needs source, gamma and field")
        if self.label == "live" and any(v is not None for v in spoof_fields):
            raise ValidationError(f"live record {self.id} cannot carry capture parameters")

    @property
    def is_live(self):
        return self.label == "live"

    def to_line(self):
        dash = "-"
        spoof = self.label == "spoof"
        cols = [
            self.id,
            self.label,
            str(self.scene_seed),
            self.source if spoof else dash,
            fmt_float(self.gamma) if spoof else dash,
            *((fmt_float(v) for v in self.field) if spoof else (dash,) * 3),
            ",".join(fmt_float(v) for v in self.lighting),
            self.path,
        ]
        return "\t".join(cols)


@dataclass
class Manifest:
    config: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValidationError(f"duplicate sample id {rec.id!r}")
            seen.add(rec.id)

    def by_id(self):
        return {r.id: r for r in self.records}

    def labels(self):
        return [LABELS[r.label] for r in self.records]


def dumps(manifest):
    lines = [f"{MAGIC} {VERSION}"]
    cfg = "\t".join(f"{k}={v}" for k, v in manifest.config.items())
    lines.append("config" + ("\t" + cfg if cfg else ""))
    lines.append("\t".join(COLUMNS))
    lines.extend(r.to_line() for r in manifest.records)
    return "\n".join(lines) + "\n"


def _parse_record(parts, lineno):
    if len(parts) != len(COLUMNS):
        raise ParseError(f"expected {len(COLUMNS)} fields, got {len(parts)}", line=lineno)
    rid, label, seed, source, gamma, a, b, c, lighting, path = parts
    try:
        seed_v = int(seed)
        light_v = tuple(float(v) for v in lighting.split(",")) if lighting else ()
        if label == "spoof":
            spoof = dict(source=source, gamma=float(gamma), field=(float(a), float(b), float(c)))
        else:
            if any(v != "-" for v in (source, gamma, a, b, c)):
                raise ParseError("live record has capture parameters", line=lineno)
            spoof = {}
        return SampleRecord(rid, label, seed_v, light_v, path, **spoof)
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise ParseError(str(exc), line=lineno) from exc
        raise ParseError(f"bad number: {exc}", line=lineno) from exc


def loads(text):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty manifest", line=1)
    head = lines[0].split(" ")
    if len(head) != 2 or head[0] != MAGIC:
        raise ParseError(f"expected header '{MAGIC} {VERSION}'", line=1)
    if head[1] != VERSION:
        raise ParseError(f"unsupported manifest version {head[1]!r} (expected {VERSION})", line=1)
    if len(lines) < 3:
        raise ParseError("manifest lacks config and column lines", line=len(lines) + 1)
    cfg_parts = lines[1].split("\t")
    if cfg_parts[0] != "config":
        raise ParseError("expected config line", line=2)
    config = {}
    for item in cfg_parts[1:]:
        if "=" not in item:
            raise ParseError(f"config entry {item!r} is not key=value", line=2)
        k, v = item.split("=", 1)
        config[k] = v
    if tuple(lines[2].split("\t")) != COLUMNS:
        raise ParseError("unexpected column header", line=3)
    records, seen = [], set()
    for i, line in enumerate(lines[3:], start=4):
        rec = _parse_record(line.split("\t"), i)
        if rec.id in seen:
            raise ValidationError(f"duplicate sample id {rec.id!r} (line {i})")
        seen.add(rec.id)
        records.append(rec)
    return Manifest(config, records)


def save_manifest(path, manifest):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(manifest))


def load_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
