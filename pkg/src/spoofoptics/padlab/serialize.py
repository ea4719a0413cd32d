"""Versioned text serialisation for detectors and live priors.

Layout::

    spoofoptics-model v1
    kind <detector|live-prior>
    <key> <value>            (scalar settings)
    param <name> <d0>x<d1>   (shape; "-" for a scalar)
    <floats, space separated, 17 significant digits>
    ...
    end

Floats are written with ``repr`` precision so a save/load round trip is
bit-exact.
"""

import numpy as np

from ..errors import ParseError
from .anomaly import LivePrior
from .models import ClassifierModel, Detector
from .supcon import EmbeddingModel

MAGIC = "spoofoptics-model"
VERSION = "v1"


def _fmt(x):
    return format(float(x), ".17g")


def _write_param(lines, name, arr):
    arr = np.asarray(arr, dtype=np.float64)
    shape = "x".join(str(d) for d in arr.shape) if arr.ndim else "-"
    lines.append(f"param {name} {shape}")
    lines.append(" ".join(_fmt(v) for v in arr.reshape(-1)))


def dumps(model):
    lines = [f"{MAGIC} {VERSION}"]
    if isinstance(model, Detector):
        clf = model.classifier
        lines += [
            "kind detector",
            f"streams {','.join(model.streams)}",
            f"equalize {int(model.equalize)}",
            f"embedding {int(model.embedding is not None)}",
        ]
        _write_param(lines, "classifier.mean", clf.mean)
        _write_param(lines, "classifier.scale", clf.scale)
        _write_param(lines, "classifier.weights", clf.weights)
        _write_param(lines, "classifier.bias", clf.bias)
        _write_param(lines, "classifier.threshold", clf.threshold)
        if model.embedding is not None:
            emb = model.embedding
            for name in ("mean", "scale", "w1", "b1", "w2", "b2"):
                _write_param(lines, f"embedding.{name}", getattr(emb, name))
    elif isinstance(model, LivePrior):
        lines += ["kind live-prior", f"log {int(model.log)}"]
        _write_param(lines, "mean", model.mean)
        _write_param(lines, "precision_chol", model.precision_chol)
        _write_param(lines, "radius", model.radius)
        if model.columns is not None:
            _write_param(lines, "columns", model.columns)
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def _parse(text):
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty model file", line=1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ParseError(f"expected header '{MAGIC} {VERSION}'", line=1)
    if head[1] != VERSION:
        raise ParseError(f"unsupported model version {head[1]!r} (expected {VERSION})", line=1)
    settings, params = {}, {}
    i = 1
    while i < len(lines):
        lineno = i + 1
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "end":
            return settings, params
        if parts[0] == "param":
            if len(parts) != 3 or i + 1 >= len(lines):
                raise ParseError("malformed param block", line=lineno)
            shape = () if parts[2] == "-" else tuple(int(d) for d in parts[2].split("x"))
            try:
                vals = np.array([float(v) for v in lines[i + 1].split()])
            except ValueError as exc:
                raise ParseError(f"bad number in param {parts[1]}", line=lineno + 1) from exc
            if vals.size != int(np.prod(shape)):
                raise ParseError(f"param {parts[1]} has {vals.size} values for shape {shape}", line=lineno + 1)
            params[parts[1]] = vals.reshape(shape)
            i += 2
            continue
        if len(parts) != 2:
            raise ParseError(f"malformed setting {lines[i]!r}", line=lineno)
        settings[parts[0]] = parts[1]
        i += 1
    raise ParseError("missing 'end' line", line=len(lines))


def loads(text):
    settings, params = _parse(text)
    try:
        kind = settings["kind"]
        if kind == "detector":
            clf = ClassifierModel(
                params["classifier.mean"],
                params["classifier.scale"],
                params["classifier.weights"],
                float(params["classifier.bias"]),
                float(params["classifier.threshold"]),
            )
            embedding = None
            if settings.get("embedding") == "1":
                embedding = EmbeddingModel(
                    *(params[f"embedding.{n}"] for n in ("mean", "scale", "w1", "b1", "w2", "b2"))
                )
            return Detector(
                tuple(settings["streams"].split(",")),
                clf,
                embedding,
                settings.get("equalize") == "1",
            )
        if kind == "live-prior":
            cols = params.get("columns")
            return LivePrior(
                params["mean"],
                params["precision_chol"],
                None if cols is None else cols.astype(np.int64),
                settings.get("log", "1") == "1",
                float(params["radius"]),
            )
    except KeyError as exc:
        raise ParseError(f"model file lacks {exc.args[0]!r}") from exc
    raise ParseError(f"unknown model kind {settings.get('kind')!r}")


def save_model(path, model):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(model))


def load_model(path):
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())
