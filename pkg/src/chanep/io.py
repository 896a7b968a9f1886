"""Channel definition files and deterministic table output."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from chanep import channels as ch
from chanep.errors import ChannelError

REPRS = ("kraus", "affine", "superop")
_REPR_KEYS = {"kraus": ("kraus",), "affine": ("distortion", "shift"), "superop": ("superop",)}


def _pairs(z) -> list:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).tolist()


def _from_pairs(data, shape, what) -> np.ndarray:
    try:
        a = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ChannelError(f"{what}: entries must be [re, im] pairs") from None
    if a.shape != shape + (2,):
        raise ChannelError(f"{what}: expected shape {shape} of [re, im] pairs, got {a.shape[:-1]}")
    return a[..., 0] + 1j * a[..., 1]


def channel_to_json(S, name: str, repr: str = "superop", kraus=None) -> dict:
    """Channel file dict.  ``repr="kraus"`` needs the operators passed in ``kraus``."""
    out = {"name": name, "repr": repr}
    if repr == "kraus":
        if kraus is None:
            raise ChannelError("kraus representation needs the operators")
        out["kraus"] = [_pairs(k) for k in kraus]
    elif repr == "affine":
        aff = ch.superop_to_affine(S)
        out["distortion"] = aff.distortion.tolist()
        out["shift"] = aff.shift.tolist()
    elif repr == "superop":
        out["superop"] = _pairs(S)
    else:
        raise ChannelError(f"unknown representation {repr!r}")
    return out


def channel_from_json(data: dict) -> tuple[str, np.ndarray]:
    """Parse a channel dict into ``(name, superoperator)``.

    Only the structure is checked here; CPTP validation is left to the caller
    so that a non-physical map can still be inspected.
    """
    if not isinstance(data, dict):
        raise ChannelError("channel file must hold a JSON object")
    rep = data.get("repr")
    if rep not in REPRS:
        raise ChannelError(f"'repr' must be one of {REPRS}, got {rep!r}")
    present = [r for r, keys in _REPR_KEYS.items() if any(k in data for k in keys)]
    if present != [rep]:
        raise ChannelError(f"exactly one representation must be present; found {present or 'none'}")
    name = str(data.get("name", ""))
    if rep == "kraus":
        ops = data["kraus"]
        if not isinstance(ops, list) or not ops:
            raise ChannelError("'kraus' must be a non-empty list")
        S = ch.kraus_to_superop([_from_pairs(k, (2, 2), "kraus operator") for k in ops])
    elif rep == "affine":
        try:
            E = np.asarray(data["distortion"], dtype=float)
            s = np.asarray(data.get("shift", [0.0, 0.0, 0.0]), dtype=float)
        except (TypeError, ValueError):
            raise ChannelError("affine entries must be real numbers") from None
        if E.shape != (3, 3) or s.shape != (3,):
            raise ChannelError("affine form needs a 3x3 'distortion' and a 3-vector 'shift'")
        S = ch.affine_to_superop(ch.AffineBloch(E, s))
    else:
        S = _from_pairs(data["superop"], (4, 4), "superop")
    if not np.all(np.isfinite(S)):
        raise ChannelError("channel has non-finite entries")
    return name, S


def load_channel(path) -> tuple[str, np.ndarray]:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ChannelError(f"no such channel file: {path}") from None
    except json.JSONDecodeError as err:
        raise ChannelError(f"{path}: invalid JSON ({err})") from None
    return channel_from_json(data)


def save_channel(path, S, name: str, repr: str = "superop", kraus=None) -> None:
    Path(path).write_text(dumps(channel_to_json(S, name, repr, kraus)))


def dumps(obj) -> str:
    """Stable JSON text: sorted keys, repr floats, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def fmt(x) -> str:
    """17 significant digits, which round-trips any double."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def csv_text(columns: list[str], rows, header: dict) -> str:
    """CSV with ``# key: value`` comment lines recording provenance, then a header row."""
    lines = [f"# {k}: {json.dumps(v, sort_keys=True, default=_default)}" for k, v in header.items()]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"
