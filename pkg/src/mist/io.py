"""Field files and run configuration.

Two single-field formats are supported, both 32-bit little-endian floats:

* PFM, grayscale variant (``Pf``). Rows are stored bottom-to-top on disk and
  returned top-down. PFM carries no pitch; it defaults to 1 m unless given.
* raw: three ASCII header lines (width, height, pitch in meters), each
  newline-terminated, followed by row-major float32 samples.

Computation is done in float64; values are rounded to float32 on write.
"""
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Geometry, MistError, ScalarField, SpecklePair
from .diffops import StencilScheme

_F32LE = np.dtype("<f4")


class FieldFormatError(MistError):
    """Malformed field file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        prefix = f"{path}: " if path is not None else ""
        super().__init__(f"{prefix}{message}{where}")


class ConfigError(MistError):
    pass


def field_format(path):
    """``'pfm'`` for ``*.pfm`` paths, ``'raw'`` otherwise."""
    return "pfm" if str(path).lower().endswith(".pfm") else "raw"


def _read_line(data, pos, path, what):
    end = data.find(b"\n", pos)
    if end < 0:
        raise FieldFormatError(f"unterminated {what} line", path, pos)
    try:
        return data[pos:end].decode("ascii").strip(), end + 1
    except UnicodeDecodeError:
        raise FieldFormatError(f"non-ASCII bytes in {what} line", path, pos) from None


def _parse_int(text, path, offset, what):
    try:
        value = int(text)
    except ValueError:
        raise FieldFormatError(f"cannot parse {what} from {text!r}", path, offset) from None
    if value <= 0:
        raise FieldFormatError(f"{what} must be positive, got {value}", path, offset)
    return value


def _payload(data, start, width, height, dtype, path):
    expected = width * height * 4
    actual = len(data) - start
    if actual < expected:
        raise FieldFormatError(
            f"truncated payload: expected {expected} bytes, found {actual}", path, len(data)
        )
    if actual > expected:
        raise FieldFormatError(
            f"trailing data: expected {expected} payload bytes, found {actual}",
            path, start + expected,
        )
    values = np.frombuffer(data, dtype=dtype, count=width * height, offset=start)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FieldFormatError("non-finite sample", path, start + 4 * int(bad[0]))
    return values.astype(np.float64).reshape(height, width)


def _read_pfm(data, path, pitch):
    tag, pos = _read_line(data, 0, path, "PFM tag")
    if tag != "Pf":
        if tag == "PF":
            raise FieldFormatError("colour PFM is not supported; expected 'Pf'", path, 0)
        raise FieldFormatError(f"bad PFM tag {tag!r}", path, 0)
    dims_at = pos
    dims, pos = _read_line(data, pos, path, "dimension")
    parts = dims.split()
    if len(parts) != 2:
        raise FieldFormatError(f"expected 'width height', got {dims!r}", path, dims_at)
    width = _parse_int(parts[0], path, dims_at, "width")
    height = _parse_int(parts[1], path, dims_at, "height")
    scale_at = pos
    scale_text, pos = _read_line(data, pos, path, "scale")
    try:
        scale = float(scale_text)
    except ValueError:
        raise FieldFormatError(f"cannot parse scale {scale_text!r}", path, scale_at) from None
    if scale == 0 or not np.isfinite(scale):
        raise FieldFormatError(f"invalid scale {scale_text!r}", path, scale_at)
    dtype = _F32LE if scale < 0 else _F32LE.newbyteorder(">")
    values = _payload(data, pos, width, height, dtype, path)
    return ScalarField(values[::-1], 1.0 if pitch is None else pitch)


def _read_raw(data, path, pitch):
    pos = 0
    header = []
    for what in ("width", "height", "pitch"):
        at = pos
        text, pos = _read_line(data, pos, path, what)
        header.append((text, at))
    width = _parse_int(header[0][0], path, header[0][1], "width")
    height = _parse_int(header[1][0], path, header[1][1], "height")
    try:
        file_pitch = float(header[2][0])
    except ValueError:
        raise FieldFormatError(f"cannot parse pitch {header[2][0]!r}", path, header[2][1]) from None
    if not (np.isfinite(file_pitch) and file_pitch > 0):
        raise FieldFormatError(f"pitch must be positive, got {header[2][0]!r}", path, header[2][1])
    values = _payload(data, pos, width, height, _F32LE, path)
    return ScalarField(values, file_pitch if pitch is None else pitch)


def read_field(path, fmt=None, pitch=None) -> ScalarField:
    """Load a field; ``pitch`` overrides whatever the file says (or lacks)."""
    fmt = fmt or field_format(path)
    data = Path(path).read_bytes()
    if fmt == "pfm":
        return _read_pfm(data, str(path), pitch)
    if fmt == "raw":
        return _read_raw(data, str(path), pitch)
    raise ValueError(f"unknown field format {fmt!r}")


def encode_field(f: ScalarField, fmt) -> bytes:
    if fmt == "pfm":
        header = f"Pf\n{f.width} {f.height}\n-1.0\n".encode("ascii")
        payload = np.ascontiguousarray(f.values[::-1], dtype=_F32LE).tobytes()
    elif fmt == "raw":
        header = f"{f.width}\n{f.height}\n{f.pitch!r}\n".encode("ascii")
        payload = np.ascontiguousarray(f.values, dtype=_F32LE).tobytes()
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    return header + payload


def write_field(f: ScalarField, path, fmt=None):
    fmt = fmt or field_format(path)
    Path(path).write_bytes(encode_field(f, fmt))


def display_copy(f: ScalarField, clamp_negative=True) -> ScalarField:
    """Copy for display; optionally keep only the positive part."""
    return f.like(np.maximum(f.values, 0.0)) if clamp_negative else f


def write_display_field(f: ScalarField, path, clamp_negative=True, fmt=None):
    """Write the display copy to ``path``; ``f`` itself is never modified."""
    write_field(display_copy(f, clamp_negative), path, fmt)


# --- run configuration -----------------------------------------------------

MANDATORY_KEYS = ("delta_m", "energy_ev", "pitch_m", "pairs", "output_dir")
OPTIONAL_KEYS = {"scheme": "five_point_fd", "boundary": "mirror", "epsilon": "1e-6"}


@dataclass(frozen=True)
class RunConfig:
    geometry: Geometry
    pairs: list
    output_dir: Path
    scheme: StencilScheme = field(default_factory=StencilScheme)
    epsilon: float = 1e-6
    source: Path = None


_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")


def parse_key_values(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment. Duplicates are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if m is None:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = m.groups()
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _number(values, key, source):
    try:
        return float(values[key])
    except ValueError:
        raise ConfigError(f"{source}: cannot parse {key} = {values[key]!r} as a number") from None


def parse_pairs(text, base_dir, source="<config>"):
    """``ref1 sam1, ref2 sam2, ...`` -> list of (Path, Path), order preserved."""
    pairs = []
    for i, chunk in enumerate(text.split(",")):
        parts = chunk.split()
        if len(parts) != 2:
            raise ConfigError(
                f"{source}: pair {i} must be 'reference sample', got {chunk.strip()!r}"
            )
        ref, sam = (Path(base_dir, p) for p in parts)
        for p in (ref, sam):
            if not p.is_file():
                raise ConfigError(f"{source}: input file {p} does not exist")
        pairs.append((ref, sam))
    return pairs


def read_run_config(path) -> RunConfig:
    path = Path(path)
    source = str(path)
    values = parse_key_values(path.read_text(), source)
    unknown = set(values) - set(MANDATORY_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(sorted(unknown))}")
    for key in MANDATORY_KEYS:
        if key not in values:
            raise ConfigError(f"{source}: missing mandatory key {key!r}")
    for key, default in OPTIONAL_KEYS.items():
        values.setdefault(key, default)

    try:
        geometry = Geometry(
            _number(values, "delta_m", source),
            _number(values, "energy_ev", source),
            _number(values, "pitch_m", source),
        )
        scheme = StencilScheme(values["scheme"], values["boundary"])
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    epsilon = _number(values, "epsilon", source)
    if epsilon < 0:
        raise ConfigError(f"{source}: epsilon must be non-negative")
    base = path.parent
    return RunConfig(
        geometry=geometry,
        pairs=parse_pairs(values["pairs"], base, source),
        output_dir=Path(base, values["output_dir"]),
        scheme=scheme,
        epsilon=epsilon,
        source=path,
    )


def load_pairs(pair_paths, pitch=None):
    """Read (reference, sample) path pairs into :class:`SpecklePair` objects."""
    return [
        SpecklePair(read_field(r, pitch=pitch), read_field(s, pitch=pitch), str(i))
        for i, (r, s) in enumerate(pair_paths)
    ]


def write_key_values(path, items):
    """Write an ordered mapping as ``key = value`` lines."""
    lines = [f"{k} = {v}" for k, v in items]
    Path(path).write_text("\n".join(lines) + "\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
