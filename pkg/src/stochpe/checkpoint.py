"""Self-describing JSON checkpoint containers for states and noise fields.

Byte layout of every coefficient block: C-order (row-major) little-endian
complex128 (interleaved float64 re/im pairs), base64-encoded.  Containers
carry the domain, the basis-ordering version tag and the array shape, so
files are portable across machines and refuse to load onto a mismatched
grid or an unknown ordering.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .noise import NoiseSpec
from .spectral import DomainSpec, Grid, SpectralState

__all__ = ["BASIS_ORDER_TAG", "save_state", "load_state", "save_noise", "load_noise"]

BASIS_ORDER_TAG = "lambda-lex-v1"
_FORMAT_STATE = "stochpe-checkpoint"
_FORMAT_NOISE = "stochpe-noise"


def _encode(arr: np.ndarray) -> str:
    a = np.ascontiguousarray(arr, dtype=np.complex128)
    if a.dtype.byteorder == ">":
        a = a.astype("<c16")
    return base64.b64encode(a.tobytes()).decode("ascii")


def _decode(blob: str, shape) -> np.ndarray:
    raw = base64.b64decode(blob.encode("ascii"))
    return np.frombuffer(raw, dtype="<c16").reshape(shape).astype(np.complex128)


def _domain_dict(spec: DomainSpec) -> dict:
    return {
        "L1": spec.L1,
        "L2": spec.L2,
        "h": spec.h,
        "N1": spec.N1,
        "N2": spec.N2,
        "M": spec.M,
        "mu": spec.mu,
        "nu": spec.nu,
    }


def _check_header(doc: dict, expected_format: str, grid: Grid | None) -> Grid:
    if doc.get("format") != expected_format:
        raise ValueError(f"not a {expected_format} container")
    if doc.get("basis_order") != BASIS_ORDER_TAG:
        raise ValueError(f"unknown basis ordering {doc.get('basis_order')!r}")
    spec = DomainSpec(**doc["domain"])
    if grid is None:
        return Grid(spec)
    if _domain_dict(grid.spec) != _domain_dict(spec):
        raise ValueError("checkpoint domain does not match the target grid")
    return grid


def save_state(state: SpectralState, path: str) -> None:
    doc = {
        "format": _FORMAT_STATE,
        "version": 1,
        "basis_order": BASIS_ORDER_TAG,
        "domain": _domain_dict(state.grid.spec),
        "time": state.time,
        "shape": list(state.coeffs.shape),
        "dtype": "complex128",
        "byte_order": "little",
        "layout": "C",
        "coeffs_b64": _encode(state.coeffs),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_state(path: str, grid: Grid | None = None) -> SpectralState:
    with open(path, "r") as fh:
        doc = json.load(fh)
    grid = _check_header(doc, _FORMAT_STATE, grid)
    coeffs = _decode(doc["coeffs_b64"], doc["shape"])
    return SpectralState(grid, coeffs, float(doc["time"]))


def save_noise(spec: NoiseSpec, path: str) -> None:
    doc = {
        "format": _FORMAT_NOISE,
        "version": 1,
        "basis_order": BASIS_ORDER_TAG,
        "domain": _domain_dict(spec.grid.spec),
        "family": spec.family,
        "K": spec.K,
        "include_temperature": spec.include_temperature,
        "alpha": list(map(float, spec.alpha)),
        "phi_shape": list(spec.phi.shape),
        "psi_shape": list(spec.psi.shape),
        "chi_shape": list(spec.chi.shape),
        "phi_b64": _encode(spec.phi),
        "psi_b64": _encode(spec.psi),
        "chi_b64": _encode(spec.chi),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_noise(path: str, grid: Grid | None = None) -> NoiseSpec:
    with open(path, "r") as fh:
        doc = json.load(fh)
    grid = _check_header(doc, _FORMAT_NOISE, grid)
    return NoiseSpec(
        grid,
        doc["family"],
        _decode(doc["phi_b64"], doc["phi_shape"]),
        _decode(doc["psi_b64"], doc["psi_shape"]),
        _decode(doc["chi_b64"], doc["chi_shape"]),
        np.asarray(doc["alpha"], dtype=float),
        include_temperature=bool(doc["include_temperature"]),
    )
