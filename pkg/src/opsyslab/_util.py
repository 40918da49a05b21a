"""Shared plumbing: seeded generators, canonical JSON, small helpers."""

import json

import numpy as np

# Stable integer ids used in SeedSequence spawn keys so that every sampled
# quantity is reproducible independently of execution order and thread count.
MODULE_IDS = {
    "core": 1,
    "conic": 2,
    "geometry": 3,
    "decomp": 4,
    "duality": 5,
    "algebra": 6,
    "cli": 7,
}


def rng_for(seed, *key):
    """Generator keyed by (seed, key...). Same key -> same stream, always."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def as_complex_matrix(m):
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix entries must be finite")
    return a


def frob_inner(x, y) -> float:
    """Real Frobenius pairing Re tr(x* y)."""
    return float(np.real(np.vdot(x, y)))


def frob_norm(x) -> float:
    return float(np.linalg.norm(x))


def hermitize(x):
    return 0.5 * (x + x.conj().T)
