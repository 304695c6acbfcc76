"""Problem data model: network configuration, channel estimates with
norm-bounded uncertainty, per-cell power budgets and rate weights, plus
random instance / perturbation sampling and JSON persistence.

Index convention: ``estimates[m, n, k]`` is the length-N channel row vector
from base station n to user k of cell m.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

REJECTION_LIMIT = 1000


@dataclass(frozen=True)
class NetworkConfig:
    """Cell count M, users per cell K, transmit antennas per BS N."""

    m: int
    k: int
    n: int

    def __post_init__(self):
        for name in ("m", "k", "n"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


@dataclass(frozen=True)
class NetworkInstance:
    """All problem data for one robust precoding instance.

    estimates: complex array (M, M, K, N), radii (M, M, K), powers (M,)
    in linear scale, weights (M, K).  Immutable after construction.
    """

    config: NetworkConfig
    estimates: np.ndarray
    radii: np.ndarray
    powers: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        m, k, n = self.config.m, self.config.k, self.config.n
        est = np.asarray(self.estimates, dtype=complex)
        rad = np.asarray(self.radii, dtype=float)
        pwr = np.asarray(self.powers, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if est.shape != (m, m, k, n):
            raise ValueError(f"estimates shape {est.shape} != {(m, m, k, n)}")
        if rad.shape != (m, m, k):
            raise ValueError(f"radii shape {rad.shape} != {(m, m, k)}")
        if pwr.shape != (m,):
            raise ValueError(f"powers shape {pwr.shape} != {(m,)}")
        if wts.shape != (m, k):
            raise ValueError(f"weights shape {wts.shape} != {(m, k)}")
        for arr, name in ((est, "estimates"), (rad, "radii"), (pwr, "powers"), (wts, "weights")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def channel(self, m: int, n: int, k: int) -> np.ndarray:
        """Estimated channel row vector from BS n to user (m, k)."""
        return self.estimates[m, n, k]

    def radius(self, m: int, n: int, k: int) -> float:
        return float(self.radii[m, n, k])


@dataclass(frozen=True)
class PrecoderSet:
    """One complex N x K precoding matrix per cell; column k is the beam
    for user k of that cell."""

    matrices: np.ndarray  # (M, N, K) complex

    def __post_init__(self):
        mat = np.asarray(self.matrices, dtype=complex)
        if mat.ndim != 3:
            raise ValueError("matrices must have shape (M, N, K)")
        mat.setflags(write=False)
        object.__setattr__(self, "matrices", mat)

    def beam(self, m: int, k: int) -> np.ndarray:
        return self.matrices[m, :, k]

    def cell(self, m: int) -> np.ndarray:
        return self.matrices[m]

    def deleted(self, m: int, k: int) -> np.ndarray:
        """Column-deleted matrix (all beams of cell m except column k)."""
        return np.delete(self.matrices[m], k, axis=1)

    def cell_powers(self) -> np.ndarray:
        return np.sum(np.abs(self.matrices) ** 2, axis=(1, 2))


@dataclass(frozen=True)
class EqualizerSet:
    """Real positive scalar receive equalizer per user, shape (M, K)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must have shape (M, K)")
        if np.any(v <= 0):
            raise ValueError("equalizers must be strictly positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class PerturbationSet:
    """Channel error vectors, same indexing as estimates: (M, M, K, N)."""

    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=complex)
        d.setflags(write=False)
        object.__setattr__(self, "deltas", d)


def validate(instance: NetworkInstance) -> list[str]:
    """Return a list of invariant violations (empty list means valid)."""
    violations = []
    m, k, _ = instance.config.m, instance.config.k, instance.config.n
    if np.any(instance.radii < 0):
        for idx in zip(*np.nonzero(instance.radii < 0)):
            violations.append(f"negative radius at (m={idx[0] + 1},n={idx[1] + 1},k={idx[2] + 1})")
    for mm in range(m):
        if instance.powers[mm] <= 0:
            violations.append(f"nonpositive power budget at cell {mm + 1}")
    for idx in zip(*np.nonzero(instance.weights <= 0)):
        violations.append(f"nonpositive rate weight at (m={idx[0] + 1},k={idx[1] + 1})")
    for mm in range(m):
        for kk in range(k):
            norm = np.linalg.norm(instance.estimates[mm, mm, kk])
            if norm <= instance.radii[mm, mm, kk]:
                violations.append(
                    f"own-channel radius exceeds estimate norm at (m={mm + 1},k={kk + 1})"
                )
    return violations


def _broadcast(spec, shape, name):
    arr = np.broadcast_to(np.asarray(spec, dtype=float), shape).copy()
    return arr


def sample_instance(config: NetworkConfig, radii=0.0, powers=1.0, weights=1.0,
                    seed: int = 0) -> NetworkInstance:
    """Draw a random instance with i.i.d. CN(0, 1) channel estimate entries.

    ``radii``, ``powers`` and ``weights`` may be scalars or arrays matching
    the target shapes.  Deterministic in (config, seed); resamples estimates
    (up to REJECTION_LIMIT times) until validate() passes.
    """
    m, k, n = config.m, config.k, config.n
    rad = _broadcast(radii, (m, m, k), "radii")
    pwr = _broadcast(powers, (m,), "powers")
    wts = _broadcast(weights, (m, k), "weights")
    rng = np.random.default_rng(seed)
    for _ in range(REJECTION_LIMIT):
        est = (rng.standard_normal((m, m, k, n)) + 1j * rng.standard_normal((m, m, k, n))) / np.sqrt(2)
        inst = NetworkInstance(config, est, rad, pwr, wts)
        if not validate(inst):
            return inst
    raise RuntimeError(f"no valid instance after {REJECTION_LIMIT} draws; radii too large?")


def sample_perturbation(instance: NetworkInstance, seed: int = 0,
                        mode: str = "interior") -> PerturbationSet:
    """Draw channel errors uniformly on ("surface") or inside ("interior")
    each uncertainty ball.  Deterministic in (instance radii, seed)."""
    if mode not in ("surface", "interior"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    m, k, n = instance.config.m, instance.config.k, instance.config.n
    raw = rng.standard_normal((m, m, k, n)) + 1j * rng.standard_normal((m, m, k, n))
    norms = np.linalg.norm(raw, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    unit = raw / norms
    r = instance.radii[..., None]
    if mode == "interior":
        # radius density r^(2n-1) on the 2n-real-dim ball
        u = rng.random((m, m, k, 1))
        r = r * u ** (1.0 / (2 * n))
    return PerturbationSet(unit * r)


def perturbed_channel(instance: NetworkInstance, pert: PerturbationSet,
                      m: int, n: int, k: int) -> np.ndarray:
    return instance.estimates[m, n, k] + pert.deltas[m, n, k]


# ---------------------------------------------------------------------------
# persistence

def _fmt(x: float) -> float:
    return float(f"{x:.17g}")


def _complex_array_out(arr: np.ndarray):
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return np.vectorize(_fmt)(stacked).tolist()


def save_instance(instance: NetworkInstance, path) -> None:
    doc = {
        "config": {"m": instance.config.m, "k": instance.config.k, "n": instance.config.n},
        "estimates": _complex_array_out(instance.estimates),
        "radii": np.vectorize(_fmt)(instance.radii).tolist(),
        "powers": np.vectorize(_fmt)(instance.powers).tolist(),
        "weights": np.vectorize(_fmt)(instance.weights).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_instance(path) -> NetworkInstance:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed instance file {path}: {exc.msg} at byte offset {exc.pos}") from exc
    try:
        cfg = NetworkConfig(int(doc["config"]["m"]), int(doc["config"]["k"]), int(doc["config"]["n"]))
        est = np.asarray(doc["estimates"], dtype=float)
        if est.ndim != 5 or est.shape[-1] != 2:
            raise ValueError(f"estimates array has shape {est.shape}, expected [M][M][K][N][2]")
        est = est[..., 0] + 1j * est[..., 1]
        return NetworkInstance(
            cfg, est,
            np.asarray(doc["radii"], dtype=float),
            np.asarray(doc["powers"], dtype=float),
            np.asarray(doc["weights"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"instance file {path} missing field {exc}") from exc
