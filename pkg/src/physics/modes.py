"""Sparse Fock-basis state over labelled bosonic modes.

A ModeRegister stores complex amplitudes keyed by occupation tuples, one
entry per mode in `modes`. Linear optical maps are applied exactly by
substituting each input creation operator with a linear combination of
output creation operators, so photon number is conserved and nothing is
truncated after pair generation.
"""

from dataclasses import dataclass, field
from math import factorial, sqrt
from typing import NamedTuple

import numpy as np

from ..core.errors import ModelError

NORM_TOLERANCE = 1e-9
MODE_KINDS = ("write", "read", "atomic", "lost")


class Mode(NamedTuple):
    kind: str
    label: str
    tag: str = ""

    def __str__(self):
        suffix = f"/{self.tag}" if self.tag else ""
        return f"{self.kind}:{self.label}{suffix}"


@dataclass(frozen=True)
class ModeRegister:
    modes: tuple
    amplitudes: dict = field(default_factory=dict)
    n_max: int = 2
    leakage: float = 0.0

    def __post_init__(self):
        for mode in self.modes:
            if mode.kind not in MODE_KINDS:
                raise ModelError(f"unknown mode kind '{mode.kind}'")
        if len(set(self.modes)) != len(self.modes):
            raise ModelError("duplicate modes in register")

    @classmethod
    def fock(cls, modes, occupation, n_max=2):
        """Single number state, e.g. fock(modes, (1, 0))."""
        modes = tuple(modes)
        if len(occupation) != len(modes):
            raise ModelError("occupation length does not match the modes")
        return cls(modes, {tuple(int(n) for n in occupation): 1.0 + 0j}, n_max)

    def index(self, mode):
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ModelError(f"mode {mode} not in register") from None

    def has(self, mode):
        return mode in self.modes

    def norm(self):
        return sum(abs(a) ** 2 for a in self.amplitudes.values())

    def amplitude(self, occupation):
        return self.amplitudes.get(tuple(occupation), 0j)

    def check_norm(self, expected=1.0):
        total = self.norm()
        if abs(total - expected) > NORM_TOLERANCE:
            raise ModelError(f"register norm {total:.12g} deviates from {expected:g}")
        return total

    def photon_numbers(self, modes):
        """Probability distribution of the summed occupation of `modes`."""
        idx = [self.index(m) for m in modes]
        dist = {}
        for occ, amp in self.amplitudes.items():
            n = sum(occ[i] for i in idx)
            dist[n] = dist.get(n, 0.0) + abs(amp) ** 2
        return dist

    def marginal(self, modes):
        """Occupation distribution over `modes`, other modes traced out."""
        idx = [self.index(m) for m in modes]
        dist = {}
        for occ, amp in self.amplitudes.items():
            key = tuple(occ[i] for i in idx)
            dist[key] = dist.get(key, 0.0) + abs(amp) ** 2
        return dist

    def pruned(self, threshold=0.0):
        """Drop amplitudes with |a| <= threshold."""
        kept = {occ: a for occ, a in self.amplitudes.items() if abs(a) > threshold}
        return ModeRegister(self.modes, kept, self.n_max, self.leakage)


def _expand_creation(columns, occupation, n_out):
    """Expand Π_i (Σ_o columns[i][o] b_o†)^{k_i} / sqrt(k_i!) |0⟩ over output modes."""
    state = {(0,) * n_out: 1.0 + 0j}
    norm = 1.0
    for column, k in zip(columns, occupation):
        if k == 0:
            continue
        norm *= factorial(k)
        nonzero = [(o, c) for o, c in enumerate(column) if c != 0]
        for _ in range(k):
            nxt = {}
            for occ, amp in state.items():
                for o, c in nonzero:
                    new = list(occ)
                    new[o] += 1
                    key = tuple(new)
                    nxt[key] = nxt.get(key, 0j) + amp * c * sqrt(new[o])
            state = nxt
    scale = 1.0 / sqrt(norm)
    return {occ: amp * scale for occ, amp in state.items() if amp != 0}


def apply_linear_map(register, inputs, outputs, matrix):
    """Replace `inputs` by `outputs` under a_i† -> Σ_o matrix[o, i] b_o†.

    `matrix` has shape (len(outputs), len(inputs)). Outputs must be new
    modes. The map preserves the norm when its columns are orthonormal.
    """
    inputs = tuple(inputs)
    outputs = tuple(outputs)
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (len(outputs), len(inputs)):
        raise ModelError(f"map shape {matrix.shape} does not match {len(outputs)} outputs x {len(inputs)} inputs")
    for mode in outputs:
        if register.has(mode):
            raise ModelError(f"output mode {mode} already present")

    in_idx = [register.index(m) for m in inputs]
    keep_idx = [i for i in range(len(register.modes)) if i not in in_idx]
    new_modes = tuple(register.modes[i] for i in keep_idx) + outputs
    columns = [matrix[:, j] for j in range(len(inputs))]

    cache = {}
    amplitudes = {}
    for occ, amp in register.amplitudes.items():
        k = tuple(occ[i] for i in in_idx)
        if k not in cache:
            cache[k] = _expand_creation(columns, k, len(outputs))
        rest = tuple(occ[i] for i in keep_idx)
        for out_occ, coeff in cache[k].items():
            key = rest + out_occ
            amplitudes[key] = amplitudes.get(key, 0j) + amp * coeff

    return ModeRegister(new_modes, amplitudes, register.n_max, register.leakage)


def isometry_completion(matrix, extra=None):
    """Loss block L with M†M + D + L†L = I, D the Gram of `extra` columns.

    Raises ModelError if the map is not a contraction.
    """
    m = np.asarray(matrix, dtype=complex)
    gram = m.conj().T @ m
    if extra is not None:
        gram = gram + np.asarray(extra, dtype=complex)
    deficit = np.eye(gram.shape[0]) - gram
    deficit = (deficit + deficit.conj().T) / 2
    evals, evecs = np.linalg.eigh(deficit)
    if evals.min() < -1e-12:
        raise ModelError(f"readout map is not a contraction (deficit eigenvalue {evals.min():.3g})")
    evals = np.clip(evals, 0.0, None)
    return evecs @ np.diag(np.sqrt(evals)) @ evecs.conj().T
