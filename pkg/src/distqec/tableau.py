"""Stabilizer tableau simulation.

`StabilizerTableau` is a destabilizer/stabilizer tableau in the usual
2n-row form with sign tracking.  It backs two consumers:

* the concrete oracle sampler (`sim.oracle_sample`), which plays circuits
  shot by shot with true measurement collapse, and
* a symbolic mode where each row's sign carries an affine expression over
  measurement-outcome variables.  Measuring an operator whose value is
  already determined by earlier outcomes then *returns that expression*,
  which is exactly the information needed to construct detector and
  observable templates for periodic check schedules.

Rows 0..n-1 are destabilizers, rows n..2n-1 stabilizers.  Extra
"spectator" rows can be attached to track how candidate logical operators
are dragged through a measurement sequence.
"""

from __future__ import annotations

import numpy as np

from ._kernels import product_phase as _k_product_phase
from ._kernels import rowsum_batch as _k_rowsum_batch

__all__ = ["StabilizerTableau", "PauliVec", "pauli_vec"]

_AXIS_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class PauliVec:
    """A Pauli operator as x/z support bit vectors (sign-free)."""

    __slots__ = ("x", "z", "_support")

    def __init__(self, n: int, terms=()):
        self.x = np.zeros(n, dtype=bool)
        self.z = np.zeros(n, dtype=bool)
        self._support = None
        for qubit, axis in terms:
            bx, bz = _AXIS_BITS[axis]
            if bx:
                self.x[qubit] ^= True
            if bz:
                self.z[qubit] ^= True

    @property
    def support(self) -> np.ndarray:
        if self._support is None:
            self._support = np.flatnonzero(self.x | self.z)
        return self._support

    def __repr__(self):
        names = []
        for q in self.support:
            a = "XZY"[self.x[q] + 2 * (self.x[q] & self.z[q]) - (not self.x[q]) + 1] \
                if False else ("Y" if self.x[q] and self.z[q] else "X" if self.x[q] else "Z")
            names.append(f"{a}{q}")
        return "*".join(names) or "I"


def pauli_vec(n: int, terms) -> PauliVec:
    return PauliVec(n, terms)


class StabilizerTableau:
    """CHP-style tableau initialized to |0...0>.

    With ``symbolic=True``, signs are pairs (constant, variable mask); each
    random measurement mints a fresh variable and deterministic
    measurements report their affine outcome expression.
    """

    def __init__(self, n: int, symbolic: bool = False, rng: np.random.Generator | None = None):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True            # destabilizers X_i
        self.z[n + idx, idx] = True        # stabilizers Z_i
        self.r = np.zeros(2 * n, dtype=np.int8)
        self.symbolic = symbolic
        self.rng = rng
        self.n_vars = 0
        if symbolic:
            self.var: list[int] = [0] * (2 * n)
        self.spect_x: list[np.ndarray] = []
        self.spect_z: list[np.ndarray] = []
        self.spect_r: list[int] = []
        self.spect_var: list[int] = []

    # -- spectator rows -----------------------------------------------------

    def add_spectator(self, p: PauliVec) -> int:
        """Track an operator through future measurements; returns its handle."""
        self.spect_x.append(p.x.copy())
        self.spect_z.append(p.z.copy())
        self.spect_r.append(0)
        self.spect_var.append(0)
        return len(self.spect_x) - 1

    def spectator(self, handle: int) -> tuple[PauliVec, int, int]:
        p = PauliVec(self.n)
        p.x = self.spect_x[handle].copy()
        p.z = self.spect_z[handle].copy()
        return p, self.spect_r[handle], self.spect_var[handle]

    # -- single-qubit and two-qubit gates ------------------------------------

    def h(self, q: int) -> None:
        x, z = self.x[:, q], self.z[:, q]
        self.r ^= (x & z)
        self.x[:, q], self.z[:, q] = z.copy(), x.copy()
        for i in range(len(self.spect_x)):
            sx, sz = self.spect_x[i][q], self.spect_z[i][q]
            self.spect_r[i] ^= int(sx & sz)
            self.spect_x[i][q], self.spect_z[i][q] = sz, sx

    def s(self, q: int) -> None:
        x, z = self.x[:, q], self.z[:, q]
        self.r ^= (x & z)
        self.z[:, q] ^= x
        for i in range(len(self.spect_x)):
            sx, sz = self.spect_x[i][q], self.spect_z[i][q]
            self.spect_r[i] ^= int(sx & sz)
            self.spect_z[i][q] ^= sx

    def sdag(self, q: int) -> None:
        x, z = self.x[:, q], self.z[:, q]
        self.r ^= (x & ~z)
        self.z[:, q] ^= x
        for i in range(len(self.spect_x)):
            sx, sz = self.spect_x[i][q], self.spect_z[i][q]
            self.spect_r[i] ^= int(sx & ~sz)
            self.spect_z[i][q] ^= sx

    def x_gate(self, q: int) -> None:
        self.r ^= self.z[:, q]
        for i in range(len(self.spect_x)):
            self.spect_r[i] ^= int(self.spect_z[i][q])

    def y_gate(self, q: int) -> None:
        self.r ^= self.x[:, q] ^ self.z[:, q]
        for i in range(len(self.spect_x)):
            self.spect_r[i] ^= int(self.spect_x[i][q] ^ self.spect_z[i][q])

    def z_gate(self, q: int) -> None:
        self.r ^= self.x[:, q]
        for i in range(len(self.spect_x)):
            self.spect_r[i] ^= int(self.spect_x[i][q])

    def cx(self, c: int, t: int) -> None:
        xc, zc = self.x[:, c], self.z[:, c]
        xt, zt = self.x[:, t], self.z[:, t]
        self.r ^= xc & zt & (xt ^ zc ^ True)
        self.x[:, t] ^= xc
        self.z[:, c] ^= zt
        for i in range(len(self.spect_x)):
            sxc, szc = self.spect_x[i][c], self.spect_z[i][c]
            sxt, szt = self.spect_x[i][t], self.spect_z[i][t]
            self.spect_r[i] ^= int(sxc & szt & (sxt ^ szc ^ True))
            self.spect_x[i][t] ^= sxc
            self.spect_z[i][c] ^= szt

    def cz(self, a: int, b: int) -> None:
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def apply_pauli(self, p: PauliVec) -> None:
        """Left-multiply the state by a Pauli (an injected error)."""
        for q in p.support:
            if p.x[q] and p.z[q]:
                self.y_gate(q)
            elif p.x[q]:
                self.x_gate(q)
            else:
                self.z_gate(q)

    def apply_pauli_expr(self, p: PauliVec, const: int, var: int) -> None:
        """Symbolic mode: apply P conditioned on an outcome expression.

        Rows anticommuting with P pick up the expression in their sign;
        this realizes measurement-conditioned Paulis (resets, feed-forward)
        without branching."""
        if not self.symbolic:
            raise RuntimeError("apply_pauli_expr requires symbolic mode")
        anti = self._anticommute_mask(p)
        for h in np.flatnonzero(anti):
            self.r[h] ^= const
            self.var[h] ^= var
        for s_idx in range(len(self.spect_x)):
            if self._spect_anticommutes(s_idx, p):
                self.spect_r[s_idx] ^= const
                self.spect_var[s_idx] ^= var

    # -- measurement ----------------------------------------------------------

    def _anticommute_mask(self, p: PauliVec) -> np.ndarray:
        # low-weight operators make this a handful of column XORs; plain
        # numpy beats kernel dispatch here
        sup = p.support
        acc = np.zeros(2 * self.n, dtype=bool)
        for q in sup:
            if p.z[q]:
                acc ^= self.x[:, q]
            if p.x[q]:
                acc ^= self.z[:, q]
        return acc

    def _spect_anticommutes(self, i: int, p: PauliVec) -> bool:
        acc = False
        for q in p.support:
            if p.z[q]:
                acc ^= bool(self.spect_x[i][q])
            if p.x[q]:
                acc ^= bool(self.spect_z[i][q])
        return acc

    @staticmethod
    def _g_sum(x1, z1, x2, z2) -> int:
        # phase exponent contribution of multiplying row (x1,z1) onto (x2,z2)
        a = x1 & z1
        b = x1 & ~z1
        c = ~x1 & z1
        g = np.zeros(len(x1), dtype=np.int64)
        g[a] = z2[a].astype(np.int64) - x2[a].astype(np.int64)
        g[b] = z2[b].astype(np.int64) * (2 * x2[b].astype(np.int64) - 1)
        g[c] = x2[c].astype(np.int64) * (1 - 2 * z2[c].astype(np.int64))
        return int(g.sum())

    def _rowsum_spect(self, s: int, i: int) -> None:
        g = self._g_sum(self.x[i], self.z[i], self.spect_x[s], self.spect_z[s])
        tot = (2 * self.spect_r[s] + 2 * int(self.r[i]) + g) % 4
        self.spect_r[s] = tot // 2
        self.spect_x[s] ^= self.x[i]
        self.spect_z[s] ^= self.z[i]
        if self.symbolic:
            self.spect_var[s] ^= self.var[i]

    def measure(self, p: PauliVec, forced: int | None = None):
        """Measure a Pauli product.

        Concrete mode returns ``(outcome_bit, was_random)``; ``forced`` fixes
        the outcome of a random measurement (used for resets).  Symbolic mode
        returns ``(const, var_mask, was_random)`` where a random measurement
        mints a fresh variable (mask with one new bit, const 0).
        """
        n = self.n
        anti = self._anticommute_mask(p)
        all_anti = np.flatnonzero(anti)
        stab_anti = all_anti[all_anti >= n]
        if len(stab_anti):
            pivot = int(stab_anti[0])
            others = all_anti[all_anti != pivot]
            _k_rowsum_batch(self.x, self.z, self.r, others, pivot)
            if self.symbolic:
                for h in others:
                    self.var[int(h)] ^= self.var[pivot]
            for s_idx in range(len(self.spect_x)):
                if self._spect_anticommutes(s_idx, p):
                    self._rowsum_spect(s_idx, pivot)
            # pivot's old row becomes its destabilizer; pivot becomes +-P
            d = pivot - n
            self.x[d] = self.x[pivot].copy()
            self.z[d] = self.z[pivot].copy()
            self.r[d] = self.r[pivot]
            if self.symbolic:
                self.var[d] = self.var[pivot]
                v = self.n_vars
                self.n_vars += 1
                self.x[pivot] = p.x.copy()
                self.z[pivot] = p.z.copy()
                self.r[pivot] = 0
                self.var[pivot] = 1 << v
                return 0, 1 << v, True
            if forced is not None:
                out = int(forced)
            else:
                out = int(self.rng.integers(0, 2)) if self.rng is not None else 0
            self.x[pivot] = p.x.copy()
            self.z[pivot] = p.z.copy()
            self.r[pivot] = out
            return out, True

        # deterministic: accumulate stabilizer rows named by anticommuting
        # destabilizers into a scratch row equal to +-P
        dest_anti = all_anti[all_anti < n]
        sx = np.zeros(n, dtype=bool)
        sz = np.zeros(n, dtype=bool)
        sr = int(_k_product_phase(self.x, self.z, self.r, dest_anti + n,
                                  sx, sz))
        if self.symbolic:
            svar = 0
            for i in dest_anti:
                svar ^= self.var[n + int(i)]
            return sr, svar, False
        return sr, False

    # -- resets ---------------------------------------------------------------

    def reset_z(self, q: int) -> None:
        p = PauliVec(self.n, [(q, "Z")])
        out = self.measure(p, forced=None)
        if self.symbolic:
            raise RuntimeError("resets are not supported in symbolic mode")
        if out[0]:
            self.x_gate(q)

    def reset_x(self, q: int) -> None:
        p = PauliVec(self.n, [(q, "X")])
        out = self.measure(p, forced=None)
        if self.symbolic:
            raise RuntimeError("resets are not supported in symbolic mode")
        if out[0]:
            self.z_gate(q)

    # -- group membership ------------------------------------------------------

    def stabilizer_contains(self, p: PauliVec) -> bool:
        """True iff +-P is in the stabilizer group (ignoring sign)."""
        anti = self._anticommute_mask(p)
        if anti[self.n:].any():
            return False
        # commutes with the whole group; P is in the group iff the scratch
        # accumulation reproduces P exactly, which it does by construction
        n = self.n
        dest_anti = np.flatnonzero(anti[:n])
        sx = np.zeros(n, dtype=bool)
        sz = np.zeros(n, dtype=bool)
        for i in dest_anti:
            sx ^= self.x[n + i]
            sz ^= self.z[n + i]
        return bool((sx == p.x).all() and (sz == p.z).all())
