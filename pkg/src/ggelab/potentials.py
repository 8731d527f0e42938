"""Trigonometric and Chebyshev polynomial potentials.

A torus potential is a real trigonometric polynomial

    V(theta) = c_0 + sum_k c_k cos(k theta) + s_k sin(k theta),

an interval potential is a Chebyshev expansion V(x) = sum_k t_k T_k(x).
Both admit exact evaluation of Tr V(E) from power traces of the Lax
matrix, which is why no other basis is supported.
"""

import numpy as np

__all__ = ["Potential", "parse_potential"]


class Potential:
    """Real polynomial potential on the torus or on [-1, 1].

    Args:
        domain: "torus" or "interval".
        cos: cosine coefficients (c_0, c_1, ...); torus only.
        sin: sine coefficients (s_1, s_2, ...); torus only.
        cheb: Chebyshev coefficients (t_0, t_1, ...); interval only.
    """

    def __init__(self, domain="torus", cos=None, sin=None, cheb=None):
        if domain not in ("torus", "interval"):
            raise ValueError(f"unknown domain {domain!r}")
        self.domain = domain
        if domain == "torus":
            if cheb is not None:
                raise ValueError("cheb coefficients are for interval potentials")
            self.cos = np.atleast_1d(np.asarray(cos if cos is not None else [0.0], float))
            self.sin = np.atleast_1d(np.asarray(sin if sin is not None else [], float))
            self.cheb = None
        else:
            if cos is not None or sin is not None:
                raise ValueError("cos/sin coefficients are for torus potentials")
            self.cheb = np.atleast_1d(np.asarray(cheb if cheb is not None else [0.0], float))
            self.cos = None
            self.sin = None

    @property
    def degree(self):
        if self.domain == "torus":
            deg = 0
            if self.cos.size > 1:
                nz = np.nonzero(self.cos[1:])[0]
                if nz.size:
                    deg = max(deg, int(nz[-1]) + 1)
            if self.sin.size:
                nz = np.nonzero(self.sin)[0]
                if nz.size:
                    deg = max(deg, int(nz[-1]) + 1)
            return deg
        nz = np.nonzero(self.cheb[1:])[0] if self.cheb.size > 1 else np.array([], int)
        return int(nz[-1]) + 1 if nz.size else 0

    @property
    def is_zero(self):
        return self.degree == 0 and self._constant == 0.0

    @property
    def _constant(self):
        return float(self.cos[0] if self.domain == "torus" else self.cheb[0])

    def __call__(self, u):
        """Evaluate at angles (torus) or at points of [-1, 1] (interval)."""
        u = np.asarray(u, float)
        if self.domain == "torus":
            out = np.full_like(u, self.cos[0])
            for k in range(1, self.cos.size):
                out += self.cos[k] * np.cos(k * u)
            for k in range(1, self.sin.size + 1):
                out += self.sin[k - 1] * np.sin(k * u)
            return out
        return np.polynomial.chebyshev.chebval(u, self.cheb)

    def scaled(self, factor):
        """Return factor * V (used by thermodynamic integration)."""
        if self.domain == "torus":
            return Potential("torus", cos=factor * self.cos, sin=factor * self.sin)
        return Potential("interval", cheb=factor * self.cheb)

    def to_dict(self):
        if self.domain == "torus":
            return {
                "domain": "torus",
                "cos": [float(c) for c in self.cos],
                "sin": [float(s) for s in self.sin],
            }
        return {"domain": "interval", "cheb": [float(t) for t in self.cheb]}

    def __repr__(self):
        if self.domain == "torus":
            return f"Potential(torus, cos={self.cos.tolist()}, sin={self.sin.tolist()})"
        return f"Potential(interval, cheb={self.cheb.tolist()})"


def parse_potential(text):
    """Parse a coefficient string like "c0=0.1,c1=1.0,s1=-0.5" or "t1=1.0".

    Keys ck/sk give a torus potential, keys tk an interval one; mixing the
    two families is an error.  An empty or missing string means V = 0 on
    the torus.
    """
    if not text or not text.strip():
        return Potential("torus", cos=[0.0])
    cos, sin, cheb = {}, {}, {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            key, val = item.split("=")
            fam, idx = key.strip()[0], int(key.strip()[1:])
            val = float(val)
        except (ValueError, IndexError):
            raise ValueError(f"bad potential term {item!r}, expected e.g. c1=0.5")
        if fam == "c":
            cos[idx] = val
        elif fam == "s":
            if idx < 1:
                raise ValueError("sine coefficients start at s1")
            sin[idx] = val
        elif fam == "t":
            cheb[idx] = val
        else:
            raise ValueError(f"unknown coefficient family {fam!r} in {item!r}")
    if cheb and (cos or sin):
        raise ValueError("cannot mix torus (c/s) and interval (t) coefficients")
    if cheb:
        arr = np.zeros(max(cheb) + 1)
        for k, v in cheb.items():
            arr[k] = v
        return Potential("interval", cheb=arr)
    kmax = max([0] + list(cos) + list(sin))
    c = np.zeros(kmax + 1)
    s = np.zeros(kmax)
    for k, v in cos.items():
        c[k] = v
    for k, v in sin.items():
        s[k - 1] = v
    return Potential("torus", cos=c, sin=s)
