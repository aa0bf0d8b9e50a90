"""Ring replay buffer with a binary snapshot format.

Snapshot layout (all little-endian)::

    magic   b"STRB"                  4 bytes
    version uint32                   currently 1
    header  uint32 length + UTF-8 JSON {capacity, size, cursor, inserted, widths}
    records size x (uint32 byte length + float64 payload)

Each record is one transition, fields concatenated in ``FIELDS`` order; the
payload length is checked against the widths on load. Records are stored in
slot order, so a reloaded buffer samples identically.
"""
from __future__ import annotations

import json
import struct

import numpy as np

FIELDS = ("obs", "ctx", "act", "rew", "next_obs", "next_ctx", "done")
MAGIC = b"STRB"
VERSION = 1


class InsufficientData(RuntimeError):
    """Fewer transitions than requested; the caller should defer training."""


class ReplayBuffer:
    """Fixed-capacity ring of transitions.

    ``ctx``/``next_ctx`` hold the controller context next to the observation
    so the actor's mean can be re-evaluated on replayed states.
    """

    def __init__(self, capacity, obs_dim, act_dim, ctx_dim=0):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.widths = {"obs": obs_dim, "ctx": ctx_dim, "act": act_dim, "rew": 1,
                       "next_obs": obs_dim, "next_ctx": ctx_dim, "done": 1}
        self.data = {k: np.zeros((self.capacity, w)) for k, w in self.widths.items()}
        self.size = 0
        self.cursor = 0
        self.inserted = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, next_obs, done, ctx=None, next_ctx=None):
        """Append a batch of transitions (leading axis = count)."""
        batch = {"obs": obs, "act": act, "rew": rew, "next_obs": next_obs, "done": done,
                 "ctx": ctx, "next_ctx": next_ctx}
        n = np.shape(obs)[0] if np.ndim(obs) == 2 else 1
        for key, arr in batch.items():
            w = self.widths[key]
            if arr is None:
                if w:
                    raise ValueError(f"missing field {key}")
                arr = np.zeros((n, 0))
            batch[key] = np.asarray(arr, dtype=float).reshape(n, w)
        slots = (self.cursor + np.arange(n)) % self.capacity
        keep = slice(max(0, n - self.capacity), n)  # later rows overwrite earlier ones
        for key in FIELDS:
            self.data[key][slots[keep]] = batch[key][keep]
        self.cursor = int((self.cursor + n) % self.capacity)
        self.size = min(self.size + n, self.capacity)
        self.inserted += n

    def get(self, idx):
        return {k: v[idx] for k, v in self.data.items()}

    def sample_indices(self, n, rng, replace=True):
        if self.size < n or self.size == 0:
            raise InsufficientData(f"need {n} transitions, have {self.size}")
        if replace:
            return rng.integers(0, self.size, size=n)
        return rng.permutation(self.size)[:n]

    def sample_batch(self, n, rng, n_negatives=None, replace=True):
        """A uniform batch and, from an independent draw, negative next-observations."""
        idx = self.sample_indices(n, rng, replace)
        neg = self.sample_indices(n if n_negatives is None else n_negatives, rng, replace)
        return self.get(idx), self.data["next_obs"][neg]

    # ------------------------------------------------------------------
    def save(self, path):
        header = json.dumps({"capacity": self.capacity, "size": self.size,
                             "cursor": self.cursor, "inserted": self.inserted,
                             "widths": self.widths}).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC + struct.pack("<II", VERSION, len(header)) + header)
            for i in range(self.size):
                rec = np.concatenate([self.data[k][i] for k in FIELDS]).astype("<f8").tobytes()
                fh.write(struct.pack("<I", len(rec)) + rec)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[:4] != MAGIC:
            raise ValueError(f"{path} is not a replay-buffer snapshot")
        version, hlen = struct.unpack_from("<II", blob, 4)
        if version != VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        off = 12
        head = json.loads(blob[off:off + hlen])
        off += hlen
        w = head["widths"]
        buf = cls(head["capacity"], w["obs"], w["act"], w["ctx"])
        total = sum(w[k] for k in FIELDS)
        for i in range(head["size"]):
            (length,) = struct.unpack_from("<I", blob, off)
            off += 4
            if length != 8 * total:
                raise ValueError("record length does not match field widths")
            row = np.frombuffer(blob, dtype="<f8", count=total, offset=off)
            off += length
            start = 0
            for k in FIELDS:
                buf.data[k][i] = row[start:start + w[k]]
                start += w[k]
        buf.size, buf.cursor, buf.inserted = head["size"], head["cursor"], head["inserted"]
        return buf
