# src/stochastic_bidomain/streams.py - Counter-based random streams, one per Monte-Carlo replica.
from __future__ import annotations

import numpy as np


def replica_seed(master_seed: int, replica_id: int) -> np.random.SeedSequence:
    if master_seed < 0 or replica_id < 0:
        raise ValueError(f"seeds must be >= 0, got master={master_seed}, replica={replica_id}")
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(replica_id),))


def replica_generator(master_seed: int, replica_id: int) -> np.random.Generator:
    """
    Philox stream for one replica.

    Streams depend only on (master_seed, replica_id), never on how many replicas
    ran before or on which thread, so parallel runs are order independent.

    The key has no mode or step axis. A simulation consumes the stream in a fixed
    order: one block of K standard normals per time step, for modes 1..K in turn.
    Changing K or dt therefore changes every draw of the replica.
    """
    return np.random.Generator(np.random.Philox(replica_seed(master_seed, replica_id)))


__all__ = ["replica_seed", "replica_generator"]
