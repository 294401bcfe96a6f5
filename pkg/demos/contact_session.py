"""
From location trails to a match count
=====================================

A patient and a user walk around the same square for an hour. The case
database is built from the patient's trail, the user's trail is aligned
to the same timeline, and one session counts the space-time cells they
shared.
"""

import math

import numpy as np

from blindtrace.geo import GeoPoint, GridConfig
from blindtrace.ingest import SessionRange, TrailRecord, align_receiver, align_sender
from blindtrace.protocol import SessionParams, ideal_functionality, run_local

grid = GridConfig()                         # 7 m cells, 20 min slots, 27 offsets per slot
day = SessionRange(0, 72)                   # one day from the epoch
gen = np.random.default_rng(7)


def walk(user, lat, lon, start_slot, slots, step_m):
    out = []
    for k in range(start_slot, start_slot + slots):
        theta = gen.uniform(0, 2 * math.pi)
        lat += step_m * math.cos(theta) / 110_574
        lon += step_m * math.sin(theta) / (111_320 * math.cos(math.radians(lat)))
        out.append(TrailRecord(user, k * grid.slot_seconds + 60, lat, lon))
    return out


patient = walk("patient", 41.3851, 2.1734, 30, 3, 2.0)
user = walk("user", 41.3851, 2.1734, 31, 3, 2.0)
stranger = walk("stranger", 41.3900, 2.1800, 30, 3, 2.0)

case_db = align_sender(patient, grid, day).labels
print(f"{len(case_db)} positions per session")      # 72 slots x 27

for who in (user, stranger):
    x = align_receiver(who, grid, day).labels
    n = run_local(x, case_db, SessionParams(len(x)))
    assert n == ideal_functionality(x, case_db)
    print(f"{who[0].user_id}: N = {n}")

# The user learns a count, never which slot or cell produced it.
