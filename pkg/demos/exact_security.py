"""
Checking perfect security by enumeration
========================================

Over Z_3 every dealer output, and every coin the simulator flips, can be
listed. The corrupt party's view in a real run and the view produced by
the simulator (which only sees the match count) come out as the same
distribution over exact fractions.
"""

from blindtrace.field import Field
from blindtrace.harness import enumerate_real_view, enumerate_sim_view, shifting_receiver
from blindtrace.protocol import SessionParams

params = SessionParams(n=2, field=Field(3))
x, y = (0, 1), (0, 2)

for corrupt in ("receiver", "sender"):
    real = enumerate_real_view(corrupt, x, y, params, include_output=True)
    sim = enumerate_sim_view(corrupt, x, y, params, include_output=True)
    print(f"corrupt {corrupt}: {len(real)} distinct views, total mass {real.total()}, equal: {real == sim}")

# A receiver that ignores its input and sends r + 1 learns no more than
# the count for the input it effectively used.
adv = shifting_receiver(1)
real = enumerate_real_view("receiver", x, y, params, adv)
sim = enumerate_sim_view("receiver", x, y, params, adv)
print("shifting receiver, equal:", real == sim)

# One view and its probability, for a feel of the data.
view, pr = next(iter(real.items()))
print("pads, expected, v =", view, "with probability", pr)
