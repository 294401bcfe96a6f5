"""
One session by hand over Z_7
============================

Three positions, keys fixed so every number can be checked on paper.
"""

from blindtrace.crypto import PositionPermutation
from blindtrace.field import Field
from blindtrace.protocol import ReceiverKeys, SenderKeys, receiver_count, receiver_encode, sender_respond

f = Field(7)

# The dealer's output. P_t(z) = a_t z + b_t, Q sends position t to Q[t].
sender_keys = SenderKeys(a=[2, 3, 4], b=[1, 0, 5], q=PositionPermutation([1, 2, 0]), field=f)
# expected[Q(t)] = P_t(r_t): P_0(1)=3 at 1, P_1(2)=6 at 2, P_2(3)=3 at 0
receiver_keys = ReceiverKeys(pads=[1, 2, 3], expected=[3, 3, 6], field=f)

x = [2, 5, 1]   # receiver's cell labels
y = [2, 3, 1]   # case database

# The receiver pads its labels. u alone is uniform and says nothing about x.
u = receiver_encode(x, receiver_keys)
print("u =", u.values.tolist())                      # [3, 0, 4]

# The sender applies P_t to u - y and shuffles by Q.
v = sender_respond(u, y, sender_keys)
print("v =", v.values.tolist())                      # [3, 3, 5]

# v[Q(t)] - s[Q(t)] = a_t (x_t - y_t), zero exactly when the labels agree.
print("s =", receiver_keys.expected.tolist())        # [3, 3, 6]
print("N =", receiver_count(v, receiver_keys))       # 2

# The receiver sees matches at shuffled positions 0 and 1, not at t=0 and t=2.
