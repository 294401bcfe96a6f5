"""
How much key material does a deployment need
============================================

Volume is linear in population x cases x days. Byte costs per position
are fitted from published scenario estimates.
"""

from blindtrace.estimator import FIT, ScenarioParams, default_scenarios, estimate, table_report, wire_byte_costs

print(f"fitted: {FIT.key_bytes_per_position:.2f} B keys, {FIT.comm_bytes_per_position:.2f} B traffic per position")
print()
print(table_report(default_scenarios()))
print()

# This implementation's own wire volume is larger per position: 64-bit
# elements and 32-bit shuffle indices.
keys, comms = wire_byte_costs()
own = estimate(ScenarioParams(1_000_000, 100, key_bytes_per_position=keys, comm_bytes_per_position=comms))
print(f"city small at {keys}/{comms} B per position: {own.keys_tb:.1f} TB keys, {own.comms_tb:.1f} TB traffic")

# Two weeks of contact history scales every figure by 14.
fortnight = estimate(ScenarioParams(1_000_000, 100, days=14))
print(f"city small, 14 days: {fortnight.keys_tb:.1f} TB keys")
