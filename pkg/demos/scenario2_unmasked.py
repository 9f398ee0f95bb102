"""Placement-blind recovery on the reduced schedule without masking.

The attacker sees 17 snapshots of 116 unordered bits and knows only the
plaintext; the solver recovers where every register bit sits and the key,
then proves the key unique by blocking it and solving again.
"""

from snapshot_attack import driver

spec = driver.ReducedScheduleSpec()
planted = driver.plant(0, 16, 32, seed=3, reduced=spec)
res = driver.scenario2_sat(planted.observations, 16, 0, planted.plaintext, planted.table,
                           budget_s=120)
print("snapshot bits", planted.n)
print("outcome      ", res.outcome.value)
print("key          ", res.key.hex() if res.key else None)
print("true key     ", planted.key.hex())
print("formula      ", {k: res.stats[k] for k in ("n_vars", "n_or", "n_xor")})
if res.key:
    print("verifies     ", driver.verify_key(res.key, planted.plaintext, planted.ciphertext))
