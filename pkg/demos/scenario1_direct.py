"""Direct key read-out when the key register's bit positions are known.

Plants a 3-share masked encryption, takes one snapshot at the first cycle
where the whole key block sits in the key register, and XORs the shares.
"""

from snapshot_attack import driver

d = 2
planted = driver.plant(d, 16, 16, seed=1)
loc = driver.key_locations(planted.placement, d, planted.table)
res = driver.scenario1_direct(planted.observations[0], loc, d,
                              plaintext=planted.plaintext, ciphertext=planted.ciphertext)
print("true key     ", planted.key.hex())
print("recovered    ", res.candidates[0].hex())
print("bits read    ", res.bits_read)
print("verifies     ", res.verified[0])
