"""
Weight sets, averaging and the wire format
==========================================

A model is just an ordered list of named float32 tensors. Peers exchange
them in a small binary format and combine them with an element-wise mean.
"""

import numpy as np

from edgefl import WeightSet, average, deserialize, serialize

# two "peers" holding the same architecture with different values
a = WeightSet.from_arrays({"W0": [[1.0, 2.0], [3.0, 4.0]], "b0": [0.0, 1.0]})
b = WeightSet.from_arrays({"W0": [[3.0, 2.0], [1.0, 0.0]], "b0": [2.0, 1.0]})

# the mean is taken entry by entry, accumulated in 64-bit and summed in
# sorted order, so the result never depends on the order of the inputs
mean = average([a, b])
print("W0 mean:\n", mean["W0"])
print("same result with inputs swapped:", average([b, a]).same_values(mean))

# optional convex weights, e.g. by local sample counts
print("weighted b0:", average([a, b], weights=[0.75, 0.25])["b0"])

# serialization carries version, producer and a timestamp alongside the tensors
stamped = mean.with_meta(version=3, producer="node01", produced_at=1_700_000_000_000)
blob = serialize(stamped)
print(f"{len(blob)} bytes, magic {blob[:4]!r}")
back = deserialize(blob)
print("round trip equal:", back == stamped, "| producer:", back.producer)

# tensors are read-only, so a published model can be shared without copies
try:
    back["b0"][0] = 99
except ValueError as exc:
    print("immutable:", exc)

print("all finite:", np.isfinite(back["W0"]).all())
