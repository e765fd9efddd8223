"""Hypothesis strategies shared by unit and acceptance tests."""

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from edgefl.weights import WeightSet

F32_MAX = float(np.finfo(np.float32).max)

names = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=8)
finite_f32 = st.floats(min_value=-F32_MAX, max_value=F32_MAX, allow_nan=False, width=32)


@st.composite
def weight_sets(draw):
    entry_names = draw(st.lists(names, min_size=0, max_size=4, unique=True))
    entries = []
    for name in entry_names:
        shape = draw(hnp.array_shapes(min_dims=1, max_dims=3, min_side=1, max_side=4))
        entries.append((name, draw(hnp.arrays(np.float32, shape, elements=finite_f32))))
    return WeightSet(
        tuple(entries),
        version=draw(st.integers(0, 2**64 - 1)),
        producer=draw(st.text(max_size=10)),
        produced_at=draw(st.integers(0, 2**64 - 1)),
    )


registry_ops = st.lists(
    st.tuples(st.sampled_from(["register", "unregister"]), st.sampled_from(["n1", "n2", "n3", "n4"]),
              st.integers(1, 65535)),
    max_size=30,
)
