"""
Splitting data across nodes
===========================

Two schemes decide which samples each node holds. ``uniform`` deals every
class evenly; ``normal`` skews node k towards classes near k*N/K, so each
class has a "home" node holding most of it.
"""

import numpy as np

from edgefl import generate_blobs, local_split, partition_normal, partition_uniform

data = generate_blobs(n_classes=10, per_class=1000, feature_dim=12, separation=4.0, seed=0)

uniform = partition_uniform(data.labels, 10, 10, seed=0)
normal = partition_normal(data.labels, 10, 10, seed=0, spread=0.2)

np.set_printoptions(linewidth=120)
print("uniform: samples per (node, class)")
print(uniform.class_histogram)
print("\nnormal: samples per (node, class)")
print(normal.class_histogram)
print("\nmodal class per node:", normal.class_histogram.argmax(axis=1).tolist())
print("node sizes:", [len(a) for a in normal.assignments])

# every node keeps 20% of its own partition as a local test set
train_idx, test_idx = local_split(normal.indices_for(3), seed=0, node_id=3)
print(f"\nnode 3: {len(train_idx)} train / {len(test_idx)} test samples")

# plans serialize to JSON so a run can be reproduced exactly
text = normal.to_json()
print(f"plan JSON is {len(text)} characters")
