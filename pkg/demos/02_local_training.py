"""
Local training on one node
==========================

Each edge node runs plain mini-batch SGD on its own data. The models are
tiny (softmax regression or a ReLU MLP), which is enough to exercise every
part of the federated machinery on a laptop.
"""

import numpy as np

from edgefl import ModelSpec, TrainConfig, evaluate, generate_blobs, init_weights, loss_and_grad, node_training

# five Gaussian clusters on a random simplex, 16 features
data = generate_blobs(n_classes=5, per_class=200, feature_dim=16, separation=5.0, seed=0)
perm = np.random.default_rng(0).permutation(len(data))
train, test = data.subset(perm[:800]), data.subset(perm[800:])

spec = ModelSpec("mlp", data.feature_dim, data.class_count, hidden_dims=(32,), init_seed=0)
w = init_weights(spec)
print("layout:", w.layout)
print(f"untrained accuracy {evaluate(w, test):.3f}")

cfg = TrainConfig(batch_size=32, local_epochs=1, learning_rate=0.1, shuffle_seed=0)
for epoch in range(5):
    w = node_training(w, train, cfg)
    loss, _ = loss_and_grad(w, train)
    print(f"after call {epoch + 1}: version {w.version}, loss {loss:.4f}, test accuracy {evaluate(w, test):.3f}")

# node_training is a pure function: same inputs, same bits
again = node_training(init_weights(spec), train, cfg)
print("deterministic:", again.same_values(node_training(init_weights(spec), train, cfg)))

# gradients are exposed separately; compare one entry with a central difference
batch = train.subset(range(8))
_, grad = loss_and_grad(w, batch)
h = 1e-3
bumped = dict(w.arrays())
up = bumped["b1"].astype(np.float64).copy()
up[0] += h
down = up.copy()
down[0] -= 2 * h
f_up = loss_and_grad(w.from_arrays({**bumped, "b1": up}), batch)[0]
f_down = loss_and_grad(w.from_arrays({**bumped, "b1": down}), batch)[0]
print(f"d loss / d b1[0]: analytic {grad['b1'][0]:.6f}, numeric {(f_up - f_down) / (2 * h):.6f}")
