"""Training a small MLP whose nonlinearity is an expression tree.

linear -> batch norm -> activation, softmax cross-entropy, Nesterov SGD with
step decay. Non-finite values end training with capped metrics.
Run: python notebooks/03_training.py
"""

from actevo.config import SearchConfig
from actevo.expr import parse
from actevo.nn import NetworkConfig, TrainConfig, init_network, train
from actevo.rng import make_rng
from actevo.search import train_candidate

cfg = SearchConfig()
data = cfg.data.build()
print("learning rates:", [cfg.train.lr_at(e) for e in (0, 10, 16, 18)])

for name in ("relu", "swish", "tanh_nmin", "mul(cos(x), gauss(x))"):
    m = train_candidate(parse(name), 0, cfg, data)
    print(f"{name:24s} {m.status:9s} val_acc {m.final_val_acc:.3f} val_loss {m.final_val_loss:.3f}")

# A network wired so every pre-activation lands on the diveps pole.
net = init_network(NetworkConfig(2, 3, (16,), batch_norm=False), make_rng(0))
net.params["W0"][:] = 0.0
net.params["b0"][:] = -1e-7
m = train(net, parse("diveps(one(x), nmin(x))"), data, TrainConfig(epochs=2))
print("engineered singularity:", m.status, m.final_val_loss, m.final_val_acc)
