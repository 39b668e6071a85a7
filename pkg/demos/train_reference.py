"""Train the reference CNN on the synthetic stroke task and save it."""

import os

from fisherprune import (
    TrainConfig, accuracy, generate_synthetic, reference_cnn, save_model, train,
)
from fisherprune.data import images_labels

# two classes of noisy ellipse images: horizontal vs vertical strokes
split = generate_synthetic(n_per_class=150, seed=0)
print(f"train {len(split.train)} / test {len(split.test)} images")

net = reference_cnn(seed=0)
conv_n, fc_n = net.param_count()
print(f"parameters: {conv_n} conv + {fc_n} dense")

tr_imgs, tr_labels = images_labels(split.train)
te_imgs, te_labels = images_labels(split.test)

cfg = TrainConfig(epochs=12, lr=0.005, seed=0)
result = train(net, tr_imgs, tr_labels, te_imgs, te_labels, cfg)

for epoch, loss, tr_acc, ev_acc in result.epoch_log:
    print(f"epoch {epoch:2d}  loss {loss:.4f}  train {tr_acc:.3f}  test {ev_acc:.3f}")

print(f"final train acc {result.final_train_acc:.3f}")
print(f"final test acc  {accuracy(net, te_imgs, te_labels):.3f}")

os.makedirs("out", exist_ok=True)
save_model(net, "out/model.ldap1", provenance={"seed": 0, "epochs": 12})
print("saved out/model.ldap1")
