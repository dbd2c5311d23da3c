"""Training and constrained random model search.

Trains the reference two-conv architecture on the demo corpus, then runs
a small constrained random search over MFCC and architecture choices and
ranks the candidates by parent-class F1. Artifacts go to demos/out/.
"""

import json

from _common import OUT, ensure_corpus, ensure_model
from kwspot import nn
from kwspot.selection import SearchSpace, run_search


def main():
    manifest = ensure_corpus()
    blob = ensure_model()
    metrics = json.loads((blob.parent / "metrics.json").read_text())
    print(f"reference model: {blob}")
    print(f"  validation F1 {metrics['val_f1']:.4f}, "
          f"parent accuracy {metrics['val_accuracy']:.4f}, "
          f"{metrics['parameters']} parameters, "
          f"{metrics['macs_per_window']} MACs/window")

    space = SearchSpace(
        frame_length_s=(0.02, 0.032), frame_stride_s=(0.032,),
        num_mel_filters=(20, 40), conv_dim=(1,), conv_filters=(8, 16, 32),
        num_conv_layers=(2,), kernel=(3,), dropout_rate=(0.1, 0.4),
        dense_width=(0,), max_parameters=20_000, trial_budget=3, seed=1,
    )
    print(f"\nsearching {space.trial_budget} trials "
          f"(constraints: <= {space.max_parameters} parameters, "
          f"<= {space.max_macs_per_window} MACs) ...")
    ranked = run_search(
        space, manifest, manifest.base_dir, OUT / "search",
        train_config=nn.TrainConfig(epochs=15, batch_size=16, seed=0),
    )
    print(f"\n{'rank':>4s} {'trial':>5s} {'F1':>8s} {'acc':>8s} "
          f"{'params':>8s} {'MACs':>9s}")
    for rank, r in enumerate(ranked, 1):
        print(f"{rank:4d} {r.trial_id:5d} {r.val_f1:8.4f} "
              f"{r.val_accuracy:8.4f} {r.parameters:8d} {r.macs_per_window:9d}")
    print(f"\nper-trial artifacts and ranking.csv in {OUT / 'search'}")


if __name__ == "__main__":
    main()
