"""
Compare Downlink Accuracy
Runs analog and digital downlinks on the same non-iid softmax task over several seeds
Target: analog at P=1e2 reaches at least the test accuracy of digital at P=1e6
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "services" / "fl-simulator"))

from app.core.logging_config import setup_logging  # noqa: E402
from app.models.schemas import SimConfig  # noqa: E402
from app.services.simulation import FederatedSimulation, write_trace  # noqa: E402

SEEDS = [0, 1, 2, 3, 4]

BASE = dict(
    uplink="analog",
    num_devices=20,
    rounds=300,
    tau=1,
    batch_size=0,
    model="softmax",
    partition="noniid",
    samples=4400,
    test_samples=400,
    features=20,
    classes=10,
    log_every=100,
)

SCHEMES = {
    "analog": dict(downlink="analog", p_dl=1e2),
    "digital": dict(downlink="digital", p_dl=1e6, sparsity=0),
}


def run_scheme(name: str, seeds: List[int], rounds: int, output_dir: Path) -> Dict[str, float]:
    """Final test accuracy per seed for one downlink scheme."""
    accuracies = []
    infeasible = 0
    for seed in seeds:
        config = SimConfig(**{**BASE, **SCHEMES[name], "seed": seed, "rounds": rounds})
        sim = FederatedSimulation(config)
        traces = sim.run()
        write_trace(traces, output_dir / f"compare_{name}_seed{seed}.csv")
        accuracies.append(traces[-1].test_metric)
        infeasible += sum(1 for t in traces if name == "digital" and t.q is None)
        print(f"   seed {seed}: accuracy {traces[-1].test_metric:.2%}, final loss {traces[-1].train_loss:.4f}")
    return {
        "mean": float(np.mean(accuracies)),
        "std": float(np.std(accuracies)),
        "infeasible_rounds": infeasible,
    }


def compare(seeds: List[int], rounds: int, output_dir: Path) -> Dict[str, Dict[str, float]]:
    print("🧪 Starting downlink comparison")
    print(f"Seeds: {seeds}, rounds: {rounds}, traces: {output_dir}\n")

    results = {}
    for name in SCHEMES:
        print(f"▶ {name} downlink (P_dl={SCHEMES[name]['p_dl']:g})")
        results[name] = run_scheme(name, seeds, rounds, output_dir)

    print("\n" + "=" * 60)
    print("📊 TEST ACCURACY")
    print("=" * 60 + "\n")
    for name, res in results.items():
        print(f"{name:>8}: {res['mean']:.2%} ± {res['std']:.2%}")
    if results["digital"]["infeasible_rounds"]:
        print(f"\n⚠️  digital downlink skipped {results['digital']['infeasible_rounds']} infeasible rounds")
    return results


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Analog vs digital downlink accuracy")
    parser.add_argument("--rounds", type=int, default=300)
    parser.add_argument("--seeds", type=int, default=len(SEEDS))
    parser.add_argument("--output-dir", type=str, default="results")
    args = parser.parse_args()

    setup_logging("WARNING")
    print("=" * 60)
    print("DOWNLINK ACCURACY COMPARISON")
    print("Target: analog (P=1e2) >= digital (P=1e6)")
    print("=" * 60 + "\n")

    results = compare(list(range(args.seeds)), args.rounds, Path(args.output_dir))

    print("\n" + "=" * 60)
    print("🎯 FINAL VERDICT")
    print("=" * 60 + "\n")
    passed = results["analog"]["mean"] >= results["digital"]["mean"]
    status = "✅ PASS" if passed else "❌ FAIL"
    print(f"Analog matches digital at 1e4 times less power: {status}")

    sys.exit(0 if passed else 1)
