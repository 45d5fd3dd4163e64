# %% [markdown]
# # A small benchmark
#
# The harness runs each controller variant against the ground-truth plant
# for several seeds and reports the per-step mean and spread of the cost.
# The full runs use `configs/*.yaml` as is; here the episodes are shortened.

# %%
import dataclasses
import tempfile
from pathlib import Path

from disco.harness import export_results, load_config, run_benchmark

config = load_config(Path(__file__).resolve().parent.parent / "configs" / "pendulum.yaml")
config = dataclasses.replace(config, episode_length=120, seeds=3)
print([v.name for v in config.variants])

# %%
result = run_benchmark(config, ["baseline", "ut_posterior", "mc_posterior"])
for v in result.variants:
    acc = result.accumulated(v)
    print(f"{v:13s} accumulated cost {acc.mean():8.1f} +- {acc.std():6.1f}   model steps {result.model_steps[v][0]}")

# %% Results are written as CSV (per-step mean and std) and JSON (everything)
out = Path(tempfile.mkdtemp())
for path in export_results(result, out):
    print(path.name, path.stat().st_size, "bytes")
print((out / "benchmark.csv").read_text().splitlines()[0])
