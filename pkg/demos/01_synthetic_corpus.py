"""Build a synthetic labeled corpus and look at what's inside.

Every vulnerable function embeds a marker call tied to its CWE label, and
its severity score is a fixed function of marker density, so all three
models have a learnable, noiseless signal.
"""

from vulnhunter import corpus

records, registry = corpus.generate_synthetic(
    corpus.SyntheticSpec(n_records=200, n_cwe_ids=6, n_cwe_types=3, seed=7)
)

print(f"{len(records)} records, {len(registry.cwe_ids)} CWE ids, "
      f"{len(registry.cwe_types)} CWE types")
print("\nid -> type map (round robin, many-to-one):")
for cid in registry.cwe_ids:
    print(f"  {cid} -> {registry.id_to_type[cid]}")

vulnerable = next(r for r in records if r.vulnerable)
print(f"\nsample vulnerable function ({vulnerable.cwe_id}, cvss={vulnerable.cvss:.2f}):")
print(vulnerable.code)

print("descriptive statistics:")
print(corpus.dataset_stats(records).to_text())

# deterministic 80/10/10 split; every test CWE also appears in train
split = corpus.split_dataset(records, seed=7)
print(f"\nsplit sizes: train={len(split.train)} validation={len(split.validation)} "
      f"test={len(split.test)}")
train_ids = {r.cwe_id for r in split.train if r.cwe_id}
test_ids = {r.cwe_id for r in split.test if r.cwe_id}
print(f"test CWE ids covered by train: {test_ids <= train_ids}")
