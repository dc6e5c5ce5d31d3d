"""How the amount estimator behaves, using the library directly.

Shows which historical contracts a description lands next to, and how the
kNN median compares with the single-median baseline across split seeds.
"""
from procurekg.estimator import VectorIndex, cosine, embed_ngram, evaluate_estimator, knn, predict_amount
from procurekg.synthetic import synthetic_records

records = synthetic_records(800, clusters=5, seed=11)
index = VectorIndex.from_texts([r.record_id for r in records], [r.subject for r in records],
                               [r.amount for r in records])
by_id = {r.record_id: r for r in records}

pairs = [("water pipeline repair", "water pipeline repairs"),
         ("water pipeline repair", "office furniture"),
         ("supply of vaccines", "supply of vaccine doses")]
print("cosine similarity of hashed 3-gram embeddings")
for a, b in pairs:
    print(f"  {cosine(embed_ngram(a), embed_ngram(b)):.3f}  {a!r} vs {b!r}")

query = "laptops and network printers for the municipality"
print(f"\nnearest contracts to {query!r}")
for rid, sim in knn(index, embed_ngram(query), 5):
    r = by_id[rid]
    print(f"  {sim:.3f}  {r.amount:>13,} MKD  {r.subject}")
print(f"estimate (median of 9): {predict_amount(query, index, 9):,} MKD")

print("\nheld-out error in millions of denars (80/20 split, k=9)")
print(f"  {'seed':>4}  {'kNN RMSE':>9}  {'base RMSE':>9}  {'kNN R2':>7}  {'base R2':>7}")
for seed in range(5):
    ev = evaluate_estimator(records, 0.8, seed=seed, k=9)
    print(f"  {seed:>4}  {ev.knn.rmse:9.1f}  {ev.baseline.rmse:9.1f}  {ev.knn.r2:7.3f}  {ev.baseline.r2:7.3f}")
