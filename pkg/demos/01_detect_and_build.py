# In[]:
# ## Smell detection on a small Java corpus
# The detector works on raw source text: it lexes, cuts methods out of each
# class and scores them. Nothing is compiled.
import tempfile
from pathlib import Path

from smellpeft.java import MethodUnit, SmellThresholds, condition_clauses, detect_smells
from smellpeft.pipeline import BuildConfig, build_dataset
from smellpeft.synthetic import write_corpus

src = """
int classify(int x, boolean a, boolean b, boolean c) {
    if (a && b || c && x > 3) {   // four clauses, three operators
        return 1;
    }
    for (int i = 0; i < x; i++) {
        if (i % 2 == 0) x--;
    }
    return x > 0 ? 2 : 0;
}
"""
m = MethodUnit.from_source(src, method_name="classify")
print("cyclomatic complexity:", m.cyclomatic_complexity)
for c in condition_clauses(src):
    print(f"  condition at {c.location}: {c.logical_operator_count} operators, {c.atomic_clause_count} clauses")

# In[]:
# Default thresholds: complex method above 8, complex conditional at 3 operators.
for lab in detect_smells(m):
    print(lab.kind.short, lab.positive)
print("with a stricter CM threshold:", [l.positive for l in detect_smells(m, SmellThresholds(cm_complexity_gt=3))])

# In[]:
# ## From a corpus to a split
# write_corpus lays out a few fake projects; build_dataset runs detection,
# deduplication, the token limit, class balancing and the 8:1:1 split.
root = Path(tempfile.mkdtemp())
write_corpus(root, 300, seed=1, kind="cc", positive_fraction=0.3)
split, manifest, errors = build_dataset([root], BuildConfig(smell_kind="cc", seed=1))
print("stage counts:", manifest.stage_counts)
print("split counts:", split.counts())
print(split.train[0].method.identity)
print(split.train[0].method.source[:200])
