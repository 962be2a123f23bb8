import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smellpeft.dataset import (
    LabeledDataset,
    PipelineManifest,
    Sample,
    SchemaError,
    apply_manual_labels,
    assemble_labeled_dataset,
    deduplicate,
    export_dataset,
    filter_by_token_limit,
    import_dataset,
    read_manual_labels,
    split_sizes,
    stratified_split,
    subsample_low_resource,
)
from smellpeft.java import MethodUnit, SmellKind, SmellLabel
from smellpeft.pipeline import BuildConfig, build_dataset
from smellpeft.synthetic import write_corpus

CC = SmellKind.COMPLEX_CONDITIONAL


def stub(i: int, positive: bool, *, source: str | None = None, tokens: int = 3, project: str = "p") -> Sample:
    """A sample without lexing, for counting tests."""
    name = f"m{i}"
    m = MethodUnit(project, ("org",), "C", name, source or f"void {name}() {{}}", token_count=tokens)
    return Sample(m, SmellLabel(CC, positive))


def pools(n_pos: int, n_neg: int):
    return [stub(i, True) for i in range(n_pos)], [stub(n_pos + i, False) for i in range(n_neg)]


def real(source: str, name: str) -> Sample:
    return Sample(MethodUnit.from_source(source, project="p", class_name="C", method_name=name), SmellLabel(CC, False))


# ---------------------------------------------------------------- dedup and filter


def test_exact_duplicates_collapse():
    a = real("void f() { x = 1; }", "f")
    b = real("void f() { x = 1; }", "g")
    assert deduplicate([a, b]) == [a]


def test_indentation_variants_collapse():
    a = real("void f() {\n    x = 1;\n}", "f")
    b = real("void f() {\n\t\tx   =  1;\n}", "g")
    assert deduplicate([a, b]) == [a]


def test_whitespace_inside_literals_matters():
    a = real('void f() { s = "a b"; }', "f")
    b = real('void f() { s = "a  b"; }', "g")
    assert len(deduplicate([a, b])) == 2


def test_token_limit_boundary():
    keep, drop = stub(0, True, tokens=1024), stub(1, True, tokens=1025)
    assert filter_by_token_limit([keep, drop], 1024) == [keep]
    with pytest.raises(ValueError):
        filter_by_token_limit([keep], 0)


# ---------------------------------------------------------------- assembling


def test_balanced_assembly_matches_positive_count():
    pos, neg = pools(40, 100)
    ds = assemble_labeled_dataset(pos, neg, balance=True, seed=3)
    assert len(ds.negatives) == 40 and set(s.identity for s in ds.negatives) <= {s.identity for s in neg}


def test_unbalanced_assembly_passes_through():
    pos, neg = pools(1587, 6945)
    ds = assemble_labeled_dataset(pos, neg, balance=False)
    assert len(ds.samples) == 8532


def test_infeasible_balance():
    pos, neg = pools(10, 3)
    with pytest.raises(ValueError):
        assemble_labeled_dataset(pos, neg, balance=True)
    with pytest.raises(ValueError):
        assemble_labeled_dataset([], neg, balance=True)


def test_manual_labels_flip_and_mark(tmp_path):
    pos, neg = pools(5, 5)
    ds = LabeledDataset(CC, pos, neg)
    side = tmp_path / "manual.jsonl"
    side.write_text(
        json.dumps({"id": pos[0].identity, "smell_kind": "cc", "label": 0})
        + "\n"
        + json.dumps({"id": neg[0].identity, "smell_kind": "cc", "label": 0})
        + "\n"
        + json.dumps({"id": neg[1].identity, "smell_kind": "cm", "label": 1})
        + "\n"
    )
    corr = read_manual_labels(side, CC)
    assert len(corr) == 2
    out, flips = apply_manual_labels(ds, corr)
    assert flips == 1
    assert (len(out.positives), len(out.negatives)) == (4, 6)
    manual = [s for s in out.samples if s.label.provenance.value == "manual"]
    assert {s.identity for s in manual} == {pos[0].identity, neg[0].identity}


# ---------------------------------------------------------------- splitting


@pytest.mark.parametrize(
    "n,expected",
    [(1587, [1269, 159, 159]), (6945, [5557, 694, 694]), (4123, [3299, 412, 412]), (8835, [7067, 884, 884]), (10, [8, 1, 1])],
)
def test_split_sizes_reference_counts(n, expected):
    assert split_sizes(n, (8, 1, 1)) == expected


def test_largest_remainder_alternative():
    # The Hamilton rule gives the extra unit to train, so it cannot produce 5,557/694/694.
    assert split_sizes(6945, (8, 1, 1), "largest-remainder") == [5556, 695, 694]
    assert split_sizes(10, (8, 1, 1), "largest-remainder") == [8, 1, 1]


@settings(max_examples=300)
@given(st.integers(3, 50_000), st.sampled_from(["heldout-half-even", "largest-remainder"]))
def test_split_sizes_close_to_quota(n, rule):
    sizes = split_sizes(n, (8, 1, 1), rule)
    assert sum(sizes) == n
    bound = 1.0 if rule == "heldout-half-even" else 1.0 - 1e-12
    for size, r in zip(sizes, (8, 1, 1)):
        assert abs(size - n * r / 10) <= bound


@pytest.mark.parametrize(
    "n_pos,n_neg,expected",
    [
        (1587, 6945, {"train": (1269, 5557), "valid": (159, 694), "test": (159, 694)}),
        (4123, 8835, {"train": (3299, 7067), "valid": (412, 884), "test": (412, 884)}),
        (10, 10, {"train": (8, 8), "valid": (1, 1), "test": (1, 1)}),
    ],
)
def test_stratified_split_counts(n_pos, n_neg, expected):
    split = stratified_split(LabeledDataset(CC, *pools(n_pos, n_neg)), (8, 1, 1), seed=0)
    got = {k: (v["positive"], v["negative"]) for k, v in split.counts().items()}
    assert got == expected


def test_split_disjoint_exhaustive_and_order_insensitive():
    pos, neg = pools(37, 53)
    a = stratified_split(LabeledDataset(CC, pos, neg), seed=4)
    b = stratified_split(LabeledDataset(CC, pos[::-1], neg[::-1]), seed=4)
    ids = [s.identity for part in (a.train, a.valid, a.test) for s in part]
    assert len(ids) == len(set(ids)) == 90
    assert [s.identity for s in a.test] == [s.identity for s in b.test]
    assert all(s.split == "valid" for s in a.valid)


def test_split_needs_three_per_class():
    with pytest.raises(ValueError):
        stratified_split(LabeledDataset(CC, *pools(2, 10)))


def test_split_rejects_duplicate_sources():
    pos = [stub(0, True, source="void x() {}"), stub(1, True, source="void x() {}"), stub(2, True)]
    with pytest.raises(ValueError):
        stratified_split(LabeledDataset(CC, pos, pools(0, 5)[1]))


# ---------------------------------------------------------------- subsampling


def cc_train():
    split = stratified_split(LabeledDataset(CC, *pools(1587, 6945)), seed=0)
    return split.train


def test_subsample_hundred_from_cc_train():
    sub = subsample_low_resource(cc_train(), 100, seed=0)
    assert (sum(s.y for s in sub), sum(1 - s.y for s in sub)) == (19, 81)


@pytest.mark.parametrize("n", [100, 200, 500, 1000])
def test_subsample_ratio_within_one(n):
    train = cc_train()
    sub = subsample_low_resource(train, n, seed=1)
    target = n * sum(s.y for s in train) / len(train)
    assert len(sub) == n and abs(sum(s.y for s in sub) - target) <= 1


def test_subsample_full_and_deterministic():
    train = cc_train()[:300]
    full = subsample_low_resource(train, len(train), seed=0)
    assert sorted(s.identity for s in full) == sorted(s.identity for s in train)
    a = subsample_low_resource(train, 50, seed=7)
    b = subsample_low_resource(train, 50, seed=7)
    assert [s.identity for s in a] == [s.identity for s in b]
    with pytest.raises(ValueError):
        subsample_low_resource(train, 301)


# ---------------------------------------------------------------- files


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root, 120, seed=5, kind="cc", positive_fraction=0.3)
    return build_dataset([root], BuildConfig(smell_kind="cc", seed=5))


def test_pipeline_stage_counts_non_increasing(built):
    _, manifest, errors = built
    assert errors == []
    for stages in manifest.stage_counts.values():
        assert stages["initial"] >= stages["deduplicated"] >= stages["token_filtered"]


def test_export_import_round_trip(built, tmp_path):
    split, manifest, _ = built
    digests = export_dataset(split, manifest, tmp_path)
    back, man2 = import_dataset(tmp_path)
    for part in ("train", "valid", "test"):
        assert getattr(back, part) == getattr(split, part)
    assert man2.to_dict() == manifest.to_dict()
    again = export_dataset(back, man2, tmp_path / "again")
    assert again == digests


def _rewrite(path, fn):
    lines = path.read_text().splitlines()
    path.write_text("".join(json.dumps(fn(i, json.loads(line))) + "\n" for i, line in enumerate(lines)))


def test_import_rejects_missing_label(built, tmp_path):
    export_dataset(built[0], built[1], tmp_path)
    _rewrite(tmp_path / "dataset.jsonl", lambda i, r: {k: v for k, v in r.items() if not (i == 0 and k == "label")})
    with pytest.raises(SchemaError, match="missing"):
        import_dataset(tmp_path)


def test_import_rejects_count_mismatch(built, tmp_path):
    export_dataset(built[0], built[1], tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    man["split_counts"]["train"]["positive"] += 1
    (tmp_path / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(SchemaError, match="disagree"):
        import_dataset(tmp_path)


def test_import_rejects_schema_version(built, tmp_path):
    export_dataset(built[0], built[1], tmp_path)
    man = json.loads((tmp_path / "manifest.json").read_text())
    man["schema_version"] = 99
    (tmp_path / "manifest.json").write_text(json.dumps(man))
    with pytest.raises(SchemaError, match="expected 1, found 99"):
        import_dataset(tmp_path)


def test_import_rechecks_token_count(built, tmp_path):
    export_dataset(built[0], built[1], tmp_path)
    _rewrite(tmp_path / "dataset.jsonl", lambda i, r: {**r, "token_count": r["token_count"] + (i == 0)})
    with pytest.raises(SchemaError, match="token_count"):
        import_dataset(tmp_path)


def test_manifest_round_trip():
    m = PipelineManifest(smell_kind="ComplexMethod", stage_counts={"positive": {"initial": 3}})
    assert PipelineManifest.from_dict(json.loads(json.dumps(m.to_dict()))) == m
    with pytest.raises(SchemaError):
        PipelineManifest.from_dict({**m.to_dict(), "bogus": 1})
