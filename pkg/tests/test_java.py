import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smellpeft.java import (
    ExtractionError,
    LexError,
    MethodUnit,
    SmellKind,
    SmellThresholds,
    TokenKind,
    condition_clauses,
    count_tokens,
    cyclomatic_complexity,
    detect_smells,
    extract_methods,
    pipeline_tokens,
    tokenize_java,
)
from smellpeft.java.subtokens import split_identifier
from smellpeft.synthetic import generate_method


def unit(body: str, name: str = "m") -> MethodUnit:
    return MethodUnit.from_source(f"void {name}() {{\n{body}\n}}", method_name=name)


def labels(m, thresholds=SmellThresholds()):
    return {lab.kind: lab.positive for lab in detect_smells(m, thresholds)}


# ---------------------------------------------------------------- lexer


def test_minimal_statement_tokens():
    toks = tokenize_java("int x = 1;")
    assert [t.text for t in toks] == ["int", "x", "=", "1", ";"]
    assert [t.kind for t in toks] == [
        TokenKind.KEYWORD,
        TokenKind.IDENTIFIER,
        TokenKind.OPERATOR,
        TokenKind.NUMBER,
        TokenKind.PUNCTUATION,
    ]


def test_comment_is_opaque():
    toks = tokenize_java("// a && b")
    assert len(toks) == 1 and toks[0].kind is TokenKind.COMMENT
    assert not any(t.kind is TokenKind.OPERATOR for t in toks)


def test_single_and_operator_in_if():
    toks = tokenize_java("if (a && b) {}")
    assert sum(t.text == "&&" and t.kind is TokenKind.OPERATOR for t in toks) == 1


def test_positions_are_one_based():
    toks = tokenize_java("a\n  b")
    assert (toks[0].line, toks[0].column) == (1, 1)
    assert (toks[1].line, toks[1].column) == (2, 3)


@pytest.mark.parametrize(
    "src,line,col",
    [('x = "abc;', 1, 5), ("x = 'a;", 1, 5), ("x;\n/* never closed", 2, 1)],
)
def test_unterminated_literals_name_position(src, line, col):
    with pytest.raises(LexError) as err:
        tokenize_java(src)
    assert (err.value.line, err.value.column) == (line, col)


def test_generics_are_punctuation():
    toks = tokenize_java("List<String> xs;")
    assert [t.kind for t in toks if t.text in "<>"] == [TokenKind.PUNCTUATION] * 2


def test_text_block_and_annotation():
    src = 'String s = """\n  if (a && b)\n  """;\n@Override'
    toks = tokenize_java(src)
    assert any(t.kind is TokenKind.STRING and t.text.startswith('"""') for t in toks)
    assert toks[-1].kind is TokenKind.ANNOTATION


java_text = st.text(alphabet=st.sampled_from(list("abcXY_19 \n\t(){};=+-*/&|?:<>!.,\"'@")), max_size=80)


@settings(max_examples=300, deadline=None)
@given(java_text)
def test_spans_cover_input_without_gaps(src):
    try:
        toks = tokenize_java(src)
    except LexError:
        return
    pos = 0
    rebuilt = []
    for t in toks:
        assert t.start >= pos
        assert src[pos : t.start].strip() == ""
        rebuilt.append(src[pos : t.start])
        rebuilt.append(t.text)
        assert src[t.start : t.end] == t.text
        pos = t.end
    rebuilt.append(src[pos:])
    assert src[pos:].strip() == ""
    assert "".join(rebuilt) == src


# ---------------------------------------------------------------- pipeline tokenizer


def test_count_tokens_examples():
    assert count_tokens("") == 0
    assert count_tokens("int x = 1;") == 5


def test_identifier_splitting():
    assert split_identifier("parseHTTPHeader_v2") == ["parse", "http", "header", "v", "2"]
    assert pipeline_tokens('s = "x y z";') == ["s", "=", "<str>", ";"]


@settings(max_examples=200, deadline=None)
@given(java_text, java_text)
def test_count_tokens_monotone_under_append(a, b):
    # lenient lexing: an open literal in ``a`` may swallow ``b`` but never lose tokens of ``a``
    assert count_tokens(a + "\n" + b) >= count_tokens(a)


# ---------------------------------------------------------------- complexity


def test_straight_line_is_one():
    assert unit("int x = 1; x++;").cyclomatic_complexity == 1


def test_single_if_is_two():
    assert unit("if (x > 0) { x = 0; }").cyclomatic_complexity == 2


SEVEN_CASES = "switch (k) {\n" + "".join(f"    case {i}: return {10 * i};\n" for i in range(1, 8)) + "    default: return -1;\n}"


def test_seven_case_switch():
    m = unit(SEVEN_CASES)
    assert m.cyclomatic_complexity == 8
    assert labels(m)[SmellKind.COMPLEX_METHOD] is False
    assert labels(m, SmellThresholds(cm_complexity_gt=7))[SmellKind.COMPLEX_METHOD] is True


@pytest.mark.parametrize(
    "body,expected",
    [
        ("for (int i = 0; i < n; i++) {}", 2),
        ("while (x) {}", 2),
        ("do { x--; } while (x > 0);", 2),
        ("try { f(); } catch (A e) {} catch (B e) {} finally {}", 3),
        ("int y = a ? b : c ? d : e;", 3),
        ("boolean b = x && y || z;", 3),
        ('String s = "if (a && b)"; // while || for', 1),
        ("char c = '?';", 1),
        ("List<? extends T> xs = f();", 1),
        ("Runnable r = () -> { if (x) g(); };", 2),
    ],
)
def test_decision_points(body, expected):
    assert unit(body).cyclomatic_complexity == expected


def test_logical_operators_can_be_excluded():
    src = "void m() { if (a && b || c) {} }"
    assert cyclomatic_complexity(src) == 4
    assert cyclomatic_complexity(src, count_logical=False) == 2


# ---------------------------------------------------------------- conditions


def test_condition_examples():
    (s,) = condition_clauses("if (a) {}")
    assert s.logical_operator_count == 0 and s.atomic_clause_count == 1
    (s,) = condition_clauses("if (a && b || c) {}")
    assert s.logical_operator_count == 2 and s.atomic_clause_count == 3
    stats = condition_clauses("if (a && b) {} if (c && d) {}")
    assert [s.logical_operator_count for s in stats] == [1, 1]


def test_condition_kinds():
    src = "for (i = 0; i < n && ok; i++) {} do {} while (a || b || c); int z = p && q ? 1 : 2;"
    assert sorted(s.logical_operator_count for s in condition_clauses(src)) == [1, 1, 2]


def test_condition_location():
    (s,) = condition_clauses("x = 1;\n  if (a) {}")
    assert s.location == (2, 3)


# ---------------------------------------------------------------- smells


def test_smell_examples():
    nine = unit("if (a) {} " * 8)
    assert nine.cyclomatic_complexity == 9
    assert labels(nine)[SmellKind.COMPLEX_METHOD] is True
    two_ops = unit("if (a && b || c) {} while (d && e) {}")
    assert labels(two_ops)[SmellKind.COMPLEX_CONDITIONAL] is False
    plain = unit("return;")
    assert labels(plain) == {SmellKind.COMPLEX_METHOD: False, SmellKind.COMPLEX_CONDITIONAL: False}
    assert all(lab.provenance.value == "heuristic" for lab in detect_smells(plain))


def test_thresholds_must_be_positive():
    with pytest.raises(ValueError):
        SmellThresholds(cm_complexity_gt=0)
    with pytest.raises(ValueError):
        SmellThresholds(cc_logical_ops_ge=-1)


# ---------------------------------------------------------------- properties over generated methods


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 12))
def test_if_true_wrap_adds_one(seed, budget):
    g = generate_method(np.random.default_rng(seed), budget)
    lines = g.source.split("\n")
    wrapped = "\n".join([lines[0], "if (true) {", *lines[1:-1], "}", lines[-1]])
    assert cyclomatic_complexity(wrapped) == cyclomatic_complexity(g.source) + 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 10))
def test_adding_and_clause_adds_one(seed, budget):
    g = generate_method(np.random.default_rng(seed), budget)
    before = condition_clauses(g.source)
    toks = tokenize_java(g.source)
    heads = [i for i, t in enumerate(toks) if t.kind is TokenKind.KEYWORD and t.text in ("if", "while")]
    if not heads or not before:
        return
    # insert right after the opening parenthesis of the first if/while condition
    at = toks[heads[0] + 1].end
    changed = g.source[:at] + "x && " + g.source[at:]
    after = condition_clauses(changed)
    assert cyclomatic_complexity(changed) == cyclomatic_complexity(g.source) + 1
    diffs = [b.logical_operator_count - a.logical_operator_count for a, b in zip(before, after)]
    assert len(after) == len(before) and sorted(diffs) == [0] * (len(diffs) - 1) + [1]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 20), st.integers(1, 30), st.integers(1, 30))
def test_cm_monotone_in_threshold(seed, budget, lo, extra):
    m = MethodUnit.from_source(generate_method(np.random.default_rng(seed), budget).source)
    low = labels(m, SmellThresholds(cm_complexity_gt=lo))[SmellKind.COMPLEX_METHOD]
    high = labels(m, SmellThresholds(cm_complexity_gt=lo + extra))[SmellKind.COMPLEX_METHOD]
    assert not (high and not low)


# ---------------------------------------------------------------- extraction


def test_two_methods():
    src = "package a.b;\nclass C { void f() {} int g(int x) { return x; } }"
    ms = extract_methods(src, "p")
    assert [m.identity for m in ms] == ["p/a/b/C/f", "p/a/b/C/g"]


def test_nested_class_names():
    src = "class Outer { void f() {} static class Inner { void g() {} } }"
    ms = extract_methods(src, "p")
    assert [m.class_name for m in ms] == ["Outer", "Outer.Inner"]


def test_empty_interface():
    assert extract_methods("interface Empty {}", "p") == []


def test_overloads_get_ordinals():
    ms = extract_methods("class C { void f() {} void f(int x) {} }", "p")
    assert [m.method_name for m in ms] == ["f#1", "f#2"]


def test_constructor_and_lambda_inline():
    src = "class C { C() { Runnable r = () -> { if (a) b(); }; } }"
    (m,) = extract_methods(src, "p")
    assert m.method_name == "C" and m.cyclomatic_complexity == 2


def test_unbalanced_braces():
    with pytest.raises(ExtractionError):
        extract_methods("class C { void f() { if (x) { }", "p")


def test_method_source_is_verbatim():
    body = "int  f( int x ) {\n    return x; // done\n}"
    (m,) = extract_methods("class C {\n    " + body + "\n}", "p")
    assert m.source == body
    assert m.token_count == count_tokens(body)
