import pytest

from toxlogic import toxkb, worlds
from toxlogic.rulelang import parse_text
from toxlogic.toxkb import (
    EXPECTED_CLAUSE_COUNTS,
    TOXIDROMES,
    KnowledgeBase,
    KnowledgeBaseError,
    label_atom,
    lint_kb,
    load_kb,
    parse_priors_file,
    run_self_test,
    template_of,
    uniform_priors,
)


class TestTemplates:
    def test_cholinergic_row(self):
        t = template_of("cholinergic")
        assert t.expected == {
            "heart_rate": "decreased",
            "blood_pressure": "normal",
            "pupil_diameter": "small",
            "secretions": "increased",
            "temperature": "normal",
            "respiratory_rate": "decreased",
            "mental_status": "sedated",
        }

    def test_sedative_hypnotic_row(self):
        t = template_of("sedative_hypnotic")
        assert t.expected["mental_status"] == "sedated"
        assert all(v == "normal" for s, v in t.expected.items()
                   if s != "mental_status")

    def test_sympathomimetic_row(self):
        t = template_of("sympathomimetic")
        assert t.expected == {
            "heart_rate": "increased",
            "blood_pressure": "increased",
            "pupil_diameter": "large",
            "secretions": "normal",
            "temperature": "increased",
            "respiratory_rate": "increased",
            "mental_status": "agitated",
        }

    def test_unknown_toxidrome(self):
        with pytest.raises(ValueError, match="unknown toxidrome"):
            template_of("caffeine")

    def test_every_sign_valued_in_every_template(self):
        for tox in TOXIDROMES:
            t = template_of(tox)
            assert set(t.expected) == set(toxkb.SIGNS)
            for sign, value in t.expected.items():
                assert value in toxkb.VALUE_DOMAINS[sign]


class TestLoadKb:
    def test_shipped_kb_loads_with_uniform_priors(self, kb):
        assert set(kb.priors) == set(TOXIDROMES)
        assert all(p == pytest.approx(1 / 6) for p in kb.priors.values())
        assert len(kb.templates) == 6

    def test_lint_counts(self, kb):
        assert lint_kb(kb.program) == EXPECTED_CLAUSE_COUNTS

    def test_identity_override_matches_default(self, kb):
        kb2 = load_kb(priors_override=uniform_priors())
        findings = [("mental_status", "agitated"), ("temperature", "increased")]
        p1 = kb.classify(findings)
        p2 = kb2.classify(findings)
        for a in p1.entries:
            assert p1.entries[a] == pytest.approx(p2.entries[a], abs=1e-12)

    def test_degenerate_prior_forces_argmax(self):
        priors = {t: 0.0 for t in TOXIDROMES}
        priors["opioid"] = 1.0
        kb = load_kb(priors_override=priors, self_test=False)
        for findings in ([("mental_status", "agitated")],
                         [("heart_rate", "decreased"), ("secretions", "increased")],
                         [("temperature", "increased")]):
            post = kb.classify(findings)
            assert str(post.argmax.args[-1]) == "opioid"
            assert post.entries[post.argmax] == pytest.approx(1.0, abs=1e-12)

    def test_bad_prior_sum_rejected(self):
        priors = {t: 0.2 for t in TOXIDROMES}
        with pytest.raises(KnowledgeBaseError, match="sum"):
            load_kb(priors_override=priors)

    def test_self_test_catches_misrouted_goal(self, tmp_path):
        source = toxkb.default_kb_path().read_text(encoding="utf-8")
        # reroute the cholinergic goal to opioid: the canonical cholinergic
        # presentation then derives opioid with certainty
        broken = source.replace(
            "has_toxidrome(X,cholinergic) :- secretions(X,increased)",
            "has_toxidrome(X,opioid) :- secretions(X,increased)")
        assert broken != source
        bad = tmp_path / "bad.plx"
        bad.write_text(broken, encoding="utf-8")
        with pytest.raises(KnowledgeBaseError, match="cholinergic"):
            load_kb(bad)

    def test_parse_failure_reported_with_path(self, tmp_path):
        bad = tmp_path / "broken.plx"
        bad.write_text("0.5::f( .", encoding="utf-8")
        with pytest.raises(KnowledgeBaseError, match="broken.plx"):
            load_kb(bad)


class TestKbInvariants:
    def test_difficulty0_identifiability_strict(self, kb):
        # run_self_test raises on any non-strict argmax
        run_self_test(kb)

    def test_serotonin_separability(self, kb):
        findings = kb.templates["serotonin_toxicity"].abnormal_findings()
        post = kb.classify(findings)
        sero = post.entries[label_atom("serotonin_toxicity")]
        assert sero > post.entries[label_atom("anticholinergic")]
        assert sero > post.entries[label_atom("cholinergic")]

    def test_grounding_shape(self, kb):
        gp = kb.ground_for("pt")
        # 7 sign groups + 21 linking groups + injected prior group
        assert len(gp.groups) == 29
        assert len(gp.rules) == 6
        assert gp.groups[-1].source == "class priors"

    def test_posteriors_normalize(self, kb):
        post = kb.classify([("pupil_diameter", "small")])
        total = sum(post.normalized().values())
        assert total == pytest.approx(1.0, abs=1e-9)


class TestPriorsFile:
    def test_parse_flat_file(self, tmp_path):
        path = tmp_path / "priors.conf"
        path.write_text(
            "# class weights\n"
            "anticholinergic = 0.25\n"
            "cholinergic = 0.15\n"
            "opioid = 0.30\n"
            "sedative_hypnotic = 0.10\n"
            "serotonin_toxicity = 0.08\n"
            "sympathomimetic = 0.12\n", encoding="utf-8")
        priors = parse_priors_file(path)
        assert priors["opioid"] == 0.30
        assert sum(priors.values()) == pytest.approx(1.0)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "priors.conf"
        path.write_text("caffeine = 1.0\n", encoding="utf-8")
        with pytest.raises(KnowledgeBaseError, match="unknown"):
            parse_priors_file(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "priors.conf"
        path.write_text("opioid = 0.5\nopioid = 0.5\n", encoding="utf-8")
        with pytest.raises(KnowledgeBaseError, match="duplicate"):
            parse_priors_file(path)
