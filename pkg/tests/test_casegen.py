import json
from collections import Counter

import pytest

from toxlogic import casegen
from toxlogic.casegen import (
    Case,
    ImplausibilityRule,
    SplitMix64,
    case_from_json_obj,
    counts_rows,
    generate_case,
    generate_dataset,
    plausibility_filter,
    to_jsonl,
)
from toxlogic.toxkb import SIGNS, TEMPLATES, TOXIDROMES


class TestSplitMix64:
    def test_known_stream(self):
        # SplitMix64 from seed 0: standard published values
        rng = SplitMix64(0)
        assert rng.next_u64() == 0xE220A8397B1DCDAF
        assert rng.next_u64() == 0x6E789E6AA1B965F4

    def test_sample_is_distinct(self):
        rng = SplitMix64(5)
        for _ in range(100):
            picked = rng.sample(SIGNS, 5)
            assert len(set(picked)) == 5

    def test_weighted_index_respects_zero_weight(self):
        rng = SplitMix64(9)
        draws = {rng.weighted_index((0.5, 0.0, 0.5)) for _ in range(200)}
        assert 1 not in draws


class TestGenerateCase:
    def test_difficulty_zero_all_from_intended(self):
        rng = SplitMix64(7)
        for _ in range(50):
            case = generate_case(rng, 0)
            template = TEMPLATES[case.intended].expected
            assert len(case.findings) == 5
            assert all(template[s] == v for s, v in case.findings)

    def test_difficulty_five_all_from_distractor(self):
        rng = SplitMix64(8)
        case = generate_case(rng, 5)
        template = TEMPLATES[case.distractor].expected
        assert all(template[s] == v for s, v in case.findings)

    def test_seed1_k2_split_matches_templates(self):
        rng = SplitMix64(1)
        case = generate_case(rng, 2)
        intended = TEMPLATES[case.intended].expected
        distractor = TEMPLATES[case.distractor].expected
        # draw order carries provenance: first 3 intended, last 2 distractor
        assert all(intended[s] == v for s, v in case.findings[:3])
        assert all(distractor[s] == v for s, v in case.findings[3:])
        # frozen regression of the seeded stream
        assert (case.intended, case.distractor) == ("sympathomimetic", "serotonin_toxicity")
        assert case.findings == (
            ("blood_pressure", "increased"),
            ("mental_status", "agitated"),
            ("secretions", "normal"),
            ("heart_rate", "increased"),
            ("pupil_diameter", "normal"),
        )

    def test_bad_difficulty_rejected(self):
        with pytest.raises(ValueError):
            generate_case(SplitMix64(0), 6)


class TestGenerateDataset:
    def test_deterministic_serialization(self):
        d1 = generate_dataset(42, 300)
        d2 = generate_dataset(42, 300)
        assert to_jsonl(d1.cases) == to_jsonl(d2.cases)

    def test_single_case(self):
        ds = generate_dataset(1, 1)
        assert len(ds.cases) == 1
        assert sum(ds.counts.values()) == 1

    def test_counts_consistent(self):
        ds = generate_dataset(42, 300)
        recount = Counter((c.intended, c.difficulty) for c in ds.cases)
        assert dict(recount) == ds.counts
        assert sum(ds.counts.values()) == 300

    def test_seed42_counts_in_range(self):
        ds = generate_dataset(42, 300)
        assert all(2 <= n <= 40 for n in ds.counts.values())

    def test_counts_rows_shape(self):
        ds = generate_dataset(42, 60)
        rows = counts_rows(ds)
        assert rows[0] == ["toxidrome", "0", "1", "2"]
        assert [r[0] for r in rows[1:]] == list(TOXIDROMES)
        assert sum(sum(r[1:]) for r in rows[1:]) == 60

    def test_difficulty_weights(self):
        ds = generate_dataset(3, 200, (1.0, 0.0, 0.0))
        assert all(c.difficulty == 0 for c in ds.cases)
        with pytest.raises(ValueError):
            generate_dataset(3, 10, (0.5, 0.4, 0.2))
        with pytest.raises(ValueError):
            generate_dataset(3, 0)

    def test_jsonl_schema_and_round_trip(self):
        ds = generate_dataset(11, 5)
        lines = to_jsonl(ds.cases).splitlines()
        assert len(lines) == 5
        first = json.loads(lines[0])
        assert list(first) == ["id", "difficulty", "intended", "distractor", "findings"]
        assert list(first["findings"][0]) == ["sign", "value"]
        back = [case_from_json_obj(json.loads(ln)) for ln in lines]
        assert tuple(back) == ds.cases


class TestCaseInvariants:
    def test_bulk_invariants(self):
        ds = generate_dataset(1234, 10_000)
        intended_freq = Counter()
        for case in ds.cases:
            assert case.intended != case.distractor
            signs = [s for s, _ in case.findings]
            assert len(signs) == 5 and len(set(signs)) == 5
            k = case.difficulty
            assert 0 <= k <= 2
            intended = TEMPLATES[case.intended].expected
            distractor = TEMPLATES[case.distractor].expected
            assert all(intended[s] == v for s, v in case.findings[:5 - k])
            assert all(distractor[s] == v for s, v in case.findings[5 - k:])
            # at least 5-k findings agree with the intended template overall
            assert sum(intended[s] == v for s, v in case.findings) >= 5 - k
            intended_freq[case.intended] += 1
        for tox in TOXIDROMES:
            assert abs(intended_freq[tox] / 10_000 - 1 / 6) <= 0.02


class TestPlausibility:
    def test_default_rules_accept_everything(self):
        ds = generate_dataset(2, 50)
        assert all(plausibility_filter(c).plausible for c in ds.cases)

    def test_duplicate_signs_unreachable(self):
        ds = generate_dataset(6, 2000)
        for case in ds.cases:
            signs = [s for s, _ in case.findings]
            assert len(set(signs)) == len(signs)

    def test_custom_rule_flags_contradiction(self):
        rule = ImplausibilityRule(
            reason="slowed breathing with agitation",
            pattern=(("respiratory_rate", "decreased"), ("mental_status", "agitated")))
        # cholinergic RR with a stimulant mental status, built from templates
        case = Case(
            id=0, difficulty=1, intended="cholinergic", distractor="sympathomimetic",
            findings=(
                ("respiratory_rate", TEMPLATES["cholinergic"].expected["respiratory_rate"]),
                ("pupil_diameter", TEMPLATES["cholinergic"].expected["pupil_diameter"]),
                ("secretions", TEMPLATES["cholinergic"].expected["secretions"]),
                ("heart_rate", TEMPLATES["cholinergic"].expected["heart_rate"]),
                ("mental_status", TEMPLATES["sympathomimetic"].expected["mental_status"]),
            ))
        verdict = plausibility_filter(case, [rule])
        assert not verdict.plausible
        assert verdict.reason == "slowed breathing with agitation"
        clean = Case(0, 0, "opioid", "cholinergic",
                     (("mental_status", "sedated"),))
        assert plausibility_filter(clean, [rule]).plausible
