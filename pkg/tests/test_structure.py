import itertools
import json

import numpy as np
import pytest

from covcut.covsel import Support
from covcut.errors import InvalidInput
from covcut.structure import (
    AverageDegree,
    DegreeBounds,
    Hubs,
    KnownOne,
    KnownZero,
    check_complete,
    load_constraints,
    prune_partial,
)


def star(p, center, degree):
    others = [i for i in range(p) if i != center][:degree]
    return Support(p, [(min(center, o), max(center, o)) for o in others])


class TestCheckComplete:
    def test_empty_constraints(self):
        assert check_complete(Support(4, [(0, 1)]), [])

    def test_known_one_missing(self):
        cs = [KnownOne([(1, 2)])]
        assert not check_complete(Support(4, [(0, 1)]), cs)
        assert check_complete(Support(4, [(0, 1), (1, 2)]), cs)

    def test_known_zero(self):
        cs = [KnownZero([(0, 1)])]
        assert not check_complete(Support(4, [(0, 1)]), cs)
        assert check_complete(Support(4, [(2, 3)]), cs)

    def test_hubs(self):
        z = star(5, 0, 3)
        assert check_complete(z, [Hubs(d_low=1, d_high=3, max_hubs=1)])
        assert not check_complete(z, [Hubs(d_low=1, d_high=3, max_hubs=0)])
        assert not check_complete(z, [Hubs(d_low=1, d_high=2, max_hubs=2)])

    def test_degree_bounds(self):
        z = Support(4, [(0, 1), (0, 2)])
        cs = [DegreeBounds(lower=[0, 0, 0, 0], upper=[2, 1, 1, 1])]
        assert check_complete(z, cs)
        cs = [DegreeBounds(lower=[0, 0, 0, 1], upper=[3, 3, 3, 3])]
        assert not check_complete(z, cs)

    def test_average_degree_reduces_to_pair_count(self):
        # p=4: mean degree = |pairs| / 2
        cs = [AverageDegree(target=1.0, slack=0.0)]
        assert check_complete(Support(4, [(0, 1), (2, 3)]), cs)
        assert not check_complete(Support(4, [(0, 1)]), cs)

    def test_invalid_bounds_rejected(self):
        with pytest.raises(InvalidInput):
            DegreeBounds(lower=[2], upper=[1])
        with pytest.raises(InvalidInput):
            Hubs(d_low=3, d_high=1, max_hubs=0)


class TestPrunePartial:
    def test_empty_constraints_always_feasible(self):
        assert prune_partial(set(), set(), {(0, 1)}, 1, [], 4)

    def test_budget_deficit(self):
        # every node needs degree >= 1 but only one pair may be added
        cs = [DegreeBounds(lower=[1] * 6, upper=[5] * 6)]
        free = {(i, j) for i in range(6) for j in range(i + 1, 6)}
        assert not prune_partial(set(), set(), free, 1, cs, 6)
        assert prune_partial(set(), set(), free, 3, cs, 6)

    def test_known_one_unreachable(self):
        cs = [KnownOne([(0, 1)])]
        assert not prune_partial(set(), {(0, 1)}, {(2, 3)}, 2, cs, 4)
        assert prune_partial(set(), set(), {(0, 1), (2, 3)}, 1, cs, 4)

    def test_soundness_by_exhaustive_completion(self):
        rng = np.random.default_rng(0)
        p = 6
        pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
        for trial in range(120):
            cs = []
            if rng.random() < 0.6:
                lower = rng.integers(0, 2, size=p)
                upper = lower + rng.integers(0, 3, size=p)
                cs.append(DegreeBounds(lower.tolist(), upper.tolist()))
            if rng.random() < 0.4:
                cs.append(Hubs(d_low=1, d_high=int(rng.integers(2, 5)),
                               max_hubs=int(rng.integers(0, 3))))
            if rng.random() < 0.4:
                cs.append(AverageDegree(target=float(rng.uniform(0.5, 2.0)),
                                        slack=0.5))
            perm = rng.permutation(len(pairs))
            f1 = {pairs[i] for i in perm[:2] }
            f0 = {pairs[i] for i in perm[2:5]}
            free = {pairs[i] for i in perm[5:]}
            budget = int(rng.integers(0, 5))
            verdict = prune_partial(f1, f0, free, budget, cs, p)
            if not verdict:
                # exhaustive search must confirm no feasible completion
                found = False
                free_list = sorted(free)
                for r in range(min(budget, len(free_list)) + 1):
                    for combo in itertools.combinations(free_list, r):
                        z = Support(p, tuple(f1 | set(combo)))
                        if check_complete(z, cs):
                            found = True
                            break
                    if found:
                        break
                assert not found, (cs, f1, f0, budget)

    def test_complete_support_consistency(self):
        # check_complete(z) implies prune_partial on the fully fixed node
        rng = np.random.default_rng(1)
        p = 5
        pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
        cs = [DegreeBounds([0] * p, [2] * p), Hubs(1, 2, 2)]
        for trial in range(50):
            perm = rng.permutation(len(pairs))
            chosen = {pairs[i] for i in perm[:3]}
            z = Support(p, tuple(chosen))
            if check_complete(z, cs):
                rest = set(pairs) - chosen
                assert prune_partial(chosen, rest, set(), 0, cs, p)


class TestConstraintFile:
    def test_load_round_trip(self, tmp_path):
        payload = {
            "known_zero": [[0, 1]],
            "known_one": [[2, 3]],
            "degree_lower": [0, 0, 0, 0, 0],
            "degree_upper": [3, 3, 3, 3, 3],
            "average_degree": {"target": 1.2, "slack": 0.4},
            "hubs": {"d_low": 1, "d_high": 3, "max_hubs": 1},
        }
        path = tmp_path / "structure.json"
        path.write_text(json.dumps(payload))
        cs = load_constraints(str(path))
        kinds = [type(c).__name__ for c in cs]
        assert kinds == [
            "KnownZero", "KnownOne", "DegreeBounds", "AverageDegree", "Hubs",
        ]

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(InvalidInput):
            load_constraints(str(path))
