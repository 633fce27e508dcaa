"""Tests for exact information-theoretic computations."""

import math

import numpy as np
import pytest

from spurlab.joint import (
    GraphModel,
    JointTable,
    ToyConfig,
    build_toy,
    map_axis,
    random_deterministic_label_table,
    random_graph_model,
    random_joint_table,
)
from spurlab.info import (
    AssumptionError,
    CheckReport,
    SingularRecovery,
    check_lemma1,
    check_theorem1,
    check_theorem3,
    check_theorem4,
    compute_pi,
    entropy,
    mutual_information,
    pi_as_variable,
    pi_per_feature,
    pi_states,
    recover_posterior_anticausal,
    search_pi_ordering,
)


def brute_mi(table: JointTable, name_a: str, name_b: str) -> float:
    """Mutual information by direct double loop over the pair marginal."""
    ia, ib = table.axis_index(name_a), table.axis_index(name_b)
    drop = tuple(i for i in range(table.probs.ndim) if i not in (ia, ib))
    pab = table.probs.sum(axis=drop)
    if ia > ib:
        pab = pab.T
    pa = pab.sum(axis=1)
    pb = pab.sum(axis=0)
    total = 0.0
    for a in range(pab.shape[0]):
        for b in range(pab.shape[1]):
            if pab[a, b] > 0:
                total += pab[a, b] * math.log2(pab[a, b] / (pa[a] * pb[b]))
    return total


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-15)

    def test_point_mass(self):
        assert entropy([1.0, 0.0]) == pytest.approx(0.0, abs=1e-15)

    def test_binary_closed_form(self):
        expected = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
        assert entropy([0.75, 0.25]) == pytest.approx(expected, abs=1e-12)
        assert entropy([0.75, 0.25]) == pytest.approx(0.8112781, abs=1e-7)

    def test_joint_table_input(self):
        t = JointTable(("a", "b"), np.full((2, 2), 0.25))
        assert entropy(t) == pytest.approx(2.0, abs=1e-15)

    def test_rejects_non_distribution(self):
        with pytest.raises(Exception):
            entropy([0.4, 0.4])


class TestMutualInformation:
    def test_independent_product_is_zero(self):
        pa = np.array([0.3, 0.7])
        pb = np.array([0.2, 0.5, 0.3])
        t = JointTable(("a", "b"), np.outer(pa, pb))
        assert abs(mutual_information(t, "a", "b")) <= 1e-12

    def test_matches_brute_force(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            t = random_joint_table(("a", "b", "c"), (3, 4, 2), rng)
            assert mutual_information(t, "a", "b") == pytest.approx(
                brute_mi(t, "a", "b"), abs=1e-12
            )

    def test_entropy_decomposition_identity(self):
        # I(A;B) = H(A) - H(A|B) = H(B) - H(B|A)
        from spurlab.info import _subset_entropy

        for seed in range(30):
            rng = np.random.default_rng(seed)
            t = random_joint_table(("a", "b"), (4, 5), rng)
            mi = mutual_information(t, "a", "b")
            ha = _subset_entropy(t, ("a",))
            hb = _subset_entropy(t, ("b",))
            hab = _subset_entropy(t, ("a", "b"))
            assert mi == pytest.approx(ha - (hab - hb), abs=1e-10)
            assert mi == pytest.approx(hb - (hab - ha), abs=1e-10)

    def test_toy_exact_values(self):
        t = build_toy(ToyConfig(d2=100, nu=0.25))
        expected_mi = 1.0 + 0.75 * math.log2(0.75) + 0.25 * math.log2(0.25)
        assert mutual_information(t, "x1", "y") == pytest.approx(expected_mi, abs=1e-12)
        assert mutual_information(t, "x1", "y") == pytest.approx(0.1887219, abs=1e-6)
        assert mutual_information(t, "x1", "x2") == pytest.approx(0.5, abs=1e-9)

    def test_nu_zero_one_bit(self):
        t = build_toy(ToyConfig(d2=4, nu=0.0))
        assert mutual_information(t, "x1", "y") == pytest.approx(1.0, abs=1e-12)

    def test_conditional_mi_blocks_on_conditioner(self):
        # a and c depend only through b: I(a;c|b) = 0
        rng = np.random.default_rng(3)
        pb = rng.dirichlet([1.0] * 3)
        pa_b = rng.dirichlet([1.0] * 2, size=3).T
        pc_b = rng.dirichlet([1.0] * 2, size=3).T
        probs = np.einsum("b,ab,cb->abc", pb, pa_b, pc_b)
        t = JointTable(("a", "b", "c"), probs)
        assert abs(mutual_information(t, "a", "c", conditional_on="b")) <= 1e-12
        assert mutual_information(t, "a", "c") >= -1e-12

    def test_rejects_overlapping_groups(self):
        t = JointTable(("a", "b"), np.full((2, 2), 0.25))
        with pytest.raises(Exception, match="disjoint"):
            mutual_information(t, "a", "a")

    def test_data_processing_under_random_maps(self):
        for seed in range(25):
            rng = np.random.default_rng(seed)
            t = random_joint_table(("a", "b"), (5, 4), rng)
            f = rng.integers(0, 3, size=5)
            mapped = map_axis(t, "a", f, new_size=3)
            assert mutual_information(mapped, "a", "b") <= (
                mutual_information(t, "a", "b") + 1e-10
            )


class TestComputePi:
    def test_toy_rows(self):
        cfg = ToyConfig(d2=100, nu=0.25)
        pi = compute_pi(build_toy(cfg))
        in_zone = cfg.zone[0] - 1
        assert np.allclose(pi.rows[in_zone], [0.5, 0.5], atol=1e-12)
        # 1-based index 3 is odd, out of zone: x1 pinned to 1
        assert np.allclose(pi.rows[2], [0.0, 1.0], atol=1e-12)
        assert pi.defined.all()

    def test_independent_rows_equal_marginal(self):
        pa = np.array([0.3, 0.7])
        pb = np.full(4, 0.25)
        t = JointTable(("x1", "x2"), np.outer(pa, pb))
        pi = compute_pi(t)
        assert np.allclose(pi.rows, np.tile(pa, (4, 1)), atol=1e-12)

    def test_zero_marginal_flagged(self):
        probs = np.zeros((2, 3))
        probs[:, 0] = [0.25, 0.25]
        probs[:, 2] = [0.1, 0.4]
        t = JointTable(("x1", "x2"), probs)
        pi = compute_pi(t)
        assert not pi.defined[1]
        assert np.isnan(pi.rows[1]).all()
        assert pi.defined[[0, 2]].all()


class TestPiAsVariable:
    def test_toy_three_states(self):
        t = build_toy(ToyConfig(d2=100, nu=0.25))
        states = pi_states(t)
        assert states.shape[0] == 3
        rounded = {tuple(np.round(s, 9)) for s in states}
        assert rounded == {(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)}

    def test_independent_single_state(self):
        pa = np.array([0.3, 0.7])
        t = JointTable(("x1", "x2", "y"), np.einsum("a,b,c->abc", pa, np.full(5, 0.2), [0.5, 0.5]))
        assert pi_states(t).shape[0] == 1

    def test_random_table_no_collisions(self):
        rng = np.random.default_rng(0)
        t = random_joint_table(("x1", "x2", "y"), (3, 6, 2), rng)
        assert pi_states(t).shape[0] == 6

    def test_joint_mass_preserved(self):
        t = build_toy(ToyConfig(d2=50, nu=0.1))
        j = pi_as_variable(t)
        assert j.axis_names == ("pi", "x1", "y")
        assert j.probs.sum() == pytest.approx(1.0, abs=1e-12)
        # the (x1, y) marginal is untouched by grouping
        assert np.allclose(j.probs.sum(axis=0), t.probs.sum(axis=1), atol=1e-12)

    def test_toy_pi_label_information(self):
        t = build_toy(ToyConfig(d2=100, nu=0.25))
        j = pi_as_variable(t)
        assert mutual_information(j, "pi", "y") == pytest.approx(0.5, abs=1e-9)


class TestLemma1:
    def test_toy_equality(self):
        rep = check_lemma1(build_toy(ToyConfig(d2=100, nu=0.25)))
        assert rep.max_violation <= 1e-9
        assert rep.trials == 1

    def test_random_sweep(self):
        tables, seeds = [], []
        for s in range(200):
            rng = np.random.default_rng(s)
            sizes = (
                int(rng.integers(2, 5)),
                int(rng.integers(2, 9)),
                int(rng.integers(2, 4)),
            )
            tables.append(random_joint_table(("x1", "x2", "y"), sizes, rng))
            seeds.append(s)
        rep = check_lemma1(tables, seeds)
        assert rep.max_violation <= 1e-9
        assert rep.failing_seeds == []
        assert rep.trials == 200

    def test_report_serialization(self):
        rep = CheckReport("lemma1", 3, 2.5e-10, [7])
        assert rep.to_dict() == {
            "check": "lemma1",
            "trials": 3,
            "max_violation": 2.5e-10,
            "failing_seeds": [7],
        }


class TestTheorem1:
    def test_toy_inequality(self):
        t = build_toy(ToyConfig(d2=100, nu=0.25))
        rep = check_theorem1(t)
        assert rep.max_violation == 0.0

    def test_rejects_non_deterministic_label(self):
        rng = np.random.default_rng(0)
        t = random_joint_table(("x1", "x2", "y"), (2, 4, 2), rng)
        with pytest.raises(AssumptionError, match="deterministic"):
            check_theorem1(t)

    def test_random_deterministic_label_sweep(self):
        tables = [
            random_deterministic_label_table((2, 6, 2), np.random.default_rng(s))
            for s in range(200)
        ]
        rep = check_theorem1(tables)
        assert rep.max_violation <= 1e-9


class TestTheorem3:
    def test_random_causal_sweep(self):
        models = [
            random_graph_model("causal", None, np.random.default_rng(s))[0]
            for s in range(200)
        ]
        rep = check_theorem3(models)
        assert rep.max_violation <= 1e-9

    def test_rejects_wrong_kind(self):
        model, _ = random_graph_model("anticausal", None, np.random.default_rng(0))
        with pytest.raises(AssumptionError, match="causal"):
            check_theorem3(model)

    def test_causal_conditional_independence(self):
        # label and spurious feature touch only through the context
        _, table = random_graph_model("causal", None, np.random.default_rng(5))
        assert abs(mutual_information(table, "x1", "y", conditional_on="x2")) <= 1e-10


class TestRecovery:
    def test_identity_matrix(self):
        q = recover_posterior_anticausal(np.eye(2), np.array([0.3, 0.7]))
        assert np.allclose(q, [0.3, 0.7], atol=1e-12)

    def test_worked_example(self):
        M = np.array([[0.9, 0.2], [0.1, 0.8]])
        truth = np.array([0.3, 0.7])
        pi_row = M @ truth
        assert np.allclose(pi_row, [0.41, 0.59], atol=1e-12)
        q = recover_posterior_anticausal(M, pi_row)
        assert np.allclose(q, truth, atol=1e-10)

    def test_equal_columns_singular(self):
        M = np.array([[0.6, 0.6], [0.4, 0.4]])
        with pytest.raises(SingularRecovery):
            recover_posterior_anticausal(M, np.array([0.6, 0.4]))

    def test_more_features_than_labels(self):
        rng = np.random.default_rng(2)
        M = rng.dirichlet([1.0] * 4, size=2).T  # 4 states, 2 labels
        truth = np.array([0.25, 0.75])
        q = recover_posterior_anticausal(M, M @ truth)
        assert np.allclose(q, truth, atol=1e-8)

    def test_fewer_features_than_labels_rejected(self):
        with pytest.raises(SingularRecovery, match="at least as many"):
            recover_posterior_anticausal(np.full((2, 3), 1 / 2), np.array([0.5, 0.5]))


class TestTheorem4:
    def test_single_model(self):
        model, _ = random_graph_model("anticausal", None, np.random.default_rng(0))
        mi_rep, rec_rep = check_theorem4(model)
        assert mi_rep.max_violation <= 1e-6  # tightened below in the sweep
        assert rec_rep.max_violation <= 1e-6

    def test_random_sweep(self):
        models = [
            random_graph_model("anticausal", None, np.random.default_rng(s))[0]
            for s in range(200)
        ]
        mi_rep, rec_rep = check_theorem4(models)
        assert mi_rep.max_violation <= 1e-9
        assert rec_rep.max_violation <= 1e-6
        assert mi_rep.failing_seeds == [] and rec_rep.failing_seeds == []

    def test_rejects_wrong_kind(self):
        model, _ = random_graph_model("causal", None, np.random.default_rng(1))
        with pytest.raises(AssumptionError, match="anticausal"):
            check_theorem4(model)

    def test_conditional_independence_given_label_and_q(self):
        model, _ = random_graph_model("anticausal", None, np.random.default_rng(7))
        with_latent = model.expand(with_latent=True)
        mi = mutual_information(with_latent, "x1", "x2", conditional_on=("y", "q"))
        assert abs(mi) <= 1e-10

    def test_q_copies_z_collapses_conditioning(self):
        # when q mirrors z exactly, x1 and x2 are independent given y alone
        rng = np.random.default_rng(11)
        nz = 3
        comps = {
            "p_z": rng.dirichlet([1.0] * nz),
            "p_y_given_z": np.tile(np.eye(2), (1, 2))[:, :nz],  # y = z mod 2
            "p_q_given_z": np.eye(nz),
            "p_x1_given_y": rng.dirichlet([1.0] * 2, size=2).T,
            "p_x2_given_q": rng.dirichlet([1.0] * 4, size=nz).T,
        }
        comps["p_y_given_z"] = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        model = GraphModel("anticausal", comps)
        table = model.expand()
        # y = f(z) = f(q): conditioning on y does not open the q pathway here
        # because x1 depends on z only through y
        mi = mutual_information(
            model.expand(with_latent=True), "x1", "x2", conditional_on=("y", "q")
        )
        assert abs(mi) <= 1e-10


class TestPiPerFeature:
    def test_two_feature_consistency(self):
        t = build_toy(ToyConfig(d2=100, nu=0.25))
        pi, mi = pi_per_feature(t, 1)
        assert mi == pytest.approx(0.5, abs=1e-9)
        direct = compute_pi(t, "x1", ("x2",))
        assert np.allclose(pi.rows, direct.rows, atol=1e-12, equal_nan=True)

    def test_second_feature_of_toy(self):
        # pi_2 = P(x2 | x1) has two states (one per x1 value) on the toy
        t = build_toy(ToyConfig(d2=100, nu=0.25))
        pi, mi = pi_per_feature(t, 2)
        assert pi.feature_axis == "x2"
        assert mi >= -1e-12

    def test_index_validation(self):
        t = build_toy(ToyConfig(d2=10, nu=0.1))
        with pytest.raises(Exception, match="outside"):
            pi_per_feature(t, 3)

    def test_three_feature_table(self):
        _, table = random_graph_model("three_feature", None, np.random.default_rng(4))
        pi, mi = pi_per_feature(table, 3)
        assert pi.feature_axis == "x3"
        assert pi.context_axes == ("x1", "x2")
        assert mi >= -1e-12

    def test_three_feature_ci_given_label(self):
        # the extra feature is shielded from (x1, x2) by the label exactly
        _, table = random_graph_model("three_feature", None, np.random.default_rng(9))
        mi = mutual_information(table, "x3", ("x1", "x2"), conditional_on="y")
        assert abs(mi) <= 1e-10

    def test_search_finds_instance(self):
        result = search_pi_ordering(200, master_seed=0)
        assert result["found"]
        assert result["mi_pi3_bits"] > result["mi_pi1_bits"] + 1e-9
        assert result["draws_used"] <= 200
