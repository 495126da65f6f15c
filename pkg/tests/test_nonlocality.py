import itertools
import json
import math

import numpy as np
import pytest

from hyperbell.apparatus import random_settings
from hyperbell.nonlocality import (
    Bounds,
    BellFunctional,
    MeasurementPlan,
    RegistryError,
    builtin_chsh,
    builtin_i18,
    chsh_polarization_plan,
    chsh_time_bin_plan,
    chsh_value,
    correlator_from_counts,
    correlator_from_table,
    correlator_table,
    evaluate_functional,
    evaluate_plan,
    functional_from_dict,
    i18_optimal_plan,
    load_functional,
    marginals_from_tables,
    plan_outcome_tables,
    resolve_functional,
    save_functional,
    reference_plan,
)
from hyperbell.quantum_core import StateSpec, density, make_state, random_density_matrix

ROOT2 = math.sqrt(2)


def box_tables(a_bits, b_bits):
    """Binarized tables of a deterministic box; bit 1 means outcome 1."""
    t = np.zeros((len(a_bits), len(b_bits), 2, 2))
    for x, a in enumerate(a_bits):
        for y, b in enumerate(b_bits):
            t[x, y, 1 - a, 1 - b] = 1.0
    return t


def test_correlator_examples():
    assert correlator_from_counts(50, 0, 0, 50) == 1.0
    assert correlator_from_counts(25, 25, 25, 25) == 0.0
    assert correlator_from_counts(75, 0, 25, 0) == 0.5
    assert correlator_from_table([[0.5, 0], [0, 0.5]]) == 1.0
    with pytest.raises(ValueError):
        correlator_from_counts(0, 0, 0, 0)


def test_chsh_value_examples():
    h = math.sqrt(0.5)
    assert chsh_value([[h, h], [h, -h]]) == pytest.approx(2 * ROOT2)
    assert chsh_value([[1, 1], [1, -1]]) == 4
    assert chsh_value(np.zeros((2, 2))) == 0
    with pytest.raises(ValueError):
        chsh_value(np.zeros(3))


def test_i18_coefficients():
    f = builtin_i18()
    assert f.joint[0, 3] == -1
    assert f.marg_b[1] == -2
    assert f.bounds.local == 0
    assert f.scenario == (4, 4)
    assert f.bounds.as_dict() == {"local": 0.0, "qubit": 0.18, "apparatus_max": 0.46, "quantum": 0.64}


def test_i18_on_maximally_mixed_state():
    f = builtin_i18()
    # oracle: sum(joint)/16 + sum(marg)/4
    oracle = f.joint.sum() / 16 + (f.marg_a.sum() + f.marg_b.sum()) / 4
    assert oracle == pytest.approx(-1.875)
    value = evaluate_plan(np.eye(16) / 16, f, reference_plan())
    assert value == pytest.approx(-1.875, abs=1e-12)
    mixed = np.broadcast_to(np.array([[1, 3], [3, 9]]) / 16, (4, 4, 2, 2))
    assert evaluate_functional(f, mixed) == pytest.approx(-1.875)


def test_i18_on_all_outcome_two_box():
    assert evaluate_functional(builtin_i18(), box_tables([0] * 4, [0] * 4)) == 0


def test_all_deterministic_boxes_respect_local_bound():
    f = builtin_i18()
    values = [
        evaluate_functional(f, box_tables(a, b))
        for a in itertools.product((0, 1), repeat=4)
        for b in itertools.product((0, 1), repeat=4)
    ]
    assert len(values) == 256
    assert max(values) == 0.0


def test_chsh_functional_matches_correlator_form(rng):
    f = builtin_chsh()
    plan = chsh_polarization_plan()
    for _ in range(20):
        rho = random_density_matrix(16, rng)
        s_prob = evaluate_plan(rho, f, plan)
        s_corr = chsh_value(correlator_table(rho, plan))
        assert s_prob == pytest.approx(s_corr, abs=1e-12)


def test_chsh_deterministic_boxes_bounded_by_two():
    f = builtin_chsh()
    values = [
        evaluate_functional(f, box_tables(a, b))
        for a in itertools.product((0, 1), repeat=2)
        for b in itertools.product((0, 1), repeat=2)
    ]
    assert max(values) == pytest.approx(2.0)
    assert min(values) == pytest.approx(-2.0)


def test_chsh_polarization_plan_reaches_tsirelson():
    rho = density(make_state(StateSpec("pol_only")))
    e = correlator_table(rho, chsh_polarization_plan())
    h = math.sqrt(0.5)
    assert np.allclose(e, [[h, h], [h, -h]], atol=1e-12)
    assert chsh_value(e) == pytest.approx(2 * ROOT2, abs=1e-9)


def test_chsh_time_bin_plan_reaches_tsirelson():
    rho = density(make_state(StateSpec("time_only")))
    assert evaluate_plan(rho, builtin_chsh(), chsh_time_bin_plan()) == pytest.approx(2 * ROOT2, abs=1e-9)


def test_chsh_bounded_for_random_states_and_plans(rng):
    f = builtin_chsh()
    worst = 0.0
    for _ in range(1000):
        rho = random_density_matrix(16, rng, rank=int(rng.integers(1, 4)))
        plan = MeasurementPlan(
            [random_settings(rng) for _ in range(2)],
            [random_settings(rng) for _ in range(2)],
            "portA_vs_portB",
            "portA_vs_portB",
        )
        worst = max(worst, abs(evaluate_plan(rho, f, plan)))
    assert worst <= 2 * ROOT2 + 1e-9


def test_marginals_agree_across_partner_bases(rng):
    rho = random_density_matrix(16, rng)
    from hyperbell.nonlocality import binarize_plan_tables

    plan = reference_plan()
    t = binarize_plan_tables(plan_outcome_tables(rho, plan), plan)
    per_basis = t[:, :, 0, :].sum(axis=-1)
    assert np.max(np.ptp(per_basis, axis=1)) < 1e-10
    p_a, _ = marginals_from_tables(t)
    assert np.allclose(p_a, per_basis[:, 0])


def test_evaluate_functional_shape_errors():
    with pytest.raises(ValueError):
        evaluate_functional(builtin_i18(), np.zeros((2, 2, 2, 2)))
    with pytest.raises(ValueError):
        evaluate_plan(np.eye(16) / 16, builtin_i18(), chsh_polarization_plan())


def test_bell_functional_validation():
    with pytest.raises(ValueError):
        BellFunctional("x", np.zeros((2, 3)), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        BellFunctional("x", np.full((2, 2), np.nan), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        Bounds(local=1.0, qubit=0.5)


def test_registry_round_trip(tmp_path):
    for f in (builtin_i18(), builtin_chsh()):
        path = tmp_path / f"{f.name}.json"
        save_functional(f, path)
        assert load_functional(path) == f
        assert resolve_functional(f.name, tmp_path) == f
        assert resolve_functional(str(path)) == f


def test_registry_lookup_by_name(tmp_path):
    data = builtin_i18().to_dict()
    data["name"] = "custom"
    del data["bounds"]
    (tmp_path / "custom.json").write_text(json.dumps(data))
    f = resolve_functional("custom", tmp_path)
    assert f.bounds == Bounds()
    with pytest.raises(KeyError):
        resolve_functional("missing", tmp_path)


def test_registry_schema_errors(tmp_path):
    data = builtin_i18().to_dict()
    data["joint"][0][0] = "two"
    with pytest.raises(RegistryError, match="joint"):
        functional_from_dict(data)
    data = builtin_i18().to_dict()
    data["joint"] = data["joint"][:3]
    with pytest.raises(RegistryError, match="joint"):
        functional_from_dict(data)
    data = builtin_i18().to_dict()
    data["margA"] = [0, 0]
    with pytest.raises(RegistryError, match="margA"):
        functional_from_dict(data)
    data = builtin_i18().to_dict()
    data["extra"] = 1
    with pytest.raises(RegistryError):
        functional_from_dict(data)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(RegistryError):
        load_functional(bad)


def test_plan_round_trip_and_shapes():
    plan = i18_optimal_plan()
    assert plan.shape == (4, 4)
    again = MeasurementPlan.from_dict(json.loads(json.dumps(plan.to_dict())))
    for s, t in zip(plan.settings_a + plan.settings_b, again.settings_a + again.settings_b):
        assert s.to_degrees() == pytest.approx(t.to_degrees())
    with pytest.raises(ValueError):
        MeasurementPlan((), ())


def test_plans_evaluate_on_psi4():
    psi4 = density(make_state(StateSpec("psi4")))
    f = builtin_i18()
    assert evaluate_plan(psi4, f, i18_optimal_plan()) == pytest.approx(0.502926, abs=1e-5)
    # the verbatim printed angles do not violate under this convention
    assert evaluate_plan(psi4, f, reference_plan()) < 0
