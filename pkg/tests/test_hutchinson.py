import math

import numpy as np
import pytest

from semifix import (
    IFS,
    ComparisonFunction,
    ContractionMap,
    DivergentRunError,
    FractalStop,
    PointSet,
    SemimetricSpace,
    StoppingRule,
    TriangleFunction,
    generate_fractal,
    hausdorff_distance,
    hutchinson_step,
    invariance_residual,
    picard_iterate,
    stability_run,
)
from semifix.hutchinson import RUN_COLUMNS, shared_comparison
from systems import SIERPINSKI_VERTICES, cantor, origin, sierpinski

Q4 = ComparisonFunction.linear(0.25)


def brute_hausdorff(space, A, B):
    dm = space.pairwise(A.data, B.data)
    return max(dm.min(axis=1).max(), dm.min(axis=0).max())


def test_cantor_step(line2):
    out = hutchinson_step(line2, cantor(line2), origin(line2))
    assert len(out) == 2
    assert hausdorff_distance(line2, out, PointSet(line2, [0.0, 2 / 3])) <= 1e-30


def test_sierpinski_step(plane2):
    out = hutchinson_step(plane2, sierpinski(plane2), origin(plane2))
    expected = PointSet(plane2, [(0, 0), (0.5, 0), (0.25, math.sqrt(3) / 4)])
    assert hausdorff_distance(plane2, out, expected) <= 1e-30


def test_single_map_fixed_point_invariant(line2):
    ifs = IFS(line2, [ContractionMap.affine([[0.5]], [0.5], Q4)])
    H = PointSet(line2, [1.0])
    assert hutchinson_step(line2, ifs, H).same_points(H)
    assert invariance_residual(line2, ifs, H) == 0


def test_cantor_residual(line2):
    assert invariance_residual(line2, cantor(line2), origin(line2)) == pytest.approx(4 / 9, rel=1e-15)


def test_ifs_rejects_bad_maps(line2):
    with pytest.raises(ValueError):
        IFS(line2, [])
    with pytest.raises(ValueError):
        IFS(line2, [ContractionMap.affine([[0.5]], [0.0], ComparisonFunction.linear(0.1))])


def test_shared_comparison_majorizes():
    assert shared_comparison([ComparisonFunction.linear(0.1), ComparisonFunction.linear(0.3)]).param == 0.3
    assert shared_comparison([ComparisonFunction.rational(2), ComparisonFunction.rational(0.5)]).param == 0.5
    mixed = shared_comparison([ComparisonFunction.linear(0.5), ComparisonFunction.rational(1)])
    for t in [0.1, 1.0, 3.0]:
        assert mixed(t) == max(0.5 * t, t / (1 + t))


def test_ifs_shares_majorized_phi(line2):
    maps = [
        ContractionMap.scale_about(0.5, [0.0], ComparisonFunction.linear(0.25)),
        ContractionMap.scale_about(0.2, [1.0], ComparisonFunction.linear(0.04)),
    ]
    ifs = IFS(line2, maps)
    assert ifs.phi.param == 0.25
    assert all(m.phi == ifs.phi and m.certification == "analytic" for m in ifs.maps)


# -- fractal runs -------------------------------------------------------------


def test_sierpinski_first_rows(plane2):
    run = generate_fractal(plane2, sierpinski(plane2), origin(plane2), FractalStop(1e-6, 6))
    assert run.rows[0].step == 0.25
    for r in run.rows:
        assert r.apriori == pytest.approx(4.0 ** (1 - r.k), rel=1e-9)
        nxt = hutchinson_step(plane2, run.ifs, r.H)
        assert r.step == brute_hausdorff(plane2, r.H, nxt)


def test_cantor_first_step(line2):
    run = generate_fractal(line2, cantor(line2), origin(line2), FractalStop(1e-4, 3))
    assert run.rows[0].step == pytest.approx(4 / 9, rel=1e-15)
    assert run.rows[0].aposteriori == pytest.approx(4 / 9 / (1 - 1 / 3) ** 2, rel=1e-9)


def test_single_map_reduces_to_picard(line2):
    T = ContractionMap.affine([[0.5]], [0.3], Q4)
    run = generate_fractal(line2, IFS(line2, [T]), PointSet(line2, [2.0]), FractalStop(1e-10, 80))
    trace = picard_iterate(line2, T, 2.0, StoppingRule(1e-10, 80))
    assert len(run.rows) == len(trace.rows)
    for fr, tr in zip(run.rows, trace.rows):
        assert fr.points == 1
        assert fr.step == tr.step and fr.aposteriori == tr.aposteriori
    assert run.attractor.points[0] == pytest.approx(0.6, abs=1e-5)


def test_run_exports(line2):
    run = generate_fractal(line2, cantor(line2), origin(line2), FractalStop(1e-4, 60), cell=0.002)
    lines = run.to_csv().splitlines()
    assert lines[0] == ",".join(RUN_COLUMNS)
    assert len(lines) == len(run.rows) + 1
    summary = run.summary()
    assert summary["converged"] and summary["residual"] == run.residual
    assert run.rows[-1].aposteriori + run.total_slack <= 1e-4


def test_max_iter_attractor_is_last_row(line2):
    run = generate_fractal(line2, cantor(line2), origin(line2), FractalStop(1e-12, 4))
    assert not run.converged and len(run.rows) == 4
    assert run.attractor is run.rows[-1].H and len(run.attractor) == 8


def test_divergent_run_flagged(line2):
    space = SemimetricSpace.euclidean(1, line2.kind, TriangleFunction.scaled_additive(2))
    ifs = IFS(space, [ContractionMap.affine([[0.5]], [0.0], ComparisonFunction.linear(0.75))])
    run = generate_fractal(space, ifs, PointSet(space, [1.0]), FractalStop(1e-4, 5))
    assert run.diverged and run.flagged
    with pytest.raises(DivergentRunError):
        stability_run(space, [ifs], ifs, PointSet(space, [1.0]), FractalStop(1e-4, 5))


def test_generate_fractal_rejects_bad_cell(line2):
    with pytest.raises(ValueError):
        generate_fractal(line2, cantor(line2), origin(line2), cell=0.0)


# -- set-map contraction and Phi-combined bound soundness -----------------------------


@pytest.mark.parametrize("seed", range(5))
def test_set_map_is_phi_contraction(plane2, seed):
    rng = np.random.default_rng(seed)
    ifs = sierpinski(plane2)
    for _ in range(100):
        A = PointSet(plane2, rng.uniform(-2, 2, (int(rng.integers(1, 10)), 2)))
        B = PointSet(plane2, rng.uniform(-2, 2, (int(rng.integers(1, 10)), 2)))
        lhs = hausdorff_distance(plane2, hutchinson_step(plane2, ifs, A), hutchinson_step(plane2, ifs, B))
        assert lhs <= ifs.phi(hausdorff_distance(plane2, A, B)) * (1 + 1e-12)


def test_aposteriori_sound_through_phi(sierpinski_runs, plane2):
    # the step uses the exact image of H_k, so psi(step) bounds D(H_k, attractor) without slack;
    # the reference carries its own psi bound and the two combine through Phi
    ifs, run, ref, measured, _ = sierpinski_runs
    Phi = plane2.phi
    ref_bound = ref.rows[-1].aposteriori
    for r, m in zip(run.rows, measured):
        assert m <= Phi(r.aposteriori, ref_bound) + 1e-9, r.k


def test_apriori_sound_through_phi(sierpinski_runs, plane2):
    # e_k bounds D(H_k, exact orbit): e_{k+1} <= Phi(cell bound, phi(e_k))
    ifs, run, ref, measured, _ = sierpinski_runs
    Phi = plane2.phi
    ref_bound = ref.rows[-1].aposteriori
    c = run.slack_per_step
    e = 0.0
    for r, m in zip(run.rows, measured):
        assert m <= Phi(Phi(r.apriori, e), ref_bound) + 1e-9, r.k
        e = Phi(c, ifs.phi(e))


def test_step_decay_through_phi(sierpinski_runs, plane2):
    # D(H_{k-1}, H_k) <= Phi(step_{k-1}, c), then one map application and one more snap
    ifs, run, _, _, _ = sierpinski_runs
    Phi = plane2.phi
    c = run.slack_per_step
    for prev, r in zip(run.rows, run.rows[1:]):
        assert r.step <= Phi(c, ifs.phi(Phi(prev.step, c))) * (1 + 1e-12), r.k


# -- stability ---------------------------------------------------------------------------


def test_constant_sequence_distances_small(plane2):
    ifs = sierpinski(plane2)
    stop = FractalStop(1e-3, 60)
    table = stability_run(plane2, [ifs, ifs], ifs, origin(plane2), stop, cell=1 / 256)
    slack = table.limit_run.total_slack
    assert all(d <= 2 * slack for _, d in table.rows)
    assert table.to_csv().splitlines()[0] == "j,distance"


def test_stability_requires_shared_phi(line2):
    a = IFS(line2, [ContractionMap.affine([[0.5]], [0.0], Q4)])
    b = IFS(line2, [ContractionMap.affine([[0.5]], [0.0], ComparisonFunction.linear(0.3))])
    with pytest.raises(ValueError):
        stability_run(line2, [b], a, origin(line2))


def test_thread_cap_does_not_change_results(plane2, monkeypatch):
    systems = [sierpinski(plane2, 0.5 + 1 / (10 * (j + 2)), phi=ComparisonFunction.linear((0.5 + 1 / 30) ** 2))
               for j in (1, 2, 3)]
    limit = sierpinski(plane2, 0.5, phi=ComparisonFunction.linear((0.5 + 1 / 30) ** 2))
    stop = FractalStop(1e-3, 60)
    monkeypatch.setenv("SEMIFIX_THREADS", "1")
    one = stability_run(plane2, systems, limit, origin(plane2), stop, cell=1 / 256).rows
    monkeypatch.setenv("SEMIFIX_THREADS", "4")
    four = stability_run(plane2, systems, limit, origin(plane2), stop, cell=1 / 256).rows
    assert one == four


def test_vertices_near_sierpinski_iterate(plane2):
    # vertices are fixed points of the maps, hence in the attractor, hence within the bound
    run = generate_fractal(plane2, sierpinski(plane2), origin(plane2), FractalStop(1e-4, 60))
    for v in SIERPINSKI_VERTICES:
        d = min(plane2.distance(v, p) for p in run.attractor)
        assert d <= run.rows[-1].aposteriori
