import sys
import textwrap
import threading
import time

import numpy as np
import pytest

from uqengine.errors import ModelEvaluationError, ModelSpecError, TemplateError
from uqengine.model_runner import (
    DelimitedRow,
    ExternalModel,
    InProcessModel,
    SingleFloatFile,
    prepare_workdir,
    render_template,
    run,
)
from uqengine.samples import SampleSet

SQUARE_SCRIPT = textwrap.dedent(
    """
    import sys
    x = float(open("input.txt").read().split("=")[1])
    if x < 0:
        sys.exit(3)
    if x > 1e6:
        import time
        time.sleep(30)
    open("out.txt", "w").write(repr(x * x))
    """
)


@pytest.fixture
def square_script(tmp_path):
    path = tmp_path / "square.py"
    path.write_text(SQUARE_SCRIPT)
    return path


def _square_model(script, root, **kw):
    return ExternalModel(
        template_text="x={{x}}\n",
        var_names=["x"],
        command=[sys.executable, str(script)],
        output_parser=SingleFloatFile("out.txt"),
        workdir_root=str(root),
        **kw,
    )


# --- templates -------------------------------------------------------------------


def test_render_default_is_round_trip_17_digits():
    text = render_template("E={{young}}", ["young"], [2.1e11])
    assert text == "E=" + format(2.1e11, ".17g")
    assert float(text[2:]) == 2.1e11
    v = 0.1 + 0.2
    assert float(render_template("{{v}}", ["v"], [v])) == v


def test_render_repeated_placeholder():
    assert render_template("{{a}} {{a}}", ["a"], [1.0]) == "1 1"


def test_render_format_spec():
    assert render_template("{{a:.3e}}", ["a"], [1234.5]) == "1.234e+03"
    assert render_template("{{ a :.2f}}", ["a"], [3.14159]) == "3.14"


def test_render_unknown_placeholder_reports_offset():
    with pytest.raises(TemplateError, match=r"'b' at offset 4"):
        render_template("a = {{b}}", ["a"], [1.0])


def test_external_spec_validation(tmp_path):
    base = dict(command=["true"], output_parser=SingleFloatFile("o"), workdir_root=str(tmp_path))
    with pytest.raises(ModelSpecError):
        ExternalModel(template_text="{{a}}", var_names=["a", "b"], **base)
    with pytest.raises(ModelSpecError):
        ExternalModel(template_text="{{a}} {{c}}", var_names=["a"], **base)
    with pytest.raises(ModelSpecError):
        ExternalModel(template_text="{{a}}", var_names=["a", "a"], **base)
    with pytest.raises(ModelSpecError):
        ExternalModel(template_text="{{a}}", var_names=["a"], timeout=0, **base)


# --- work directories ------------------------------------------------------------


def test_prepare_workdir_naming(tmp_path):
    assert prepare_workdir(tmp_path, 7).name == "run_000007"
    a, b = prepare_workdir(tmp_path, 1), prepare_workdir(tmp_path, 2)
    assert a != b and a.is_dir() and b.is_dir()


def test_prepare_workdir_refuses_non_empty(tmp_path):
    d = prepare_workdir(tmp_path, 3)
    (d / "junk").write_text("x")
    with pytest.raises(FileExistsError):
        prepare_workdir(tmp_path, 3)


# --- in-process ------------------------------------------------------------------


def test_inprocess_sum():
    rep = run(lambda x: x[0] + x[1], np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(rep.outputs, [[3.0], [7.0]])
    assert all(s.ok for s in rep.statuses)
    assert rep.parallelism == 1


def _slow_det(x):
    time.sleep(0.0005 * (x[0] % 3))
    return [np.sin(x[0]) * np.exp(x[1]), x[0] * x[1]]


def test_parallel_equals_serial_bitwise():
    x = np.random.default_rng(0).normal(size=(100, 2))
    model = InProcessModel(_slow_det, output_dim=2)
    serial = run(model, x, workers=1)
    parallel = run(model, x, workers=4)
    assert parallel.parallelism == 4
    assert np.array_equal(serial.outputs, parallel.outputs)


def test_vectorized_chunks_match_serial():
    x = np.random.default_rng(1).normal(size=(101, 3))
    model = InProcessModel(lambda X: X.sum(axis=1) ** 2, vectorized=True)
    assert np.array_equal(run(model, x, 1).outputs, run(model, x, 4).outputs)


def test_failure_isolation_inprocess():
    x = np.arange(10, dtype=float)[:, None]

    def f(v):
        if v[0] == 4:
            raise RuntimeError("boom")
        return v[0] ** 2

    good = run(lambda v: v[0] ** 2, x, workers=3)
    rep = run(f, x, workers=3)
    assert rep.failed_indices == [4]
    assert "boom" in rep.statuses[4].reason
    assert np.isnan(rep.outputs[4]).all()
    mask = np.arange(10) != 4
    assert np.array_equal(rep.outputs[mask], good.outputs[mask])
    with pytest.raises(ModelEvaluationError):
        rep.require_ok()


def test_non_finite_output_is_failure():
    rep = run(lambda v: np.nan if v[0] > 0 else 1.0, [[-1.0], [1.0]])
    assert [s.ok for s in rep.statuses] == [True, False]
    assert np.all(np.isfinite(rep.outputs[rep.ok_mask]))


def test_serial_only_forces_one_worker():
    seen = set()

    def f(v):
        seen.add(threading.get_ident())
        return v[0]

    rep = run(InProcessModel(f, serial_only=True), np.zeros((20, 1)), workers=4)
    assert rep.parallelism == 1 and len(seen) == 1


def test_arity_mismatch_is_upfront_error():
    with pytest.raises(ModelSpecError):
        run(InProcessModel(lambda v: v[0], input_dim=3), np.zeros((2, 2)))


def test_sampleset_input():
    rep = run(lambda v: 2 * v[0], SampleSet(np.array([[1.0], [2.0]])))
    np.testing.assert_array_equal(rep.outputs[:, 0], [2.0, 4.0])


# --- external --------------------------------------------------------------------


def test_external_square(square_script, tmp_path):
    rep = run(_square_model(square_script, tmp_path / "runs"), [[3.0]])
    assert rep.statuses[0].ok
    assert rep.outputs[0, 0] == 9.0


def test_external_exact_squares_parallel_and_readback(square_script, tmp_path):
    x = np.random.default_rng(3).uniform(0, 10, size=(12, 1))
    root = tmp_path / "runs"
    rep = run(_square_model(square_script, root), x, workers=4)
    np.testing.assert_array_equal(rep.outputs[:, 0], x[:, 0] ** 2)
    for i in range(12):
        text = (root / f"run_{i:06d}" / "input.txt").read_text()
        assert float(text.split("=")[1]) == x[i, 0]


def test_external_failure_isolated(square_script, tmp_path):
    x = np.array([[1.0], [-1.0], [2.0]])
    rep = run(_square_model(square_script, tmp_path / "r"), x, workers=2)
    assert [s.ok for s in rep.statuses] == [True, False, True]
    assert "exit code 3" in rep.statuses[1].reason
    assert rep.outputs[0, 0] == 1.0 and rep.outputs[2, 0] == 4.0


def test_external_timeout(square_script, tmp_path):
    start = time.perf_counter()
    rep = run(_square_model(square_script, tmp_path / "r", timeout=1.0), [[2e6], [2.0]], workers=2)
    assert time.perf_counter() - start < 20
    assert not rep.statuses[0].ok and "timeout" in rep.statuses[0].reason
    assert rep.statuses[1].ok


def test_external_unparseable_output(tmp_path):
    script = tmp_path / "bad.py"
    script.write_text("open('out.txt','w').write('not a number')\n")
    model = ExternalModel("{{x}}", ["x"], [sys.executable, str(script)], SingleFloatFile("out.txt"),
                          workdir_root=str(tmp_path / "r"))
    rep = run(model, [[1.0]])
    assert "unparseable" in rep.statuses[0].reason


def test_external_delimited_row(tmp_path):
    script = tmp_path / "two.py"
    script.write_text(
        "a, b = [float(v) for v in open('input.txt').read().split()]\n"
        "open('res.csv', 'w').write(f'{a + b!r};{a * b!r}\\n')\n"
    )
    model = ExternalModel("{{a}} {{b}}", ["a", "b"], [sys.executable, str(script)],
                          DelimitedRow("res.csv", ";"), workdir_root=str(tmp_path / "r"))
    rep = run(model, [[2.0, 5.0], [1.5, 4.0]])
    np.testing.assert_array_equal(rep.outputs, [[7.0, 10.0], [5.5, 6.0]])


def test_external_index_offset_avoids_collision(square_script, tmp_path):
    model = _square_model(square_script, tmp_path / "r")
    run(model, [[1.0]])
    rep = run(model, [[2.0]])
    assert not rep.statuses[0].ok and "exists" in rep.statuses[0].reason
    rep = run(model, [[2.0]], index_offset=1)
    assert rep.outputs[0, 0] == 4.0
