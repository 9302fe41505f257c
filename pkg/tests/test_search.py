import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import count_valid_configs

from hvdc_faultloc.evaluate import cross_validate, make_folds
from hvdc_faultloc.preprocess import PipelineConfig
from hvdc_faultloc.search import (
    SearchSpace,
    best_per_model,
    enumerate_space,
    format_table,
    mae_distribution,
    read_rows_csv,
    report_table,
    rows_csv,
    run_search,
    summary_json,
    table_csv,
)

FS = 10_000.0


def _oracle(space, input_len=200):
    return count_valid_configs(
        space.lpf_options, space.ds_options, space.fft_options, space.l2norm_options,
        space.pca_options, space.sqrt_options, space.scaler_options, FS, input_len,
    )


def test_default_space_matches_enumeration_oracle():
    space = SearchSpace()
    valid, skipped = enumerate_space(space, FS, 200)
    assert (len(valid), skipped) == _oracle(space)
    assert len(valid) + skipped == space.product_size() == 7 * 5 * 2 * 2 * 6 * 2 * 2
    assert len(set(valid)) == len(valid)


def test_rule_examples():
    only_l2_scaler = SearchSpace(
        lpf_options=(None,), ds_options=(1,), fft_options=(False,), l2norm_options=(True,),
        pca_options=(None,), sqrt_options=(False,), scaler_options=(True,),
    )
    assert enumerate_space(only_l2_scaler, FS, 200) == ([], 1)
    nyquist = dataclasses.replace(only_l2_scaler, lpf_options=(500.0,), ds_options=(100,), scaler_options=(False,))
    assert enumerate_space(nyquist, FS, 200) == ([], 1)
    pca_too_big = dataclasses.replace(
        only_l2_scaler, l2norm_options=(False,), scaler_options=(False,), ds_options=(100,), pca_options=(4,)
    )
    assert enumerate_space(pca_too_big, FS, 200) == ([], 1)


option_lists = st.fixed_dictionaries({
    "lpf_options": st.lists(st.sampled_from([None, 500.0, 300.0, 150.0, 50.0, 20.0]), min_size=1, max_size=4, unique=True),
    "ds_options": st.lists(st.sampled_from([1, 2, 3, 5, 10, 50, 100]), min_size=1, max_size=4, unique=True),
    "fft_options": st.lists(st.booleans(), min_size=1, max_size=2, unique=True),
    "l2norm_options": st.lists(st.booleans(), min_size=1, max_size=2, unique=True),
    "pca_options": st.lists(st.sampled_from([None, 1, 2, 4, 12, 28, 64]), min_size=1, max_size=4, unique=True),
    "sqrt_options": st.lists(st.booleans(), min_size=1, max_size=2, unique=True),
    "scaler_options": st.lists(st.booleans(), min_size=1, max_size=2, unique=True),
})


@settings(max_examples=60, deadline=None)
@given(option_lists, st.sampled_from([64, 100, 200, 257]))
def test_enumeration_matches_oracle_on_random_spaces(options, input_len):
    space = SearchSpace(**options)
    valid, skipped = enumerate_space(space, FS, input_len)
    assert (len(valid), skipped) == _oracle(space, input_len)


@settings(max_examples=40, deadline=None)
@given(option_lists, st.sampled_from(["lpf_options", "ds_options", "pca_options"]))
def test_enlarging_an_option_list_keeps_valid_configs(options, key):
    space = SearchSpace(**options)
    extra = {"lpf_options": 250.0, "ds_options": 4, "pca_options": 8}[key]
    bigger = dataclasses.replace(space, **{key: tuple(getattr(space, key)) + (extra,)})
    before = set(enumerate_space(space, FS, 200)[0])
    after = set(enumerate_space(bigger, FS, 200)[0])
    assert before <= after


def test_space_text_round_trip():
    space = SearchSpace(lpf_options=(None, 150.0), pca_options=(None, 4), models=("brr",), seed=3)
    assert SearchSpace.from_text(space.to_text()) == space
    assert SearchSpace.from_text("ds_options=1,3\n# comment\n").ds_options == (1, 3)
    with pytest.raises(ValueError, match="line 1"):
        SearchSpace.from_text("bogus=1")
    with pytest.raises(ValueError):
        SearchSpace(ds_options=())


SMALL = SearchSpace(
    lpf_options=(None, 150.0), ds_options=(1, 3), fft_options=(True, False), l2norm_options=(True,),
    pca_options=(None, 4), sqrt_options=(False,), scaler_options=(False,), seed=1,
)


@pytest.fixture(scope="module")
def small_data(current_ds, voltage_ds):
    keep = range(0, len(current_ds), 3)
    return current_ds.subset(keep), voltage_ds.subset(keep)


@pytest.fixture(scope="module")
def small_outcome(small_data):
    return run_search(*small_data, SMALL)


def test_singleton_space_one_row(small_data):
    space = SearchSpace(
        lpf_options=(None,), ds_options=(1,), fft_options=(False,), l2norm_options=(False,),
        pca_options=(None,), sqrt_options=(False,), scaler_options=(False,), models=("brr",),
    )
    out = run_search(small_data[0], None, space)
    assert len(out.rows) == 1 and out.skipped_invalid == 0
    assert set(out.best_per_model) == {"brr"}


def test_outcome_shape(small_outcome):
    n_valid = len(enumerate_space(SMALL, FS, 200)[0])
    assert len(small_outcome.rows) + len(small_outcome.failures) == 2 * n_valid * len(SMALL.models)
    maes = [r.metrics.mae for r in small_outcome.rows]
    assert maes == sorted(maes)
    for model, best in small_outcome.best_per_model.items():
        assert best.metrics.mae == min(r.metrics.mae for r in small_outcome.rows if r.model_name == model)


def test_rows_reproducible_in_isolation(small_data, small_outcome):
    by_channel = {ds.channel: ds for ds in small_data}
    for row in small_outcome.rows[:: max(1, len(small_outcome.rows) // 5)]:
        ds = by_channel[row.channel]
        report = cross_validate(ds, row.config, row.model_name, make_folds(len(ds), 4, row.seed))
        assert report.averaged == row.metrics


def test_serial_and_parallel_agree(small_data, small_outcome):
    parallel = run_search(*small_data, SMALL, workers=2)
    assert rows_csv(parallel.rows) == rows_csv(small_outcome.rows)
    assert summary_json(parallel) == summary_json(small_outcome)


def test_rows_csv_round_trip(small_outcome):
    text = rows_csv(small_outcome.rows)
    assert text.count("\n") == len(small_outcome.rows) + 1
    back = read_rows_csv(text)
    assert back == list(small_outcome.rows)
    with pytest.raises(ValueError, match="header"):
        read_rows_csv("a,b\n1,2\n")
    with pytest.raises(ValueError, match="line 2"):
        read_rows_csv(text.splitlines()[0] + "\ncurrent,1\n")


def test_report_table(small_outcome):
    table = report_table(small_outcome)
    assert {t.model for t in table} == set(SMALL.models)
    for t in table:
        best = small_outcome.best_per_model[t.model].metrics
        assert (t.mape, t.mae, t.prr, t.pp) == (best.mape, best.mae, best.prr, best.pp)
    text = format_table(table)
    assert text.splitlines()[0].split() == ["Model", "MAPE", "MAE", "PRR", "PP"]
    assert len(text.splitlines()) == 2 + len(table)
    assert table_csv(table).startswith("model,mape,mae,prr,pp\n")


def test_report_table_channel_filter(small_outcome):
    table = report_table(small_outcome, "voltage")
    best = best_per_model(small_outcome.rows, "voltage")
    assert {t.model: t.mae for t in table} == {m: r.metrics.mae for m, r in best.items()}
    one_model = [r for r in small_outcome.rows if r.model_name == "knn"]
    assert len(report_table(one_model)) == 1
    with pytest.raises(ValueError, match="no rows matched"):
        report_table([r for r in small_outcome.rows if r.channel.value == "current"], "voltage")


def test_mae_distribution(small_outcome):
    lines = mae_distribution(small_outcome.rows).splitlines()
    assert lines[0] == "channel,model,count,min,q1,median,q3,max"
    assert len(lines) == 1 + 2 * len(SMALL.models)


def test_failures_are_recorded_not_raised(small_data):
    # pca=12 on an identity chain is valid, but a ten-record training fold cannot support it.
    tiny = small_data[0].subset(range(12))
    space = SearchSpace(
        lpf_options=(None,), ds_options=(1,), fft_options=(False,), l2norm_options=(False,),
        pca_options=(None, 12), sqrt_options=(False,), scaler_options=(False,), models=("brr",),
    )
    out = run_search(tiny, None, space)
    assert len(out.rows) == 1 and len(out.failures) == 1
    assert out.failures[0].config.pca_components == 12


def test_no_rows_is_an_error(small_data):
    tiny = small_data[0].subset(range(12))
    space = SearchSpace(
        lpf_options=(None,), ds_options=(1,), fft_options=(False,), l2norm_options=(False,),
        pca_options=(12,), sqrt_options=(False,), scaler_options=(False,), models=("brr",),
    )
    with pytest.raises(RuntimeError, match="no successful rows"):
        run_search(tiny, None, space)


def test_identity_config_text():
    assert PipelineConfig.from_text(PipelineConfig().to_text()) == PipelineConfig()
