from print_utils import color_status, create_print_if_verbose, dump_route_table, dump_run_summary


def test_print_if_verbose(capsys):
    create_print_if_verbose(False)("hidden")
    create_print_if_verbose(True)("shown")
    assert capsys.readouterr().out == "shown\n"


def test_color_status_wraps_text():
    assert color_status('PASS') == '\033[92mPASS\033[0m'
    assert color_status('fail', 'golden x') == '\033[91mgolden x\033[0m'


def test_dump_route_table(capsys):
    rows = [{'route': 'spectral', 'delta_e': 0.5}, {'route': 'kubo_freq', 'delta_e': 0.5}]
    dump_route_table(rows, 'compare')
    out = capsys.readouterr().out.splitlines()
    assert '******** compare ********' in out
    assert '| route | delta_e |' in out
    assert '| kubo_freq | 5.0000000000e-01 |' in out


def test_dump_route_table_without_rows(capsys):
    dump_route_table([], 'empty')
    assert 'No rows.' in capsys.readouterr().out


def test_dump_run_summary_verbose(capsys):
    dump_run_summary('compare', {'rows': 2, 'wall_time': 0.25, 'n_max': 4}, verbose=True)
    out = capsys.readouterr().out
    assert '2 rows in 0.25 s' in out
    assert 'n_max: 4' in out
