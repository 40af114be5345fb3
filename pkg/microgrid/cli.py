"""``python -m microgrid <command>``: the solver commands under their hyphenated names.

Exit codes: 0 success, 1 input error, 2 infeasible, 3 solver limit reached.
"""

import os
import sys

import django
from django.core.management import load_command_class
from django.core.management.base import CommandError

COMMANDS = {
    "solve-sorc": "solve_sorc",
    "solve-community": "solve_community",
    "sweep": "sweep",
    "export-mps": "export_mps",
    "catalog": "catalog",
}

USAGE = """usage: microgrid <command> [options]

commands:
  solve-sorc <scenario> [--out DIR] [--paper-literal-degradation]
  solve-community <scenario> [--out DIR]
  sweep <sweepspec> [--out DIR]
  export-mps <scenario> [--stage sorc|tet] [--out FILE]
  catalog

Run 'microgrid <command> --help' for the options of one command.
"""


def cli_main(argv=None, stdout=None, stderr=None):
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
    django.setup()
    from .management.base import EXIT_INPUT

    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    if argv[:1] in (["-h"], ["--help"]):
        stdout.write(USAGE)
        return 0
    if not argv or argv[0] not in COMMANDS:
        if argv:
            stderr.write(f"unknown command '{argv[0]}'\n")
        stderr.write(USAGE)
        return EXIT_INPUT

    command = load_command_class("microgrid", COMMANDS[argv[0]])
    parser = command.create_parser("microgrid", argv[0])
    try:
        options = parser.parse_args(argv[1:])
    except CommandError as e:
        parser.print_usage(stderr)
        stderr.write(f"{e}\n")
        return EXIT_INPUT
    except SystemExit as e:
        return 0 if not e.code else EXIT_INPUT

    cmd_options = vars(options)
    args = cmd_options.pop("args", ())
    try:
        command.execute(*args, stdout=stdout, stderr=stderr, **cmd_options)
    except CommandError as e:
        stderr.write(f"error: {e}\n")
        return e.returncode
    return 0
