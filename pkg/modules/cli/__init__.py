from .commands import (
    cmd_generate, cmd_train, cmd_evaluate, cmd_compare, cmd_report,
    run_dir, manifest_path, format_table,
)
