# CLI subcommands
