from magnet.cli.commands import cli
