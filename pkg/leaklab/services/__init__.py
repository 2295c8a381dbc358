"""leaklab command-line and network services."""
