"""Settings, logging, errors, metrics and error reporting."""
