import os

from parbalans.cli import config


def get_cpu_count():
    """Number of logical cores a portfolio may reserve. $PARBALANS_CORE_CAP
    overrides the configured value, which overrides host detection."""
    env = os.environ.get('PARBALANS_CORE_CAP', '').strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise RuntimeError("PARBALANS_CORE_CAP must be an integer, got '%s'" % env)
    configured = config.c('general', 'core_cap').strip() \
        if config.has_option('general', 'core_cap') else ''
    if configured:
        return int(configured)
    return os.cpu_count() or 1
