"""Sub-MIP backends. A backend is a module exposing `solve_mip` and
`find_first_feasible` with the signatures of `reference`."""
from parbalans.cli import config
from parbalans.cli.actions.subsolver import reference
from parbalans.cli.actions.utils import ParBalansException, USAGE_ERROR

__all__ = ['backends', 'get_backend', 'UnknownBackend']


backends = {
    'reference': reference,
}


class UnknownBackend(ParBalansException):
    code = USAGE_ERROR


def get_backend(name=None):
    """Return the backend module registered under `name` (default: configured one)"""
    name = name or config.c('general', 'backend')
    try:
        return backends[name]
    except KeyError:
        raise UnknownBackend("Sub-MIP backend '%s' is not (yet) supported" % name)
