import errno
import json
import os

from progressbar import Bar, ETA, Percentage, ProgressBar


USAGE_ERROR = 2
DATA_ERROR = 3
EMPTY_RESULT = 4


class ParBalansException(Exception):
    """Base of every error raised by the library. `code` is the exit code
    the command line reports for it."""

    code = DATA_ERROR

    def __init__(self, msg, code=None):
        super(ParBalansException, self).__init__(msg)
        if code is not None:
            self.code = code


class UsageException(ParBalansException):
    code = USAGE_ERROR


def mkdir_p(path):
    """Emulates mkdir -p."""
    try:
        os.makedirs(path)
    except OSError as exc:
        if exc.errno != errno.EEXIST:
            raise


def write_json(fnm, data):
    """Write data as stable, human-readable JSON (sorted keys, trailing newline)"""
    parent = os.path.dirname(fnm)
    if parent:
        mkdir_p(parent)
    with open(fnm, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def read_json(fnm):
    try:
        with open(fnm) as f:
            return json.load(f)
    except IOError as e:
        raise ParBalansException("Cannot read '%s': %s" % (fnm, e.strerror or e))
    except ValueError as e:
        raise ParBalansException("Malformed JSON in '%s': %s" % (fnm, e))


class ConsoleProgressBar(object):
    """A console progress bar over a known number of work items. Silent when
    disabled, so callers don't have to branch."""
    pbar = None

    def __init__(self, title, item_count, enabled=True):
        self.count = 0
        if enabled and item_count > 0:
            widgets = [title, ' ', Percentage(), ' ', Bar(), ' ', ETA()]
            self.pbar = ProgressBar(widgets=widgets, max_value=item_count)
            self.pbar.start()

    def step(self):
        self.count += 1
        if self.pbar is not None:
            self.pbar.update(self.count)

    def finish(self):
        if self.pbar is not None:
            self.pbar.finish()
