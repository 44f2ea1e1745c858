import configparser
import os

config_path = '/etc/parbalans/'

config_names = {'global': 'parbalans.conf'}

_packaged_path = os.path.dirname(os.path.abspath(__file__))


def _resolve_conf_name(conf_type):
    """
    Return a filename of the configuration file. $PARBALANS_CONF wins, then a
    local file, then the one in config_path, then the packaged default.
    """
    fnm = config_names[conf_type]
    env = os.environ.get('PARBALANS_CONF')
    if env and os.path.isfile(env):
        return env
    for candidate in (fnm, os.path.join(config_path, fnm),
                      os.path.join(_packaged_path, fnm)):
        if os.path.isfile(candidate):
            return candidate
    raise RuntimeError("Missing configuration file for %s" % conf_type)


def _read(conf_type):
    conf = configparser.RawConfigParser()
    conf.read(_resolve_conf_name(conf_type))
    return conf


def c(group, field, conf_type='global'):
    """Get configuration value"""
    return _read(conf_type).get(group, field)


def cs(group, field, value, conf_type='global'):
    """Set configuration value"""
    fnm = _resolve_conf_name(conf_type)
    conf = configparser.RawConfigParser()
    conf.read(fnm)
    conf.set(group, field, str(value))
    with open(fnm, 'w') as configfile:
        conf.write(configfile)


def clist(group, conf_type='global'):
    """List configuration values"""
    return _read(conf_type).items(group)


def has_option(group, field, conf_type='global'):
    """Return whether an option is available for that section"""
    return _read(conf_type).has_option(group, field)
