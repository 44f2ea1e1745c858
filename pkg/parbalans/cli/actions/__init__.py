from parbalans.cli.actions import (model, lp, subsolver, operators, bandit, alns, configspace,
                                  metrics, orchestrator, simulator, instances, sysresources)
