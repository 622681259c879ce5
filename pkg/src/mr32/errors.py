"""Exception types shared across the workbench, tagged with the failing stage."""


class Mr32Error(Exception):
    stage = "mr32"


class AsmError(Mr32Error):
    stage = "asm"


class ConfigError(Mr32Error):
    stage = "config"


class SimError(Mr32Error):
    stage = "sim"


class CycleLimitExceeded(SimError):
    pass


class MemoryFault(SimError):
    pass


class TransformError(Mr32Error):
    stage = "transform"


class WcetError(Mr32Error):
    stage = "wcet"


class MissingFlowFact(WcetError):
    pass


class IlpInfeasible(WcetError):
    pass


class IlpUnbounded(WcetError):
    pass
