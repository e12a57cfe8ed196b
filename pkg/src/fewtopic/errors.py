"""Exception types shared across the package."""


class FewTopicError(Exception):
    pass


class DimensionError(FewTopicError, ValueError):
    pass


class ContractError(FewTopicError, ValueError):
    pass


class ConfigError(FewTopicError, ValueError):
    pass


class DataError(FewTopicError, ValueError):
    pass


class ParseError(FewTopicError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
