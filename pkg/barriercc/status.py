from enum import IntEnum


class ExitCode(IntEnum):
    OK = 0
    CHECK_FAILED = 1
    CONFIG_ERROR = 2
    DOMAIN_ERROR = 3
    INTERNAL_ERROR = 70

    @property
    def phrase(self) -> str:
        return self.name.replace("_", " ").lower()
