import logging
import sys
from functools import wraps

logger = logging.getLogger(__name__)

# Códigos de saída da linha de comando
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class SlotCrfError(Exception):
    """Erro base do projeto"""
    exit_code = 1


class ConfigError(SlotCrfError):
    """Configuração inválida (chave desconhecida, valor fora do domínio, k >= nós)"""
    exit_code = EXIT_CONFIG


class DataError(SlotCrfError):
    """Dados de entrada inválidos"""
    exit_code = EXIT_DATA


class CorpusParseError(DataError):
    def __init__(self, path, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}:{line_number}: {message}")


class EmptyCorpusError(DataError):
    pass


class CorpusStructureError(DataError):
    pass


class AlignmentError(DataError):
    def __init__(self, slot: str, message: str):
        self.slot = slot
        super().__init__(f"slot {slot}: {message}")


class ContractError(DataError):
    """Pré-condição de uma operação violada pelo chamador"""


class NumericalError(SlotCrfError):
    """NaN/Inf durante treinamento ou propagação"""
    exit_code = EXIT_NUMERICAL


def exit_on_error(func):
    """Converte exceções do projeto em códigos de saída, com diagnóstico no stderr"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SlotCrfError as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            sys.exit(e.exit_code)
        except OSError as e:
            logger.error(f"❌ Erro de E/S: {e}")
            sys.exit(EXIT_DATA)
    return wrapper
